"""Monte Carlo sweep engine and statistical reductions: variance summaries
with bootstrap confidence intervals, fluctuation-exponent fits, sublinearity
profiles, empirical Efron-Stein bounds, per-edge influence maps on the torus,
geodesic geometry statistics, geodesic weight sums, and concentration tails.

Replica r of a sweep with master seed s draws its field from mix64(s, r), so
record streams are bit-identical for identical configurations regardless of
worker scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from .fpp import (
    PassageResult,
    averaged_passage,
    passage_time,
    single_edge_update,
    torus_passage,
    _graph,
)
from .lattice import Torus, point_window, window_halfwidth
from .lpp import last_passage_value, sample_grid
from .weights import (
    DistributionSpec,
    WeightField,
    mix64,
    mix64_array,
    sample_field,
    uniform53_array,
    validate_for_fpp,
)

MODELS = ("fpp-point", "fpp-torus", "lpp")
WINDOW_MS = (2, 4, 8)
_BOOT_SALT = 0xB005_72A9


@dataclass
class SweepConfig:
    model: str
    d: int
    n_list: tuple[int, ...]
    spec: DistributionSpec
    replicas: int
    seed: int
    kappa: float = 0.5
    bootstrap: int = 2000
    dyadic_depth: int = 53
    threads: int = 0  # 0: use machine parallelism
    record_fn: bool = False
    record_geometry: bool = True
    max_grows: int = 6

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        self.n_list = tuple(int(n) for n in self.n_list)
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])) or not self.n_list:
            raise ValueError("n_list must be strictly increasing and nonempty")
        if self.replicas < 2:
            raise ValueError("need at least 2 replicas")
        if self.model.startswith("fpp"):
            validate_for_fpp(self.spec, self.d)


@dataclass
class ReplicaRecord:
    """Per-replica statistics; optional fields stay None when not recorded."""

    n: int
    replica: int
    T: float
    F_n: Optional[float] = None
    g_dag_size: Optional[int] = None
    g_int_size: Optional[int] = None
    geo_len: Optional[int] = None
    geo_diam: Optional[int] = None
    transverse_dev: Optional[int] = None
    Y_n: Optional[float] = None
    win_counts: Optional[dict[int, int]] = None
    window_grows: int = 0
    flagged: bool = False
    g_bitmap: Optional[np.ndarray] = None  # torus: bool per edge index


@dataclass
class EstimatorSummary:
    count: int
    mean: float
    variance: float
    mean_ci: tuple[float, float]
    var_ci: tuple[float, float]

    @property
    def mean_ci_half(self) -> float:
        return 0.5 * (self.mean_ci[1] - self.mean_ci[0])

    @property
    def var_ci_half(self) -> float:
        return 0.5 * (self.var_ci[1] - self.var_ci[0])


@dataclass
class FitResult:
    chi_hat: float
    chi_stderr: float
    nu_hat: Optional[float] = None
    sigma_hat: Optional[float] = None
    residuals: tuple[float, ...] = ()
    n_values: tuple[int, ...] = ()


def summarize(values: Sequence[float], bootstrap: int = 2000, seed: Optional[int] = None) -> EstimatorSummary:
    """Mean and unbiased variance with percentile-bootstrap CIs (95%)."""
    x = np.asarray(list(values), dtype=np.float64)
    count = x.size
    if count < 2:
        raise ValueError("need at least 2 values")
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    rng = np.random.default_rng(mix64(_BOOT_SALT if seed is None else seed, count))
    boot_means = np.empty(bootstrap)
    boot_vars = np.empty(bootstrap)
    chunk = max(1, min(bootstrap, 4_000_000 // max(count, 1)))
    done = 0
    while done < bootstrap:
        m = min(chunk, bootstrap - done)
        idx = rng.integers(0, count, size=(m, count))
        sample = x[idx]
        boot_means[done : done + m] = sample.mean(axis=1)
        boot_vars[done : done + m] = sample.var(axis=1, ddof=1)
        done += m
    mean_ci = tuple(np.percentile(boot_means, [2.5, 97.5]))
    var_ci = tuple(np.percentile(boot_vars, [2.5, 97.5]))
    return EstimatorSummary(count, mean, var, mean_ci, var_ci)


# ---------------------------------------------------------------------------
# Replica computation
# ---------------------------------------------------------------------------


def _origin(d: int):
    return (0,) * d


def _endpoint(n: int, d: int):
    return (n,) + (0,) * (d - 1)


def _geometry_stats(res: PassageResult, spec: DistributionSpec) -> dict:
    path = res.sample_path
    coords = np.asarray(path, dtype=np.int64)
    dmat = np.abs(coords[:, None, :] - coords[None, :, :]).sum(axis=-1)
    geo_diam = int(dmat.max())
    transverse = int(np.abs(coords[:, 1:]).max()) if coords.shape[1] > 1 else 0
    win_counts = {}
    for m in WINDOW_MS:
        inside = dmat <= m  # inside[i, j]: site i within ball of center j
        edge_in = inside[:-1] & inside[1:]
        win_counts[m] = int(edge_in.sum(axis=0).max()) if len(path) > 1 else 0
    gw = res.field.weights[res.gint_edge_idx]
    Y = 0.0
    for t in gw:
        F = spec.cdf(float(t))
        Y += 1.0 - math.log(F)
    return {
        "g_dag_size": int(res.dag_edge_idx.size),
        "g_int_size": int(res.gint_edge_idx.size),
        "geo_len": len(path) - 1,
        "geo_diam": geo_diam,
        "transverse_dev": transverse,
        "Y_n": Y,
        "win_counts": win_counts,
    }


def run_replica(config: SweepConfig, n: int, replica: int) -> ReplicaRecord:
    master = mix64(config.seed, replica)
    if config.model == "lpp":
        grid = sample_grid(n, master, config.spec)
        return ReplicaRecord(n, replica, last_passage_value(grid))
    if config.model == "fpp-torus":
        region = Torus(n, config.d)
        fieldv = sample_field(config.spec, region, master)
        res = torus_passage(fieldv)
        bitmap = np.zeros(region.n_edges(), dtype=bool)
        bitmap[res.gint_edge_idx] = True
        return ReplicaRecord(
            n, replica, res.T,
            g_dag_size=int(res.dag_edge_idx.size),
            g_int_size=int(res.gint_edge_idx.size),
            g_bitmap=bitmap,
        )
    # fpp-point
    m_fn = math.ceil(n**0.25) if config.record_fn else 0
    w = window_halfwidth(n, m_fn, config.kappa)
    window = point_window(n, config.d, w)
    fieldv = sample_field(config.spec, window, master)
    res = passage_time(
        fieldv, _origin(config.d), _endpoint(n, config.d),
        want_geometry=config.record_geometry, max_grows=config.max_grows,
    )
    rec = ReplicaRecord(
        n, replica, res.T, window_grows=res.grows, flagged=res.boundary_flag
    )
    if config.record_geometry:
        for key, val in _geometry_stats(res, config.spec).items():
            setattr(rec, key, val)
    if config.record_fn:
        rec.F_n, _ = averaged_passage(res.field, n)
    return rec


def _replica_worker(args) -> ReplicaRecord:
    config, n, replica = args
    return run_replica(config, n, replica)


def run_sweep(config: SweepConfig, threads: Optional[int] = None) -> list[ReplicaRecord]:
    """All replicas for all sizes, in deterministic (n, replica) order."""
    if threads is None:
        threads = config.threads
    if threads == 0:
        threads = int(os.environ.get("FPPLAB_THREADS", "0")) or (os.cpu_count() or 1)
    jobs = [(config, n, r) for n in config.n_list for r in range(config.replicas)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunk = max(1, len(jobs) // (8 * threads))
            records = list(pool.map(_replica_worker, jobs, chunksize=chunk))
    else:
        records = [run_replica(config, n, r) for config, n, r in jobs]
    return records


def by_n(records: Sequence[ReplicaRecord]) -> dict[int, list[ReplicaRecord]]:
    out: dict[int, list[ReplicaRecord]] = {}
    for rec in records:
        out.setdefault(rec.n, []).append(rec)
    return {n: sorted(v, key=lambda r: r.replica) for n, v in sorted(out.items())}


# ---------------------------------------------------------------------------
# Fits and profiles
# ---------------------------------------------------------------------------


def fit_chi(
    pairs: Sequence[tuple[int, float]], means: Optional[dict[int, float]] = None
) -> FitResult:
    """OLS of log Var against log n; the slope is 2 chi."""
    if len(pairs) < 3:
        raise ValueError("need at least 3 (n, Var) pairs")
    ns = np.array([p[0] for p in pairs], dtype=np.float64)
    vs = np.array([p[1] for p in pairs], dtype=np.float64)
    if np.any(vs <= 0):
        raise ValueError("variance estimates must be positive")
    x = np.log(ns)
    y = np.log(vs)
    xbar, ybar = x.mean(), y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    dof = max(1, len(pairs) - 2)
    stderr = math.sqrt(float(np.sum(resid**2)) / dof / sxx)
    chi = slope / 2.0
    nu = None
    if means:
        mn = np.array(sorted(means))
        mt = np.array([means[int(k)] for k in mn])
        A = np.stack([mn, np.ones_like(mn)], axis=1)
        coef, *_ = np.linalg.lstsq(A, mt, rcond=None)
        nu = float(coef[0])
    n_max = int(ns.max())
    sigma = float(vs[np.argmax(ns)] / n_max ** (2 * chi))
    return FitResult(chi, stderr / 2.0, nu, sigma, tuple(resid), tuple(int(v) for v in ns))


@dataclass
class SublinearityRow:
    n: int
    var: float
    var_over_n: float
    var_logn_over_n: float


@dataclass
class SublinearityProfile:
    rows: list[SublinearityRow]
    var_over_n_nonincreasing: bool
    log_lower_c: float

    @property
    def log_lower_positive(self) -> bool:
        return self.log_lower_c > 0


def sublinearity_profile(
    summaries: dict[int, EstimatorSummary],
) -> SublinearityProfile:
    """Trend table for Var against n, n/log n, and log n comparators.

    Monotonicity of Var/n is judged within CI overlap; the log lower bound is
    the largest c with Var >= c log n across the grid.  Flags only, never
    assertions: the comparison constants are existential.
    """
    if len(summaries) < 3:
        raise ValueError("need at least 3 sizes")
    rows = []
    noninc = True
    prev = None
    for n in sorted(summaries):
        s = summaries[n]
        rows.append(
            SublinearityRow(n, s.variance, s.variance / n, s.variance * math.log(n) / n)
        )
        cur = (s.var_ci[0] / n, s.var_ci[1] / n, s.variance / n)
        if prev is not None:
            # nonincreasing up to CI overlap
            if cur[2] > prev[2] and cur[0] > prev[1]:
                noninc = False
        prev = cur
    c = min(s.variance / math.log(n) for n, s in summaries.items() if n > 1)
    return SublinearityProfile(rows, noninc, c)


# ---------------------------------------------------------------------------
# Efron-Stein empirical bound
# ---------------------------------------------------------------------------


def efron_stein_bound(
    field: WeightField,
    result: PassageResult,
    resample_count: int = 1,
    seed: int = 0,
) -> tuple[float, float]:
    """(Monte Carlo estimate of the resampling bound, analytic relaxation).

    The estimate is (1/2) sum_e avg_k (T - T with edge e resampled)^2 using
    the screened single-edge update; the relaxation is E[(t'_e)^2] #G_n.
    """
    if field.region != result.field.region:
        # the window may have auto-grown; the result's own field is the one
        # the distance fields refer to
        field = result.field
    region = field.region
    spec = field.spec
    graph = _graph(region)
    weff, d_src_eff, d_dst_eff = result._eff
    if d_dst_eff is None:
        raise ValueError("needs a passage result with geometry")
    scale = result.scale
    E = region.n_edges()
    T_eff = float(d_src_eff[region.site_index(result.dst)])
    gmask = np.zeros(E, dtype=bool)
    gmask[result.gint_edge_idx] = True
    tails, heads = graph.tails, graph.heads
    total = 0.0
    for j in range(resample_count):
        sub = mix64(seed, j)
        u = uniform53_array(mix64_array(sub, np.arange(E, dtype=np.uint64)))
        new_raw = np.where(
            u > 0.0, spec.inv_cdf_array(np.maximum(u, 2.0**-53)), spec.support_inf()
        )
        new_eff = np.rint(new_raw * scale) if scale else new_raw
        cand = np.minimum(
            d_src_eff[tails] + new_eff + d_dst_eff[heads],
            d_src_eff[heads] + new_eff + d_dst_eff[tails],
        )
        hits = np.flatnonzero(
            ((new_eff >= weff) & gmask) | ((new_eff < weff) & (cand < T_eff))
        )
        for e in hits:
            T_new = single_edge_update(result, int(e), float(new_raw[e]))
            total += (result.T - T_new) ** 2
    estimate = 0.5 * total / resample_count
    analytic = field.spec.second_moment() * float(gmask.sum())
    return estimate, analytic


# ---------------------------------------------------------------------------
# Torus influence map
# ---------------------------------------------------------------------------


@dataclass
class InfluenceMap:
    n: int
    frequencies: np.ndarray
    axis_pvalues: dict[int, float]
    max_frequency: float
    mean_g_size: float


def influence_map(records: Sequence[ReplicaRecord], d: int) -> dict[int, InfluenceMap]:
    """Per-edge membership frequencies P(e in G) with per-axis uniformity tests."""
    grouped = by_n(records)
    out = {}
    for n, recs in grouped.items():
        bitmaps = [r.g_bitmap for r in recs if r.g_bitmap is not None]
        if not bitmaps:
            raise ValueError(f"no membership bitmaps recorded at n={n}")
        counts = np.sum(bitmaps, axis=0).astype(np.float64)
        reps = len(bitmaps)
        freq = counts / reps
        pvals = {}
        for axis in range(d):
            c = counts[axis::d]
            expected = c.mean()
            if expected == 0:
                pvals[axis] = 1.0
                continue
            stat = float(np.sum((c - expected) ** 2 / expected))
            pvals[axis] = float(sps.chi2.sf(stat, df=c.size - 1))
        out[n] = InfluenceMap(
            n, freq, pvals, float(freq.max()), float(counts.sum() / reps)
        )
    return out


# ---------------------------------------------------------------------------
# Geodesic geometry statistics
# ---------------------------------------------------------------------------


def geodesic_window_stats(
    records: Sequence[ReplicaRecord],
) -> dict[int, dict[int, float]]:
    """Mean of max_z #(geodesic edges in z + B_m) / diam(B_m), per n and m."""
    out: dict[int, dict[int, float]] = {}
    for n, recs in by_n(records).items():
        counts = {m: [] for m in WINDOW_MS}
        for r in recs:
            if r.win_counts is None:
                continue
            for m in WINDOW_MS:
                counts[m].append(r.win_counts[m] / (2.0 * m))
        if any(counts[m] for m in WINDOW_MS):
            out[n] = {m: float(np.mean(counts[m])) for m in WINDOW_MS if counts[m]}
    if not out:
        raise ValueError("no window counts recorded")
    return out


@dataclass
class AnimalWeightStats:
    mean_y: dict[int, float]
    mean_y_over_n: dict[int, float]
    tail_rows: list[tuple[int, float, float, float]]  # (n, beta, P(Y >= beta n), e^{1-beta})
    bounded_factor: float


def animal_weight_stats(records: Sequence[ReplicaRecord]) -> AnimalWeightStats:
    """Geodesic weight-sum statistics Y_n = sum over G_n of (1 - log F(t_e))."""
    mean_y = {}
    tail_rows = []
    for n, recs in by_n(records).items():
        ys = np.array([r.Y_n for r in recs if r.Y_n is not None])
        if ys.size == 0:
            continue
        mean_y[n] = float(ys.mean())
        for beta in (1.0, 2.0, 4.0, 8.0):
            tail_rows.append(
                (n, beta, float(np.mean(ys >= beta * n)), math.exp(1.0 - beta))
            )
    if not mean_y:
        raise ValueError("no Y_n recorded")
    over = {n: y / n for n, y in mean_y.items()}
    vals = list(over.values())
    factor = max(vals) / min(vals) if min(vals) > 0 else math.inf
    return AnimalWeightStats(mean_y, over, tail_rows, factor)


@dataclass
class TailProfile:
    n: int
    lambdas: np.ndarray
    lower_prob: np.ndarray
    two_sided_prob: np.ndarray
    log_decreasing: bool


def tail_profile(records: Sequence[ReplicaRecord], n: int, min_exceed: int = 5) -> TailProfile:
    """Empirical P(T - mean <= -lam sqrt(n / log n)) over a lambda grid."""
    recs = [r for r in records if r.n == n]
    if len(recs) < 1000:
        raise ValueError("tail profile needs at least 1000 replicas")
    T = np.array([r.T for r in recs])
    s = math.sqrt(n / math.log(n))
    mean = T.mean()
    lams, lo, two = [], [], []
    for lam in np.arange(0.0, 8.01, 0.5):
        low = float(np.mean(T - mean <= -lam * s))
        ts = float(np.mean(np.abs(T - mean) >= lam * s))
        if lam > 0 and ts * T.size < min_exceed:
            break
        lams.append(lam)
        lo.append(low)
        two.append(ts)
    lo_arr = np.array(lo)
    nz = lo_arr[lo_arr > 0]
    decreasing = bool(np.all(np.diff(nz) <= 1e-12)) if nz.size > 1 else True
    return TailProfile(n, np.array(lams), lo_arr, np.array(two), decreasing)


@dataclass
class FnComparison:
    rows: list[tuple[int, float, float, float, float]]  # n, VarT, VarF, |diff|, diff/n^{3/4}
    growth_trend: bool


def compare_fn_variance(records: Sequence[ReplicaRecord]) -> FnComparison:
    rows = []
    for n, recs in by_n(records).items():
        fs = np.array([r.F_n for r in recs if r.F_n is not None])
        if fs.size == 0:
            continue
        ts = np.array([r.T for r in recs if r.F_n is not None])
        vt = float(ts.var(ddof=1))
        vf = float(fs.var(ddof=1))
        diff = abs(vt - vf)
        rows.append((n, vt, vf, diff, diff / n**0.75))
    if len(rows) < 2:
        raise ValueError("need F_n records at two or more sizes")
    ratios = [r[4] for r in rows]
    growth = all(b > a for a, b in zip(ratios, ratios[1:]))
    return FnComparison(rows, growth)


def geodesic_speed_stats(records: Sequence[ReplicaRecord]) -> dict[int, float]:
    """Empirical lower envelope min over replicas of T / (geodesic edge count)."""
    out = {}
    for n, recs in by_n(records).items():
        ratios = [r.T / r.geo_len for r in recs if r.geo_len]
        if ratios:
            out[n] = float(min(ratios))
    if not out:
        raise ValueError("no geodesic lengths recorded")
    return out
