"""Passage times, geodesic DAGs, the intersection of all geodesics, edge
criticality, torus winding geodesics, and the averaged passage time.

Arithmetic policy
-----------------
Atomic specs whose atoms are rationals with a small common denominator are
computed in scaled integers carried in float64 (all sums stay far below 2^53),
so tie detection is exact.  Continuous specs run in plain binary64 with a tie
tolerance of zero: the geodesic-DAG criterion tests exact equality of the sums
the shortest-path relaxation itself produced ("tight" arcs), which keeps the
criterion consistent even though float addition is not associative.

The geodesic DAG is the set of tight arcs whose head can still reach the
destination through tight arcs; every source-destination path inside it is a
geodesic and every geodesic is such a path.  Membership in the intersection of
all geodesics is decided by path counting inside the DAG modulo two
independently derived 61-bit primes, with an exact edge-removal fallback if
the moduli ever disagree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .lattice import Box, EdgeId, Region, Site, Torus, ball, point_window
from .weights import WeightField, mix64, sample_field

GROW_LIMIT = 6


class LatticeGraph:
    """CSR scaffolding for a region, built once and reused across fields.

    The sparsity structure depends only on the region; per field we overwrite
    the data array through a precomputed edge-to-data-position map, avoiding a
    COO sort per replica.
    """

    def __init__(self, region: Region):
        self.region = region
        tails, heads = region.edge_arrays()
        self.tails = tails
        self.heads = heads
        N = region.n_sites()
        E = tails.size
        arc_from = np.concatenate([tails, heads])
        arc_to = np.concatenate([heads, tails])
        coo = sp.coo_matrix(
            (np.arange(2 * E, dtype=np.float64), (arc_from, arc_to)), shape=(N, N)
        )
        csr = coo.tocsr()
        if csr.nnz != 2 * E:
            raise ValueError("parallel edges in region graph")
        arc_of_pos = csr.data.astype(np.int64)
        self._edge_of_pos = np.where(arc_of_pos < E, arc_of_pos, arc_of_pos - E)
        self._csr = sp.csr_matrix(
            (np.zeros(2 * E), csr.indices, csr.indptr), shape=(N, N)
        )
        self.n_sites = N
        self.n_edges = E

    def distances(self, edge_weights: np.ndarray, sources: list[int]) -> np.ndarray:
        """Shortest-path distance rows from each source, shape (len(sources), N)."""
        self._csr.data[:] = edge_weights[self._edge_of_pos]
        out = _csgraph_dijkstra(self._csr, directed=True, indices=sources)
        return np.atleast_2d(out)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        region = self.region
        if not isinstance(region, Box):
            return np.zeros(self.n_sites, dtype=bool)
        shape = tuple(h - l + 1 for l, h in zip(region.lo, region.hi))
        coords = np.stack(np.unravel_index(np.arange(self.n_sites), shape), axis=-1)
        edge = np.array(shape) - 1
        return np.any((coords == 0) | (coords == edge), axis=1)


@lru_cache(maxsize=128)
def _graph(region: Region) -> LatticeGraph:
    return LatticeGraph(region)


def _effective_weights(field: WeightField) -> tuple[np.ndarray, Optional[float]]:
    """(weights to run shortest paths on, scale); scale None means float mode."""
    spec = field.spec
    scale = spec.int_scale() if spec is not None else None
    if scale is None or scale <= 0:
        return np.asarray(field.weights, dtype=np.float64), None
    scaled = field.weights * float(scale)
    snapped = np.rint(scaled)
    if not np.all(np.abs(scaled - snapped) < 1e-6):
        return np.asarray(field.weights, dtype=np.float64), None
    # keep all path sums exactly representable in float64
    if (float(snapped.max(initial=0.0)) + 1.0) * field.region.n_sites() > 2.0**52:
        return np.asarray(field.weights, dtype=np.float64), None
    return snapped, float(scale)


# ---------------------------------------------------------------------------
# 61-bit primes for modular path counting, derived deterministically per seed.
# ---------------------------------------------------------------------------

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _next_prime(n: int) -> int:
    if n % 2 == 0:
        n += 1
    while not _is_prime(n):
        n += 2
    return n


@lru_cache(maxsize=4096)
def counting_primes(seed: int) -> tuple[int, int]:
    """Two independent 61-bit primes derived from the field seed."""
    p1 = _next_prime((1 << 60) + (mix64(seed, 0xA11CE) % (1 << 60)))
    p2 = _next_prime((1 << 60) + (mix64(seed, 0xB0B) % (1 << 60)))
    if p2 == p1:
        p2 = _next_prime(p1 + 2)
    return p1, p2


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class CriticalityValue:
    """Largest weight at which the edge still lies on some geodesic."""

    D: float


@dataclass
class PassageResult:
    """Passage time with distance fields and geodesic structure.

    ``d_src``/``d_dst`` are per-site distance arrays over ``window`` in time
    units (for the torus they live on the winding cylinder).  ``dag_edge_idx``
    and ``gint_edge_idx`` hold region edge indices; the EdgeId views are built
    on demand.
    """

    T: float
    src: Site
    dst: Site
    window: Region
    d_src: np.ndarray
    d_dst: np.ndarray
    dag_edge_idx: np.ndarray
    gint_edge_idx: np.ndarray
    sample_path: list[Site]
    field: WeightField
    scale: Optional[float]
    grows: int = 0
    boundary_flag: bool = False
    _eff: Optional[tuple] = None  # (weff, d_src_eff, d_dst_eff) in scaled units

    @cached_property
    def geodesic_dag(self) -> frozenset:
        reg = self.field.region
        return frozenset(reg.edge_from_index(int(i)) for i in self.dag_edge_idx)

    @cached_property
    def g_intersection(self) -> frozenset:
        reg = self.field.region
        return frozenset(reg.edge_from_index(int(i)) for i in self.gint_edge_idx)

    def path_edge_indices(self) -> list[int]:
        """Region edge indices of the sampled geodesic, in path order."""
        reg = self.field.region
        out = []
        for a, b in zip(self.sample_path, self.sample_path[1:]):
            out.append(_edge_index_between(reg, a, b))
        return out


def _edge_index_between(region: Region, a: Site, b: Site) -> int:
    for axis in range(region.d):
        for base, other in ((a, b), (b, a)):
            head = list(base)
            head[axis] += 1
            if isinstance(region, Torus):
                head = [c % region.n for c in head]
            if tuple(head) == tuple(other):
                return region.edge_index(EdgeId(tuple(base), axis))
    raise ValueError(f"sites {a} and {b} are not adjacent")


def geodesic_intersection(result: PassageResult) -> frozenset:
    """Edges used by every geodesic (computed during the passage)."""
    return result.g_intersection


# ---------------------------------------------------------------------------
# Tight-arc machinery
# ---------------------------------------------------------------------------


def _tight_arcs(tails, heads, weff, d_src):
    fwd = d_src[tails] + weff == d_src[heads]
    bwd = d_src[heads] + weff == d_src[tails]
    arc_from = np.concatenate([tails[fwd], heads[bwd]])
    arc_to = np.concatenate([heads[fwd], tails[bwd]])
    arc_edge = np.concatenate([np.flatnonzero(fwd), np.flatnonzero(bwd)])
    return arc_from, arc_to, arc_edge


def _reverse_reachable(
    arc_from: np.ndarray, arc_to: np.ndarray, start: int, n_sites: int
) -> np.ndarray:
    """Vertices from which ``start`` is reachable along the given arcs."""
    order = np.argsort(arc_to, kind="stable")
    to_sorted = arc_to[order]
    from_sorted = arc_from[order]
    visited = np.zeros(n_sites, dtype=bool)
    visited[start] = True
    frontier = np.array([start], dtype=np.int64)
    while frontier.size:
        lo = np.searchsorted(to_sorted, frontier, side="left")
        hi = np.searchsorted(to_sorted, frontier, side="right")
        chunks = [from_sorted[a:b] for a, b in zip(lo, hi) if b > a]
        if not chunks:
            break
        nxt = np.unique(np.concatenate(chunks))
        nxt = nxt[~visited[nxt]]
        visited[nxt] = True
        frontier = nxt
    return visited


def _dag_reachable(
    dag_from: np.ndarray, dag_to: np.ndarray, src: int, dst: int, drop: np.ndarray
) -> bool:
    """Is dst reachable from src in the DAG once the ``drop`` arcs are removed?"""
    keep = np.ones(dag_from.size, dtype=bool)
    keep[drop] = False
    f, t = dag_from[keep], dag_to[keep]
    order = np.argsort(f, kind="stable")
    f_sorted, t_sorted = f[order], t[order]
    seen = {src}
    frontier = [src]
    while frontier:
        arr = np.array(frontier, dtype=np.int64)
        lo = np.searchsorted(f_sorted, arr, side="left")
        hi = np.searchsorted(f_sorted, arr, side="right")
        frontier = []
        for a, b in zip(lo, hi):
            for v in t_sorted[a:b]:
                v = int(v)
                if v == dst:
                    return True
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
    return dst in seen


def _count_mod(dag_from, dag_to, d_key, src: int, dst: int, prime: int):
    """Geodesic-path counts mod prime within the DAG, from src and to dst."""
    cnt_src: dict[int, int] = {src: 1}
    order_f = np.argsort(d_key[dag_to], kind="stable")
    for a in order_f:
        u, v = int(dag_from[a]), int(dag_to[a])
        if u in cnt_src:
            cnt_src[v] = (cnt_src.get(v, 0) + cnt_src[u]) % prime
    cnt_dst: dict[int, int] = {dst: 1}
    order_b = np.argsort(-d_key[dag_from], kind="stable")
    for a in order_b:
        u, v = int(dag_from[a]), int(dag_to[a])
        if v in cnt_dst:
            cnt_dst[u] = (cnt_dst.get(u, 0) + cnt_dst[v]) % prime
    total = cnt_src.get(dst, 0) % prime
    return cnt_src, cnt_dst, total


def _intersection_from_counts(
    dag_from,
    dag_to,
    dag_edge,
    d_key,
    src: int,
    dst: int,
    primes: tuple[int, int],
    group_by: Optional[np.ndarray] = None,
):
    """Keys whose arcs carry every DAG path, plus keys needing an exact check.

    ``group_by`` maps each DAG arc to a grouping key (used to fold cylinder
    edges onto torus edges); by default arcs group by their own edge index.
    Groups spanning several distinct underlying edges can be traversed twice
    by one path, so they are deferred to the exact fallback.
    """
    keys = dag_edge if group_by is None else group_by
    verdicts = []
    for prime in primes:
        cnt_s, cnt_d, total = _count_mod(dag_from, dag_to, d_key, src, dst, prime)
        through: dict[int, int] = {}
        for a in range(dag_from.size):
            u, v = int(dag_from[a]), int(dag_to[a])
            k = int(keys[a])
            through[k] = (through.get(k, 0) + cnt_s.get(u, 0) * cnt_d.get(v, 0)) % prime
        verdicts.append({k: (c == total) for k, c in through.items()})
    multi: set[int] = set()
    if group_by is not None:
        seen: dict[int, int] = {}
        for a in range(dag_from.size):
            k, e = int(keys[a]), int(dag_edge[a])
            if k in seen and seen[k] != e:
                multi.add(k)
            seen[k] = e
    member: list[int] = []
    needs_exact: list[int] = []
    for k in verdicts[0]:
        if k in multi:
            needs_exact.append(k)
        elif verdicts[0][k] and verdicts[1][k]:
            member.append(k)
        elif verdicts[0][k] != verdicts[1][k]:
            needs_exact.append(k)
    return sorted(member), sorted(needs_exact)


def _extract_path(arc_from, arc_to, src: int, dst: int, site_of, n_sites: int):
    """Backward walk from dst picking the lexicographically smallest predecessor."""
    order = np.argsort(arc_to, kind="stable")
    to_sorted = arc_to[order]
    from_sorted = arc_from[order]
    path = [dst]
    cur = dst
    guard = 0
    while cur != src:
        lo = int(np.searchsorted(to_sorted, cur, side="left"))
        hi = int(np.searchsorted(to_sorted, cur, side="right"))
        cands = [int(u) for u in from_sorted[lo:hi]]
        if not cands:
            raise RuntimeError("geodesic extraction hit a dead end")
        cur = min(cands, key=site_of)
        path.append(cur)
        guard += 1
        if guard > 4 * n_sites:
            raise RuntimeError("geodesic extraction did not terminate")
    path.reverse()
    return [site_of(i) for i in path]


# ---------------------------------------------------------------------------
# Point-to-point passage
# ---------------------------------------------------------------------------


def _grow_box(box: Box) -> Box:
    w = -min(box.lo)
    if (
        w > 0
        and all(l == -w for l in box.lo)
        and all(h == w for h in box.hi[1:])
        and box.hi[0] >= w
    ):
        n = box.hi[0] - w
        return point_window(n, box.d, 2 * w)
    spans = [h - l + 1 for l, h in zip(box.lo, box.hi)]
    return Box(
        tuple(l - s // 2 - 1 for l, s in zip(box.lo, spans)),
        tuple(h + s // 2 + 1 for h, s in zip(box.hi, spans)),
    )


def passage_time(
    field: WeightField,
    src: Site,
    dst: Site,
    *,
    want_geometry: bool = True,
    grow: Optional[bool] = None,
    max_grows: int = GROW_LIMIT,
) -> PassageResult:
    """Exact minimum passage time over lattice paths from src to dst.

    On a Box window the computation reruns on a doubled window whenever a
    geodesic-DAG edge touches the boundary (the field is resampled from its
    (seed, spec) on the larger region), so the reported geodesic structure
    matches the unbounded lattice whenever it completes without a flag.
    """
    if grow is None:
        grow = isinstance(field.region, Box) and field.spec is not None
    grows = 0
    while True:
        region = field.region
        graph = _graph(region)
        weff, scale = _effective_weights(field)
        src_idx = region.site_index(src)
        dst_idx = region.site_index(dst)
        d_src = graph.distances(weff, [src_idx])[0]
        T_eff = float(d_src[dst_idx])
        if not want_geometry:
            T = T_eff / scale if scale else T_eff
            d_out = d_src / scale if scale else d_src
            return PassageResult(
                T, src, dst, region, d_out, np.array([]),
                np.array([], dtype=np.int64), np.array([], dtype=np.int64),
                [], field, scale, grows, _eff=(weff, d_src, None),
            )
        d_dst = graph.distances(weff, [dst_idx])[0]
        arc_from, arc_to, arc_edge = _tight_arcs(graph.tails, graph.heads, weff, d_src)
        reach = _reverse_reachable(arc_from, arc_to, dst_idx, graph.n_sites)
        keep = reach[arc_to]
        dag_from, dag_to = arc_from[keep], arc_to[keep]
        dag_edge = arc_edge[keep]

        touched = bool(
            np.any(graph.boundary_mask[dag_from]) or np.any(graph.boundary_mask[dag_to])
        )
        if touched and grow and isinstance(region, Box) and grows < max_grows:
            new_region = _grow_box(region)
            field = sample_field(field.spec, new_region, field.seed, for_fpp=False)
            grows += 1
            continue

        primes = counting_primes(field.seed)
        member, needs_exact = _intersection_from_counts(
            dag_from, dag_to, dag_edge, d_src, src_idx, dst_idx, primes
        )
        if needs_exact:
            extra = {
                e
                for e in needs_exact
                if _edge_removal_increases_T(graph, weff, int(e), src_idx, dst_idx, T_eff)
            }
            member = sorted(set(member) | extra)
        path = _extract_path(
            dag_from, dag_to, src_idx, dst_idx, region.site_from_index, graph.n_sites
        )
        T = T_eff / scale if scale else T_eff
        d_src_out = d_src / scale if scale else d_src
        d_dst_out = d_dst / scale if scale else d_dst
        return PassageResult(
            T, src, dst, region, d_src_out, d_dst_out, np.unique(dag_edge),
            np.asarray(member, dtype=np.int64), path, field, scale, grows,
            boundary_flag=touched, _eff=(weff, d_src, d_dst),
        )


def _edge_removal_increases_T(
    graph: LatticeGraph, weff: np.ndarray, edge: int, src: int, dst: int, T_eff: float
) -> bool:
    w2 = weff.copy()
    w2[edge] = np.inf
    d = graph.distances(w2, [src])[0]
    return bool(d[dst] > T_eff)


def edge_removal_oracle(field: WeightField, src: Site, dst: Site) -> set[int]:
    """e lies in every geodesic iff deleting e strictly increases T (exact oracle)."""
    region = field.region
    graph = _graph(region)
    weff, _ = _effective_weights(field)
    si, di = region.site_index(src), region.site_index(dst)
    T = float(graph.distances(weff, [si])[0][di])
    return {
        e
        for e in range(region.n_edges())
        if _edge_removal_increases_T(graph, weff, e, si, di, T)
    }


# ---------------------------------------------------------------------------
# Single-edge update and criticality
# ---------------------------------------------------------------------------


def single_edge_update(result: PassageResult, edge_idx: int, new_t: float) -> float:
    """New passage time after setting one edge weight; equals a full recompute.

    O(1) screening via the stored distance fields; falls back to one
    shortest-path run when the screen cannot certify the answer (the stored
    fields may themselves route through the modified edge).
    """
    field = result.field
    region = field.region
    graph = _graph(region)
    weff, d_src_eff, d_dst_eff = result._eff
    if d_dst_eff is None:
        raise ValueError("single_edge_update needs a result with geometry")
    scale = result.scale
    old_eff = float(weff[edge_idx])
    if scale:
        new_eff = float(np.rint(new_t * scale))
        if abs(new_t * scale - new_eff) > 1e-6:
            # value off the integer grid: recompute in raw float weights
            w2 = np.asarray(field.weights, dtype=np.float64).copy()
            w2[edge_idx] = new_t
            d = graph.distances(w2, [region.site_index(result.src)])[0]
            return float(d[region.site_index(result.dst)])
    else:
        new_eff = float(new_t)
    u = int(graph.tails[edge_idx])
    v = int(graph.heads[edge_idx])
    T_eff = float(d_src_eff[region.site_index(result.dst)])
    in_gint = bool(np.isin(edge_idx, result.gint_edge_idx))

    if new_eff >= old_eff and not in_gint:
        # some geodesic avoids the edge, so raising it cannot change T
        return result.T
    if new_eff < old_eff:
        cand = min(
            d_src_eff[u] + new_eff + d_dst_eff[v],
            d_src_eff[v] + new_eff + d_dst_eff[u],
        )
        if cand >= T_eff:
            return result.T  # no through-route can beat the current time
    w2 = weff.copy()
    w2[edge_idx] = new_eff
    d = graph.distances(w2, [region.site_index(result.src)])[0]
    T_new = float(d[region.site_index(result.dst)])
    return T_new / scale if scale else T_new


def edge_criticality(
    field: WeightField,
    edge_idx: int,
    src: Site,
    dst: Site,
    *,
    grow: Optional[bool] = None,
    max_grows: int = GROW_LIMIT,
) -> CriticalityValue:
    """D = T_without_e - best approach cost through e, clamped at zero.

    For t < D the edge lies on every configuration's geodesic DAG, and
    T(t') - T(t) = min(t' - t, (D - t)_+) for t' >= t.  On a finite window D
    is capped at the in-window detour value; the window auto-grows while the
    detour corridor or the approach paths touch the boundary.
    """
    if grow is None:
        grow = isinstance(field.region, Box) and field.spec is not None
    grows = 0
    while True:
        region = field.region
        graph = _graph(region)
        weff, scale = _effective_weights(field)
        si, di = region.site_index(src), region.site_index(dst)
        w2 = weff.copy()
        w2[edge_idx] = np.inf
        dp_src = graph.distances(w2, [si])[0]
        dp_dst = graph.distances(w2, [di])[0]
        T_wo = float(dp_src[di])
        u = int(graph.tails[edge_idx])
        v = int(graph.heads[edge_idx])
        approach = min(dp_src[u] + dp_dst[v], dp_src[v] + dp_dst[u])
        D_eff = max(0.0, T_wo - float(approach))

        if grow and isinstance(region, Box) and grows < max_grows:
            corridor = dp_src + dp_dst == T_wo
            touched = bool(np.any(graph.boundary_mask & corridor))
            if not touched:
                # one shortest approach path per side must stay interior too
                af, at, _ = _tight_arcs(graph.tails, graph.heads, w2, dp_src)
                ab, bt, _ = _tight_arcs(graph.tails, graph.heads, w2, dp_dst)
                try:
                    for arcs, start in (((af, at), u), ((af, at), v)):
                        p = _extract_path(
                            arcs[0], arcs[1], si, start, region.site_from_index,
                            graph.n_sites,
                        )
                        if any(
                            graph.boundary_mask[region.site_index(s)] for s in p
                        ):
                            touched = True
                    for arcs, start in (((ab, bt), u), ((ab, bt), v)):
                        p = _extract_path(
                            arcs[0], arcs[1], di, start, region.site_from_index,
                            graph.n_sites,
                        )
                        if any(
                            graph.boundary_mask[region.site_index(s)] for s in p
                        ):
                            touched = True
                except RuntimeError:
                    touched = True
            if touched:
                edge = region.edge_from_index(edge_idx)
                new_region = _grow_box(region)
                field = sample_field(field.spec, new_region, field.seed, for_fpp=False)
                edge_idx = new_region.edge_index(edge)
                grows += 1
                continue
        return CriticalityValue(D_eff / scale if scale else D_eff)


# ---------------------------------------------------------------------------
# Torus winding passage
# ---------------------------------------------------------------------------


class _Cylinder:
    """Two fundamental domains of the torus cut along x_0 = 0.

    Levels 0..2n along axis 0 (no wrap), a (d-1)-torus of side n per level.
    Every cylinder edge records the torus edge it covers.
    """

    def __init__(self, n: int, d: int):
        self.n, self.d = n, d
        K = n ** (d - 1)
        self.K = K
        levels = 2 * n + 1
        self.n_sites = levels * K
        if d > 1:
            y_coords = np.stack(
                np.meshgrid(*[np.arange(n)] * (d - 1), indexing="ij"), axis=-1
            ).reshape(K, d - 1)
        else:
            y_coords = np.zeros((1, 0), dtype=int)
        tails, heads, tedge = [], [], []
        for level in range(levels - 1):
            base = level * K + np.arange(K)
            tails.append(base)
            heads.append(base + K)
            tedge.append(((level % n) * K + np.arange(K)) * d + 0)
        strides = np.array([n ** (d - 2 - i) for i in range(d - 1)], dtype=int)
        for a in range(1, d):
            shifted = y_coords.copy()
            shifted[:, a - 1] = (shifted[:, a - 1] + 1) % n
            y_head = shifted @ strides
            for level in range(levels):
                base = level * K + np.arange(K)
                tails.append(base)
                heads.append(level * K + y_head)
                tedge.append(((level % n) * K + np.arange(K)) * d + a)
        self.tails = np.concatenate(tails).astype(np.int64)
        self.heads = np.concatenate(heads).astype(np.int64)
        self.torus_edge = np.concatenate(tedge).astype(np.int64)
        E = self.tails.size
        arc_from = np.concatenate([self.tails, self.heads])
        arc_to = np.concatenate([self.heads, self.tails])
        coo = sp.coo_matrix(
            (np.arange(2 * E, dtype=np.float64), (arc_from, arc_to)),
            shape=(self.n_sites, self.n_sites),
        )
        csr = coo.tocsr()
        arc_of_pos = csr.data.astype(np.int64)
        self._edge_of_pos = np.where(arc_of_pos < E, arc_of_pos, arc_of_pos - E)
        self._csr = sp.csr_matrix(
            (np.zeros(2 * E), csr.indices, csr.indptr),
            shape=(self.n_sites, self.n_sites),
        )
        self.n_edges = E

    def distances(self, cyl_weights: np.ndarray, sources: list[int]) -> np.ndarray:
        self._csr.data[:] = cyl_weights[self._edge_of_pos]
        return np.atleast_2d(
            _csgraph_dijkstra(self._csr, directed=True, indices=sources)
        )

    def site_of(self, idx: int) -> tuple[int, ...]:
        level, y = divmod(int(idx), self.K)
        out = [level]
        for s in [self.n ** (self.d - 2 - i) for i in range(self.d - 1)]:
            q, y = divmod(y, s)
            out.append(q)
        return tuple(out)


@lru_cache(maxsize=32)
def _cylinder(n: int, d: int) -> _Cylinder:
    return _Cylinder(n, d)


def torus_passage(field: WeightField, want_geometry: bool = True) -> PassageResult:
    """Minimal weight over closed torus paths winding once around axis 0.

    Cuts along x_0 = 0, lifts to a cylinder of two fundamental domains, and
    minimizes the distance from each cut site to its shifted copy; geodesic
    structure is computed per minimizing cut site and mapped back to torus
    edges.  The intersection is taken over the minimizing cycles of every
    minimizing cut site.
    """
    region = field.region
    if not isinstance(region, Torus):
        raise ValueError("torus_passage requires a Torus region")
    n, d = region.n, region.d
    cyl = _cylinder(n, d)
    weff, scale = _effective_weights(field)
    wcyl = weff[cyl.torus_edge]
    dists = cyl.distances(wcyl, list(range(cyl.K)))
    targets = n * cyl.K + np.arange(cyl.K)
    vals = dists[np.arange(cyl.K), targets]
    T_eff = float(vals.min())
    T = T_eff / scale if scale else T_eff
    origin = (0,) * d
    if not want_geometry:
        return PassageResult(
            T, origin, origin, region, dists, np.array([]),
            np.array([], dtype=np.int64), np.array([], dtype=np.int64), [],
            field, scale, 0,
        )
    minimizers = np.flatnonzero(vals == T_eff)
    primes = counting_primes(field.seed)
    inter: Optional[set[int]] = None
    dag_union: set[int] = set()
    sample: list[Site] = []
    d_dst_first = np.array([])
    for y in minimizers:
        src_idx = int(y)
        dst_idx = int(n * cyl.K + y)
        d_src = dists[y]
        d_dst = cyl.distances(wcyl, [dst_idx])[0]
        if d_dst_first.size == 0:
            d_dst_first = d_dst
        arc_from, arc_to, arc_cyl = _tight_arcs(cyl.tails, cyl.heads, wcyl, d_src)
        reach = _reverse_reachable(arc_from, arc_to, dst_idx, cyl.n_sites)
        keep = reach[arc_to]
        dag_from, dag_to = arc_from[keep], arc_to[keep]
        dag_cyl = arc_cyl[keep]
        dag_tedge = cyl.torus_edge[dag_cyl]
        dag_union.update(int(e) for e in np.unique(dag_tedge))
        member, needs_exact = _intersection_from_counts(
            dag_from, dag_to, dag_cyl, d_src, src_idx, dst_idx, primes,
            group_by=dag_tedge,
        )
        mem = set(member)
        for te in needs_exact:
            drop = np.flatnonzero(dag_tedge == te)
            if not _dag_reachable(dag_from, dag_to, src_idx, dst_idx, drop):
                mem.add(int(te))
        inter = mem if inter is None else (inter & mem)
        if not sample:
            raw = _extract_path(
                dag_from, dag_to, src_idx, dst_idx, cyl.site_of, cyl.n_sites
            )
            sample = [region.wrap(s) for s in raw]
    gint = np.asarray(sorted(inter or set()), dtype=np.int64)
    start = sample[0] if sample else origin
    return PassageResult(
        T, start, start, region, dists, d_dst_first,
        np.asarray(sorted(dag_union), dtype=np.int64), gint, sample, field,
        scale, 0,
    )


def torus_winding_oracle(field: WeightField, max_len: int) -> tuple[float, set[int]]:
    """Brute force over simple winding-one cycles up to ``max_len`` edges.

    Exponential; for cross-checks on tiny tori only.  Every winding cycle
    visits the hyperplane x_0 = 0, so roots range over cut sites.
    """
    region = field.region
    if not isinstance(region, Torus):
        raise ValueError("oracle requires a Torus region")
    n, d = region.n, region.d
    weff, scale = _effective_weights(field)
    best_T = math.inf
    best: list[frozenset[int]] = []

    def crossing(site: Site, nb: Site) -> int:
        if site[0] == n - 1 and nb[0] == 0:
            return 1
        if site[0] == 0 and nb[0] == n - 1:
            return -1
        return 0

    def dfs(site, start, winding, used, visited, cost):
        nonlocal best_T, best
        if cost > best_T:
            return
        for nb, edge in region.neighbors(site):
            eidx = region.edge_index(edge)
            if eidx in used:
                continue
            w = winding + crossing(site, nb)
            c = cost + float(weff[eidx])
            if nb == start:
                if w == 1 and used:
                    if c < best_T:
                        best_T = c
                        best = [frozenset(used | {eidx})]
                    elif c == best_T:
                        best.append(frozenset(used | {eidx}))
                continue
            if nb in visited or len(used) + 1 >= max_len:
                continue
            dfs(nb, start, w, used | {eidx}, visited | {nb}, c)

    cut_sites = [s for s in region.sites() if s[0] == 0]
    for start in cut_sites:
        dfs(start, start, 0, frozenset(), {start}, 0.0)
    inter: Optional[frozenset[int]] = None
    for edges in best:
        inter = edges if inter is None else (inter & edges)
    T = best_T / scale if scale else best_T
    return T, set(inter or set())


# ---------------------------------------------------------------------------
# Averaged passage time
# ---------------------------------------------------------------------------


def averaged_passage(
    field: WeightField, n: int, m: Optional[int] = None
) -> tuple[float, dict[Site, float]]:
    """F_n: the passage time averaged over sources z in the L1 ball B_m.

    m defaults to ceil(n^(1/4)); each term is an independent shortest-path
    run on the same field.
    """
    region = field.region
    d = region.d
    if m is None:
        m = math.ceil(n**0.25)
    zs = ball(m, d)
    shift = tuple(n if i == 0 else 0 for i in range(d))
    pairs = []
    for z in zs:
        z2 = tuple(a + b for a, b in zip(z, shift))
        if not (region.contains(z) and region.contains(z2)):
            raise ValueError(f"window too small for translate {z}")
        pairs.append((z, z2))
    graph = _graph(region)
    weff, scale = _effective_weights(field)
    dists = graph.distances(weff, [region.site_index(z) for z, _ in pairs])
    terms = {}
    for i, (z, z2) in enumerate(pairs):
        val = float(dists[i, region.site_index(z2)])
        terms[z] = val / scale if scale else val
    Fn = sum(terms.values()) / len(terms)
    return Fn, terms


def brute_force_passage(field: WeightField, src: Site, dst: Site) -> float:
    """Exhaustive minimum over self-avoiding paths (oracle for tiny regions)."""
    region = field.region
    weff, scale = _effective_weights(field)
    best = math.inf

    def dfs(site, visited, cost):
        nonlocal best
        if cost >= best:
            return
        if site == dst:
            best = cost
            return
        for nb, edge in region.neighbors(site):
            if nb in visited:
                continue
            dfs(nb, visited | {nb}, cost + float(weff[region.edge_index(edge)]))

    dfs(src, {src}, 0.0)
    return best / scale if scale else best
