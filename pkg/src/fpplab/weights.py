"""Edge-weight distributions, reproducible sampling, and the dyadic encoding.

Sampling is counter-based: the weight of edge ``i`` under master seed ``s`` is
``F_inv(uniform53(mix64(s, i)))``, so fields are pure functions of
(seed, spec, region) and disjoint replicas can be drawn concurrently.

``mix64`` is stated bit-exactly so independent implementations agree:

    z = (a * 0xBF58476D1CE4E5B9 + b * 0x94D049BB133111EB
         + 0x9E3779B97F4A7C15)  mod 2^64
    z ^= z >> 30;  z = z * 0xBF58476D1CE4E5B9    mod 2^64
    z ^= z >> 27;  z = z * 0x94D049BB133111EB    mod 2^64
    z ^= z >> 31

(the finalizer is SplitMix64's.)  ``uniform53(z) = (z >> 11) * 2^-53``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .lattice import Region

_M64 = (1 << 64) - 1
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB
_C3 = 0x9E3779B97F4A7C15

# Bond percolation thresholds.  d=2 is exact; d=3,4 are accepted numerical
# values, so the atom-at-zero check is approximate there.
PC_BOND = {2: 0.5, 3: 0.2488126, 4: 0.1601314}


def mix64(a: int, b: int) -> int:
    z = (a * _C1 + b * _C2 + _C3) & _M64
    z ^= z >> 30
    z = (z * _C1) & _M64
    z ^= z >> 27
    z = (z * _C2) & _M64
    z ^= z >> 31
    return z


def mix64_array(a: int, b: np.ndarray) -> np.ndarray:
    """Vectorized mix64 over a uint64 counter array."""
    with np.errstate(over="ignore"):
        z = (np.uint64(a & _M64) * np.uint64(_C1)
             + b.astype(np.uint64) * np.uint64(_C2)
             + np.uint64(_C3))
        z ^= z >> np.uint64(30)
        z *= np.uint64(_C1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_C2)
        z ^= z >> np.uint64(31)
    return z


def uniform53(z: int) -> float:
    return (z >> 11) * 2.0**-53


def uniform53_array(z: np.ndarray) -> np.ndarray:
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


class DistributionSpec:
    """An edge-weight law with evaluable CDF F and right-continuous inverse.

    All mass lies on [0, inf).  ``support_inf`` is I = inf{x : F(x) > 0}.
    """

    name: str = "base"

    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def inv_cdf(self, y: float) -> float:
        """Right-continuous inverse F^{-1}(y) = inf{x : F(x) >= y}, 0 < y < 1."""
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def second_moment(self) -> float:
        raise NotImplementedError

    def support_inf(self) -> float:
        raise NotImplementedError

    def atom_at_zero(self) -> float:
        return 0.0

    def atoms(self) -> list[tuple[float, float]] | None:
        """(value, mass) pairs for purely atomic laws, else None."""
        return None

    def is_atomic(self) -> bool:
        return self.atoms() is not None

    def params(self) -> tuple:
        raise NotImplementedError

    def serialize(self) -> str:
        return f"{self.name}:" + ",".join(_fmt_num(p) for p in self.params())

    def inv_cdf_array(self, y: np.ndarray) -> np.ndarray:
        # subclasses override with vectorized versions where it pays off
        return np.array([self.inv_cdf(float(v)) for v in y])

    # Integer scaling for exact tie detection in shortest-path arithmetic.
    def int_scale(self) -> int | None:
        """Scale S with S*atom integral for every atom, or None if unscalable."""
        atoms = self.atoms()
        if atoms is None:
            return None
        denom = 1
        for value, _ in atoms:
            frac = Fraction(value).limit_denominator(10**6)
            if abs(float(frac) - value) > 1e-9 * max(1.0, abs(value)):
                return None
            denom = denom * frac.denominator // math.gcd(denom, frac.denominator)
            if denom > 10**9:
                return None
        return denom

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.params() == other.params()

    def __hash__(self) -> int:
        return hash((self.name, self.params()))

    def __repr__(self) -> str:
        return self.serialize()


def _fmt_num(x) -> str:
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


@dataclass(eq=False, repr=False)
class Bernoulli(DistributionSpec):
    """Two-point law: P(a) = p, P(b) = 1 - p, with 0 <= a <= b."""

    a: float
    b: float
    p: float
    name = "bernoulli"

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValueError("p must lie in [0, 1]")
        if self.a < 0 or self.b < self.a:
            raise ValueError("need 0 <= a <= b")

    def cdf(self, x):
        if x < self.a:
            return 0.0
        if x < self.b:
            return self.p
        return 1.0

    def inv_cdf(self, y):
        _check_y(y)
        return self.a if y <= self.p else self.b

    def inv_cdf_array(self, y):
        return np.where(y <= self.p, self.a, self.b)

    def mean(self):
        return self.p * self.a + (1 - self.p) * self.b

    def second_moment(self):
        return self.p * self.a**2 + (1 - self.p) * self.b**2

    def support_inf(self):
        return self.a if self.p > 0 else self.b

    def atom_at_zero(self):
        mass = 0.0
        if self.a == 0:
            mass += self.p
        if self.b == 0:
            mass += 1 - self.p
        return mass

    def atoms(self):
        if self.p == 0:
            return [(self.b, 1.0)]
        if self.p == 1 or self.a == self.b:
            return [(self.a, 1.0)] if self.p == 1 else [(self.a, self.p), (self.b, 1 - self.p)]
        return [(self.a, self.p), (self.b, 1.0 - self.p)]

    def params(self):
        return (self.a, self.b, self.p)


@dataclass(eq=False, repr=False)
class Uniform(DistributionSpec):
    lo: float
    hi: float
    name = "uniform"

    def __post_init__(self):
        if self.lo < 0 or self.hi <= self.lo:
            raise ValueError("need 0 <= lo < hi")

    def cdf(self, x):
        if x < self.lo:
            return 0.0
        if x >= self.hi:
            return 1.0
        return (x - self.lo) / (self.hi - self.lo)

    def inv_cdf(self, y):
        _check_y(y)
        return self.lo + y * (self.hi - self.lo)

    def inv_cdf_array(self, y):
        return self.lo + y * (self.hi - self.lo)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def second_moment(self):
        return (self.hi**3 - self.lo**3) / (3.0 * (self.hi - self.lo))

    def support_inf(self):
        return self.lo

    def params(self):
        return (self.lo, self.hi)


@dataclass(eq=False, repr=False)
class Exponential(DistributionSpec):
    rate: float
    name = "exponential"

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")

    def cdf(self, x):
        return 0.0 if x < 0 else -math.expm1(-self.rate * x)

    def inv_cdf(self, y):
        _check_y(y)
        return -math.log1p(-y) / self.rate

    def inv_cdf_array(self, y):
        return -np.log1p(-y) / self.rate

    def mean(self):
        return 1.0 / self.rate

    def second_moment(self):
        return 2.0 / self.rate**2

    def support_inf(self):
        return 0.0

    def params(self):
        return (self.rate,)


@dataclass(eq=False, repr=False)
class Geometric(DistributionSpec):
    """P(k) = (1-q) q^k on {0, 1, 2, ...}; mean q/(1-q) (q=1/2 gives mean 1)."""

    q: float
    name = "geometric"

    def __post_init__(self):
        if not (0.0 < self.q < 1.0):
            raise ValueError("q must lie in (0, 1)")

    def cdf(self, x):
        if x < 0:
            return 0.0
        k = math.floor(x)
        return 1.0 - self.q ** (k + 1)

    def inv_cdf(self, y):
        _check_y(y)
        k = max(0, math.ceil(math.log1p(-y) / math.log(self.q)) - 1)
        # float guard: enforce F(k-1) < y <= F(k)
        while k > 0 and 1.0 - self.q**k >= y:
            k -= 1
        while 1.0 - self.q ** (k + 1) < y:
            k += 1
        return float(k)

    def inv_cdf_array(self, y):
        k = np.ceil(np.log1p(-y) / math.log(self.q)) - 1
        k = np.maximum(k, 0.0)
        # same float guard as the scalar path, vectorized one step each way
        down = (k > 0) & (1.0 - self.q**k >= y)
        k = np.where(down, k - 1, k)
        up = 1.0 - self.q ** (k + 1) < y
        k = np.where(up, k + 1, k)
        return k

    def mean(self):
        return self.q / (1.0 - self.q)

    def second_moment(self):
        q = self.q
        return q * (1 + q) / (1 - q) ** 2

    def support_inf(self):
        return 0.0

    def atom_at_zero(self):
        return 1.0 - self.q

    def atoms(self):
        # truncated at mass 1 - 1e-15; exact enough for scaling and moments
        out = []
        k, mass = 0, 1.0 - self.q
        acc = 0.0
        while acc < 1.0 - 1e-15 and k < 4096:
            out.append((float(k), mass))
            acc += mass
            mass *= self.q
            k += 1
        return out

    def int_scale(self):
        return 1

    def params(self):
        return (self.q,)


@dataclass(eq=False, repr=False)
class TableCDF(DistributionSpec):
    """Discrete law from sorted (x_i, F(x_i)) breakpoints; F right-continuous."""

    table: tuple[tuple[float, float], ...]
    name = "table"

    def __post_init__(self):
        tab = tuple((float(x), float(F)) for x, F in self.table)
        if not tab:
            raise ValueError("empty table")
        xs = [x for x, _ in tab]
        Fs = [F for _, F in tab]
        if any(x < 0 for x in xs):
            raise ValueError("support must lie in [0, inf)")
        if sorted(xs) != xs or len(set(xs)) != len(xs):
            raise ValueError("breakpoints must be strictly increasing")
        if any(b < a for a, b in zip(Fs, Fs[1:])) or Fs[-1] != 1.0 or Fs[0] <= 0.0:
            raise ValueError("F values must be nondecreasing, end at 1, start > 0")
        object.__setattr__(self, "table", tab)
        object.__setattr__(self, "_xs", np.array(xs))
        object.__setattr__(self, "_Fs", np.array(Fs))

    @classmethod
    def point_mass(cls, value: float) -> "TableCDF":
        return cls(((value, 1.0),))

    def cdf(self, x):
        i = int(np.searchsorted(self._xs, x, side="right")) - 1
        return 0.0 if i < 0 else float(self._Fs[i])

    def inv_cdf(self, y):
        _check_y(y)
        i = int(np.searchsorted(self._Fs, y, side="left"))
        return float(self._xs[i])

    def inv_cdf_array(self, y):
        i = np.searchsorted(self._Fs, y, side="left")
        return self._xs[np.minimum(i, len(self.table) - 1)]

    def _masses(self):
        prev = np.concatenate([[0.0], self._Fs[:-1]])
        return self._Fs - prev

    def mean(self):
        return float(np.sum(self._xs * self._masses()))

    def second_moment(self):
        return float(np.sum(self._xs**2 * self._masses()))

    def support_inf(self):
        m = self._masses()
        return float(self._xs[np.flatnonzero(m > 0)[0]])

    def atom_at_zero(self):
        m = self._masses()
        hit = self._xs == 0.0
        return float(m[hit].sum())

    def atoms(self):
        m = self._masses()
        return [(float(x), float(p)) for x, p in zip(self._xs, m) if p > 0]

    def params(self):
        return tuple(v for pair in self.table for v in pair)


def _check_y(y: float) -> None:
    if not (0.0 < y < 1.0):
        raise ValueError(f"quantile argument must lie in (0, 1), got {y}")


_SPEC_PARSERS = {
    "bernoulli": lambda p: Bernoulli(p[0], p[1], p[2]),
    "uniform": lambda p: Uniform(p[0], p[1]),
    "exponential": lambda p: Exponential(p[0]),
    "geometric": lambda p: Geometric(p[0]),
    "point": lambda p: TableCDF.point_mass(p[0]),
}


def parse_spec(text: str) -> DistributionSpec:
    """Parse the ``name:param,param,...`` distribution mini-grammar."""
    name, _, rest = text.strip().partition(":")
    name = name.strip().lower()
    params = [float(tok) for tok in rest.split(",") if tok.strip()] if rest else []
    if name == "table":
        if len(params) % 2 != 0 or not params:
            raise ValueError("table spec needs x,F pairs")
        pairs = tuple((params[i], params[i + 1]) for i in range(0, len(params), 2))
        return TableCDF(pairs)
    if name not in _SPEC_PARSERS:
        raise ValueError(f"unknown distribution {name!r}")
    try:
        return _SPEC_PARSERS[name](params)
    except IndexError:
        raise ValueError(f"wrong parameter count for {name!r}") from None


def validate_for_fpp(spec: DistributionSpec, d: int) -> None:
    """Reject specs whose atom at 0 reaches the percolation threshold p_c(d)."""
    if d not in PC_BOND:
        raise ValueError(f"no percolation threshold tabulated for d={d}")
    mass = spec.atom_at_zero()
    if mass >= PC_BOND[d]:
        raise ValueError(
            f"atom at zero has mass {mass} >= p_c({d}) = {PC_BOND[d]}; "
            "passage times would degenerate"
        )


@dataclass
class WeightField:
    """An i.i.d. edge-weight configuration on a region, with seed provenance.

    ``weights[i]`` is the weight of ``region.edge_from_index(i)``.  Fields
    produced by :func:`sample_field` are bit-exact functions of
    (seed, spec, region); hand-built fields may pass spec None.
    """

    region: Region
    weights: np.ndarray
    seed: int
    spec: "DistributionSpec | None"

    def __post_init__(self):
        if len(self.weights) != self.region.n_edges():
            raise ValueError("weight array length != region edge count")
        if np.any(self.weights < 0):
            raise ValueError("negative edge weight")

    def weight_of(self, edge) -> float:
        return float(self.weights[self.region.edge_index(edge)])

    def with_weight(self, edge_idx: int, value: float) -> "WeightField":
        w = self.weights.copy()
        w[edge_idx] = value
        return WeightField(self.region, w, self.seed, self.spec)


def sample_field(
    spec: DistributionSpec, region: Region, seed: int, for_fpp: bool = True
) -> WeightField:
    """Draw an i.i.d. field; per-edge streams come from mix64(seed, edge index)."""
    if for_fpp:
        validate_for_fpp(spec, region.d)
    E = region.n_edges()
    z = mix64_array(seed, np.arange(E, dtype=np.uint64))
    u = uniform53_array(z)
    # u = 0 has probability 2^-53 per edge; F^{-1}(0) is the support infimum
    w = np.where(u > 0.0, spec.inv_cdf_array(np.maximum(u, 2.0**-53)), spec.support_inf())
    return WeightField(region, np.asarray(w, dtype=np.float64), seed, spec)


def sample_uniforms(seed: int, count: int) -> np.ndarray:
    """The raw uniform53 stream used by sample_field, for direct checks."""
    return uniform53_array(mix64_array(seed, np.arange(count, dtype=np.uint64)))


# ----------------------------------------------------------------------------
# Dyadic Bernoulli encoding: U = sum_j bits_j 2^-j, weight = F^{-1}(U).
# ----------------------------------------------------------------------------

DEFAULT_DYADIC_DEPTH = 53


@dataclass
class DyadicCode:
    """Per-edge fair-bit vectors of truncation depth J encoding uniforms."""

    bits: np.ndarray  # shape (n_edges, J), entries in {0, 1}
    J: int

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2 or self.bits.shape[1] != self.J:
            raise ValueError("bits must have shape (n_edges, J)")

    @classmethod
    def sample(cls, seed: int, n_edges: int, J: int = DEFAULT_DYADIC_DEPTH) -> "DyadicCode":
        z = mix64_array(seed, np.arange(n_edges, dtype=np.uint64))
        j = np.arange(1, J + 1, dtype=np.uint64)
        bits = ((z[:, None] >> (np.uint64(64) - j[None, :])) & np.uint64(1)).astype(np.uint8)
        return cls(bits, J)

    def uniforms(self) -> np.ndarray:
        weights = 0.5 ** np.arange(1, self.J + 1)
        return self.bits @ weights


def dyadic_value(bits: Sequence[int]) -> float:
    """U = sum_j bits[j-1] * 2^-j for a single bit vector."""
    return float(sum(b * 2.0**-j for j, b in enumerate(bits, start=1)))


def dyadic_flip(
    code: DyadicCode, spec: DistributionSpec, edge_idx: int, j: int, direction: str
) -> tuple[DyadicCode, float]:
    """Set bit j of one edge to 1 ('+') or 0 ('-'); return new code and weight.

    Matches the plus/minus configurations used when bounding discrete
    derivatives: the bit is forced, not toggled.
    """
    if not (1 <= j <= code.J):
        raise ValueError(f"bit index {j} out of range [1, {code.J}]")
    if direction not in ("+", "-"):
        raise ValueError("direction must be '+' or '-'")
    bits = code.bits.copy()
    bits[edge_idx, j - 1] = 1 if direction == "+" else 0
    new = DyadicCode(bits, code.J)
    u = dyadic_value(bits[edge_idx])
    value = spec.inv_cdf(u) if u > 0 else spec.support_inf()
    return new, value


def log_cdf_weight(spec: DistributionSpec, t: float) -> float:
    """w = 1 - log F(t); satisfies P(w >= r) <= e^{1-r} under t ~ spec."""
    F = spec.cdf(t)
    if F <= 0.0:
        raise ValueError(f"F({t}) = 0; weight below support infimum")
    return 1.0 - math.log(F)


def log_cdf_weight_array(spec: DistributionSpec, t: np.ndarray) -> np.ndarray:
    F = np.array([spec.cdf(float(v)) for v in t])
    if np.any(F <= 0):
        raise ValueError("F(t) = 0 for some t")
    return 1.0 - np.log(F)
