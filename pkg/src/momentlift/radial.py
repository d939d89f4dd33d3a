"""Non-negative dominating weights on [0, inf)^N and the moment-sequence machinery.

The dominating weight enters only through its normalized moments <r^m>, which
must bound the magnitudes of the complex weight's moments index by index.
One-dimensional existence is certified through positivity of the Hankel
determinants of the moment sequence; determinants and the inductive sequence
completion run in exact rational arithmetic because Hankel matrices are
violently ill-conditioned in floating point.  For N > 1 only product models
are used, for which per-dimension certification suffices.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, interpolate
from scipy.linalg import eigh_tridiagonal

from .indices import MultiIndex, as_index, multi_indices

MOMENT_TOL = 1e-10
_CDF_FINE = 1 << 17
_CDF_KNOTS = 1 << 14
_TAIL_MASS = 1e-12


class DivergentMomentError(RuntimeError):
    """A requested moment integral does not converge."""


class UnsampleableModelError(RuntimeError):
    """The model exposes moments only; no sampling density is available."""


class SingularHankelError(RuntimeError):
    """Moment data too degenerate for a stable discrete representation."""


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError("moment values must be finite")
        return Fraction(x)
    if isinstance(x, np.integer):
        return Fraction(int(x))
    if isinstance(x, np.floating):
        return Fraction(float(x))
    raise TypeError(f"cannot treat {type(x).__name__} exactly; pass int, float or Fraction")


def _det_exact(rows: list[list[Fraction]]) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    n = len(rows)
    m = [row[:] for row in rows]
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            m[col], m[pivot] = m[pivot], m[col]
            det = -det
        det *= m[col][col]
        inv = m[col][col]
        for r in range(col + 1, n):
            factor = m[r][col] / inv
            if factor:
                m[r] = [a - factor * b for a, b in zip(m[r], m[col])]
    return det


def _hankel_rows(values: Sequence[Fraction], n: int) -> list[list[Fraction]]:
    half = n // 2
    shift = n % 2
    need = 2 * half + shift
    if len(values) <= need:
        raise ValueError(f"sequence too short for Hankel index {n}: need s_0..s_{need}")
    return [[values[i + j + shift] for j in range(half + 1)] for i in range(half + 1)]


def hankel_det(seq, n: int) -> Fraction:
    """Determinant of the n-th Hankel matrix of a moment sequence, exactly.

    The matrices follow the even/odd convention H^{2k}_{ij} = s_{i+j},
    H^{2k+1}_{ij} = s_{i+j+1} with 0 <= i, j <= k.  Values are taken at face
    value as exact rationals (binary floats are exact rationals), so sign
    decisions are reliable even for the notoriously ill-conditioned cases.
    """
    values = seq.values if isinstance(seq, MomentSequence) else [_to_fraction(v) for v in seq]
    if n < 0:
        raise ValueError("Hankel index must be >= 0")
    return _det_exact(_hankel_rows(list(values), n))


@dataclass(frozen=True)
class MomentSequence:
    """Moments s_0..s_K of some non-negative weight on [0, inf), s_0 = 1.

    Construction verifies every Hankel determinant is strictly positive,
    which certifies a representing weight exists.
    """

    values: tuple[Fraction, ...]

    def __post_init__(self):
        vals = tuple(_to_fraction(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals or vals[0] != 1:
            raise ValueError("moment sequence must start with s_0 = 1")
        for n in range(len(vals)):
            d = _det_exact(_hankel_rows(list(vals), n))
            if d <= 0:
                raise ValueError(f"Hankel determinant at index {n} is {float(d)}, not positive")

    @property
    def top(self) -> int:
        return len(self.values) - 1

    def floats(self) -> list[float]:
        return [float(v) for v in self.values]


def margin_rule(v: Fraction) -> Fraction:
    # any value strictly above the positivity root works; double-plus-one
    # keeps determinants safely away from zero under later float use
    return 2 * v + 1


def complete_sequence(lower: Sequence, rule: Callable[[Fraction], Fraction] = margin_rule) -> MomentSequence:
    """Extend lower bounds l_0..l_K to a moment sequence with positive Hankel determinants.

    Inductively: det(H^{k}) is linear in the newest moment s_k with a
    positive leading coefficient det(H^{k-2}), so there is a root b above
    which the determinant is positive.  Each s_k is set to
    ``rule(max(l_k, b))``, which keeps s_k >= l_k while staying strictly
    above every positivity root.  Everything is exact rational arithmetic.
    """
    bounds = [_to_fraction(v) for v in lower]
    if not bounds:
        raise ValueError("need at least l_0")
    if bounds[0] > 1:
        raise ValueError("l_0 must be <= 1 (s_0 is fixed at 1)")
    if any(b < 0 for b in bounds):
        raise ValueError("lower bounds must be non-negative")
    values: list[Fraction] = [Fraction(1)]
    for k in range(1, len(bounds)):
        trial = values + [Fraction(0)]
        a_const = _det_exact(_hankel_rows(trial, k))
        coeff = Fraction(1) if k < 2 else _det_exact(_hankel_rows(values, k - 2))
        if coeff <= 0:
            raise AssertionError("induction invariant broken: leading minor not positive")
        root = -a_const / coeff
        values.append(rule(max(bounds[k], root)))
    return MomentSequence(tuple(values))


# --------------------------------------------------------------------------
# radial models


class RadialModel:
    """One-dimensional non-negative weight on [0, inf), seen through moments."""

    dimension = 1

    def moment(self, m: int) -> float:
        raise NotImplementedError

    # sampling hooks: how many uniforms one draw consumes, and the transform
    def uniform_count(self) -> int:
        raise UnsampleableModelError(f"{type(self).__name__} has no sampling density")

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        raise UnsampleableModelError(f"{type(self).__name__} has no sampling density")


class DeltaAtB(RadialModel):
    """Point mass at B > 0; moments are B^m."""

    def __init__(self, b: float):
        if b <= 0:
            raise ValueError("point mass location must be positive")
        self.b = float(b)

    def moment(self, m: int) -> float:
        return self.b**m

    def uniform_count(self) -> int:
        return 0

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        return np.full(u.shape[0], self.b)

    def __repr__(self):
        return f"DeltaAtB({self.b})"


class ExplicitDensity(RadialModel):
    """Density given as a callable on [0, inf); moments by adaptive quadrature.

    Moments are cached per order.  Sampling uses a tabulated inverse CDF
    with monotone (PCHIP) interpolation, truncated where the cumulative
    mass exceeds 1 - 1e-12.
    """

    def __init__(self, pdf: Callable[[np.ndarray], np.ndarray], name: str = "density"):
        self.pdf = pdf
        self.name = name
        self._cache: dict[int, float] = {}
        self._norm: float | None = None
        self._inv = None

    def _quad(self, f, lo=0.0, hi=np.inf) -> float:
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)
            except integrate.IntegrationWarning as exc:
                raise DivergentMomentError(f"moment integral of {self.name} failed: {exc}") from exc
        if not math.isfinite(val) or (val != 0 and err > 1e-8 * abs(val)):
            raise DivergentMomentError(f"moment integral of {self.name} did not converge")
        return val

    def normalization(self) -> float:
        if self._norm is None:
            z = self._quad(lambda r: float(self.pdf(np.asarray(r))))
            if z <= 0:
                raise ValueError(f"{self.name} has non-positive mass")
            self._norm = z
        return self._norm

    def moment(self, m: int) -> float:
        if m not in self._cache:
            z = self.normalization()
            val = self._quad(lambda r: float(r**m * self.pdf(np.asarray(r)))) / z
            self._cache[m] = val
        return self._cache[m]

    def _upper(self) -> float:
        z = self.normalization()
        hi = 1.0
        while self._quad(lambda r: float(self.pdf(np.asarray(r))), hi) > _TAIL_MASS * z:
            hi *= 2.0
            if hi > 1e12:
                raise DivergentMomentError(f"{self.name} mass does not concentrate")
        return hi

    def _inverse_cdf(self):
        if self._inv is None:
            hi = self._upper()
            grid = np.linspace(0.0, hi, _CDF_FINE + 1)
            dens = np.asarray(self.pdf(grid), dtype=float)
            if np.any(dens < 0):
                raise ValueError(f"{self.name} takes negative values")
            cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
            cdf /= cdf[-1]
            step = _CDF_FINE // _CDF_KNOTS
            ck, rk = cdf[::step], grid[::step]
            keep = np.concatenate(([True], np.diff(ck) > 0))
            self._inv = interpolate.PchipInterpolator(ck[keep], rk[keep])
        return self._inv

    def uniform_count(self) -> int:
        return 1

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        inv = self._inverse_cdf()
        return np.asarray(inv(np.clip(u[:, 0], 0.0, 1.0)))

    def __repr__(self):
        return f"ExplicitDensity({self.name})"


def half_gaussian() -> ExplicitDensity:
    """The standard half-Gaussian weight exp(-r^2/2) on [0, inf)."""
    return ExplicitDensity(lambda r: np.exp(-0.5 * np.square(r)), name="exp(-r^2/2)")


class AnharmonicBound(ExplicitDensity):
    """Per-slice dominating density exp(c2 r^2 - kappa delta r^4).

    ``kinetic_form`` selects c2: "derived" uses sqrt(2) mu / delta (what the
    contour rotation plus the difference-square inequality actually yield);
    "literal" uses sqrt(2) / (mu delta).
    """

    def __init__(self, mu: float, kappa: float, delta: float, kinetic_form: str = "derived"):
        if mu <= 0 or kappa <= 0 or delta <= 0:
            raise ValueError("mu, kappa, delta must be positive")
        if kinetic_form == "derived":
            c2 = math.sqrt(2.0) * mu / delta
        elif kinetic_form == "literal":
            c2 = math.sqrt(2.0) / (mu * delta)
        else:
            raise ValueError("kinetic_form must be 'derived' or 'literal'")
        self.mu, self.kappa, self.delta = float(mu), float(kappa), float(delta)
        self.kinetic_form = kinetic_form
        c4 = kappa * delta
        super().__init__(
            lambda r: np.exp(c2 * np.square(r) - c4 * np.square(r) * np.square(r)),
            name=f"exp({c2:.6g} r^2 - {c4:.6g} r^4)",
        )


class DiscreteMeasure(RadialModel):
    """Finite atomic measure: strictly increasing nodes >= 0, positive weights summing to 1."""

    def __init__(self, nodes: Sequence[float], weights: Sequence[float]):
        nodes = np.asarray(nodes, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise ValueError("nodes and weights must be matching non-empty vectors")
        if np.any(nodes < 0):
            raise ValueError("nodes must be >= 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        self.nodes = nodes
        self.weights = weights / weights.sum()
        self._cum = np.cumsum(self.weights)

    def moment(self, m: int) -> float:
        return float(np.dot(self.weights, self.nodes**m))

    def uniform_count(self) -> int:
        return 1

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self._cum, u[:, 0], side="right")
        return self.nodes[np.minimum(pos, len(self.nodes) - 1)]

    def __repr__(self):
        return f"DiscreteMeasure({len(self.nodes)} nodes)"


class Shifted(RadialModel):
    """Base weight translated right by a > 0: density r -> base(r - a) on [a, inf)."""

    def __init__(self, base: RadialModel, a: float):
        if a <= 0:
            raise ValueError("shift must be positive")
        if base.dimension != 1:
            raise ValueError("shift applies to one-dimensional models")
        self.base = base
        self.a = float(a)

    def moment(self, m: int) -> float:
        # binomial expansion of <(r + a)^m> against base moments, exact given those
        return sum(
            math.comb(m, k) * self.a ** (m - k) * self.base.moment(k) for k in range(m + 1)
        )

    def uniform_count(self) -> int:
        return self.base.uniform_count()

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        return self.base.from_uniforms(u) + self.a

    def __repr__(self):
        return f"Shifted({self.base!r}, a={self.a})"


class Scaled(RadialModel):
    """Base weight stretched by s > 0: density r -> base(r / s)."""

    def __init__(self, base: RadialModel, s: float):
        if s <= 0:
            raise ValueError("scale must be positive")
        if base.dimension != 1:
            raise ValueError("scaling applies to one-dimensional models")
        self.base = base
        self.s = float(s)

    def moment(self, m: int) -> float:
        return self.s**m * self.base.moment(m)

    def uniform_count(self) -> int:
        return self.base.uniform_count()

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        return self.s * self.base.from_uniforms(u)

    def __repr__(self):
        return f"Scaled({self.base!r}, s={self.s})"


class FromSequence(RadialModel):
    """Moments-only model backed by a certified MomentSequence; not sampleable."""

    def __init__(self, seq: MomentSequence):
        self.seq = seq

    def moment(self, m: int) -> float:
        if m > self.seq.top:
            raise ValueError(f"sequence holds moments only up to order {self.seq.top}")
        return float(self.seq.values[m])

    def __repr__(self):
        return f"FromSequence(top={self.seq.top})"


class ProductModel:
    """Product of one-dimensional weights; moments factor exactly."""

    def __init__(self, factors: Sequence[RadialModel]):
        factors = list(factors)
        if not factors:
            raise ValueError("need at least one factor")
        if any(f.dimension != 1 for f in factors):
            raise ValueError("factors must be one-dimensional")
        self.factors = factors

    @property
    def dimension(self) -> int:
        return len(self.factors)

    def moment_multi(self, m: MultiIndex) -> float:
        return math.prod(f.moment(e) for f, e in zip(self.factors, m))

    def __repr__(self):
        return f"ProductModel({self.factors!r})"


def radial_moment(model, m) -> float:
    """Normalized moment <r_1^{m_1} ... r_N^{m_N}> of a radial model."""
    if isinstance(model, ProductModel):
        idx = as_index(m, model.dimension)
        return model.moment_multi(idx)
    idx = as_index(m, 1)
    return model.moment(idx[0])


def representing_measure(seq: MomentSequence, n: int | None = None) -> DiscreteMeasure:
    """Discrete measure with n nodes reproducing s_0..s_{2n-1} exactly.

    Runs the moment-to-recurrence (Chebyshev) algorithm in exact rational
    arithmetic, then diagonalizes the resulting symmetric tridiagonal
    (Jacobi) matrix; nodes are its eigenvalues and weights the squared
    first eigenvector components.  The reconstruction is verified against
    the input moments to 1e-10 relative before returning.
    """
    avail = (seq.top + 1) // 2
    n = avail if n is None else int(n)
    if n < 1 or n > avail:
        raise ValueError(f"node count must be in 1..{avail} for this sequence")
    mom = list(seq.values[: 2 * n])

    alpha: list[Fraction] = [mom[1] / mom[0]]
    beta: list[Fraction] = []
    sigma_prev = {l: Fraction(0) for l in range(2 * n)}
    sigma = {l: mom[l] for l in range(2 * n)}
    for k in range(1, n):
        nxt: dict[int, Fraction] = {}
        for l in range(k, 2 * n - k):
            nxt[l] = (
                sigma[l + 1]
                - alpha[k - 1] * sigma[l]
                - (beta[k - 2] if k >= 2 else Fraction(0)) * sigma_prev[l]
            )
        if nxt[k] <= 0:
            raise SingularHankelError(
                f"recurrence coefficient beta_{k} not positive; sequence nearly degenerate"
            )
        alpha.append(nxt[k + 1] / nxt[k] - sigma[k] / sigma[k - 1])
        beta.append(nxt[k] / sigma[k - 1])
        sigma_prev, sigma = sigma, nxt

    diag = np.array([float(a) for a in alpha])
    off = np.array([math.sqrt(float(b)) for b in beta])
    try:
        nodes, vecs = eigh_tridiagonal(diag, off)
    except np.linalg.LinAlgError as exc:
        raise SingularHankelError(f"Jacobi matrix diagonalization failed: {exc}") from exc
    weights = vecs[0, :] ** 2
    order = np.argsort(nodes)
    nodes, weights = nodes[order], weights[order]
    if np.any(nodes < 0):
        nodes = np.where(np.abs(nodes) < 1e-13, 0.0, nodes)
    measure = DiscreteMeasure(nodes, weights)

    for m in range(2 * n):
        ref = float(seq.values[m])
        got = measure.moment(m)
        if abs(got - ref) > MOMENT_TOL * max(1.0, abs(ref)):
            raise SingularHankelError(
                f"reconstructed moment {m} off by {abs(got - ref):.3e}; sequence too ill-conditioned"
            )
    return measure


@dataclass(frozen=True)
class DominanceReport:
    """Outcome of the momentwise bound |<x^m>_c| <= <r^m>_p up to a degree cutoff."""

    passed: bool
    first_failure: MultiIndex | None
    margin: float
    checked: int

    def to_jsonable(self) -> dict:
        return {
            "pass": self.passed,
            "first_failure": list(self.first_failure) if self.first_failure else None,
            "margin": self.margin,
            "checked": self.checked,
        }


def dominance_check(table, model, cutoff: int) -> DominanceReport:
    """Check <r^m>_p >= |<x^m>_c| for every multi-index of total degree <= cutoff.

    The reported margin is the minimum slack over indices of degree >= 1
    (the zero index is an exact tie by normalization).
    """
    first = None
    margin = math.inf
    checked = 0
    for m in multi_indices(table.dimension, cutoff):
        checked += 1
        lhs = abs(table.value(m))
        rhs = radial_moment(model, m)
        if sum(m) >= 1:
            margin = min(margin, rhs - lhs)
        if lhs > rhs and first is None:
            first = m
    if checked == 1:
        margin = 0.0
    return DominanceReport(first is None, first, float(margin), checked)


def shift_model(model: RadialModel, a: float) -> Shifted:
    """Push weight out to larger radii; every moment of order >= 1 strictly grows."""
    return Shifted(model, a)


@dataclass(frozen=True)
class GrowthReport:
    """Infimum of <r^m> / R^m over m <= mmax, with a decaying-trend flag."""

    infimum: float
    argmin: int
    decaying: bool

    @property
    def passed(self) -> bool:
        return self.infimum > 0 and not self.decaying


def growth_check(model: RadialModel, radius: float, mmax: int) -> GrowthReport:
    """Estimate the uniform lower-bound constant for <r^m> >= b R^m.

    A ratio sequence still decreasing at mmax signals the bound fails for
    this radius; callers should treat that as failure.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    ratios = [model.moment(m) / radius**m for m in range(mmax + 1)]
    argmin = int(np.argmin(ratios))
    decaying = argmin == mmax and mmax >= 1 and ratios[mmax] < ratios[mmax - 1]
    return GrowthReport(float(ratios[argmin]), argmin, decaying)
