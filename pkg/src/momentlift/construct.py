"""Build the non-negative density on C^N that reproduces a complex moment table.

In polar coordinates z_j = r_j exp(i theta_j) the density factorizes into a
radial part, the dominating weight evaluated at r / lambda, and an angular
part s(theta), a truncated trigonometric series whose coefficients are the
table moments divided by lambda^|m| times the radial moments.  Dominance
makes every coefficient magnitude at most lambda^{-|m|}, so for lambda above
a dimension-dependent threshold the angular series is certifiably positive,
and integrating the density reproduces every table moment exactly, mode by
mode, regardless of the truncation degree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .indices import MultiIndex, as_index, count_at_degree, degree, multi_indices
from .radial import DominanceReport, dominance_check, radial_moment
from .weights import ComplexMomentTable

DEFAULT_MARGIN = 1.05
TAIL_FRACTION = 0.25


class DominanceError(ValueError):
    """The radial model does not dominate the table; the construction is refused."""


class SeriesDivergenceError(RuntimeError):
    """A power series failed to converge at the requested point."""


class PositivityError(RuntimeError):
    """The angular series dipped below its certified floor; invariants are broken."""


class CutoffError(ValueError):
    """Requested degree exceeds the stored series cutoff."""


def lambda_min(dim: int) -> float:
    """Positivity threshold 1 / (1 - (2/3)^(1/N)); exactly 3 in one dimension."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if dim == 1:
        return 3.0
    return 1.0 / -math.expm1(math.log(2.0 / 3.0) / dim)


def s_lower_bound(lam: float, dim: int) -> float:
    """Analytic floor 3 - 2 (lambda / (lambda - 1))^N of the angular density."""
    if lam <= 1:
        raise ValueError("lambda must exceed 1")
    return 3.0 - 2.0 * (lam / (lam - 1.0)) ** dim


def tail_bound(lam: float, dim: int, cutoff: int) -> float:
    """Upper bound on the sup-norm effect of dropping all modes above the cutoff.

    Sums 2 * count(N, d) * lambda^-d over degrees d > cutoff; the remainder
    past the summed range is capped geometrically so the result stays a
    rigorous upper bound.
    """
    if lam <= 1:
        raise ValueError("lambda must exceed 1")
    x = 1.0 / lam
    d = cutoff + 1
    term = count_at_degree(dim, d) * x**d
    total = 0.0
    while True:
        total += term
        d += 1
        ratio = x * (d + dim - 1) / d
        nxt = term * ratio
        if ratio < 1.0 and nxt < 1e-17 * max(total, 1e-300):
            total += nxt / (1.0 - ratio)
            break
        if d > cutoff + 100000:
            raise RuntimeError("tail bound failed to converge; lambda too close to 1")
        term = nxt
    return 2.0 * total


def choose_cutoff(lam: float, dim: int, at_least: int = 0, fraction: float = TAIL_FRACTION) -> int:
    """Smallest cutoff whose truncation tail is below ``fraction`` of the positivity floor."""
    floor = s_lower_bound(lam, dim)
    if floor <= 0:
        raise ValueError(f"lambda={lam} is below the positivity threshold for N={dim}")
    d = at_least
    while tail_bound(lam, dim, d) >= fraction * floor:
        d += 1
        if d > 10000:
            raise RuntimeError("no practical cutoff reaches the requested tail fraction")
    return d


@dataclass(frozen=True)
class LambdaChoice:
    """A decay rate valid for the positivity construction in the given dimension."""

    value: float
    dimension: int
    margin_factor: float = DEFAULT_MARGIN

    def __post_init__(self):
        if self.margin_factor < 1.0:
            raise ValueError("margin factor must be >= 1")
        floor = self.margin_factor * lambda_min(self.dimension)
        if self.value < floor * (1.0 - 1e-12):
            raise ValueError(
                f"lambda={self.value} below margin*threshold={floor} for N={self.dimension}"
            )

    @classmethod
    def default(cls, dim: int, margin_factor: float = DEFAULT_MARGIN) -> "LambdaChoice":
        return cls(margin_factor * lambda_min(dim), dim, margin_factor)


@dataclass
class AngularSeries:
    """Truncated angular coefficients gamma_m = <x^m>_c / (lambda^|m| <r^m>_p).

    Immutable after construction; evaluation arrays for the nonzero
    coefficients are precomputed.
    """

    dimension: int
    cutoff: int
    lam: float
    coefficients: Mapping[MultiIndex, complex]

    def __post_init__(self):
        zero = (0,) * self.dimension
        if abs(self.coefficients.get(zero, 0) - 1) > 1e-14:
            raise ValueError("zero-index coefficient must be 1")
        live = [(m, g) for m, g in self.coefficients.items() if m != zero and g != 0]
        self._idx = np.array([m for m, _ in live], dtype=np.int64).reshape(len(live), self.dimension)
        self._coef = np.array([g for _, g in live], dtype=complex)
        self._tail = tail_bound(self.lam, self.dimension, self.cutoff)

    def gamma(self, m) -> complex:
        idx = as_index(m, self.dimension)
        if degree(idx) > self.cutoff:
            raise CutoffError(f"degree {degree(idx)} above series cutoff {self.cutoff}")
        return complex(self.coefficients.get(idx, 0j))

    def envelope(self) -> float:
        """Sup bound 1 + 2 sum |gamma_m| on the angular density."""
        return float(1.0 + 2.0 * np.abs(self._coef).sum())

    @property
    def tail(self) -> float:
        return self._tail

    def to_jsonable(self) -> dict:
        rows = [
            {"index": list(m), "re": g.real, "im": g.imag}
            for m, g in sorted(self.coefficients.items())
        ]
        return {
            "dimension": self.dimension,
            "cutoff": self.cutoff,
            "lambda": self.lam,
            "coefficients": rows,
        }

    @classmethod
    def from_jsonable(cls, data: dict) -> "AngularSeries":
        coeffs = {
            tuple(row["index"]): complex(row["re"], row["im"]) for row in data["coefficients"]
        }
        return cls(data["dimension"], data["cutoff"], data["lambda"], coeffs)


def build_angular(
    table: ComplexMomentTable, model, lam: LambdaChoice, cutoff: int | None = None
) -> AngularSeries:
    """Angular coefficients for all indices of degree <= cutoff.

    Refuses to build unless the model dominates the table up to the cutoff;
    dominance also guarantees |gamma_m| <= lambda^-|m|, which is re-checked
    as a guard against inconsistent inputs.
    """
    if lam.dimension != table.dimension:
        raise ValueError("lambda choice and table dimensions differ")
    cutoff = table.cutoff if cutoff is None else int(cutoff)
    if cutoff > table.cutoff:
        raise CutoffError(f"table only covers degree {table.cutoff}")
    report = dominance_check(table, model, cutoff)
    if not report.passed:
        raise DominanceError(
            f"model does not dominate the table: first failure at {report.first_failure}, "
            f"margin {report.margin:.3e}"
        )
    coeffs: dict[MultiIndex, complex] = {}
    for m in multi_indices(table.dimension, cutoff):
        d = degree(m)
        g = table.value(m) / (lam.value**d * radial_moment(model, m))
        if abs(g) > lam.value ** (-d) * (1.0 + 1e-9):
            raise ValueError(f"coefficient bound violated at {m}: |gamma| = {abs(g):.3e}")
        coeffs[m] = g
    return AngularSeries(table.dimension, cutoff, lam.value, coeffs)


def s_eval(series: AngularSeries, theta) -> float | np.ndarray:
    """Angular density 1 + 2 Re sum_m gamma_m exp(-i m . theta).

    ``theta`` is one angle vector or an array of them (last axis = dimension).
    A value below the negative truncation tail means the dominance-certified
    coefficient bounds were violated upstream, which is a hard error.
    """
    th = np.asarray(theta, dtype=float)
    single = th.ndim == 1
    pts = th.reshape(-1, series.dimension)
    q = np.zeros(pts.shape[0], dtype=complex)
    if series._coef.size:
        w = np.exp(-1j * pts)  # (K, N)
        maxdeg = series._idx.max(axis=0)
        powers = []
        for j in range(series.dimension):
            p = np.empty((maxdeg[j] + 1, pts.shape[0]), dtype=complex)
            p[0] = 1.0
            for e in range(1, maxdeg[j] + 1):
                p[e] = p[e - 1] * w[:, j]
            powers.append(p)
        for coef, m in zip(series._coef, series._idx):
            term = np.full(pts.shape[0], coef, dtype=complex)
            for j in range(series.dimension):
                if m[j]:
                    term *= powers[j][m[j]]
            q += term
    s = 1.0 + 2.0 * q.real
    if np.any(np.isnan(s)):
        raise PositivityError("angular density evaluated to NaN")
    if float(s.min(initial=np.inf)) < -series.tail:
        raise PositivityError(
            f"angular density {s.min():.6e} below -tail {-series.tail:.3e}; invariants broken"
        )
    return float(s[0]) if single else s.reshape(th.shape[:-1])


@dataclass(frozen=True)
class PositivityCertificate:
    """Grid evidence that the truncated angular density stays positive."""

    s_lower: float
    tail: float
    grid_min: float
    grid_max: float
    points: int
    ok: bool

    def to_jsonable(self) -> dict:
        return {
            "s_lower_bound": self.s_lower,
            "tail_bound": self.tail,
            "grid_min": self.grid_min,
            "grid_max": self.grid_max,
            "grid_points": self.points,
            "ok": self.ok,
        }


def positivity_certificate(series: AngularSeries, grid_points: int = 10_000) -> PositivityCertificate:
    """Scan a dense uniform torus grid and compare against the analytic floor."""
    dim = series.dimension
    per_dim = max(2, math.ceil(grid_points ** (1.0 / dim)))
    axis = np.linspace(0.0, 2.0 * math.pi, per_dim, endpoint=False)
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    vals = s_eval(series, mesh)
    lower = s_lower_bound(series.lam, dim)
    gmin = float(np.min(vals))
    gmax = float(np.max(vals))
    ok = gmin >= lower - series.tail - 1e-12 and gmin > 0.0
    return PositivityCertificate(lower, series.tail, gmin, gmax, mesh.shape[0], ok)


def _lam_value(lam) -> float:
    return lam.value if isinstance(lam, LambdaChoice) else float(lam)


def f_lambda(model, lam, y: complex, tol: float = 1e-12, max_terms: int = 2000) -> complex:
    """Power series sum_m y^m / (lambda^m <r^m>), truncated with certified remainder.

    Convergence at y is guaranteed when the model's moments grow at least
    geometrically past |y| / lambda; growing partial-sum terms raise a
    divergence error instead of returning garbage.
    """
    lv = _lam_value(lam)
    total = 0j
    term = 1.0 + 0j
    prev_mag = 1.0
    streak = 0
    for m in range(max_terms):
        if m > 0:
            ratio_moment = model.moment(m - 1) / model.moment(m)
            term = term * y / lv * ratio_moment
        total += term
        mag = abs(term)
        if mag == 0.0:
            return total
        if m > 0:
            q = mag / prev_mag
            if q < 1.0:
                streak += 1
                if streak >= 3 and mag * q / (1.0 - q) < tol * max(1.0, abs(total)):
                    return total
            else:
                streak = 0
                if mag > 1e12:
                    raise SeriesDivergenceError(f"series terms growing at m={m}; |y|={abs(y)}")
        prev_mag = mag
    raise SeriesDivergenceError(
        f"series failed to certify a remainder below {tol} within {max_terms} terms"
    )


@dataclass
class TDensity:
    """The assembled density: radial weight at r / lambda times the angular series.

    The normalization constant is analytic: with the radial weight carrying
    unit mass, the total integral is (2 pi lambda)^N because the angular
    zero mode is 1.
    """

    radial: object
    angular: AngularSeries
    lam: LambdaChoice

    @property
    def dimension(self) -> int:
        return self.angular.dimension

    @property
    def norm_constant(self) -> float:
        return (2.0 * math.pi * self.lam.value) ** self.dimension


def build_tdensity(
    table: ComplexMomentTable,
    model,
    lam: LambdaChoice | None = None,
    cutoff: int | None = None,
    margin_factor: float = DEFAULT_MARGIN,
) -> TDensity:
    """Full pipeline step: pick lambda, pick a positivity-certified cutoff, build the series."""
    lam = lam or LambdaChoice.default(table.dimension, margin_factor)
    needed = choose_cutoff(lam.value, table.dimension)
    if cutoff is None:
        cutoff = max(needed, table.cutoff)
    if cutoff > table.cutoff:
        raise CutoffError(
            f"need series degree {cutoff} for certified positivity but table stops at {table.cutoff}"
        )
    if cutoff < needed:
        raise CutoffError(f"cutoff {cutoff} leaves tail above the certified fraction; need {needed}")
    series = build_angular(table, model, lam, cutoff)
    return TDensity(model, series, lam)


def t_moment_roundtrip(t: TDensity, m) -> complex:
    """Moment of the constructed density, integrated analytically.

    The angular integral picks out gamma_m and the radial integral gives
    lambda^|m| <r^m>, so the product must reproduce the table entry
    exactly; this is the zero-sample verification of moment equality.
    """
    idx = as_index(m, t.dimension)
    d = degree(idx)
    if d > t.angular.cutoff:
        raise CutoffError(f"degree {d} above stored cutoff {t.angular.cutoff}")
    return t.lam.value**d * radial_moment(t.radial, idx) * t.angular.gamma(idx)
