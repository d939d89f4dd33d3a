"""Complex-valued weights on R^N and their normalized moments.

A weight is a complex integrand c(x) with nonzero total integral, used only
through its normalized moments <x^m> = (int x^m c) / (int c).  Closed-form
families (pure Gaussian phase, harmonic mode weights) get analytic moments;
oscillatory families go through a contour-rotated quadrature oracle: each
coordinate integral is rotated to a ray exp(i*phi)*y on which the integrand
decays, which leaves the moments unchanged while making the integrals
absolutely convergent.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

import numpy as np

from .indices import MultiIndex, as_index, degree, multi_indices
from .quadrature import QuadratureError, moment_integrals

DEFAULT_TOL_1D = 1e-9
DEFAULT_TOL_ND = 1e-7
NORM_FLOOR = 1e-12


class RotationDecayError(ValueError):
    """The rotated integrand does not decay at infinity for the given angle."""


class NormalizationError(RuntimeError):
    """|Z_c| fell below the cancellation floor; the normalization is ill-posed."""


def _dfact(n: int) -> int:
    # (n)!! for odd n >= -1
    out = 1
    for k in range(n, 1, -2):
        out *= k
    return out


def _gauss_beta_moment(beta: complex, m: int) -> complex:
    """Normalized moment <x^m> of exp(-beta x^2) on R; Re beta >= 0, beta != 0."""
    if m % 2:
        return 0j
    k = m // 2
    return _dfact(2 * k - 1) / (2 * beta) ** k


def gaussian_moment(a: float, m: int) -> complex:
    """Normalized <x^m> for the pure phase weight exp(i a x^2), a a nonzero real.

    Odd moments vanish by symmetry; even moments follow the Fresnel-type
    closed form (2k-1)!! / (2(-i a))^k for m = 2k.
    """
    if a == 0:
        raise ValueError("gaussian phase coefficient must be nonzero")
    if m < 0:
        raise ValueError("moment order must be non-negative")
    return _gauss_beta_moment(-1j * a, m)


# --------------------------------------------------------------------------
# weight specifications


@dataclass(frozen=True)
class OscillatorParams:
    """Single-oscillator lattice parameters: mass, coupling, spacing, slice count."""

    mu: float
    kappa: float
    delta: float
    slices: int

    def __post_init__(self):
        if self.mu <= 0 or self.kappa <= 0 or self.delta <= 0:
            raise ValueError("mu, kappa and delta must all be positive")
        if self.slices < 1:
            raise ValueError("need at least one time slice")


def _as_coeffs(value, name: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        value = (float(value),)
    return tuple(float(v) for v in value)


@dataclass(frozen=True)
class GaussianPhase:
    """Weight exp(i sum_j a_j x_j^2) with nonzero real coefficients a_j."""

    a: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a", _as_coeffs(self.a, "a"))
        if any(v == 0 for v in self.a):
            raise ValueError("gaussian phase coefficients must be nonzero")

    @property
    def dimension(self) -> int:
        return len(self.a)


@dataclass(frozen=True)
class QuarticPhase:
    """Weight exp(-i sum_j g_j x_j^4) with positive couplings g_j."""

    g: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "g", _as_coeffs(self.g, "g"))
        if any(v <= 0 for v in self.g):
            raise ValueError("quartic couplings must be positive")

    @property
    def dimension(self) -> int:
        return len(self.g)


@dataclass(frozen=True)
class AnharmonicLattice:
    """Periodic-time quartic oscillator weight; one coordinate per time slice."""

    params: OscillatorParams

    @property
    def dimension(self) -> int:
        return self.params.slices


@dataclass(frozen=True)
class HarmonicFourier:
    """Harmonic lattice oscillator in Fourier-mode coordinates (a_0..a_M, b_1..b_M).

    The mass carries a small positive imaginary part ``epsilon`` so every
    mode weight is integrable; slices must be odd (T = 2M + 1).
    """

    params: OscillatorParams
    epsilon: float
    omega_convention: str = "fractional"

    def __post_init__(self):
        if self.params.slices % 2 == 0:
            raise ValueError("harmonic Fourier weights need an odd number of slices")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.omega_convention not in ("fractional", "literal"):
            raise ValueError("omega_convention must be 'fractional' or 'literal'")

    @property
    def dimension(self) -> int:
        return self.params.slices


# ComplexMomentTable is defined below; Tabulated references it lazily.
@dataclass(frozen=True)
class Tabulated:
    """Externally supplied normalized moments."""

    table: "ComplexMomentTable"

    @property
    def dimension(self) -> int:
        return self.table.dimension


WeightSpec = Union[GaussianPhase, QuarticPhase, AnharmonicLattice, HarmonicFourier, Tabulated]


@dataclass(frozen=True)
class ComplexMomentTable:
    """Normalized moments <x^m> of a complex weight, complete up to a degree cutoff."""

    dimension: int
    cutoff: int
    entries: Mapping[MultiIndex, complex]
    abs_norm: float = 1.0
    provenance: Mapping[MultiIndex, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.cutoff < 0:
            raise ValueError("cutoff must be >= 0")
        if self.abs_norm <= 0:
            raise ValueError("|Z_c| must be positive")
        zero = (0,) * self.dimension
        if zero not in self.entries or self.entries[zero] != 1:
            raise ValueError("normalized table must contain entry 1 at the zero index")
        missing = [m for m in multi_indices(self.dimension, self.cutoff) if m not in self.entries]
        if missing:
            raise ValueError(f"table missing entries up to degree {self.cutoff}: {missing[:4]} ...")
        for m, v in self.entries.items():
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"non-finite moment at {m}")

    def value(self, m) -> complex:
        return complex(self.entries[as_index(m, self.dimension)])

    def magnitudes_1d(self, up_to: int | None = None) -> list[float]:
        """|<x^m>| for m = 0..up_to; only for one-dimensional tables."""
        if self.dimension != 1:
            raise ValueError("magnitudes_1d needs a one-dimensional table")
        top = self.cutoff if up_to is None else up_to
        return [abs(self.value((m,))) for m in range(top + 1)]


# --------------------------------------------------------------------------
# symmetry and rotation geometry


def spec_dimension(spec: WeightSpec) -> int:
    return spec.dimension


def is_separable(spec: WeightSpec) -> bool:
    return isinstance(spec, (GaussianPhase, QuarticPhase, HarmonicFourier))


def forced_zero(spec: WeightSpec, m: MultiIndex) -> bool:
    """True when a sign-flip symmetry of the weight forces <x^m> = 0 exactly."""
    if is_separable(spec):
        return any(e % 2 for e in m)
    if isinstance(spec, AnharmonicLattice):
        return degree(m) % 2 == 1
    return False


def default_rotation(spec: WeightSpec) -> float:
    """Rotation angle giving decay at infinity for the given closed-form weight."""
    if isinstance(spec, GaussianPhase):
        signs = {v > 0 for v in spec.a}
        if len(signs) > 1:
            raise RotationDecayError(
                "gaussian phase with mixed-sign coefficients has no single decaying angle"
            )
        return math.pi / 4 if signs.pop() else -math.pi / 4
    if isinstance(spec, (QuarticPhase, AnharmonicLattice)):
        return -math.pi / 8
    raise ValueError(f"no rotation defined for {type(spec).__name__}")


def _check_decay(spec: WeightSpec, phi: float) -> None:
    if isinstance(spec, GaussianPhase):
        s = math.sin(2 * phi)
        bad = [a for a in spec.a if a * s <= 0]
        if bad:
            raise RotationDecayError(
                f"exp(i a x^2) does not decay on the ray angle {phi:.6f} for a={bad[0]}"
            )
    elif isinstance(spec, (QuarticPhase, AnharmonicLattice)):
        if math.sin(4 * phi) >= 0:
            raise RotationDecayError(
                f"quartic term does not decay on the ray angle {phi:.6f}; need sin(4*phi) < 0"
            )
    else:
        raise ValueError(f"no rotated contour for {type(spec).__name__}")


def _padded_width(solve_l2: float, max_degree: int) -> float:
    # inflate for the monomial factor y^m under the decaying envelope
    width = math.sqrt(solve_l2)
    return 1.15 * math.sqrt(solve_l2 + max_degree * math.log(max(width, 2.0)) / 1.0)


def _half_width(spec: WeightSpec, phi: float, max_degree: int) -> float:
    target = 50.0
    if isinstance(spec, GaussianPhase):
        rate = min(a * math.sin(2 * phi) for a in spec.a)
        l2 = target / rate
        for _ in range(3):
            l2 = (target + max_degree * math.log(max(math.sqrt(l2), 2.0))) / rate
        return 1.15 * math.sqrt(l2)
    if isinstance(spec, QuarticPhase):
        c4 = min(spec.g) * (-math.sin(4 * phi))
        l4 = target / c4
        for _ in range(3):
            l4 = (target + max_degree * math.log(max(l4**0.25, 2.0))) / c4
        return 1.15 * l4**0.25
    if isinstance(spec, AnharmonicLattice):
        p = spec.params
        c4 = p.kappa * p.delta * (-math.sin(4 * phi))
        c2 = max(0.0, -math.sin(2 * phi)) * 2.0 * p.mu / p.delta
        t = target
        for _ in range(4):
            l2 = (c2 + math.sqrt(c2 * c2 + 4 * c4 * t)) / (2 * c4)
            t = target + max_degree * math.log(max(math.sqrt(l2), 2.0))
        return 1.15 * math.sqrt(l2)
    raise ValueError(f"no contour geometry for {type(spec).__name__}")


def anharmonic_phase(params: OscillatorParams, x: np.ndarray) -> np.ndarray:
    """Lattice action phase: sum_t [ mu (x_t - x_{t+1})^2 / (2 delta) - kappa x_t^4 delta ].

    Periodic in t (x_{T+1} = x_1); accepts real or complex x with the slice
    axis last.
    """
    x = np.asarray(x)
    dx = x - np.roll(x, -1, axis=-1)
    kin = params.mu * (dx * dx).sum(axis=-1) / (2.0 * params.delta)
    quart = params.kappa * params.delta * (x**4).sum(axis=-1)
    return kin - quart


def _rotated_integrand(spec: WeightSpec, phi: float) -> Callable[[np.ndarray], np.ndarray]:
    rot = cmath.exp(1j * phi)
    if isinstance(spec, GaussianPhase):
        coeff = np.array([1j * a * rot * rot for a in spec.a])

        def f(y: np.ndarray) -> np.ndarray:
            return np.exp((y * y) @ coeff)

        return f
    if isinstance(spec, QuarticPhase):
        coeff = np.array([-1j * g * rot**4 for g in spec.g])

        def f(y: np.ndarray) -> np.ndarray:
            return np.exp((y**4) @ coeff)

        return f
    if isinstance(spec, AnharmonicLattice):
        params = spec.params

        def f(y: np.ndarray) -> np.ndarray:
            return np.exp(1j * anharmonic_phase(params, rot * y))

        return f
    raise ValueError(f"no rotated integrand for {type(spec).__name__}")


# --------------------------------------------------------------------------
# the quadrature oracle


def _default_tol(dim: int) -> float:
    return DEFAULT_TOL_1D if dim == 1 else DEFAULT_TOL_ND


def _sep_factors(spec: WeightSpec) -> list[WeightSpec | complex]:
    """Per-dimension description of a separable weight.

    Gaussian-type factors are returned as the complex coefficient beta of
    exp(-beta x^2); quartic factors as one-dimensional QuarticPhase specs.
    """
    if isinstance(spec, GaussianPhase):
        return [-1j * a for a in spec.a]
    if isinstance(spec, QuarticPhase):
        return [QuarticPhase((g,)) for g in spec.g]
    if isinstance(spec, HarmonicFourier):
        coeffs = harmonic_mode_coefficients(spec.params, spec.epsilon, spec.omega_convention)
        m_top = (spec.params.slices - 1) // 2
        betas = [-1j * coeffs[k] for k in range(m_top + 1)]
        betas += [-1j * coeffs[k] for k in range(1, m_top + 1)]
        return betas
    raise ValueError("not separable")


def harmonic_mode_coefficients(
    params: OscillatorParams, epsilon: float = 0.0, omega_convention: str = "fractional"
) -> np.ndarray:
    """Quadratic mode coefficients s_k = (2 mu / delta)(1 - cos w_k) - kappa delta.

    ``omega_convention`` selects w_k = 2 pi k / T ("fractional") or w_k = k
    ("literal"); an ``epsilon`` adds a positive imaginary part to the mass.
    """
    t_slices = params.slices
    m_top = (t_slices - 1) // 2
    k = np.arange(m_top + 1, dtype=float)
    if omega_convention == "fractional":
        omega = 2.0 * math.pi * k / t_slices
    elif omega_convention == "literal":
        omega = k
    else:
        raise ValueError("omega_convention must be 'fractional' or 'literal'")
    mass = params.mu + 1j * epsilon
    return (2.0 * mass / params.delta) * (1.0 - np.cos(omega)) - params.kappa * params.delta


def _beta_norm(beta: complex) -> float:
    # |int exp(-beta x^2) dx| on R
    return math.sqrt(math.pi / abs(beta))


def _quartic_1d(g: float, degrees: list[int], phi: float, tol: float) -> tuple[dict[int, complex], float]:
    spec1 = QuarticPhase((g,))
    _check_decay(spec1, phi)
    half = _half_width(spec1, phi, max(degrees, default=0))
    wanted = sorted({0, *[d for d in degrees if d % 2 == 0]})
    idx = [(d,) for d in wanted]
    vals, absint, _ = moment_integrals(_rotated_integrand(spec1, phi), 1, half, idx, tol)
    z = vals[(0,)]
    if abs(z) < NORM_FLOOR * absint:
        raise NormalizationError("|Z| below cancellation floor for quartic factor")
    rot = cmath.exp(1j * phi)
    out: dict[int, complex] = {}
    for d in degrees:
        out[d] = 0j if d % 2 else rot**d * vals[(d,)] / z
    return out, abs(z)


def oscillatory_moment(
    spec: WeightSpec,
    m,
    rotation_angle: float | None = None,
    tol: float | None = None,
) -> complex:
    """Normalized moment <x^m>_c computed on a rotated contour.

    The rotation angle defaults to the decaying choice for the weight family
    and is rejected if the rotated integrand fails to decay.  Accuracy is
    ``tol`` relative to max(|moment|, 1).
    """
    dim = spec_dimension(spec)
    idx = as_index(m, dim)
    table = build_moment_table(spec, degree(idx), tol=tol, rotation_angle=rotation_angle)
    return table.value(idx)


def weight_norm(spec: WeightSpec, rotation_angle: float | None = None, tol: float | None = None) -> float:
    """|Z_c|, the magnitude of the weight's total integral."""
    dim = spec_dimension(spec)
    return build_moment_table(spec, 0, tol=tol, rotation_angle=rotation_angle).abs_norm


def build_moment_table(
    spec: WeightSpec,
    cutoff: int,
    tol: float | None = None,
    rotation_angle: float | None = None,
) -> ComplexMomentTable:
    """Materialize every normalized moment of total degree <= cutoff.

    Symmetry-forced zeros are written exactly; separable weights are reduced
    to per-dimension factors; the lattice weight goes through the rotated
    tensor quadrature.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    dim = spec_dimension(spec)

    if isinstance(spec, Tabulated):
        src = spec.table
        if cutoff > src.cutoff:
            raise ValueError(f"tabulated weight only covers degree {src.cutoff}")
        entries = {m: src.value(m) for m in multi_indices(dim, cutoff)}
        prov = {m: "tabulated" for m in entries}
        return ComplexMomentTable(dim, cutoff, entries, src.abs_norm, prov)

    tol = _default_tol(dim) if tol is None else float(tol)

    if is_separable(spec):
        factors = _sep_factors(spec)
        per_dim: list[dict[int, complex]] = []
        norm = 1.0
        used_quadrature = False
        for fac in factors:
            degrees = list(range(cutoff + 1))
            if isinstance(fac, complex):
                per_dim.append({d: _gauss_beta_moment(fac, d) for d in degrees})
                norm *= _beta_norm(fac)
            else:
                phi = rotation_angle if rotation_angle is not None else default_rotation(fac)
                mom, z = _quartic_1d(fac.g[0], degrees, phi, tol)
                per_dim.append(mom)
                norm *= z
                used_quadrature = True
        entries: dict[MultiIndex, complex] = {}
        prov: dict[MultiIndex, str] = {}
        for idx in multi_indices(dim, cutoff):
            if forced_zero(spec, idx):
                entries[idx] = 0j
                prov[idx] = "symmetry"
            else:
                entries[idx] = math.prod(
                    (per_dim[j][e] for j, e in enumerate(idx)), start=1 + 0j
                )
                prov[idx] = "quadrature" if used_quadrature else "analytic"
        return ComplexMomentTable(dim, cutoff, entries, norm, prov)

    if isinstance(spec, AnharmonicLattice):
        phi = rotation_angle if rotation_angle is not None else default_rotation(spec)
        _check_decay(spec, phi)
        half = _half_width(spec, phi, cutoff)
        zero = (0,) * dim
        wanted = [idx for idx in multi_indices(dim, cutoff) if not forced_zero(spec, idx)]
        if zero not in wanted:
            wanted.insert(0, zero)
        vals, absint, _ = moment_integrals(_rotated_integrand(spec, phi), dim, half, wanted, tol)
        z = vals[zero]
        if abs(z) < NORM_FLOOR * absint:
            raise NormalizationError("|Z_c| below cancellation floor; normalization ill-posed")
        rot = cmath.exp(1j * phi)
        entries = {}
        prov = {}
        for idx in multi_indices(dim, cutoff):
            if forced_zero(spec, idx):
                entries[idx] = 0j
                prov[idx] = "symmetry"
            elif idx == zero:
                entries[idx] = 1 + 0j
                prov[idx] = "quadrature"
            else:
                entries[idx] = rot ** degree(idx) * vals[idx] / z
                prov[idx] = "quadrature"
        return ComplexMomentTable(dim, cutoff, entries, abs(z), prov)

    raise ValueError(f"cannot build moments for {type(spec).__name__}")
