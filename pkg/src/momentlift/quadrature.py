"""Adaptive tensor-product Gauss-Legendre quadrature for smooth decaying integrands.

Used for weight integrals after contour rotation: the rotated integrand is
entire and absolutely integrable, so nested Gauss-Legendre levels converge
spectrally and the difference between successive levels is a usable error
estimate.  Monomial moments are contracted against the cached weight grid
with einsum, so memory stays at one complex grid regardless of how many
moments are requested.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .indices import MultiIndex

_SCHEDULES: dict[int, tuple[int, ...]] = {
    1: (64, 128, 256, 512, 1024, 2048),
    2: (32, 48, 72, 108, 162, 243),
    3: (24, 36, 54, 81, 122),
}

_EINSUM = {1: "i,i->", 2: "ij,i,j->", 3: "ijk,i,j,k->"}

_CHUNK = 1 << 18


class QuadratureError(RuntimeError):
    """Quadrature failed to reach the requested tolerance within the node budget."""


@lru_cache(maxsize=None)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _weight_grid(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, dim: int) -> np.ndarray:
    """Evaluate f on the tensor grid of x, chunked to bound peak memory."""
    mesh = np.stack(np.meshgrid(*([x] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    out = np.empty(mesh.shape[0], dtype=complex)
    for lo in range(0, mesh.shape[0], _CHUNK):
        out[lo:lo + _CHUNK] = f(mesh[lo:lo + _CHUNK])
    return out.reshape((len(x),) * dim)


def moment_integrals(
    f: Callable[[np.ndarray], np.ndarray],
    dim: int,
    half_width: float,
    indices: Sequence[MultiIndex],
    tol: float,
    schedule: Sequence[int] | None = None,
) -> tuple[dict[MultiIndex, complex], float, float]:
    """Integrals of ``y^m * f(y)`` over [-L, L]^dim for every m in ``indices``.

    Returns (integrals, abs_integral, worst_error) where abs_integral is
    the integral of |f| (used to judge cancellation in normalizations).
    Convergence requires each component's level-to-level change to be at
    most ``tol * max(|I_m|, |I_0|)`` with I_0 the zero-index integral,
    which must be included in ``indices``.
    """
    if dim not in _SCHEDULES:
        raise ValueError(f"dimension {dim} not supported by the tensor quadrature (max 3)")
    zero = (0,) * dim
    if zero not in indices:
        raise ValueError("indices must include the zero multi-index")
    sched = tuple(schedule) if schedule is not None else _SCHEDULES[dim]
    spec = _EINSUM[dim]

    prev: dict[MultiIndex, complex] | None = None
    for n in sched:
        x0, w0 = _leggauss(n)
        x = half_width * x0
        w = half_width * w0
        grid = _weight_grid(f, x, dim)
        absint = float(np.einsum(spec, np.abs(grid), *([w] * dim)).real)
        vals: dict[MultiIndex, complex] = {}
        for m in indices:
            vecs = [w * x**e for e in m]
            vals[m] = complex(np.einsum(spec, grid, *vecs))
        if prev is not None:
            scale0 = abs(vals[zero])
            errs = {m: abs(vals[m] - prev[m]) for m in indices}
            worst = max(
                err / max(abs(vals[m]), scale0, 1e-300) for m, err in errs.items()
            )
            if worst <= tol:
                return vals, absint, worst
        prev = vals
    raise QuadratureError(
        f"tensor quadrature did not converge to tol={tol} with up to {sched[-1]} nodes/dim"
    )
