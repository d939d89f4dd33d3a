"""Multi-index bookkeeping for moments indexed by exponent vectors."""

from __future__ import annotations

from math import comb
from typing import Iterator, Sequence

MultiIndex = tuple[int, ...]


def as_index(m: Sequence[int] | int, dim: int) -> MultiIndex:
    """Coerce ``m`` to a validated exponent tuple of length ``dim``."""
    if isinstance(m, (int,)):
        m = (m,)
    idx = tuple(int(e) for e in m)
    if len(idx) != dim:
        raise ValueError(f"multi-index {idx} has length {len(idx)}, expected {dim}")
    if any(e < 0 for e in idx):
        raise ValueError(f"multi-index {idx} has negative entries")
    return idx


def degree(m: Sequence[int]) -> int:
    return int(sum(m))


def count_at_degree(dim: int, d: int) -> int:
    """Number of exponent tuples of length ``dim`` summing to ``d``."""
    return comb(d + dim - 1, dim - 1)


def indices_of_degree(dim: int, d: int) -> Iterator[MultiIndex]:
    if dim == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in indices_of_degree(dim - 1, d - first):
            yield (first,) + rest


def multi_indices(dim: int, max_degree: int) -> Iterator[MultiIndex]:
    """All exponent tuples of total degree <= max_degree, ordered by degree then lexicographically."""
    for d in range(max_degree + 1):
        yield from indices_of_degree(dim, d)
