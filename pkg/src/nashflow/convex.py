"""Closed convex sets with point and vector (tangent-cone) projections.

Every set here is a box-like set: all of R^d, the nonnegative orthant,
a box with possibly infinite bounds, or a product of such factors.  For
these the Euclidean point projection is a componentwise clamp, and the
vector projection onto the tangent cone

    Pi_K(x, v) = lim_{delta -> 0+} (Proj_K(x + delta v) - x) / delta

reduces to zeroing every component of v that points outward across an
active face.  Interior points therefore return v unchanged, and the
projection never increases the Euclidean norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Membership and active-face detection tolerance, absolute per component.
TOL_MEMBERSHIP = 1e-9


def _as_vector(x, dim: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise ValueError(f"{name} has shape {x.shape}, expected ({dim},)")
    return x


@dataclass(frozen=True)
class AllSpace:
    """R^dim: no constraint at all."""

    dim: int

    def contains(self, x) -> bool:
        _as_vector(x, self.dim, "x")
        return True

    def project_point(self, x) -> np.ndarray:
        return _as_vector(x, self.dim, "x").copy()

    def project_vector(self, x, v) -> np.ndarray:
        _check_member(self, x)
        return _as_vector(v, self.dim, "v").copy()


@dataclass(frozen=True)
class NonnegativeOrthant:
    """{x in R^dim : x >= 0}."""

    dim: int

    def contains(self, x) -> bool:
        x = _as_vector(x, self.dim, "x")
        return bool((x >= -TOL_MEMBERSHIP).all())

    def project_point(self, x) -> np.ndarray:
        x = _as_vector(x, self.dim, "x")
        return np.maximum(x, 0.0)

    def project_vector(self, x, v) -> np.ndarray:
        _check_member(self, x)
        x = _as_vector(x, self.dim, "x")
        v = _as_vector(v, self.dim, "v").copy()
        v[(x <= TOL_MEMBERSHIP) & (v < 0.0)] = 0.0
        return v


@dataclass(frozen=True)
class Box:
    """{x : lower <= x <= upper} with +-inf entries allowed in the bounds."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-D arrays of equal length")
        if (lo > hi).any():
            raise ValueError("box has lower > upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, x) -> bool:
        x = _as_vector(x, self.dim, "x")
        return bool(
            (x >= self.lower - TOL_MEMBERSHIP).all()
            and (x <= self.upper + TOL_MEMBERSHIP).all()
        )

    def project_point(self, x) -> np.ndarray:
        x = _as_vector(x, self.dim, "x")
        return np.clip(x, self.lower, self.upper)

    def project_vector(self, x, v) -> np.ndarray:
        _check_member(self, x)
        x = _as_vector(x, self.dim, "x")
        v = _as_vector(v, self.dim, "v").copy()
        v[(x <= self.lower + TOL_MEMBERSHIP) & (v < 0.0)] = 0.0
        v[(x >= self.upper - TOL_MEMBERSHIP) & (v > 0.0)] = 0.0
        return v


@dataclass(frozen=True)
class Product:
    """Cartesian product of factor sets, projected factor by factor."""

    factors: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ValueError("product of zero factors")

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.factors)

    def _slices(self):
        start = 0
        for f in self.factors:
            yield f, slice(start, start + f.dim)
            start += f.dim

    def contains(self, x) -> bool:
        x = _as_vector(x, self.dim, "x")
        return all(f.contains(x[s]) for f, s in self._slices())

    def project_point(self, x) -> np.ndarray:
        x = _as_vector(x, self.dim, "x")
        out = np.empty_like(x)
        for f, s in self._slices():
            out[s] = f.project_point(x[s])
        return out

    def project_vector(self, x, v) -> np.ndarray:
        _check_member(self, x)
        x = _as_vector(x, self.dim, "x")
        v = _as_vector(v, self.dim, "v")
        out = np.empty_like(v)
        for f, s in self._slices():
            out[s] = f.project_vector(x[s], v[s])
        return out


def _check_member(cset, x) -> None:
    if not cset.contains(x):
        raise ValueError("base point is not in the set (within tolerance)")


def project_point(cset, x) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``cset``."""
    return cset.project_point(x)


def project_vector(cset, x, v) -> np.ndarray:
    """Tangent-cone projection of direction ``v`` at base point ``x``.

    ``x`` must belong to ``cset`` within the membership tolerance; faces
    within that tolerance count as active.  At interior points the result
    equals ``v``; the result norm never exceeds ``||v||``.
    """
    return cset.project_vector(x, v)


def sample(cset, rng: np.random.Generator) -> np.ndarray:
    """Draw a random point of ``cset``; uniform on finite boxes.

    Unbounded directions fall back to standard normal offsets from the
    finite bound (or from the origin when both bounds are infinite).
    """
    if isinstance(cset, AllSpace):
        return rng.standard_normal(cset.dim)
    if isinstance(cset, NonnegativeOrthant):
        return np.abs(rng.standard_normal(cset.dim))
    if isinstance(cset, Box):
        lo, hi = cset.lower, cset.upper
        out = np.empty(cset.dim)
        for k in range(cset.dim):
            if np.isfinite(lo[k]) and np.isfinite(hi[k]):
                out[k] = rng.uniform(lo[k], hi[k])
            elif np.isfinite(lo[k]):
                out[k] = lo[k] + np.abs(rng.standard_normal())
            elif np.isfinite(hi[k]):
                out[k] = hi[k] - np.abs(rng.standard_normal())
            else:
                out[k] = rng.standard_normal()
        return out
    if isinstance(cset, Product):
        return np.concatenate([sample(f, rng) for f in cset.factors])
    raise TypeError(f"cannot sample from {type(cset).__name__}")
