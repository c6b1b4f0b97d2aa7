"""Closed-form Euclidean projections used by the splitting solvers.

Two families: the rank-1 quadratic set {x : |u^H x|^2 <= b}, whose projection
moves x only along u, and norm balls (Frobenius over a whole grid, or one
ball per column) that carry error-vector budgets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConstraintError


@dataclass(frozen=True)
class Rank1Constraint:
    """The set {x : |u^H x|^2 <= b}."""

    u: np.ndarray
    b: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex)
        if not u.any():
            raise DegenerateConstraintError("constraint direction is identically zero")
        if self.b < 0:
            raise DegenerateConstraintError("constraint bound must be non-negative")
        object.__setattr__(self, "u", u)

    def violation(self, x):
        """|u^H x|^2 - b, positive when x is outside the set."""
        inner = np.tensordot(np.conj(self.u), np.asarray(x, dtype=complex),
                             axes=([0], [-1]))
        return (np.abs(inner) ** 2 - self.b)


def project_rank1(x, u, b):
    """Project x onto {z : |u^H z|^2 <= b}.

    x may carry leading batch dimensions; the projection acts on the last
    axis.  Points already inside the set are returned unchanged (bitwise),
    and an outside point moves along u by exactly the amount that lands
    |u^H z| on sqrt(b):

        z = x + (sqrt(b) - |c|) / (||u||^2 |c|) * u * c,   c = u^H x.
    """
    u = np.asarray(u, dtype=complex)
    if not u.any():
        raise DegenerateConstraintError("constraint direction is identically zero")
    if b < 0:
        raise DegenerateConstraintError("constraint bound must be non-negative")
    x = np.asarray(x, dtype=complex)
    c = np.tensordot(x, np.conj(u), axes=([-1], [0]))
    mag = np.abs(c)
    outside = mag ** 2 > b
    if not np.any(outside):
        return x.copy()
    unorm_sq = float(np.vdot(u, u).real)
    # (sqrt(b) - |c|) / (||u||^2 |c|), evaluated only where |c|^2 > b (there
    # |c| > 0, so the division is safe; b = 0 projects onto the hyperplane).
    coef = np.zeros_like(mag)
    np.divide(np.sqrt(b) - mag, unorm_sq * mag, out=coef, where=outside)
    return x + (coef * c)[..., None] * u


def project_frobenius_ball(x, center, radius):
    """Project onto {z : ||z - center||_F <= radius}.

    Pure radial scaling toward the center when outside; the identity inside.
    """
    if radius < 0:
        raise DegenerateConstraintError("ball radius must be non-negative")
    x = np.asarray(x, dtype=complex)
    center = np.asarray(center, dtype=complex)
    diff = x - center
    dist = float(np.linalg.norm(diff))
    if dist <= radius:
        return x.copy()
    return center + (radius / dist) * diff


def project_columns_ball(x, center, radii):
    """Project each column k onto {z_k : ||z_k - center_k|| <= radii_k}.

    x and center are (n_rows, n_cols); radii is length n_cols.  Columns
    already inside their ball pass through unchanged.
    """
    x = np.asarray(x, dtype=complex)
    center = np.asarray(center, dtype=complex)
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 0):
        raise DegenerateConstraintError("ball radii must be non-negative")
    diff = x - center
    dist = np.linalg.norm(diff, axis=0)
    scale = np.ones_like(dist)
    outside = dist > radii
    np.divide(radii, dist, out=scale, where=outside)
    return center + diff * scale[None, :]
