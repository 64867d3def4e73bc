"""Dense lattice operators with diagonal-wise Sobolev norms.

An operator on a box is stored as a dense complex matrix in the box's site
enumeration.  Its k-diagonal is the sequence ``A_k(i) = A_{i, i-k}``; the
Sobolev norm of index ``s`` is

    ||A||_s^2 = sum_k ||A_k||^2 <k>^(2s),      <k> = max(1, |k|_inf),

with the diagonal norm taken under the sup policy (the algebra norm of
choice for matrices; profile-based policies only apply to sequences that
actually carry a profile).  Sums run over the offsets realized on the box;
the offset cap at 2N is part of the truncation model.

Operators are immutable; per-offset sups and Sobolev norms are cached on
the instance, so repeated norm evaluations at different ``s`` are cheap.
"""

from __future__ import annotations

from math import comb

import numpy as np
from scipy.special import zeta

from .algebra import SUP_NORM, Sequence, algebra_norm
from .box import LatticeBox
from .errors import TameRangeError


class LatticeOperator:
    """Dense operator over a box, viewed through its diagonals."""

    __slots__ = ("box", "entries", "policy", "_diag_sups", "_norms", "_opnorm")

    def __init__(self, box: LatticeBox, entries, policy=SUP_NORM):
        entries = np.ascontiguousarray(entries, dtype=complex)
        if entries.shape != (box.n_sites, box.n_sites):
            raise ValueError(
                f"entries must have shape {(box.n_sites, box.n_sites)}, "
                f"got {entries.shape}"
            )
        entries.flags.writeable = False
        self.box = box
        self.entries = entries
        self.policy = policy
        self._diag_sups = None
        self._norms = {}
        self._opnorm = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def identity(cls, box, policy=SUP_NORM):
        return cls(box, np.eye(box.n_sites, dtype=complex), policy=policy)

    @classmethod
    def zeros(cls, box, policy=SUP_NORM):
        return cls(box, np.zeros((box.n_sites, box.n_sites), dtype=complex), policy)

    # -- diagonal view ------------------------------------------------------

    def diagonal(self, k) -> Sequence:
        """The k-diagonal A_k as a sequence (absent where i-k leaves the box)."""
        box = self.box
        k = np.asarray(k, dtype=np.int64).reshape(box.dimension)
        col = box.site_index(box.sites - k)
        ok = col >= 0
        values = np.zeros(box.n_sites, dtype=complex)
        rows = np.flatnonzero(ok)
        values[rows] = self.entries[rows, col[rows]]
        return Sequence(box, values, ok, policy=SUP_NORM)

    def diag_sups(self) -> np.ndarray:
        """Sup of |entries| per flat offset slot (cached)."""
        if self._diag_sups is None:
            sups = np.zeros(self.box.n_offset_slots)
            np.maximum.at(
                sups, self.box.pair_offset_flat.ravel(), np.abs(self.entries).ravel()
            )
            sups.flags.writeable = False
            self._diag_sups = sups
        return self._diag_sups

    # -- norms ---------------------------------------------------------------

    def sobolev_norm(self, s: float) -> float:
        s = float(s)
        if s < 0:
            raise ValueError("norm index must be nonnegative")
        cached = self._norms.get(s)
        if cached is None:
            sups = self.diag_sups()
            w = self.box.offset_weight
            cached = float(np.sqrt(np.sum((sups * w**s) ** 2)))
            self._norms[s] = cached
        return cached

    def operator_norm(self) -> float:
        """Largest singular value (the l2 -> l2 norm on the box)."""
        if self._opnorm is None:
            self._opnorm = float(np.linalg.norm(self.entries, 2))
        return self._opnorm

    def off_diagonal_max(self) -> float:
        off = self.entries.copy()
        np.fill_diagonal(off, 0.0)
        return float(np.max(np.abs(off))) if off.size else 0.0

    # -- structure ------------------------------------------------------------

    def smooth(self, theta: float) -> "LatticeOperator":
        """Keep the band |i - j|_inf <= theta, zero the rest."""
        mask = self.box.smooth_mask(theta)
        return LatticeOperator(self.box, self.entries * mask, self.policy)

    def transpose(self) -> "LatticeOperator":
        return LatticeOperator(self.box, self.entries.T, self.policy)

    def diagonal_part(self) -> "DiagonalOperator":
        return DiagonalOperator.from_values(
            self.box, np.diagonal(self.entries), policy=self.policy
        )

    def is_real_symmetric(self, tol: float = 0.0) -> bool:
        e = self.entries
        return bool(
            np.max(np.abs(e.imag)) <= tol and np.max(np.abs(e - e.T)) <= tol
        )

    # -- arithmetic -------------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, DiagonalOperator):
            other = other.as_operator()
        if not isinstance(other, LatticeOperator):
            return None
        if other.box != self.box:
            raise ValueError("box mismatch")
        return other

    def __matmul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return LatticeOperator(self.box, self.entries @ other.entries, self.policy)

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return LatticeOperator(self.box, self.entries + other.entries, self.policy)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return LatticeOperator(self.box, self.entries - other.entries, self.policy)

    def __mul__(self, scalar):
        return LatticeOperator(self.box, self.entries * complex(scalar), self.policy)

    __rmul__ = __mul__

    def __neg__(self):
        return LatticeOperator(self.box, -self.entries, self.policy)

    def __repr__(self):
        return f"LatticeOperator(n={self.box.n_sites}, d={self.box.dimension})"

    # -- snapshots ----------------------------------------------------------------

    def save(self, path):
        """Binary snapshot: dimensions plus row-major complex entries."""
        np.savez_compressed(
            path,
            dimension=self.box.dimension,
            radius=self.box.radius,
            interior_radius=self.box.interior_radius,
            entries=self.entries,
        )

    @classmethod
    def load(cls, path, policy=SUP_NORM):
        with np.load(path) as data:
            box = LatticeBox(
                int(data["dimension"]),
                int(data["radius"]),
                int(data["interior_radius"]),
            )
            return cls(box, data["entries"], policy=policy)


class DiagonalOperator:
    """Main-diagonal-only operator; its s-norm equals its 0-norm for all s."""

    __slots__ = ("box", "diag")

    def __init__(self, box: LatticeBox, diag: Sequence):
        if diag.box != box:
            raise ValueError("box mismatch")
        if not np.all(diag.present):
            raise ValueError("diagonal sequence must be fully present")
        self.box = box
        self.diag = diag

    @classmethod
    def from_values(cls, box, values, policy=SUP_NORM, formula=None, torus_profile=None):
        return cls(
            box,
            Sequence(box, values, policy=policy, formula=formula,
                     torus_profile=torus_profile),
        )

    @classmethod
    def zeros(cls, box, policy=SUP_NORM):
        return cls.from_values(box, np.zeros(box.n_sites), policy=policy)

    @property
    def values(self) -> np.ndarray:
        return self.diag.values

    def as_operator(self, policy=None) -> LatticeOperator:
        return LatticeOperator(
            self.box, np.diag(self.values), policy or self.diag.policy
        )

    def sobolev_norm(self, s: float = 0.0) -> float:
        del s  # independent of the index for diagonal operators
        return algebra_norm(self.diag)

    def __add__(self, other):
        if isinstance(other, DiagonalOperator):
            return DiagonalOperator.from_values(
                self.box, self.values + other.values, policy=self.diag.policy
            )
        return NotImplemented

    def __repr__(self):
        return f"DiagonalOperator(n={self.box.n_sites})"


# -- module-level operation aliases ------------------------------------------


def sobolev_norm(a, s: float) -> float:
    return a.sobolev_norm(s)


def smooth(a: LatticeOperator, theta: float) -> LatticeOperator:
    return a.smooth(theta)


def multiply(x: LatticeOperator, y) -> LatticeOperator:
    return x @ y


def transpose(a: LatticeOperator) -> LatticeOperator:
    return a.transpose()


def diagonal_part(a: LatticeOperator) -> DiagonalOperator:
    return a.diagonal_part()


def identity(box: LatticeBox) -> LatticeOperator:
    return LatticeOperator.identity(box)


# -- tame constants -------------------------------------------------------------


def lattice_weight_sum(dimension: int, alpha0: float) -> float:
    """sum over Z^d of <k>^(-2 alpha0), exactly, via the shell-count identity.

    The number of k with |k|_inf = m is (2m+1)^d - (2m-1)^d, a polynomial
    whose odd binomial terms reduce the lattice sum to Riemann zeta values:

        S = 1 + sum_{j odd <= d} 2^(d-j+1) C(d, j) zeta(2 alpha0 - d + j).

    Requires alpha0 > d/2 (each zeta argument then exceeds 1).
    """
    if alpha0 <= dimension / 2:
        raise ValueError("alpha0 must exceed d/2 for the lattice sum to converge")
    total = 1.0
    for j in range(1, dimension + 1, 2):
        total += 2.0 ** (dimension - j + 1) * comb(dimension, j) * float(
            zeta(2.0 * alpha0 - dimension + j)
        )
    return total


class TameConstants:
    """Constants of the product estimate for the diagonal-wise Sobolev norm.

    k0 multiplies the low-high pairing, k1(s) the high-low pairing:

        ||XY||_s <= k0 ||X||_a0 ||Y||_s + k1(s) ||X||_s ||Y||_a0,   s >= a0.

    The underlying lattice sum is evaluated in closed form; the declared
    truncation error is float rounding only.
    """

    def __init__(self, dimension: int, alpha0: float):
        self.dimension = int(dimension)
        self.alpha0 = float(alpha0)
        self.lattice_sum = lattice_weight_sum(self.dimension, self.alpha0)
        self.tail_relative_error = 1e-12
        self.k0 = float(np.sqrt(20.0 * self.lattice_sum))
        self.c0 = self.k0 + self.k1(self.alpha0)

    def k1(self, s: float) -> float:
        s = float(s)
        if s <= 0:
            return float(np.sqrt(2.0 * self.lattice_sum))
        with np.errstate(over="ignore"):
            base = 1.0 - 10.0 ** (-1.0 / (2.0 * s))
            return float(
                np.float64(base) ** np.float64(-s) * np.sqrt(2.0 * self.lattice_sum)
            )

    def __repr__(self):
        return (
            f"TameConstants(d={self.dimension}, alpha0={self.alpha0}, "
            f"k0={self.k0:.6g}, c0={self.c0:.6g})"
        )


def tame_bound_check(x: LatticeOperator, y: LatticeOperator, s: float,
                     tc: TameConstants) -> float:
    """Margin of the two-factor product bound; nonnegative when it holds."""
    if s < tc.alpha0 - 1e-12:
        raise TameRangeError("tame range: s must be at least alpha0")
    a0 = tc.alpha0
    bound = tc.k0 * x.sobolev_norm(a0) * y.sobolev_norm(s) + tc.k1(s) * (
        x.sobolev_norm(s) * y.sobolev_norm(a0)
    )
    return bound - (x @ y).sobolev_norm(s)


def chain_bound_margins(ops, s: float, tc: TameConstants):
    """Margins of the n-factor product bounds at alpha0 and at s.

    Returns ``(margin_alpha0, margin_s)`` for

        ||prod X_i||_a0 <= c0^(n-1) prod ||X_i||_a0,
        ||prod X_i||_s  <= n c0^n k1(s) sum_i (prod_{j != i} ||X_j||_a0) ||X_i||_s.
    """
    if s < tc.alpha0 - 1e-12:
        raise TameRangeError("tame range: s must be at least alpha0")
    n = len(ops)
    if n < 1:
        raise ValueError("need at least one operator")
    prod = ops[0]
    for op in ops[1:]:
        prod = prod @ op
    a0 = tc.alpha0
    norms_a0 = [op.sobolev_norm(a0) for op in ops]
    norms_s = [op.sobolev_norm(s) for op in ops]
    bound_a0 = tc.c0 ** (n - 1) * float(np.prod(norms_a0))
    cross = 0.0
    for i in range(n):
        rest = 1.0
        for j in range(n):
            if j != i:
                rest *= norms_a0[j]
        cross += rest * norms_s[i]
    bound_s = n * tc.c0**n * tc.k1(s) * cross
    return bound_a0 - prod.sobolev_norm(a0), bound_s - prod.sobolev_norm(s)
