"""The two linear solves driving each conjugation step.

* ``solve_generator``: the divided-difference solve for the off-diagonal
  generator W, from ``[D, W] + S_theta(G) = 0``; entrywise
  ``W_{i,j} = (S_theta G)_{i,j} / (d_j - d_i)``, with an exactly zero
  diagonal.  Divisors below the configured floor raise; they are never
  clamped, since clamping silently breaks the conjugation identity.

* ``solve_diagonal_correction``: the diagonal correction X killing the
  main diagonal of ``Q^{-1}(X + P)Q + P'``.  The map is affine in X, so a
  Banach fixed-point iteration and a direct linear solve are both
  available; iteration is the default, the direct solve the oracle.

* ``neumann_invert``: inversion of ``I + W`` by a Neumann series under the
  smallness condition ``4 c0^2 ||W||_a0 <= 1/2``, with a direct-solve
  fallback for out-of-regime inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DistalViolationError,
    FixedPointStalledError,
    NeumannSmallnessError,
)
from .operators import DiagonalOperator, LatticeOperator, TameConstants


@dataclass
class HomologicalSolution:
    W: LatticeOperator
    residual_offdiag: float
    smoothing_theta: float | None
    bound_margins: dict = field(default_factory=dict)


def solve_generator(
    D: DiagonalOperator,
    G: LatticeOperator,
    theta: float | None,
    tau: float,
    gamma: float,
    s_list=(),
    eps_floor: float = 1e-14,
    diag_tol: float | None = None,
) -> HomologicalSolution:
    """Solve [D, W] + S_theta(G) = 0 for the zero-diagonal generator W.

    ``theta=None`` skips the band truncation (the initial step applies no
    smoothing beyond the one already baked into its input).  For each s in
    ``s_list`` the margin ``gamma^-1 ||S_theta G||_{s+tau} - ||W||_s`` is
    recorded; it is nonnegative whenever ``gamma`` is a valid in-box
    separation constant for ``D``.
    """
    box = G.box
    if D.box != box:
        raise ValueError("box mismatch")
    d = D.values
    sup_g = float(np.max(np.abs(G.entries)))
    tol = diag_tol if diag_tol is not None else 1e-9 * (1.0 + sup_g)
    diag_dev = float(np.max(np.abs(np.diagonal(G.entries))))
    if diag_dev > tol:
        raise ValueError(f"unreduced diagonal: max |diag(G)| = {diag_dev:.3e}")

    sg = G if theta is None else G.smooth(theta)
    divisors = d[None, :] - d[:, None]  # (i, j) -> d_j - d_i
    band = box.smooth_mask(theta) if theta is not None else np.ones_like(
        divisors, dtype=bool
    )
    offdiag = ~np.eye(box.n_sites, dtype=bool)
    need = band & offdiag
    small = need & (np.abs(divisors) < eps_floor)
    if np.any(small):
        i, j = np.argwhere(small)[0]
        raise DistalViolationError(
            f"distal violation at (i={tuple(box.sites[i])}, j={tuple(box.sites[j])}):"
            f" divisor {abs(divisors[i, j]):.3e} below floor {eps_floor:.1e}"
        )

    w = np.zeros_like(sg.entries)
    w[need] = sg.entries[need] / divisors[need]
    W = LatticeOperator(box, w, G.policy)

    comm = (d[:, None] - d[None, :]) * w  # [D, W] entrywise
    resid = np.abs(comm + sg.entries)
    resid[~need] = 0.0
    residual_offdiag = float(np.max(resid))

    margins = {}
    for s in s_list:
        margins[float(s)] = (
            sg.sobolev_norm(float(s) + tau) / gamma - W.sobolev_norm(float(s))
        )
    return HomologicalSolution(W, residual_offdiag, theta, margins)


@dataclass
class FixedPointSolution:
    X: DiagonalOperator
    iterations: int
    final_defect: float
    contraction_ok: bool
    cross_check: float | None = None
    bound_margin: float | None = None


def _conjugated_diag_map(Q, Qinv):
    """Matrix M with diag(Qinv diag(x) Q) = M @ x."""
    return Qinv.entries * Q.entries.T


def solve_diagonal_correction(
    Q: LatticeOperator,
    Qinv: LatticeOperator,
    P: LatticeOperator,
    Pprime,
    tc: TameConstants,
    tol: float = 1e-12,
    max_iter: int = 200,
    cross_check: bool = True,
) -> FixedPointSolution:
    """Find diagonal X with diag(Qinv (X + P) Q + P') = 0.

    Runs the contraction iteration x -> x - (M x + c) when the smallness
    condition ``c0 ||Q - I||_a0 <= 1/10`` (and likewise for Qinv) holds;
    otherwise degrades to the direct affine solve with a warning.  The
    direct solution doubles as a cross-check oracle either way.
    """
    box = Q.box
    n = box.n_sites
    eye = LatticeOperator.identity(box)
    a0 = tc.alpha0
    contraction_ok = (
        tc.c0 * (Q - eye).sobolev_norm(a0) <= 0.1
        and tc.c0 * (Qinv - eye).sobolev_norm(a0) <= 0.1
    )

    qpq = Qinv @ P @ Q
    pprime_op = Pprime.as_operator() if isinstance(Pprime, DiagonalOperator) else Pprime
    c = np.diagonal(qpq.entries) + np.diagonal(pprime_op.entries)
    M = _conjugated_diag_map(Q, Qinv)

    x_direct = None
    if cross_check or not contraction_ok:
        x_direct = np.linalg.solve(M, -c)

    if contraction_ok:
        x = np.zeros(n, dtype=complex)
        iterations = 0
        defect = float(np.max(np.abs(M @ x + c)))
        while defect > tol:
            if iterations >= max_iter:
                raise FixedPointStalledError(
                    f"fixed point stalled at defect {defect:.3e}", defect
                )
            x = x - (M @ x + c)
            iterations += 1
            defect = float(np.max(np.abs(M @ x + c)))
    else:
        warnings.warn(
            "diagonal-correction contraction condition violated; "
            "falling back to the direct solve",
            RuntimeWarning,
            stacklevel=2,
        )
        x = x_direct
        iterations = 0
        defect = float(np.max(np.abs(M @ x + c)))

    X = DiagonalOperator.from_values(box, x, policy=Q.policy)
    agreement = None
    if x_direct is not None:
        agreement = float(np.max(np.abs(x - x_direct)))
    margin = None
    if contraction_ok:
        margin = 2.0 * (
            qpq.sobolev_norm(a0) + pprime_op.sobolev_norm(a0)
        ) - X.sobolev_norm(a0)
    return FixedPointSolution(X, iterations, defect, contraction_ok, agreement, margin)


@dataclass
class NeumannResult:
    Vinv: LatticeOperator
    residual: float
    bound_margins: dict = field(default_factory=dict)
    neumann_terms: int | None = None
    condition_number: float | None = None


def neumann_invert(
    W: LatticeOperator,
    tc: TameConstants,
    s_list=(),
    strict: bool = True,
    term_tol: float = 1e-14,
    max_terms: int = 400,
) -> NeumannResult:
    """Invert I + W, preferring the Neumann series when it certifiably converges.

    With ``4 c0^2 ||W||_a0 <= 1/2`` the series is summed until the newest
    term falls below ``term_tol`` in the 0-norm, and the margins of
    ``||V^-1 - I||_s <= 2 k1(s) ||W||_s`` are recorded for every s in
    ``s_list``.  Outside that regime, ``strict=True`` raises while
    ``strict=False`` falls back to a direct solve and reports the
    condition number instead of series data.
    """
    box = W.box
    eye_m = np.eye(box.n_sites, dtype=complex)
    w_a0 = W.sobolev_norm(tc.alpha0)
    small_enough = 4.0 * tc.c0**2 * w_a0 <= 0.5

    terms = None
    cond = None
    if small_enough:
        acc = eye_m.copy()
        term = eye_m
        terms = 0
        while True:
            term = term @ (-W.entries)
            acc += term
            terms += 1
            term_norm = LatticeOperator(box, term).sobolev_norm(0.0)
            if term_norm <= term_tol:
                break
            if terms >= max_terms:
                raise NeumannSmallnessError(
                    "Neumann series failed to reach the term tolerance"
                )
        vinv = acc
    else:
        if strict:
            raise NeumannSmallnessError(
                f"Neumann smallness failed: 4 c0^2 ||W||_a0 = "
                f"{4.0 * tc.c0**2 * w_a0:.3e} > 1/2"
            )
        v = eye_m + W.entries
        cond = float(np.linalg.cond(v))
        vinv = np.linalg.solve(v, eye_m)

    Vinv = LatticeOperator(box, vinv, W.policy)
    residual = ((LatticeOperator.identity(box) + W) @ Vinv
                - LatticeOperator.identity(box)).sobolev_norm(0.0)
    margins = {}
    for s in s_list:
        s = float(s)
        margins[s] = 2.0 * tc.k1(s) * W.sobolev_norm(s) - (
            Vinv - LatticeOperator.identity(box)
        ).sobolev_norm(s)
    return NeumannResult(Vinv, float(residual), margins, terms, cond)
