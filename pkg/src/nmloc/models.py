"""Concrete diagonal potentials and the polynomial long-range hopping.

All potentials are formula-backed: translating them re-evaluates the
formula, so distal scans see exact values beyond the stored window.

Available kinds:

* ``maryland``       d_i = tan(pi i.omega)
* ``sarnak``         d_i = exp(2 pi sqrt(-1) i.omega)    (complex, non-normal)
* ``craig_mod1``     d_i = (i.omega) mod 1
* ``limit_periodic_binary`` / ``limit_periodic_ternary``
      the classic limit-periodic staircases built from characteristic
      functions of nested dyadic unions; binary values are dense in [0, 1],
      ternary values in the middle-thirds Cantor set
* ``custom``         explicit values supplied by the caller
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence as Seq

import numpy as np

from .algebra import SUP_NORM, SampledBV, TorusProfile
from .box import LatticeBox
from .operators import DiagonalOperator, LatticeOperator

POTENTIAL_KINDS = (
    "maryland",
    "sarnak",
    "craig_mod1",
    "limit_periodic_binary",
    "limit_periodic_ternary",
    "custom",
)


@dataclass(frozen=True)
class PotentialSpec:
    kind: str
    omega: Optional[tuple[float, ...]] = None
    custom_values: Optional[Seq[complex]] = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind in ("maryland", "sarnak", "craig_mod1") and self.omega is None:
            raise ValueError(f"potential kind {self.kind!r} requires omega")
        if self.kind == "custom" and self.custom_values is None:
            raise ValueError("custom potential requires custom_values")
        if self.omega is not None:
            object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))


@dataclass(frozen=True)
class HoppingSpec:
    s_exponent: float
    epsilon: float = 0.0
    profile: str = "power_law"
    custom_profile: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.s_exponent <= 0:
            raise ValueError("s_exponent must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.profile not in ("power_law", "custom"):
            raise ValueError(f"unknown hopping profile {self.profile!r}")
        if self.profile == "custom" and self.custom_profile is None:
            raise ValueError("custom hopping requires custom_profile")


def _chi_dyadic(i: np.ndarray, v: int) -> np.ndarray:
    """Indicator of the v-th dyadic union, alternating parity convention.

    Even v keeps the lower half of each block of length 2^v, odd v the
    upper half.  For 2^(v-1) beyond the int range the indicator reduces to
    the sign split, which is its exact restriction to small |i|.
    """
    if v <= 62:
        block = np.int64(1) << v
        half = np.int64(1) << (v - 1)
        r = np.mod(i, block)
        return (r < half) if v % 2 == 0 else (r >= half)
    return (i >= 0) if v % 2 == 0 else (i < 0)


def _limit_periodic_formula(dimension: int, base: int, scale: float):
    """Formula for the staircase sum over (v, u) with weights base^-((v-1)d+u)."""

    def formula(sites):
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, dimension)
        out = np.zeros(len(sites), dtype=float)
        for v in itertools.count(1):
            weight0 = float(base) ** (-((v - 1) * dimension + 1))
            if weight0 < 1e-18:
                break
            for u in range(1, dimension + 1):
                w = float(base) ** (-((v - 1) * dimension + u))
                out += w * _chi_dyadic(sites[:, u - 1], v)
        return scale * out.astype(complex)

    return formula


def _pole_distance(x: np.ndarray) -> np.ndarray:
    """Distance of x to Z + 1/2 (the tan poles), measured on the torus."""
    r = np.mod(x - 0.5, 1.0)
    return np.minimum(r, 1.0 - r)


def build_potential(
    spec: PotentialSpec,
    box: LatticeBox,
    policy=None,
    bv_grid_points: int = 4096,
) -> DiagonalOperator:
    """Assemble the diagonal operator for a potential spec on a box.

    ``craig_mod1`` defaults to the sampled bounded-variation policy (its
    natural algebra); every other kind defaults to the sup policy.
    """
    if spec.kind == "custom":
        values = np.asarray(spec.custom_values, dtype=complex)
        if values.shape != (box.n_sites,):
            raise ValueError(
                f"custom potential needs {box.n_sites} values, got {values.shape}"
            )
        return DiagonalOperator.from_values(box, values, policy=policy or SUP_NORM)

    if spec.kind in ("maryland", "sarnak", "craig_mod1"):
        omega = np.asarray(spec.omega, dtype=float)
        if omega.shape != (box.dimension,):
            raise ValueError("omega length must match the box dimension")
        if spec.kind == "maryland":
            fn = lambda x: np.tan(np.pi * np.asarray(x, dtype=float)).astype(complex)
            dist = _pole_distance(box.sites @ omega)
            if float(np.min(dist)) < 1e-8:
                worst = box.sites[int(np.argmin(dist))]
                raise ValueError(
                    f"tan pole proximity {float(np.min(dist)):.2e} at site "
                    f"{tuple(int(c) for c in worst)}"
                )
        elif spec.kind == "sarnak":
            fn = lambda x: np.exp(2j * np.pi * np.asarray(x, dtype=float))
        else:
            fn = lambda x: np.mod(np.asarray(x, dtype=float), 1.0).astype(complex)
        formula = lambda sites: fn(np.asarray(sites, dtype=np.int64) @ omega)
        profile = TorusProfile(fn, tuple(omega))
        if policy is None:
            policy = SampledBV(bv_grid_points) if spec.kind == "craig_mod1" else SUP_NORM
        values = formula(box.sites)
        return DiagonalOperator.from_values(
            box, values, policy=policy, formula=formula, torus_profile=profile
        )

    base, scale = (2, 1.0) if spec.kind == "limit_periodic_binary" else (3, 2.0)
    formula = _limit_periodic_formula(box.dimension, base, scale)
    return DiagonalOperator.from_values(
        box, formula(box.sites), policy=policy or SUP_NORM, formula=formula
    )


def build_hopping(spec: HoppingSpec, box: LatticeBox) -> LatticeOperator:
    """Toeplitz hopping with entries eps * phi_{i-j}.

    The power-law profile is phi_k = |k|_inf^(-s) off the main diagonal and
    phi_0 = 0; it depends on |k| only, so the operator is real symmetric.
    The coupling is baked in here once; downstream code never rescales.
    """
    dist = box.pair_dist.astype(float)
    if spec.profile == "power_law":
        with np.errstate(divide="ignore"):
            phi = np.where(dist == 0.0, 0.0, dist ** (-spec.s_exponent))
    else:
        phi = np.asarray(spec.custom_profile(dist), dtype=float)
        np.fill_diagonal(phi, 0.0)
    return LatticeOperator(box, spec.epsilon * phi.astype(complex))


def check_diophantine(omega, tau: float, max_k: int):
    """Largest gamma with ||k.omega||_{R/Z} >= gamma / |k|^tau on the window.

    Scans all 0 < |k|_inf <= max_k and returns ``(gamma_best, worst_k)``.
    A torus distance at float resolution signals a rational frequency and
    raises.
    """
    omega = np.asarray(omega, dtype=float).reshape(-1)
    if max_k < 1:
        raise ValueError("max_k must be at least 1")
    d = len(omega)
    rng = range(-max_k, max_k + 1)
    gamma_best = np.inf
    worst = None
    for k in itertools.product(rng, repeat=d):
        if not any(k):
            continue
        x = float(np.asarray(k, dtype=float) @ omega)
        dist = abs(x - round(x))
        if dist < 1e-12:
            raise ValueError(f"rational frequency: ||k.omega|| = 0 at k={k}")
        klen = max(abs(c) for c in k)
        val = dist * klen**tau
        if val < gamma_best:
            gamma_best = val
            worst = k
    return float(gamma_best), tuple(worst)


GOLDEN_MEAN = (np.sqrt(5.0) - 1.0) / 2.0
