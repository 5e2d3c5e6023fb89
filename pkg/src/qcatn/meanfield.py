"""Product-ansatz (mean-field) dynamics of the automaton.

Every site of a row carries the same single-site density matrix ``phi``.
Two update schemes are provided:

* plaquette: one gate on two controls and one empty target, controls traced;
* five-site: controls 1, 2, 4 and empty targets 3, 5; gates ``G_{12,3}`` then
  ``G_{24,5}``; everything but site 5 traced. This is the default scheme.

Both updates are cubic (or quadratic) in ``phi`` and linear in the product
``phi (x) phi (x) phi``, so each is stored as a fixed transfer matrix acting
on the column-stacked product state.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from .exact import apply_gate
from .gates import GateParams, build_G, unvectorize, vectorize

__all__ = [
    "EMPTY_STATE",
    "FULL_STATE",
    "MfSeries",
    "StationaryDensity",
    "validate_state",
    "mf_step_plaquette",
    "mf_step_five_site",
    "mf_trajectory",
    "mf_stationary_density",
    "mf_phase_boundary",
    "mf_contour",
    "mf_linear_gain",
    "mf_critical_gamma_linear",
    "ACTIVE_THRESHOLD",
]

EMPTY_STATE = np.diag([1.0, 0.0]).astype(complex)
FULL_STATE = np.diag([0.0, 1.0]).astype(complex)
ACTIVE_THRESHOLD = 1e-4


def validate_state(phi, tol: float = 1e-12) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity of a 2x2 density matrix."""
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got {phi.shape}")
    if np.max(np.abs(phi - phi.conj().T)) > tol:
        raise ValueError("state is not Hermitian")
    if abs(np.trace(phi) - 1.0) > tol:
        raise ValueError("state does not have unit trace")
    if np.linalg.eigvalsh(phi).min() < -tol:
        raise ValueError("state has a negative eigenvalue")
    return phi


def _kraus_transfer(v: np.ndarray) -> np.ndarray:
    """Sum of ``conj(K) (x) K`` over the leading (traced) index of ``v``."""
    return sum(np.kron(k.conj(), k) for k in v)


@lru_cache(maxsize=256)
def _plaquette_transfer(p: GateParams) -> np.ndarray:
    g = build_G(p).reshape(2, 2, 2, 2, 2, 2)
    # target input fixed to |o>; outputs ordered (c1 c2 | t)
    v = g[..., 0].reshape(4, 2, 4)
    return _kraus_transfer(v)


@lru_cache(maxsize=256)
def _five_site_transfer(p: GateParams) -> np.ndarray:
    g = build_G(p)
    w = np.eye(32, dtype=complex).reshape((2,) * 5 + (32,))
    w = apply_gate(w, g, (0, 1, 2))
    w = apply_gate(w, g, (1, 3, 4))
    # inputs with both targets (sites 3 and 5) empty; kept inputs (1, 2, 4)
    w = w.reshape((32,) + (2,) * 5)[:, :, :, 0, :, 0].reshape(16, 2, 8)
    return _kraus_transfer(w)


def _apply(transfer: np.ndarray, phi: np.ndarray, copies: int) -> np.ndarray:
    prod = phi
    for _ in range(copies - 1):
        prod = np.kron(prod, phi)
    out = unvectorize(transfer @ vectorize(prod))
    out = 0.5 * (out + out.conj().T)
    # exact maps preserve the trace; rescaling only removes roundoff, which
    # would otherwise grow since tr -> tr**3 is unstable at tr = 1
    return out / np.trace(out).real


def mf_step_plaquette(phi, p: GateParams) -> np.ndarray:
    return _apply(_plaquette_transfer(p), np.asarray(phi, dtype=complex), 2)


def mf_step_five_site(phi, p: GateParams) -> np.ndarray:
    return _apply(_five_site_transfer(p), np.asarray(phi, dtype=complex), 3)


_STEPS = {"five_site": mf_step_five_site, "plaquette": mf_step_plaquette}


@dataclass
class MfSeries:
    t: np.ndarray
    n: np.ndarray
    phi: np.ndarray  # (T + 1, 2, 2)


def mf_trajectory(p: GateParams, T: int, phi0=FULL_STATE, scheme: str = "five_site") -> MfSeries:
    """Iterate the mean-field update ``T`` times from ``phi0``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    update = _STEPS[scheme]
    phi = validate_state(phi0)
    phis = [phi]
    for _ in range(T):
        phi = update(phi, p)
        phis.append(phi)
    phis = np.array(phis)
    return MfSeries(np.arange(T + 1), phis[:, 1, 1].real.copy(), phis)


@dataclass
class StationaryDensity:
    density: float
    converged: bool
    steps: int


def mf_stationary_density(
    p: GateParams,
    tol: float = 1e-10,
    t_max: int = 200_000,
    scheme: str = "five_site",
) -> StationaryDensity:
    """Iterate until successive densities differ by less than ``tol``.

    When ``t_max`` is reached first the last density is returned with
    ``converged=False``; this is expected close to the transition.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if scheme == "five_site":
        transfer, copies = _five_site_transfer(p), 3
    else:
        transfer, copies = _plaquette_transfer(p), 2
    phi = FULL_STATE
    n_prev = 1.0
    for t in range(1, t_max + 1):
        phi = _apply(transfer, phi, copies)
        n = phi[1, 1].real
        if abs(n - n_prev) < tol:
            return StationaryDensity(float(n), True, t)
        n_prev = n
    return StationaryDensity(float(n_prev), False, t_max)


def mf_phase_boundary(
    omegas,
    gamma_bracket: tuple[float, float] = (0.5, 1.2),
    tol: float = 1e-6,
    threshold: float = ACTIVE_THRESHOLD,
    **stationary_kw,
) -> list[tuple[float, float]]:
    """Bisect in gamma for the onset of a stationary density above ``threshold``."""
    lo0, hi0 = gamma_bracket
    if not lo0 < hi0:
        raise ValueError(f"invalid bracket {gamma_bracket}")

    def active(g, w):
        return mf_stationary_density(GateParams(g, w), **stationary_kw).density > threshold

    out = []
    for w in omegas:
        w = float(w)
        if active(lo0, w) or not active(hi0, w):
            raise ValueError(f"bracket {gamma_bracket} does not straddle the transition at omega={w}")
        lo, hi = lo0, hi0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if active(mid, w):
                hi = mid
            else:
                lo = mid
        out.append((w, 0.5 * (lo + hi)))
    return out


def mf_contour(gammas, omegas, **stationary_kw) -> list[tuple[float, float, float]]:
    """Rows ``(omega, gamma, n_ss)`` over a grid."""
    return [
        (float(w), float(g), mf_stationary_density(GateParams(float(g), float(w)), **stationary_kw).density)
        for w in omegas
        for g in gammas
    ]


def mf_linear_gain(p: GateParams, scheme: str = "five_site") -> float:
    """Spectral radius of the update linearised about the empty state.

    The absorbing state loses stability where this crosses one. The density
    direction has eigenvalue ``2 sin^2(gamma)`` for every omega; well below
    the transition a coherence mode can carry the largest eigenvalue, and it
    does depend on omega.
    """
    transfer, copies = (
        (_five_site_transfer(p), 3) if scheme == "five_site" else (_plaquette_transfer(p), 2)
    )
    # traceless Hermitian perturbation directions
    dirs = [
        np.diag([-1.0, 1.0]).astype(complex),
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]], dtype=complex),
    ]
    jac = np.zeros((3, 3))
    for i, x in enumerate(dirs):
        d = np.zeros((2, 2), dtype=complex)
        for slot in range(copies):
            factors = [EMPTY_STATE] * copies
            factors[slot] = x
            prod = factors[0]
            for f in factors[1:]:
                prod = np.kron(prod, f)
            d += unvectorize(transfer @ vectorize(prod))
        # coordinates of d in the same directions (orthogonal, norm^2 = 2)
        jac[:, i] = [np.real(np.trace(b.conj().T @ d)) / 2.0 for b in dirs]
    return float(np.max(np.abs(np.linalg.eigvals(jac))))


def mf_critical_gamma_linear() -> float:
    """Onset of the linear instability, where ``2 sin^2(gamma) = 1``."""
    return math.pi / 4
