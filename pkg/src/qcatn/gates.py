"""The three-body gate family and its derived forms.

Basis convention: ``|o>`` (empty) is index 0, ``|*>`` (occupied) is index 1.
Three-site operators are ordered (control1, control2, target).

A single-site density matrix ``rho`` is vectorised with the ket index
fastest, ``vec(rho) = rho.flatten(order="F")``, so ``vec[2*bra + ket]``.
Under this convention ``vec(A rho A^dag) = kron(conj(A), A) @ vec(rho)``.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .tensor import HERMITIAN_TOL, ValidationError, herm_expm, truncated_svd

__all__ = [
    "GateParams",
    "GateMpo",
    "DecompositionError",
    "SIGMA_PLUS",
    "SIGMA_MINUS",
    "SIGMA_Y",
    "SIGMA_Z",
    "EMPTY",
    "FULL",
    "build_U",
    "build_P",
    "generator",
    "build_G",
    "build_G_super",
    "decompose_gate_mpo",
    "vectorize",
    "unvectorize",
]

EMPTY = np.array([1.0, 0.0], dtype=complex)
FULL = np.array([0.0, 1.0], dtype=complex)

SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |*><o|
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |o><*|
SIGMA_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)  # -i|*><o| + i|o><*|
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)  # |*><*| - |o><o|


class DecompositionError(RuntimeError):
    """The MPO factorisation failed to reproduce the dense gate."""


@dataclass(frozen=True)
class GateParams:
    """Gate strength ``gamma`` and entangling angle ``omega`` (radians)."""

    gamma: float
    omega: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and math.isfinite(self.omega)):
            raise ValueError(f"gate parameters must be finite, got {self}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")


def vectorize(rho) -> np.ndarray:
    """Column-stack a single- or multi-index density matrix (ket fastest)."""
    return np.asarray(rho).flatten(order="F")


def unvectorize(v, dim: int = 2) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def build_U(omega: float) -> np.ndarray:
    """Two-body control unitary ``exp(-i omega [Z Y + Y Z])``."""
    if not math.isfinite(omega):
        raise ValueError("omega must be finite")
    h = np.kron(SIGMA_Z, SIGMA_Y) + np.kron(SIGMA_Y, SIGMA_Z)
    return herm_expm(h, -1j * omega)


def build_P() -> np.ndarray:
    """Projector onto the complement of ``|oo>``."""
    p = np.eye(4, dtype=complex)
    p[0, 0] = 0.0
    return p


def generator(p: GateParams) -> np.ndarray:
    """Hermitian generator ``P U^dag s- + U P s+`` on (c1, c2, t), without Gamma."""
    u = build_U(p.omega)
    proj = build_P()
    h = np.kron(proj @ u.conj().T, SIGMA_MINUS) + np.kron(u @ proj, SIGMA_PLUS)
    if np.max(np.abs(h - h.conj().T)) > HERMITIAN_TOL:
        raise ValidationError("gate generator failed the Hermiticity check")
    return h


def build_G(p: GateParams) -> np.ndarray:
    """Dense 8x8 gate ``exp(-i gamma H)`` on (control1, control2, target)."""
    if p.gamma == 0.0:
        return np.eye(8, dtype=complex)
    return herm_expm(generator(p), -1j * p.gamma)


def build_G_super(p: GateParams) -> np.ndarray:
    """64x64 superoperator ``rho -> G rho G^dag`` on three vectorised sites.

    Each site contributes a length-4 index ``2*bra + ket``; the three site
    indices are ordered (control1, control2, target) in row-major order.
    """
    g = build_G(p).reshape((2,) * 6)
    # out (b1 k1 b2 k2 b3 k3), in (b1' k1' b2' k2' b3' k3')
    s = np.einsum("ABCDEF,abcdef->aAbBcCdDeEfF", g, g.conj())
    return s.reshape(64, 64)


@dataclass(frozen=True)
class GateMpo:
    """Three-site MPO factorisation of the gate.

    Each site tensor has axes (left bond, physical out, physical in, right bond).
    """

    tensors: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def bond_dims(self) -> tuple[int, int]:
        return self.tensors[0].shape[3], self.tensors[1].shape[3]

    def to_dense(self) -> np.ndarray:
        w1, w2, w3 = self.tensors
        full = np.einsum("xaAi,ibBj,jcCy->abcABC", w1, w2, w3)
        return full.reshape(8, 8)


def decompose_gate_mpo(p: GateParams, cutoff: float = 1e-13) -> GateMpo:
    """Factor the dense gate into three site tensors by two sequential SVDs."""
    g = build_G(p).reshape((2,) * 6)
    # group as (k1 k1') | (k2 k2' k3 k3')
    t = np.transpose(g, (0, 3, 1, 4, 2, 5))
    first = truncated_svd(t, 2, cutoff=cutoff)
    w1 = first.left[None, ...]  # (1, 2, 2, D1)
    rest = first.singular_values[:, None, None, None, None] * first.right
    second = truncated_svd(rest, 3, cutoff=cutoff)
    w2 = second.left  # (D1, 2, 2, D2)
    w3 = (second.singular_values[:, None, None] * second.right)[..., None]
    mpo = GateMpo((w1, w2, w3))
    residual = float(np.max(np.abs(mpo.to_dense() - build_G(p))))
    if residual > 1e-12 or max(mpo.bond_dims) > 4:
        raise DecompositionError(
            f"MPO bonds {mpo.bond_dims}, residual {residual:.3e} for {p}"
        )
    return mpo
