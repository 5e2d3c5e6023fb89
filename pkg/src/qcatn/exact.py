"""Brute-force statevector reference for small lattices.

Lattice convention (shared with :mod:`qcatn.evolution`): each control row
is flanked by fresh empty pad sites, control 0 and control N+1. Gates of one
row are applied left-to-right (``"lr"``) or right-to-left (``"rl"``). With
``alignment="sweep"`` a sweep starts at its pad: target ``j`` (1-based) has
parents ``(j-1, j)`` in a left-to-right sweep and ``(j, j+1)`` in a
right-to-left one, so the tilted lattice zig-zags instead of drifting.
With ``alignment="left"`` the parents are always ``(j-1, j)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gates import SIGMA_Y, GateParams, build_G

__all__ = [
    "ResourceError",
    "LatticeSpec",
    "ExactResult",
    "ConcurrenceResult",
    "sweep_schedule",
    "run_exact",
    "run_exact_full",
    "apply_gate",
    "concurrence",
    "target_pair_concurrence",
    "concurrence_map",
    "reduced_density",
]

DEFAULT_SITE_CAP = 24


class ResourceError(RuntimeError):
    """The requested register exceeds the configured site cap."""


def sweep_schedule(steps: int, alternate: bool = True) -> tuple[str, ...]:
    """Even steps sweep left-to-right, odd steps right-to-left when alternating."""
    if not alternate:
        return ("lr",) * steps
    return tuple("lr" if t % 2 == 0 else "rl" for t in range(steps))


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice geometry: ``columns`` sites per row, ``rows`` = T + 1.

    ``site_cap`` bounds the number of qubits held in one statevector.
    """

    columns: int
    rows: int
    sweep: tuple[str, ...] | None = None
    site_cap: int = DEFAULT_SITE_CAP
    initial_row: str = "full"
    alignment: str = "sweep"

    def __post_init__(self):
        if self.columns < 1 or self.rows < 1:
            raise ValueError("columns and rows must be positive")
        if self.sweep is None:
            object.__setattr__(self, "sweep", sweep_schedule(self.rows - 1))
        if len(self.sweep) != self.rows - 1 or any(s not in ("lr", "rl") for s in self.sweep):
            raise ValueError(f"sweep must list 'lr'/'rl' for each of {self.rows - 1} steps")
        if self.initial_row not in ("full", "empty"):
            raise ValueError("initial_row must be 'full' or 'empty'")
        if self.alignment not in ("sweep", "left"):
            raise ValueError("alignment must be 'sweep' or 'left'")

    @property
    def steps(self) -> int:
        return self.rows - 1

    def gate_sites(self, t: int) -> list[tuple[int, int, int]]:
        """(left parent, right parent, target) in application order for step ``t``.

        Controls are numbered 0..N+1 including pads, targets 1..N.
        """
        n = self.columns
        direction = self.sweep[t]
        shift = 1 if direction == "rl" and self.alignment == "sweep" else 0
        order = range(1, n + 1) if direction == "lr" else range(n, 0, -1)
        return [(j - 1 + shift, j + shift, j) for j in order]


@dataclass
class ExactResult:
    """Per-row reduced states ``rho[t]`` (2^N x 2^N) and site densities."""

    rho: list[np.ndarray]
    densities: np.ndarray
    norm_drift: float = 0.0

    @property
    def n_avg(self) -> np.ndarray:
        return self.densities.mean(axis=1)


def apply_gate(psi: np.ndarray, gate: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply a 3-qubit gate to axes ``qubits`` of a state tensor of 2-dim legs."""
    g = gate.reshape((2,) * 6)
    out = np.tensordot(g, psi, axes=([3, 4, 5], list(qubits)))
    return np.moveaxis(out, [0, 1, 2], list(qubits))


def _row_densities(rho: np.ndarray, n: int) -> np.ndarray:
    diag = np.real(np.diagonal(rho)).reshape((2,) * n)
    return np.array(
        [diag.sum(axis=tuple(k for k in range(n) if k != j))[1] for j in range(n)]
    )


def _initial_row(spec: LatticeSpec) -> np.ndarray:
    n = spec.columns
    idx = (1 << n) - 1 if spec.initial_row == "full" else 0
    psi = np.zeros((1 << n, 1), dtype=complex)
    psi[idx, 0] = 1.0
    return psi


def run_exact(spec: LatticeSpec, p: GateParams, chunk: int = 1 << 22) -> ExactResult:
    """Exact row-by-row evolution.

    The reduced row state is kept as a purification ``rho = Psi Psi^dag``.
    Each step embeds every column of ``Psi`` in the register
    (pad, controls, fresh targets), applies the row of gates, and traces out
    pad and controls. Earlier rows never enter a gate again, so nothing is
    lost by discarding them.
    """
    n = spec.columns
    # register: pad, c_1..c_N, pad, t_1..t_N
    width = 2 * n + 2
    if width > spec.site_cap:
        raise ResourceError(f"register of {width} sites exceeds cap {spec.site_cap}")
    gate = build_G(p)
    psi = _initial_row(spec)
    rhos = [psi @ psi.conj().T]
    dens = [_row_densities(rhos[0], n)]
    drift = 0.0
    per_batch = max(1, chunk >> width)
    for t in range(spec.steps):
        sites = [(a, b, n + 1 + j) for a, b, j in spec.gate_sites(t)]
        rho_next = np.zeros((1 << n, 1 << n), dtype=complex)
        for lo in range(0, psi.shape[1], per_batch):
            block = psi[:, lo:lo + per_batch]
            r = block.shape[1]
            state = np.zeros((2, 1 << n, 2, 1 << n, r), dtype=complex)
            state[0, :, 0, 0, :] = block
            state = state.reshape((2,) * width + (r,))
            before = np.sum(np.abs(state) ** 2)
            for qubits in sites:
                state = apply_gate(state, gate, qubits)
            drift = max(drift, abs(np.sum(np.abs(state) ** 2) - before))
            m = state.reshape(1 << (n + 2), 1 << n, r)
            m = np.transpose(m, (1, 0, 2)).reshape(1 << n, -1)
            rho_next += m @ m.conj().T
        rho_next = 0.5 * (rho_next + rho_next.conj().T)
        w, v = np.linalg.eigh(rho_next)
        keep = w > 1e-15 * max(w.max(), 1e-300)
        psi = v[:, keep] * np.sqrt(w[keep])
        rhos.append(rho_next)
        dens.append(_row_densities(rho_next, n))
    return ExactResult(rhos, np.array(dens), drift)


def run_exact_full(spec: LatticeSpec, p: GateParams) -> ExactResult:
    """Single statevector over every site of the lattice plus two pads per row.

    Only feasible for tiny lattices; used to cross-check :func:`run_exact`.
    """
    n = spec.columns
    gate = build_G(p)
    # row t occupies [t*(n+2) + 1, ..., t*(n+2) + n], pads at either end
    stride = n + 2
    width = stride * spec.rows
    if width > spec.site_cap:
        raise ResourceError(f"lattice of {width} sites exceeds cap {spec.site_cap}")

    def col(t, j):  # j = 0 and j = n + 1 are the pads of row t
        return t * stride + j

    psi = np.zeros((2,) * width, dtype=complex)
    first = [0] * width
    if spec.initial_row == "full":
        for j in range(1, n + 1):
            first[col(0, j)] = 1
    psi[tuple(first)] = 1.0

    def row_rho(state, t):
        keep = [col(t, j) for j in range(1, n + 1)]
        rest = [k for k in range(width) if k not in keep]
        m = np.transpose(state, keep + rest).reshape(1 << n, -1)
        return m @ m.conj().T

    rhos = [row_rho(psi, 0)]
    dens = [_row_densities(rhos[0], n)]
    for t in range(spec.steps):
        for a, b, j in spec.gate_sites(t):
            psi = apply_gate(psi, gate, (col(t, a), col(t, b), col(t + 1, j)))
        rho = row_rho(psi, t + 1)
        rhos.append(rho)
        dens.append(_row_densities(rho, n))
    drift = abs(np.sum(np.abs(psi) ** 2) - 1.0)
    return ExactResult(rhos, np.array(dens), drift)


def reduced_density(rho: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """Partial trace of an ``n``-qubit density matrix onto ``keep``."""
    keep = list(keep)
    rest = [k for k in range(n) if k not in keep]
    t = rho.reshape((2,) * (2 * n))
    perm = keep + rest + [n + k for k in keep] + [n + k for k in rest]
    d_keep, d_rest = 1 << len(keep), 1 << len(rest)
    t = np.transpose(t, perm).reshape(d_keep, d_rest, d_keep, d_rest)
    return np.einsum("arbr->ab", t)


@dataclass
class ConcurrenceResult:
    rho_targets: np.ndarray
    lambdas: np.ndarray
    concurrence: float
    params: GateParams | None = field(default=None)


def concurrence(rho: np.ndarray, factor: np.ndarray | None = None) -> ConcurrenceResult:
    """Wootters concurrence of a two-qubit density matrix.

    The ``lambdas`` (square roots of the eigenvalues of ``rho rho~``) are
    computed as singular values of ``M^T (Y x Y) M`` where ``rho = M M^dag``.
    This has absolute rather than square-root accuracy: roundoff of 1e-17 in
    ``rho rho~`` would otherwise surface as lambdas of order 1e-9. ``factor``
    supplies ``M`` directly; without it ``M`` is built from the eigenvalues
    of ``rho`` clipped at 0, dropping those below 1e-14 of the largest.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"expected a 4x4 density matrix, got {rho.shape}")
    if factor is None:
        w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
        keep = w > 1e-14 * max(w.max(), 0.0)
        factor = v[:, keep] * np.sqrt(w[keep])
    yy = np.kron(SIGMA_Y, SIGMA_Y)
    sv = np.linalg.svd(factor.T @ yy @ factor, compute_uv=False)
    lambdas = np.zeros(4)
    k = min(4, sv.shape[0])
    lambdas[:k] = np.sort(sv)[::-1][:k]
    c = max(0.0, float(lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]))
    return ConcurrenceResult(rho, lambdas, c)


def target_pair_concurrence(p: GateParams) -> ConcurrenceResult:
    """Concurrence of two targets after two gates on controls ``|o*o>``.

    Register order (c1, c2, c3, t1, t2); gates act on (c1, c2, t1) and then
    on (c2, c3, t2).
    """
    gate = build_G(p)
    psi = np.zeros((2,) * 5, dtype=complex)
    psi[0, 1, 0, 0, 0] = 1.0
    psi = apply_gate(psi, gate, (0, 1, 3))
    psi = apply_gate(psi, gate, (1, 2, 4))
    m = np.transpose(psi, (3, 4, 0, 1, 2)).reshape(4, 8)
    res = concurrence(m @ m.conj().T, factor=m)
    res.params = p
    return res


def concurrence_map(gammas, omegas) -> list[tuple[float, float, float]]:
    """Rows ``(omega, gamma, concurrence)`` over the grid, omega-major."""
    rows = []
    for w in omegas:
        for g in gammas:
            c = target_pair_concurrence(GateParams(float(g), float(w))).concurrence
            rows.append((float(w), float(g), c))
    return rows
