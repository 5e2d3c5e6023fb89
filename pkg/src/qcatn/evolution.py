"""Boundary-MPS evolution of the reduced row state.

The boundary MPS of the double-layer network is the vectorised reduced
row state ``rho(t)``. One time step applies the row of gates to
``rho(t) (x) |o..o><o..o|`` and traces out the controls.

Implementation notes
--------------------
* Site tensors have axes (left bond, physical, right bond) and are stored in
  the orthonormal Hermitian operator basis ``HERMITIAN_BASIS``. A Hermitian
  operator has real coordinates in that basis and every gate superoperator is
  a real matrix there, so the whole network is real. The basis change is a
  local unitary on each physical leg, so singular values and truncations are
  identical to those of the column-stacked complex representation.
* A control site is never touched again once the gate that consumes it last
  has acted, so fresh targets and control trace-outs are folded into a
  two-site map per gate. A row update is then a single zip sweep over the
  chain of N controls plus one empty pad at the end where the sweep starts,
  and each bond is split once.
* Edge convention matches :mod:`qcatn.exact`: with ``alignment="sweep"`` the
  pad sits at the starting end of each sweep, so target ``j`` has parents
  ``(j-1, j)`` going left-to-right and ``(j, j+1)`` going right-to-left.
"""
from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg

from .gates import GateParams, build_G_super, vectorize
from .tensor import DEFAULT_CUTOFF, svd_split

__all__ = [
    "NumericalFailure",
    "EvolutionConfig",
    "RowStateMPS",
    "DensitySeries",
    "HERMITIAN_BASIS",
    "TRACE_VEC",
    "DENSITY_VEC",
    "EMPTY_VEC",
    "FULL_VEC",
    "zip_maps",
    "init_row",
    "empty_row",
    "from_product",
    "step",
    "measure_density",
    "evolve",
    "evolve_many",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_VERSION = "qcatn-rowmps-1"
TRACE_COLLAPSE = 1e-8

_S = 1.0 / math.sqrt(2.0)
HERMITIAN_BASIS = np.array(
    [
        [[1, 0], [0, 0]],
        [[0, 0], [0, 1]],
        [[0, _S], [_S, 0]],
        [[0, 1j * _S], [-1j * _S, 0]],
    ],
    dtype=complex,
)
# coordinates c_k = Tr(B_k rho) = <vec(B_k), vec(rho)>
_TO_HERM = np.array([vectorize(b).conj() for b in HERMITIAN_BASIS])

TRACE_VEC = np.array([1.0, 1.0, 0.0, 0.0])
DENSITY_VEC = np.array([0.0, 1.0, 0.0, 0.0])
EMPTY_VEC = np.array([1.0, 0.0, 0.0, 0.0])
FULL_VEC = np.array([0.0, 1.0, 0.0, 0.0])


class NumericalFailure(ArithmeticError):
    """The evolution produced an unusable state (e.g. trace collapse)."""

    def __init__(self, message: str, t: int | None = None):
        super().__init__(message if t is None else f"{message} (at t={t})")
        self.t = t


@dataclass(frozen=True)
class EvolutionConfig:
    """Parameters of one boundary-MPS run.

    ``compression`` selects how bonds are truncated: ``"zip"`` truncates to
    ``chi_max`` at every gate split; ``"deferred"`` lets bonds grow to
    ``4 * chi_max`` during the row sweep and compresses to ``chi_max`` with
    one canonical sweep at the end of the step.
    """

    n_columns: int
    t_max: int
    chi_max: int
    gamma: float
    omega: float = 0.0
    sweep_alternation: bool = True
    cutoff: float = DEFAULT_CUTOFF
    compression: str = "zip"
    alignment: str = "sweep"

    def __post_init__(self):
        if self.n_columns < 2:
            raise ValueError("n_columns must be >= 2")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.chi_max < 1:
            raise ValueError("chi_max must be >= 1")
        if self.cutoff < 0:
            raise ValueError("cutoff must be non-negative")
        if self.compression not in ("zip", "deferred"):
            raise ValueError(f"unknown compression scheme {self.compression!r}")
        if self.alignment not in ("sweep", "left"):
            raise ValueError(f"unknown alignment {self.alignment!r}")
        GateParams(self.gamma, self.omega)

    @property
    def params(self) -> GateParams:
        return GateParams(self.gamma, self.omega)

    def direction(self, t: int) -> str:
        if self.sweep_alternation and t % 2 == 1:
            return "rl"
        return "lr"

    def pad_side(self, t: int) -> str:
        if self.direction(t) == "rl" and self.alignment == "sweep":
            return "right"
        return "left"


@dataclass(frozen=True)
class RowStateMPS:
    """Tensor train for the vectorised reduced row state.

    ``center`` is the orthogonality centre: tensors to its left are left
    isometries and tensors to its right are right isometries.
    """

    tensors: tuple[np.ndarray, ...]
    chi_max: int
    center: int = 0
    cumulative_discarded_weight: float = 0.0
    step_discarded_weight: float = 0.0

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [a.shape[2] for a in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def trace(self) -> float:
        return _closed(self.tensors, TRACE_VEC)

    def to_vectorized(self) -> list[np.ndarray]:
        """Site tensors in the column-stacked complex convention (ket fastest)."""
        back = _TO_HERM.conj().T
        return [np.einsum("vk,lkr->lvr", back, a) for a in self.tensors]

    def to_dense(self) -> np.ndarray:
        """Full ``2^N x 2^N`` density matrix. Small N only."""
        n = self.n_sites
        if n > 12:
            raise MemoryError("dense reconstruction limited to 12 sites")
        psi = np.ones((1, 1), dtype=complex)
        for a in self.to_vectorized():
            psi = np.tensordot(psi, a, axes=(psi.ndim - 1, 0))
        v = psi.reshape((4,) * n)
        # each site index is (bra, ket) with ket fastest
        v = v.reshape((2, 2) * n)
        bras = list(range(0, 2 * n, 2))
        kets = list(range(1, 2 * n, 2))
        return np.transpose(v, kets + bras).reshape(1 << n, 1 << n)


def _closed(tensors, vec) -> float:
    env = np.ones(1)
    for a in tensors:
        env = env @ np.tensordot(a, vec, axes=(1, 0))
    return float(env[0])


def _real_super(p: GateParams) -> np.ndarray:
    q3 = np.kron(np.kron(_TO_HERM, _TO_HERM), _TO_HERM)
    s = q3 @ build_G_super(p) @ q3.conj().T
    if np.max(np.abs(s.imag)) > 1e-12:
        raise NumericalFailure("gate superoperator is not real in the Hermitian basis")
    return np.ascontiguousarray(s.real)


def zip_maps(p: GateParams) -> dict[str, np.ndarray]:
    """Two-site maps used by the row sweep, each 16x16 (out, in).

    ``"lr"``: (c_{j-1}, c_j) -> (t_j, c_j), consuming c_{j-1}.
    ``"rl"``: (c_{j-1}, c_j) -> (c_{j-1}, t_j), consuming c_j.
    """
    s = _real_super(p).reshape((4,) * 6)  # (c1, c2, t | c1', c2', t')
    s = np.tensordot(s, EMPTY_VEC, axes=(5, 0))  # fresh empty target
    lr = np.einsum("a,abtxy->tbxy", TRACE_VEC, s).reshape(16, 16)
    rl = np.einsum("b,abtxy->atxy", TRACE_VEC, s).reshape(16, 16)
    return {"lr": lr, "rl": rl}


def from_product(site_vectors, chi_max: int) -> RowStateMPS:
    """Bond-1 state from per-site coordinates in the Hermitian basis."""
    tensors = tuple(np.asarray(v, dtype=float).reshape(1, 4, 1).copy() for v in site_vectors)
    return RowStateMPS(tensors, chi_max)


def init_row(n_columns: int, chi_max: int = 1) -> RowStateMPS:
    """Every column occupied: ``|*><*|`` on each site."""
    if n_columns < 2:
        raise ValueError("n_columns must be >= 2")
    return from_product([FULL_VEC] * n_columns, chi_max)


def empty_row(n_columns: int, chi_max: int = 1) -> RowStateMPS:
    """The absorbing configuration."""
    if n_columns < 2:
        raise ValueError("n_columns must be >= 2")
    return from_product([EMPTY_VEC] * n_columns, chi_max)


def _move_center(tensors: list, center: int, target: int) -> int:
    while center < target:
        a = tensors[center]
        dl, d, dr = a.shape
        q, r = scipy.linalg.qr(a.reshape(dl * d, dr), mode="economic", check_finite=False)
        tensors[center] = q.reshape(dl, d, -1)
        tensors[center + 1] = np.tensordot(r, tensors[center + 1], axes=(1, 0))
        center += 1
    while center > target:
        a = tensors[center]
        dl, d, dr = a.shape
        q, r = scipy.linalg.qr(a.reshape(dl, d * dr).T, mode="economic", check_finite=False)
        tensors[center] = q.T.reshape(-1, d, dr)
        tensors[center - 1] = np.tensordot(tensors[center - 1], r.T, axes=(2, 0))
        center -= 1
    return center


def _split(theta, cap, cutoff, absorb):
    dl, _, _, dr = theta.shape
    u, s, vh, dw = svd_split(theta.reshape(dl * 4, 4 * dr), cap, cutoff)
    if absorb == "right":
        return u.reshape(dl, 4, -1), (s[:, None] * vh).reshape(-1, 4, dr), dw
    return (u * s).reshape(dl, 4, -1), vh.reshape(-1, 4, dr), dw


def _sweep(tensors: list, gate: np.ndarray, direction: str, cap, cutoff) -> float:
    """Apply one row of gates in place on a chain of N + 1 control sites.

    Gate ``k`` acts on chain positions ``(k, k + 1)``. The control left over
    at the far end is traced out. Returns the summed discarded weight; on
    exit the chain has N sites with the centre at the end reached.
    """
    n = len(tensors) - 1
    discarded = 0.0
    pairs = range(n) if direction == "lr" else range(n - 1, -1, -1)
    absorb = "right" if direction == "lr" else "left"
    for j in pairs:
        theta = np.tensordot(tensors[j], tensors[j + 1], axes=(2, 0))
        dl, dr = theta.shape[0], theta.shape[3]
        theta = np.tensordot(theta.reshape(dl, 16, dr), gate, axes=(1, 1))
        theta = np.transpose(theta, (0, 2, 1)).reshape(dl, 4, 4, dr)
        tensors[j], tensors[j + 1], dw = _split(theta, cap, cutoff, absorb)
        discarded += dw
    if direction == "lr":
        last = tensors.pop()
        v = np.tensordot(last, TRACE_VEC, axes=(1, 0))  # (D, 1)
        tensors[-1] = np.tensordot(tensors[-1], v, axes=(2, 0))
    else:
        first = tensors.pop(0)
        v = np.tensordot(first, TRACE_VEC, axes=(1, 0))  # (1, D)
        tensors[0] = np.tensordot(v, tensors[0], axes=(1, 0))
    return discarded


def _compress(tensors: list, center: int, chi, cutoff) -> tuple[int, float]:
    """Truncating sweep away from the centre at one end of the chain."""
    n = len(tensors)
    discarded = 0.0
    if center == n - 1:
        for i in range(n - 1, 0, -1):
            a = tensors[i]
            dl, d, dr = a.shape
            u, s, vh, dw = svd_split(a.reshape(dl, d * dr), chi, cutoff)
            tensors[i] = vh.reshape(-1, d, dr)
            tensors[i - 1] = np.tensordot(tensors[i - 1], u * s, axes=(2, 0))
            discarded += dw
        return 0, discarded
    center = _move_center(tensors, center, 0)
    for i in range(n - 1):
        a = tensors[i]
        dl, d, dr = a.shape
        u, s, vh, dw = svd_split(a.reshape(dl * d, dr), chi, cutoff)
        tensors[i] = u.reshape(dl, d, -1)
        tensors[i + 1] = np.tensordot(s[:, None] * vh, tensors[i + 1], axes=(1, 0))
        discarded += dw
    return n - 1, discarded


_MAP_CACHE: dict[GateParams, dict[str, np.ndarray]] = {}


def _maps(p: GateParams) -> dict[str, np.ndarray]:
    if p not in _MAP_CACHE:
        if len(_MAP_CACHE) > 64:
            _MAP_CACHE.clear()
        _MAP_CACHE[p] = zip_maps(p)
    return _MAP_CACHE[p]


def step(
    state: RowStateMPS,
    cfg: EvolutionConfig,
    t: int,
    *,
    renormalize: bool = True,
    truncate: bool = True,
) -> RowStateMPS:
    """Advance the row state from ``t`` to ``t + 1``.

    With ``truncate=False`` no bond cap or cutoff is applied and with
    ``renormalize=False`` the trace is left as produced by the row channel;
    both exist for diagnostics.
    """
    direction = cfg.direction(t)
    tensors = list(state.tensors)
    n = len(tensors)
    center = _move_center(tensors, state.center, 0 if direction == "lr" else n - 1)
    pad = EMPTY_VEC.reshape(1, 4, 1)
    if cfg.pad_side(t) == "left":
        tensors.insert(0, pad)
    else:
        tensors.append(pad)

    if not truncate:
        cap, cutoff = None, 0.0
    elif cfg.compression == "zip":
        cap, cutoff = cfg.chi_max, cfg.cutoff
    else:
        cap, cutoff = 4 * cfg.chi_max, cfg.cutoff
    discarded = _sweep(tensors, _maps(cfg.params)[direction], direction, cap, cutoff)
    center = n - 1 if direction == "lr" else 0
    if truncate and cfg.compression == "deferred":
        center, extra = _compress(tensors, center, cfg.chi_max, cfg.cutoff)
        discarded += extra

    if renormalize:
        tr = _closed(tensors, TRACE_VEC)
        if not math.isfinite(tr) or abs(tr) < TRACE_COLLAPSE:
            raise NumericalFailure(f"trace collapsed to {tr:.3e}", t)
        tensors[center] = tensors[center] / tr
    return RowStateMPS(
        tuple(tensors),
        cfg.chi_max,
        center,
        state.cumulative_discarded_weight + discarded,
        discarded,
    )


def measure_density(state: RowStateMPS) -> tuple[np.ndarray, float]:
    """Per-site occupations ``Tr(rho n_j)`` and their average (raw, unclipped)."""
    tr_mats = [np.tensordot(a, TRACE_VEC, axes=(1, 0)) for a in state.tensors]
    n_mats = [np.tensordot(a, DENSITY_VEC, axes=(1, 0)) for a in state.tensors]
    n = len(tr_mats)
    right = [np.ones(1)] * (n + 1)
    for i in range(n - 1, -1, -1):
        right[i] = tr_mats[i] @ right[i + 1]
    total = float(right[0][0])
    dens = np.empty(n)
    left = np.ones(1)
    for i in range(n):
        dens[i] = left @ n_mats[i] @ right[i + 1]
        left = left @ tr_mats[i]
    dens /= total
    return dens, float(dens.mean())


@dataclass
class DensitySeries:
    """Record of one evolution. Densities are raw; clip only for reporting."""

    t: np.ndarray
    n_avg: np.ndarray
    site_densities: np.ndarray
    discarded_weight: np.ndarray
    max_bond: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def cumulative_discarded_weight(self) -> np.ndarray:
        return np.cumsum(self.discarded_weight)

    def clipped(self) -> np.ndarray:
        return np.clip(self.site_densities, 0.0, 1.0)

    def to_csv(self, path, per_site: bool = True, metadata: dict | None = None) -> None:
        """Write ``t,n_avg,discarded_weight,max_bond[,n_1..n_N]``.

        Leading ``#`` lines carry the resolved configuration.
        """
        meta = dict(self.config)
        meta.update(metadata or {})
        clipped = self.clipped()
        n_cols = clipped.shape[1]
        own = str(path) != "-"
        fh = open(path, "w", newline="", encoding="utf-8") if own else sys.stdout
        try:
            for k, v in meta.items():
                fh.write(f"# {k}={v}\n")
            w = csv.writer(fh, lineterminator="\n")
            header = ["t", "n_avg", "discarded_weight", "max_bond"]
            if per_site:
                header += [f"n_{j + 1}" for j in range(n_cols)]
            w.writerow(header)
            for i, t in enumerate(self.t):
                row = [int(t), repr(float(clipped[i].mean())),
                       repr(float(self.discarded_weight[i])), int(self.max_bond[i])]
                if per_site:
                    row += [repr(float(x)) for x in clipped[i]]
                w.writerow(row)
        finally:
            if own:
                fh.close()

    @classmethod
    def from_csv(cls, path) -> "DensitySeries":
        meta = {}
        rows = []
        with open(path, encoding="utf-8") as fh:
            lines = []
            for line in fh:
                if line.startswith("#"):
                    k, _, v = line[1:].strip().partition("=")
                    meta[k.strip()] = v.strip()
                else:
                    lines.append(line)
        reader = csv.reader(lines)
        header = next(reader)
        rows = np.array([[float(x) for x in r] for r in reader if r])
        site_cols = [i for i, h in enumerate(header) if h.startswith("n_") and h != "n_avg"]
        n_avg = rows[:, header.index("n_avg")]
        sites = rows[:, site_cols] if site_cols else n_avg[:, None]
        return cls(
            t=rows[:, header.index("t")].astype(int),
            n_avg=n_avg,
            site_densities=sites,
            discarded_weight=rows[:, header.index("discarded_weight")],
            max_bond=rows[:, header.index("max_bond")].astype(int),
            config=meta,
        )


def evolve(
    cfg: EvolutionConfig,
    initial: RowStateMPS | None = None,
    t0: int = 0,
    callback=None,
) -> DensitySeries:
    """Run ``cfg.t_max`` steps from the occupied row (or ``initial`` at ``t0``).

    ``callback(t, state)`` is invoked after every recorded step.
    """
    state = initial if initial is not None else init_row(cfg.n_columns, cfg.chi_max)
    state = replace(state, chi_max=cfg.chi_max)
    ts, avgs, sites, dws, bonds = [], [], [], [], []

    def record(t, s):
        dens, avg = measure_density(s)
        ts.append(t)
        avgs.append(avg)
        sites.append(dens)
        dws.append(s.step_discarded_weight if t > t0 else 0.0)
        bonds.append(s.max_bond)
        if callback is not None:
            callback(t, s)

    record(t0, state)
    for t in range(t0, t0 + cfg.t_max):
        state = step(state, cfg, t)
        record(t + 1, state)
    return DensitySeries(
        t=np.array(ts),
        n_avg=np.array(avgs),
        site_densities=np.array(sites),
        discarded_weight=np.array(dws),
        max_bond=np.array(bonds),
        config=asdict(cfg),
    )


def evolve_many(configs, workers: int = 1) -> list[DensitySeries]:
    """Independent runs, optionally in a process pool. Order is preserved."""
    configs = list(configs)
    if workers <= 1 or len(configs) <= 1:
        return [evolve(c) for c in configs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(evolve, configs))


def save_checkpoint(path, state: RowStateMPS, cfg: EvolutionConfig, t: int) -> None:
    """Binary dump of the site tensors with a JSON header (``.npz``)."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "t": int(t),
        "config": asdict(cfg),
        "center": state.center,
        "chi_max": state.chi_max,
        "cumulative_discarded_weight": state.cumulative_discarded_weight,
        "step_discarded_weight": state.step_discarded_weight,
        "shapes": [list(a.shape) for a in state.tensors],
    }
    arrays = {f"site_{i:05d}": a for i, a in enumerate(state.tensors)}
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path) -> tuple[RowStateMPS, EvolutionConfig, int]:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
        tensors = tuple(data[f"site_{i:05d}"] for i in range(len(meta["shapes"])))
    for a, shape in zip(tensors, meta["shapes"]):
        if list(a.shape) != shape:
            raise ValueError("checkpoint shape header does not match payload")
    state = RowStateMPS(
        tensors,
        meta["chi_max"],
        meta["center"],
        meta["cumulative_discarded_weight"],
        meta["step_discarded_weight"],
    )
    return state, EvolutionConfig(**meta["config"]), meta["t"]
