"""Power-law fits, curvature classification, exponent bounds and critical scans.

Near an absorbing-state transition the density decays as ``n(t) ~ t**-alpha``
at criticality. In a log-log plot supercritical curves bend up (positive
curvature) and subcritical curves bend down, which is what the classifier
below keys on.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "DomainError",
    "ScanFailure",
    "FitReport",
    "ExponentBounds",
    "ScanResult",
    "DEAD_BAND",
    "powerlaw_fit",
    "exponent_bounds",
    "critical_gamma_scan",
    "SUBCRITICAL",
    "SUPERCRITICAL",
    "CRITICAL",
]

DEAD_BAND = 5e-3
SUBCRITICAL = "subcritical"
SUPERCRITICAL = "supercritical"
CRITICAL = "consistent-with-critical"


class DomainError(ValueError):
    """The fit window contains non-positive densities."""


class ScanFailure(RuntimeError):
    """No grid point produced a usable curve."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def _curve(series) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(series, tuple):
        t, n = series
    elif hasattr(series, "n_avg"):
        t, n = series.t, series.n_avg
    else:
        t, n = series.t, series.n
    return np.asarray(t, dtype=float), np.asarray(n, dtype=float)


@dataclass(frozen=True)
class FitReport:
    """Least-squares fits of ``log n`` against ``log t`` over ``window``.

    ``alpha`` is minus the slope of the straight-line fit, ``residual`` its RMS
    deviation in log space and ``curvature`` the quadratic coefficient of a
    second-order fit.
    """

    window: tuple[float, float]
    alpha: float
    amplitude: float
    residual: float
    curvature: float
    classification: str
    points: int


def powerlaw_fit(series, window=(30, 100), dead_band: float = DEAD_BAND) -> FitReport:
    """Fit ``n(t) = A t**-alpha`` on ``window`` (inclusive) and classify the curve.

    ``series`` may be a :class:`~qcatn.evolution.DensitySeries`, a
    :class:`~qcatn.meanfield.MfSeries` or a ``(t, n)`` tuple.
    """
    lo, hi = window
    if not lo < hi:
        raise ValueError(f"window must satisfy lo < hi, got {window}")
    t, n = _curve(series)
    if lo < t.min() or hi > t.max() or lo <= 0:
        raise ValueError(f"window {window} outside series domain [{t.min()}, {t.max()}]")
    mask = (t >= lo) & (t <= hi)
    if mask.sum() < 4:
        raise ValueError("fit window needs at least four points")
    if np.any(n[mask] <= 0):
        raise DomainError(f"non-positive density in window {window}: absorbing state reached")
    x, y = np.log(t[mask]), np.log(n[mask])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    curvature = np.polyfit(x, y, 2)[0]
    if curvature > dead_band:
        label = SUPERCRITICAL
    elif curvature < -dead_band:
        label = SUBCRITICAL
    else:
        label = CRITICAL
    return FitReport(
        window=(lo, hi),
        alpha=float(-slope),
        amplitude=float(np.exp(intercept)),
        residual=float(np.sqrt(np.mean(resid**2))),
        curvature=float(curvature),
        classification=label,
        points=int(mask.sum()),
    )


@dataclass(frozen=True)
class ExponentBounds:
    """``lower`` comes from a supercritical curve, ``upper`` from a subcritical one."""

    lower: float | None
    upper: float | None
    window: tuple[float, float]
    sources: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lower is not None and self.upper is not None and self.lower > self.upper:
            raise ValueError(f"inconsistent bounds: lower {self.lower} > upper {self.upper}")

    def contains(self, alpha: float) -> bool:
        lo = -np.inf if self.lower is None else self.lower
        hi = np.inf if self.upper is None else self.upper
        return bool(lo <= alpha <= hi)


def _source(series) -> dict:
    cfg = getattr(series, "config", None) or {}
    return {k: cfg[k] for k in ("gamma", "omega", "chi_max") if k in cfg}


def exponent_bounds(sub, sup, window=(20, 40), dead_band: float = DEAD_BAND) -> ExponentBounds:
    """Bracket alpha between fits to a supercritical and a subcritical curve."""
    sub_fit = powerlaw_fit(sub, window, dead_band)
    sup_fit = powerlaw_fit(sup, window, dead_band)
    if sub_fit.classification != SUBCRITICAL:
        raise ValueError(
            f"curve passed as subcritical is {sub_fit.classification} "
            f"(curvature {sub_fit.curvature:.3e}) {_source(sub)}"
        )
    if sup_fit.classification != SUPERCRITICAL:
        raise ValueError(
            f"curve passed as supercritical is {sup_fit.classification} "
            f"(curvature {sup_fit.curvature:.3e}) {_source(sup)}"
        )
    return ExponentBounds(
        lower=sup_fit.alpha,
        upper=sub_fit.alpha,
        window=tuple(window),
        sources={"subcritical": _source(sub), "supercritical": _source(sup)},
    )


@dataclass
class ScanResult:
    gamma_star: float
    reports: dict[float, FitReport]
    failures: dict[float, str]
    series: dict = field(default_factory=dict, repr=False)

    @property
    def best(self) -> FitReport:
        return self.reports[self.gamma_star]


def critical_gamma_scan(
    omega: float,
    gammas,
    base_config=None,
    window=(20, 50),
    runner: Callable[[float], object] | None = None,
    series: Mapping[float, object] | None = None,
    workers: int = 1,
    dead_band: float = DEAD_BAND,
) -> ScanResult:
    """Pick the gamma whose density curve is best described by a power law.

    Curves come from ``series`` if given, else from ``runner(gamma)``, else
    from :func:`~qcatn.evolution.evolve` on ``base_config`` with gamma and
    omega replaced. The winner minimises the RMS log residual of the
    straight-line fit; ties go to the smaller ``|curvature|``, then the
    smaller gamma.
    """
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise ValueError("gamma grid is empty")
    if series is None:
        if runner is not None:
            series = {g: runner(g) for g in gammas}
        else:
            if base_config is None:
                raise ValueError("need base_config, runner or series")
            from .evolution import evolve_many

            cfgs = [replace(base_config, gamma=g, omega=float(omega)) for g in gammas]
            series = dict(zip(gammas, evolve_many(cfgs, workers)))
    reports, failures = {}, {}
    for g in gammas:
        try:
            reports[g] = powerlaw_fit(series[g], window, dead_band)
        except (DomainError, ValueError) as err:
            failures[g] = str(err)
    if not reports:
        raise ScanFailure(f"no usable curve at omega={omega}", failures)
    best = min(reports, key=lambda g: (reports[g].residual, abs(reports[g].curvature), g))
    return ScanResult(best, reports, failures, dict(series))
