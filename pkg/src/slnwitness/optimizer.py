"""Choice of the two LO amplitudes that maximises the relative violation.

Both amplitudes are kept at or above ``gamma_min`` so that Bob's conditional
statistics stay classically reproducible.  Swapping the two settings only
relabels coordinates, so ``V(g1, g2) = V(g2, g1)`` and the grid covers
``g1 < g2`` only.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, InfeasibleRegionError
from .geometry import reduce_to_independent
from .physics import ExperimentParams, gamma_min, joint_table
from .witness import Verdict, ViolationReport, find_witness

__all__ = ["OptimizationResult", "SearchConfig", "optimize"]

log = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1e-8


@dataclass(frozen=True)
class SearchConfig:
    lo: float = 0.0
    hi: float = 2.0
    h: float = 0.05
    grid_m: int = 30
    method: str = "lp"
    refine: bool = True
    xatol: float = 1e-4
    max_refine_evals: int = 200
    threads: int = 1


@dataclass(eq=False)
class OptimizationResult:
    gamma1: float
    gamma2: float
    report: ViolationReport
    gamma_min: float
    trace: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def witness(self) -> np.ndarray:
        return self.report.lam

    @property
    def v_coeff(self) -> float:
        return self.report.v_coeff

    @property
    def latent(self) -> bool:
        return self.report.verdict is Verdict.SLN

    def to_dict(self) -> dict:
        return {
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma_min": self.gamma_min,
            "latent": self.latent,
            "report": self.report.to_dict(),
            "trace": [list(row) for row in self.trace],
        }


def _evaluate_point(r, eta_a, eta_b, g1, g2, config: SearchConfig) -> ViolationReport | None:
    params = ExperimentParams(r, eta_a, eta_b, g1, g2)
    v = reduce_to_independent(joint_table(params))
    return find_witness(v, M=config.grid_m, method=config.method)


def _score(report: ViolationReport | None) -> tuple[int, float]:
    """Latent violations outrank non-latent ones; then larger V wins."""
    if report is None:
        return (0, 0.0)
    return (2 if report.verdict is Verdict.SLN else 1, report.v_coeff)


def optimize(
    r: float,
    eta_a: float,
    eta_b: float,
    config: SearchConfig | None = None,
) -> OptimizationResult | None:
    """Grid search over ``(g1, g2)`` followed by a bounded simplex refinement.

    Returns ``None`` when no LHCS violation is found anywhere.  A returned
    result may be non-latent (``result.latent`` is false) if only such
    violations exist.
    """
    config = config or SearchConfig()
    if config.h <= 0:
        raise DomainError(f"grid step must be positive, got {config.h}")
    ExperimentParams(r, eta_a, eta_b, 0.0, 1.0).check_physical()
    gmin = gamma_min(r, eta_a, eta_b)
    lo = max(gmin, config.lo)
    hi = config.hi
    n_steps = int(np.floor((hi - lo) / config.h + 1e-9))
    if hi <= lo or n_steps < 1:
        raise InfeasibleRegionError(f"no room for two amplitudes in [{lo:.6g}, {hi:.6g}]")
    grid = lo + config.h * np.arange(n_steps + 1)
    pairs = [(float(a), float(b)) for i, a in enumerate(grid) for b in grid[i + 1 :]]

    def run(pair):
        return _evaluate_point(r, eta_a, eta_b, *pair, config)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            reports = list(pool.map(run, pairs))
    else:
        reports = [run(p) for p in pairs]

    trace = [(g1, g2, rep.v_coeff if rep else 0.0) for (g1, g2), rep in zip(pairs, reports)]
    # strict '>' over lexicographically ordered pairs keeps the smallest pair on ties
    best_i = 0
    for i in range(1, len(pairs)):
        if _score(reports[i]) > _score(reports[best_i]):
            best_i = i
    best_pair, best_report = pairs[best_i], reports[best_i]
    log.info("grid: %d pairs, best %s at %s", len(pairs), _score(best_report), best_pair)
    if best_report is None:
        return None

    if config.refine:
        best_pair, best_report = _refine(r, eta_a, eta_b, lo, hi, best_pair, best_report, config, trace)

    return OptimizationResult(best_pair[0], best_pair[1], best_report, gmin, trace)


def _refine(r, eta_a, eta_b, lo, hi, start, start_report, config, trace):
    best = {"pair": start, "report": start_report}
    min_sep = config.xatol

    def project(x):
        g1, g2 = np.clip(x, lo, hi)
        if g2 - g1 < min_sep:
            mid = np.clip(0.5 * (g1 + g2), lo + min_sep / 2, hi - min_sep / 2)
            g1, g2 = mid - min_sep / 2, mid + min_sep / 2
        return float(g1), float(g2)

    def objective(x):
        pair = project(x)
        rep = _evaluate_point(r, eta_a, eta_b, *pair, config)
        trace.append((pair[0], pair[1], rep.v_coeff if rep else 0.0))
        if _score(rep) > _score(best["report"]):
            best["pair"], best["report"] = pair, rep
        # rank the same way as the grid: latent violations first
        level, value = _score(rep)
        return -(value + 10.0 * level)

    minimize(
        objective,
        np.asarray(start, dtype=float),
        method="Nelder-Mead",
        options={
            "xatol": config.xatol,
            "fatol": 1e-12,
            "maxfev": config.max_refine_evals,
            "initial_simplex": np.array(
                [start, (start[0] + config.h / 2, start[1]), (start[0], start[1] + config.h / 2)]
            ),
        },
    )
    return best["pair"], best["report"]
