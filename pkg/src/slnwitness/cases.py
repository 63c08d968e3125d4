"""Reference experimental configurations with published witnesses.

Each case pairs squeezing, efficiencies and LO amplitudes with the witness
vector reported for it (printed to two decimals) and the reported relative
violation coefficient.  Values are copied verbatim; see ``DATA_VERSION``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .physics import ExperimentParams

__all__ = ["CASES", "DATA_VERSION", "ReferenceCase", "get_case"]

# bump when any constant below changes
DATA_VERSION = "1"


@dataclass(frozen=True)
class ReferenceCase:
    name: str
    params: ExperimentParams
    published_lambda: tuple[float, ...]
    published_v_coeff: float

    @property
    def lam(self) -> np.ndarray:
        return np.array(self.published_lambda, dtype=float)


CASES = {
    "A": ReferenceCase(
        "A",
        ExperimentParams(r=0.6, eta_a=0.9, eta_b=0.75, gamma1=0.54, gamma2=1.04),
        (0.42, 0.43, 0.1, 0.17, 0.38, 0.46, -0.3, -0.39),
        2.6e-3,
    ),
    "B": ReferenceCase(
        "B",
        ExperimentParams(r=0.8, eta_a=0.85, eta_b=0.5, gamma1=0.44, gamma2=1.04),
        (0.48, 0.49, 0.1, 0.19, 0.32, 0.39, -0.35, -0.32),
        4.1e-3,
    ),
    "C": ReferenceCase(
        "C",
        ExperimentParams(r=1.0, eta_a=0.8, eta_b=0.3, gamma1=0.1, gamma2=0.8),
        # last entry printed as +0.52; the matching hull facet has -0.52
        (0.0, -0.06, 0.11, 0.22, 0.52, 0.61, 0.15, 0.52),
        1.2e-2,
    ),
}


def get_case(name: str) -> ReferenceCase:
    try:
        return CASES[name.upper()]
    except KeyError:
        raise DomainError(f"unknown case {name!r}; expected one of {sorted(CASES)}") from None
