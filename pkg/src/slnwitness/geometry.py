"""Independent-coordinate probability vectors and the LHCS vertex curves.

For two Alice settings and a single Bob device with ``K`` outcomes, the
no-signaling and normalization constraints leave ``3 (K - 1) + 2``
independent coordinates.  They are stored in this fixed order (shown for the
two-detector array, ``K = 3``)::

    P(0,0|g1) P(0,1|g1) P(1,0|g1) P(1,1|g1) P(0,0|g2) P(0,1|g2) P_A(0|g1) P_A(0|g2)

Every JSON/CSV emission and every witness vector uses the same order.
The general scenario dimension is ``mA mB (MA MB - MA - MB + 1) + mA (MA - 1)
+ mB (MB - 1)`` (see :func:`independent_dimension`); only ``mA = 2, mB = 1,
MA = 2`` is implemented.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import DomainError, UnphysicalVectorError
from .physics import ARRAY, BobDevice, JointTable, get_device

__all__ = [
    "COMPONENT_LABELS",
    "STRATEGIES",
    "Strategy",
    "Vertex",
    "component_labels",
    "independent_dimension",
    "reconstruct_full",
    "reduce_to_independent",
    "vertex",
    "vertex_grid",
    "vertex_matrix",
    "vertex_polynomials",
]

RECONSTRUCT_TOL = 1e-9


class Strategy(NamedTuple):
    """Deterministic Alice outcomes for settings 1 and 2."""

    a1: int
    a2: int


STRATEGIES = (Strategy(0, 0), Strategy(0, 1), Strategy(1, 0), Strategy(1, 1))


@dataclass(frozen=True, eq=False)
class Vertex:
    m: np.ndarray
    strategy: Strategy
    t: float


def independent_dimension(m_a: int, m_b: int, n_out_a: int, n_out_b: int) -> int:
    """Number of independent joint probabilities after normalization and no-signaling."""
    return (
        m_a * m_b * (n_out_a * n_out_b - n_out_a - n_out_b + 1)
        + m_a * (n_out_a - 1)
        + m_b * (n_out_b - 1)
    )


def component_labels(device: BobDevice | str = ARRAY) -> list[str]:
    k = get_device(device).n_outcomes - 1
    labels = [f"P({a},{b}|g1)" for a in (0, 1) for b in range(k)]
    labels += [f"P(0,{b}|g2)" for b in range(k)]
    return labels + ["P_A(0|g1)", "P_A(0|g2)"]


COMPONENT_LABELS = tuple(component_labels(ARRAY))


def _device_for_dim(dim: int) -> BobDevice:
    if (dim - 2) % 3 or dim < 5:
        raise DomainError(f"no supported Bob device has {dim} independent coordinates")
    n_out = (dim - 2) // 3 + 1
    for name in ("array", "single"):
        device = get_device(name)
        if device.n_outcomes == n_out:
            return device
    raise DomainError(f"no supported Bob device has {n_out} outcomes")


def reduce_to_independent(table: JointTable) -> np.ndarray:
    p = table.p
    k = table.n_outcomes - 1
    return np.concatenate([p[0, 0, :k], p[0, 1, :k], p[1, 0, :k], p[:, 0, :].sum(axis=1)])


def reconstruct_full(v) -> JointTable:
    """Recover all joint probabilities from the independent coordinates.

    Uses ``P(0,K-1|g) = P_A(0|g) - sum_b<K-1 P(0,b|g)``, normalization for
    ``P(1,K-1|g1)``, and no-signaling on Bob's marginal for the second
    setting's ``n_a = 1`` row.
    """
    v = np.asarray(v, dtype=float)
    device = _device_for_dim(v.size)
    k = device.n_outcomes - 1
    p00_1, p10_1, p00_2 = v[:k], v[k : 2 * k], v[2 * k : 3 * k]
    pa1, pa2 = v[3 * k], v[3 * k + 1]

    p = np.empty((2, 2, k + 1))
    p[0, 0, :k] = p00_1
    p[0, 0, k] = pa1 - p00_1.sum()
    p[0, 1, :k] = p10_1
    p[0, 1, k] = 1 - pa1 - p10_1.sum()
    p[1, 0, :k] = p00_2
    p[1, 0, k] = pa2 - p00_2.sum()
    p[1, 1, :k] = p00_1 + p10_1 - p00_2
    p[1, 1, k] = 1 - pa2 - p[1, 1, :k].sum()
    if p.min() < -RECONSTRUCT_TOL:
        raise UnphysicalVectorError(f"vector reconstructs to a negative probability ({p.min():.3e})")
    return JointTable(p)


def _check_t(t: float) -> None:
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t must lie in [0, 1], got {t}")


def vertex(s: Strategy | tuple[int, int], t: float, device: BobDevice | str = ARRAY) -> Vertex:
    """Deterministic-Alice x coherent-Bob point ``M(s, t)``."""
    _check_t(t)
    s = Strategy(*s)
    if s not in STRATEGIES:
        raise DomainError(f"invalid strategy {s}")
    device = get_device(device)
    coeffs = vertex_polynomials(device)[STRATEGIES.index(s)]
    m = coeffs[0] + coeffs[1] * t + coeffs[2] * t * t
    return Vertex(m, s, float(t))


@lru_cache(maxsize=None)
def _vertex_polynomials(device: BobDevice) -> np.ndarray:
    k = device.n_outcomes - 1
    poly = np.array(device.polynomials, dtype=float)[:k].T  # (power, outcome)
    dim = 3 * k + 2
    out = np.zeros((4, 3, dim))
    for i, (a1, a2) in enumerate(STRATEGIES):
        if a1 == 0:
            out[i, :, 0:k] = poly
            out[i, 0, 3 * k] = 1.0
        else:
            out[i, :, k : 2 * k] = poly
        if a2 == 0:
            out[i, :, 2 * k : 3 * k] = poly
            out[i, 0, 3 * k + 1] = 1.0
    out.setflags(write=False)
    return out


def vertex_polynomials(device: BobDevice | str = ARRAY) -> np.ndarray:
    """Coefficients ``C[strategy, power, component]`` with ``M(s, t) = sum_j C[s, j] t**j``."""
    return _vertex_polynomials(get_device(device))


def vertex_grid(M: int, device: BobDevice | str = ARRAY) -> list[Vertex]:
    """All four strategies at ``t_k = k / (M - 1)``, ``k = 0..M-1``."""
    if M < 2:
        raise DomainError(f"grid size must be >= 2, got {M}")
    return [vertex(s, k / (M - 1), device) for k in range(M) for s in STRATEGIES]


def vertex_matrix(M: int, device: BobDevice | str = ARRAY) -> np.ndarray:
    """Rows of :func:`vertex_grid` stacked into a ``(4 M, dim)`` array."""
    if M < 2:
        raise DomainError(f"grid size must be >= 2, got {M}")
    t = np.arange(M) / (M - 1)
    powers = np.stack([np.ones_like(t), t, t * t], axis=1)  # (M, 3)
    pts = np.einsum("kj,sjd->ksd", powers, vertex_polynomials(device))
    return pts.reshape(4 * M, -1)
