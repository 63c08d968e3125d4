"""Click statistics of the phase-randomized two-mode squeezed vacuum.

Alice uses displaced on-off detection with two local-oscillator settings
``gamma1``/``gamma2``; Bob counts clicks on an array of two on-off detectors
(or, for the no-violation check, on a single on-off detector).  All losses
are folded into the detector POVMs.

Two independent routes to the joint table are provided:

* :func:`joint_table` -- closed-form generating-function expressions;
* :func:`fock_oracle_table` -- Born's rule summed term by term in a truncated
  Fock basis, with Alice's POVM diagonal obtained from a numerically
  exponentiated displacement operator and Bob's from photon-routing
  enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from .errors import (
    ConditioningError,
    ConsistencyError,
    DomainError,
    TailBoundError,
)

__all__ = [
    "ARRAY",
    "SINGLE",
    "BobDevice",
    "ConditionalDist",
    "ExperimentParams",
    "JointTable",
    "classicality_margin",
    "coherent_click_prob",
    "conditional_dist",
    "fock_cutoff",
    "fock_oracle_table",
    "gamma_min",
    "get_device",
    "joint_table",
    "margin_curve",
    "no_click_exponents",
    "single_detector_click_prob",
]

NEGATIVE_TOL = 1e-12
MARGIN_TOL = 1e-12
FOCK_TAIL_TOL = 1e-14


@dataclass(frozen=True)
class BobDevice:
    """Bob's photocounting device.

    ``polynomials[k]`` holds the coefficients (lowest order first) of the
    coherent-state probability of outcome ``k`` as a polynomial in
    ``t = exp(-|alpha|**2 / 2)``.
    """

    name: str
    n_outcomes: int
    polynomials: tuple[tuple[float, float, float], ...]

    def coherent_probs(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([c0 + c1 * t + c2 * t * t for c0, c1, c2 in self.polynomials], axis=-1)


ARRAY = BobDevice("array", 3, ((0.0, 0.0, 1.0), (0.0, 2.0, -2.0), (1.0, -2.0, 1.0)))
SINGLE = BobDevice("single", 2, ((0.0, 0.0, 1.0), (1.0, 0.0, -1.0)))
_DEVICES = {d.name: d for d in (ARRAY, SINGLE)}


def get_device(device: BobDevice | str) -> BobDevice:
    if isinstance(device, BobDevice):
        return device
    try:
        return _DEVICES[device]
    except KeyError:
        raise DomainError(f"unknown Bob device {device!r}; expected one of {sorted(_DEVICES)}") from None


@dataclass(frozen=True)
class ExperimentParams:
    """Squeezing, efficiencies and the two LO amplitudes.

    Efficiencies of exactly zero are accepted here so that boundary identities
    can be exercised; :meth:`check_physical` rejects them.
    """

    r: float
    eta_a: float
    eta_b: float
    gamma1: float
    gamma2: float

    def __post_init__(self):
        for name in ("r", "eta_a", "eta_b", "gamma1", "gamma2"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
        if self.r < 0:
            raise DomainError(f"r must be >= 0, got {self.r}")
        for name in ("eta_a", "eta_b"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {value}")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise DomainError("LO amplitudes must be nonnegative")
        if self.gamma1 == self.gamma2:
            raise DomainError("gamma1 and gamma2 must differ (two distinct settings)")

    def check_physical(self) -> None:
        if self.eta_a <= 0 or self.eta_b <= 0:
            raise DomainError("efficiencies must be strictly positive")

    @property
    def gammas(self) -> tuple[float, float]:
        return (self.gamma1, self.gamma2)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "eta_a": self.eta_a,
            "eta_b": self.eta_b,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
        }


@dataclass(frozen=True, eq=False)
class JointTable:
    """Joint click probabilities ``p[setting, n_a, n_b]`` (settings 0-based)."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 3 or p.shape[:2] != (2, 2) or p.shape[2] not in (2, 3):
            raise DomainError(f"joint table must have shape (2, 2, K) with K in (2, 3), got {p.shape}")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def n_outcomes(self) -> int:
        return self.p.shape[2]

    @property
    def alice_marginal(self) -> np.ndarray:
        return self.p.sum(axis=2)

    @property
    def bob_marginal(self) -> np.ndarray:
        return self.p.sum(axis=1)

    def validate(self, tol: float = NEGATIVE_TOL) -> None:
        p = self.p
        if p.min() < -tol or p.max() > 1 + tol:
            raise ConsistencyError(f"probabilities outside [0, 1]: min={p.min():.3e}, max={p.max():.3e}")
        sums = p.sum(axis=(1, 2))
        if np.abs(sums - 1).max() > tol:
            raise ConsistencyError(f"per-setting sums deviate from 1: {sums}")
        bob = self.bob_marginal
        if np.abs(bob[0] - bob[1]).max() > tol:
            raise ConsistencyError("Bob marginal depends on Alice's setting")

    def allclose(self, other: "JointTable", atol: float) -> bool:
        return self.p.shape == other.p.shape and bool(np.abs(self.p - other.p).max() <= atol)


@dataclass(frozen=True, eq=False)
class ConditionalDist:
    """Bob's click distribution given Alice's outcome ``n_a`` at ``setting`` (1 or 2)."""

    q: np.ndarray
    setting: int
    n_a: int


def _check_t(t: float) -> None:
    if not 0.0 <= t <= 1.0 or math.isnan(t):
        raise DomainError(f"t must lie in [0, 1], got {t}")


def coherent_click_prob(n_b: int, t: float) -> float:
    """Coherent-state click probability for the two-detector array.

    ``t = exp(-|alpha|**2 / 2)``; the outcome counts triggered detectors.
    """
    _check_t(t)
    if n_b not in (0, 1, 2):
        raise DomainError(f"n_b must be 0, 1 or 2, got {n_b}")
    return math.comb(2, n_b) * t ** (2 - n_b) * (1 - t) ** n_b


def single_detector_click_prob(n_b: int, t: float) -> float:
    """Coherent-state probability of a single on-off detector outcome."""
    _check_t(t)
    if n_b not in (0, 1):
        raise DomainError(f"n_b must be 0 or 1, got {n_b}")
    no_click = t * t  # exp(-|alpha|^2)
    return no_click ** (1 - n_b) * (1 - no_click) ** n_b


# -- closed form -------------------------------------------------------------


def _f(s, gamma, eta_a):
    d = s + eta_a * (1 - s)
    return np.exp(-s * gamma * gamma / d) / d


def _setting_rows(r: float, eta_a: float, eta_b: float, gamma, device: BobDevice = ARRAY) -> np.ndarray:
    """``p[..., n_a, n_b]`` for one LO amplitude (broadcasts over ``gamma``)."""
    gamma = np.asarray(gamma, dtype=float)
    ch2 = math.cosh(r) ** 2
    sech2 = 1.0 / ch2
    tanh2 = math.tanh(r) ** 2
    sinh2 = math.sinh(r) ** 2

    p00 = sech2 * _f(1 - tanh2 * (1 - eta_b), gamma, eta_a)
    pa0 = np.exp(-gamma * gamma / (1 + eta_a * sinh2)) / (1 + eta_a * sinh2)
    pb0 = sech2 / (1 - tanh2 * (1 - eta_b))

    out = np.empty(gamma.shape + (2, device.n_outcomes))
    if device is ARRAY:
        p01 = 2 * (sech2 * _f(sech2 + 0.5 * eta_b * tanh2, gamma, eta_a) - p00)
        pb1 = 2 * eta_b * sinh2 / ((1 + eta_b * sinh2) * (2 + eta_b * sinh2))
        out[..., 0, 0] = p00
        out[..., 0, 1] = p01
        out[..., 0, 2] = pa0 - p00 - p01
        out[..., 1, 0] = pb0 - p00
        out[..., 1, 1] = pb1 - p01
        out[..., 1, 2] = 1 - pa0 - out[..., 1, 0] - out[..., 1, 1]
    elif device is SINGLE:
        out[..., 0, 0] = p00
        out[..., 0, 1] = pa0 - p00
        out[..., 1, 0] = pb0 - p00
        out[..., 1, 1] = 1 - pa0 - out[..., 1, 0]
    else:
        raise DomainError(f"no closed form for device {device.name!r}")
    return out


def joint_table(params: ExperimentParams, device: BobDevice | str = ARRAY) -> JointTable:
    """Closed-form joint table for both settings."""
    device = get_device(device)
    p = _setting_rows(params.r, params.eta_a, params.eta_b, np.array(params.gammas), device)
    if p.min() < -NEGATIVE_TOL:
        raise ConsistencyError(f"closed form produced a negative probability ({p.min():.3e}) for {params}")
    return JointTable(p)


def no_click_exponents(r: float, eta_a: float, eta_b: float) -> tuple[float, float, float]:
    """Prefactor and exponents ``(K, s0, s1)`` of Bob's ``n_a = 0`` conditional statistics.

    With ``g`` the LO amplitude,

    * ``(2 P_B(0|0) + P_B(1|0))**2 / (4 P_B(0|0)) = K * exp(-(s1 - s0) * g**2)``,
    * ``P_B(0|0) = (d / D0) * exp(-s0 * g**2)`` and ``2 P_B(0|0) + P_B(1|0) = 2 (d / D1) * exp(-s1 * g**2 / 2)``,

    where ``d = sech^2 r + eta_a tanh^2 r`` and ``D0``, ``D1`` are the
    denominators of ``s0``, ``s1``.  ``D1`` is the mean of ``d`` and ``D0``, so
    ``K = d * D0 / D1**2 <= 1`` and ``s1 >= s0``: the conditional statistics
    always satisfy the classicality inequality.
    """
    sinh2 = math.sinh(r) ** 2
    sech2 = 1.0 / math.cosh(r) ** 2
    tanh2 = math.tanh(r) ** 2
    c = eta_a * eta_b * sinh2 / (1 + eta_a * sinh2)
    d = sech2 + eta_a * tanh2
    d0 = sech2 + (eta_b + eta_a * (1 - eta_b)) * tanh2
    d1 = sech2 + 0.5 * (eta_b + eta_a * (2 - eta_b)) * tanh2
    return d * d0 / (d1 * d1), c / d0, c / d1


# -- Fock-space oracle -------------------------------------------------------


def fock_cutoff(r: float, tol: float = FOCK_TAIL_TOL) -> int:
    """Smallest ``N`` whose Schmidt-weight tail beyond ``N`` is below ``tol``."""
    tanh2 = math.tanh(r) ** 2
    if tanh2 == 0.0:
        return 0
    # tail = sech^2 * tanh^(2(N+1)) / (1 - tanh^2) = tanh^(2(N+1))
    n = max(0, math.ceil(math.log(tol) / math.log(tanh2)) - 1)
    while _fock_tail(r, n) >= tol:
        n += 1
    return n


def _fock_tail(r: float, n: int) -> float:
    tanh2 = math.tanh(r) ** 2
    sech2 = 1.0 / math.cosh(r) ** 2
    return sech2 * tanh2 ** (n + 1) / (1 - tanh2)


@lru_cache(maxsize=256)
def _alice_no_click_diagonal(gamma: float, eta_a: float, n_max: int) -> np.ndarray:
    """``<n|Pi_A(0|gamma)|n>`` for ``n <= n_max``.

    The lossy displaced no-click element is ``D(b) (1 - eta_a)^N D(b)^dagger``
    with ``b = gamma / sqrt(eta_a)``.
    """
    n = np.arange(n_max + 1)
    if eta_a == 0.0:
        return np.full(n_max + 1, math.exp(-gamma * gamma))
    loss = 1.0 - eta_a
    if gamma == 0.0:
        return loss**n
    beta = gamma / math.sqrt(eta_a)
    m_max = 0 if loss == 0.0 else int(math.ceil(math.log(1e-18) / math.log(loss)))
    pad = int(beta * beta + 8 * beta * math.sqrt(2 * (n_max + m_max) + 1)) + 40
    dim = n_max + m_max + pad
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    disp = expm(beta * (a.T - a))
    weights = loss ** np.arange(m_max + 1)
    return (disp[: n_max + 1, : m_max + 1] ** 2) @ weights


@lru_cache(maxsize=64)
def _bob_diagonal(eta_b: float, n_max: int, device_name: str) -> np.ndarray:
    """``<n|Pi_B(k)|n>`` by enumerating where each of ``n`` photons ends up.

    Each photon is lost with probability ``1 - eta_b`` or registered at one of
    the detectors with equal share.
    """
    device = get_device(device_name)
    out = np.zeros((device.n_outcomes, n_max + 1))
    for n in range(n_max + 1):
        if device is ARRAY:
            k1, k2 = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
            ok = k1 + k2 <= n
            k1, k2 = k1[ok], k2[ok]
            lost = n - k1 - k2
            logc = gammaln(n + 1) - gammaln(k1 + 1) - gammaln(k2 + 1) - gammaln(lost + 1)
            prob = np.exp(logc) * (0.5 * eta_b) ** (k1 + k2) * (1 - eta_b) ** lost
            clicks = (k1 > 0).astype(int) + (k2 > 0).astype(int)
            out[:, n] = np.bincount(clicks, weights=prob, minlength=3)
        else:
            k = np.arange(n + 1)
            logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
            prob = np.exp(logc) * eta_b**k * (1 - eta_b) ** (n - k)
            out[0, n] = prob[0]
            out[1, n] = prob[1:].sum()
    return out


def fock_oracle_table(
    params: ExperimentParams, cutoff: int | None = None, device: BobDevice | str = ARRAY
) -> JointTable:
    """Brute-force joint table via Born's rule in a truncated Fock basis."""
    device = get_device(device)
    if cutoff is None:
        cutoff = fock_cutoff(params.r)
    elif _fock_tail(params.r, cutoff) >= FOCK_TAIL_TOL:
        raise TailBoundError(
            f"cutoff {cutoff} leaves tail weight {_fock_tail(params.r, cutoff):.2e} >= {FOCK_TAIL_TOL:g}"
        )
    n = np.arange(cutoff + 1)
    weights = (1.0 / math.cosh(params.r) ** 2) * (math.tanh(params.r) ** 2) ** n
    bob = _bob_diagonal(float(params.eta_b), cutoff, device.name)
    p = np.empty((2, 2, device.n_outcomes))
    for i, gamma in enumerate(params.gammas):
        a0 = _alice_no_click_diagonal(float(gamma), float(params.eta_a), cutoff)
        for n_a, alice in enumerate((a0, 1.0 - a0)):
            p[i, n_a] = bob @ (weights * alice)
    return JointTable(p)


# -- conditioning and classicality -------------------------------------------


def conditional_dist(table: JointTable, setting: int, n_a: int) -> ConditionalDist:
    """Bob's distribution conditioned on Alice's outcome (``setting`` is 1 or 2)."""
    if setting not in (1, 2) or n_a not in (0, 1):
        raise DomainError(f"setting must be 1|2 and n_a 0|1, got {setting}, {n_a}")
    row = table.p[setting - 1, n_a]
    norm = row.sum()
    if norm <= 0.0:
        raise ConditioningError(f"P_A({n_a}|gamma_{setting}) = 0; cannot condition")
    return ConditionalDist(row / norm, setting, n_a)


def classicality_margin(q: ConditionalDist | np.ndarray) -> float:
    """``4 q0 - (2 q0 + q1)^2``; nonnegative iff coherent mixtures reproduce ``q``.

    Only meaningful for the two-detector array.
    """
    q = np.asarray(q.q if isinstance(q, ConditionalDist) else q, dtype=float)
    if q.shape[-1] != 3:
        raise DomainError("classicality margin is defined for three-outcome click statistics")
    return 4 * q[..., 0] - (2 * q[..., 0] + q[..., 1]) ** 2


def margin_curve(r: float, eta_a: float, eta_b: float, gamma, n_a: int = 1) -> np.ndarray:
    """Classicality margin of Bob's ``n_a`` conditional statistics vs LO amplitude."""
    rows = _setting_rows(r, eta_a, eta_b, gamma)[..., n_a, :]
    norm = rows.sum(axis=-1, keepdims=True)
    # an outcome that never occurs prepares nothing; treat as classical
    safe = np.where(norm > 0, norm, 1.0)
    return np.where(norm[..., 0] > 0, classicality_margin(rows / safe), 0.0)


def gamma_min(
    r: float,
    eta_a: float,
    eta_b: float,
    gamma_max: float = 6.0,
    step: float = 5e-3,
    xtol: float = 1e-8,
) -> float:
    """Smallest LO amplitude above which Bob's ``n_a = 1`` statistics stay classical.

    The margin is scanned on ``[0, gamma_max]`` and the last sign change is
    refined by bisection.  Returns the upper (classical) end of the final
    bracket, or 0 when the margin is never negative.
    """
    grid = np.arange(0.0, gamma_max + step / 2, step)
    neg = np.flatnonzero(margin_curve(r, eta_a, eta_b, grid) < -MARGIN_TOL)
    if neg.size == 0:
        return 0.0
    i = neg[-1]
    if i == grid.size - 1:
        raise DomainError(f"margin still negative at gamma={gamma_max}; increase gamma_max")
    lo, hi = float(grid[i]), float(grid[i + 1])
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        m = float(margin_curve(r, eta_a, eta_b, mid))
        if m < -MARGIN_TOL:
            lo = mid
        elif m < MARGIN_TOL:
            hi = mid
            break
        else:
            hi = mid
    return hi
