"""Sampling statistics of the witness left-hand side.

The left-hand side ``lambda . P`` is rewritten as the sum of two per-setting
expectation values ``<Lambda^i>`` of an outcome payoff ``Lambda^i[n_a, n_b]``.
This gives the exact variance of the sample-mean estimator and a direct
estimator from click records.

Simulated records come from numpy's PCG64 generator seeded through
``SeedSequence``; the stream is setting 1 followed by setting 2, each split
into ``shards`` contiguous chunks drawn from spawned child sequences, so
``(seed, n, shards)`` fixes the merged stream exactly.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, NamedTuple

import numpy as np

from .errors import DomainError
from .physics import ARRAY, BobDevice, ExperimentParams, JointTable, get_device, joint_table

__all__ = [
    "EstimateResult",
    "EventRecord",
    "Events",
    "covariance_matrix",
    "decomposition_matrix",
    "epsilon_coeff",
    "estimate",
    "exact_moments",
    "lambda_decompose",
    "simulate",
]


class EventRecord(NamedTuple):
    setting: int
    n_a: int
    n_b: int


@lru_cache(maxsize=None)
def _decomposition_matrix(n_out: int) -> np.ndarray:
    k = n_out - 1
    dim = 3 * k + 2
    out = np.zeros((2, 2, n_out, dim))
    for b in range(k):
        out[0, 0, b, b] = 1.0  # lambda^1_{0b}
        out[0, 1, b, k + b] = 1.0  # lambda^1_{1b}
        out[1, 0, b, 2 * k + b] = 1.0  # lambda^2_{0b}
    # Alice-marginal weights act on every n_a = 0 outcome
    out[0, 0, :, 3 * k] = 1.0
    out[1, 0, :, 3 * k + 1] = 1.0
    out.setflags(write=False)
    return out


def decomposition_matrix(n_out: int = 3) -> np.ndarray:
    """Linear map ``B[setting, n_a, n_b, :]`` with ``Lambda = B @ lambda``."""
    return _decomposition_matrix(n_out)


def _n_out_for(lam: np.ndarray) -> int:
    dim = lam.shape[-1]
    if (dim - 2) % 3 or dim < 5:
        raise DomainError(f"witness length {dim} matches no supported device")
    return (dim - 2) // 3 + 1


def lambda_decompose(lam) -> np.ndarray:
    """Per-outcome payoffs ``Lambda[setting, n_a, n_b]`` of a witness.

    ``Lambda[1, 1, :]`` and ``Lambda[:, 1, K-1]`` are identically zero.
    """
    lam = np.asarray(lam, dtype=float)
    return decomposition_matrix(_n_out_for(lam)) @ lam


def exact_moments(Lam, table: JointTable) -> tuple[float, float, float, float]:
    """``(mean_1, mean_2, var_1, var_2)`` of the payoffs under ``table``."""
    Lam = np.asarray(Lam, dtype=float)
    p = table.p
    means = (Lam * p).sum(axis=(1, 2))
    second = (Lam * Lam * p).sum(axis=(1, 2))
    var = second - means * means
    return float(means[0]), float(means[1]), float(var[0]), float(var[1])


def epsilon_coeff(Lam, table: JointTable) -> float:
    """Standard deviation of the left-hand-side estimate times ``sqrt(N)``."""
    _, _, v1, v2 = exact_moments(Lam, table)
    return math.sqrt(max(v1 + v2, 0.0))


def covariance_matrix(table: JointTable) -> np.ndarray:
    """Quadratic form ``Q`` with ``epsilon_coeff(lambda)**2 = lambda @ Q @ lambda``."""
    B = decomposition_matrix(table.n_outcomes)
    Q = 0.0
    for i in range(2):
        p = table.p[i].ravel()
        cov = np.diag(p) - np.outer(p, p)
        Bi = B[i].reshape(p.size, -1)
        Q = Q + Bi.T @ cov @ Bi
    return Q


# -- simulation ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Events:
    """Columnar click records; ``setting`` is 1 or 2."""

    setting: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray

    def __len__(self) -> int:
        return self.setting.size

    def __iter__(self) -> Iterator[EventRecord]:
        for s, a, b in zip(self.setting.tolist(), self.n_a.tolist(), self.n_b.tolist()):
            yield EventRecord(s, a, b)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("setting,n_a,n_b\n")
            rows = np.stack([self.setting, self.n_a, self.n_b], axis=1)
            np.savetxt(fh, rows, fmt="%d", delimiter=",")

    @classmethod
    def from_csv(cls, path) -> "Events":
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
            if [h.strip() for h in header] != ["setting", "n_a", "n_b"]:
                raise DomainError(f"unexpected event header {header}")
            data = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
        if data.size == 0:
            data = np.zeros((0, 3), dtype=np.int64)
        return cls.from_arrays(data[:, 0], data[:, 1], data[:, 2])

    @classmethod
    def from_arrays(cls, setting, n_a, n_b) -> "Events":
        setting = np.asarray(setting, dtype=np.int8)
        n_a = np.asarray(n_a, dtype=np.int8)
        n_b = np.asarray(n_b, dtype=np.int8)
        if not (setting.shape == n_a.shape == n_b.shape):
            raise DomainError("event columns differ in length")
        if setting.size and (
            not np.isin(setting, (1, 2)).all()
            or not np.isin(n_a, (0, 1)).all()
            or n_b.min() < 0
            or n_b.max() > 2
        ):
            raise DomainError("event field out of range")
        return cls(setting, n_a, n_b)

    def counts(self, n_out: int) -> np.ndarray:
        """Occurrences ``c[setting - 1, n_a, n_b]``."""
        if self.n_b.size and self.n_b.max() >= n_out:
            raise DomainError(f"n_b={self.n_b.max()} exceeds a {n_out}-outcome device")
        idx = (self.setting.astype(np.int64) - 1) * 2 * n_out + self.n_a * n_out + self.n_b
        return np.bincount(idx, minlength=4 * n_out).reshape(2, 2, n_out)


def _shard_sizes(n: int, shards: int) -> list[int]:
    base, extra = divmod(n, shards)
    return [base + (j < extra) for j in range(shards)]


def _draw(args) -> np.ndarray:
    seq, size, probs = args
    rng = np.random.Generator(np.random.PCG64(seq))
    return rng.choice(probs.size, size=size, p=probs)


def simulate(
    params: ExperimentParams | JointTable,
    n: int,
    seed: int,
    shards: int = 1,
    workers: int = 1,
    device: BobDevice | str = ARRAY,
) -> Events:
    """Draw ``n`` i.i.d. click records for each of the two settings."""
    if n < 1:
        raise DomainError(f"sample count must be >= 1, got {n}")
    if shards < 1:
        raise DomainError(f"shards must be >= 1, got {shards}")
    table = params if isinstance(params, JointTable) else joint_table(params, get_device(device))
    n_out = table.n_outcomes
    children = np.random.SeedSequence(seed).spawn(2 * shards)
    jobs = []
    for i in range(2):
        probs = np.clip(table.p[i].ravel(), 0.0, None)
        probs = probs / probs.sum()
        for j, size in enumerate(_shard_sizes(n, shards)):
            jobs.append((children[i * shards + j], size, probs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_draw, jobs))
    else:
        chunks = [_draw(job) for job in jobs]
    cat = np.concatenate(chunks)
    setting = np.repeat(np.array([1, 2], dtype=np.int8), n)
    return Events(setting, (cat // n_out).astype(np.int8), (cat % n_out).astype(np.int8))


# -- estimation ----------------------------------------------------------------


@dataclass(frozen=True)
class EstimateResult:
    theta_star: tuple[float, float]
    epsilon_hat: float
    v_hat: float
    rhs: float
    n: int

    @property
    def lhs_hat(self) -> float:
        return self.theta_star[0] + self.theta_star[1]

    def to_dict(self, seed: int | None = None) -> dict:
        return {
            "theta_star": list(self.theta_star),
            "epsilon_hat": self.epsilon_hat,
            "v_hat": self.v_hat,
            "n": self.n,
            "seed": seed,
        }


def estimate(lam, events: Events) -> EstimateResult:
    """Sample-mean estimate of the left-hand side and its relative violation.

    The variance uses the biased ``1/N`` plug-in.  ``n`` in the result is the
    per-setting sample count (the smaller one if they differ).
    """
    from .witness import rhs_sup

    lam = np.asarray(lam, dtype=float)
    n_out = _n_out_for(lam)
    counts = events.counts(n_out).astype(float)
    per_setting = counts.sum(axis=(1, 2))
    if (per_setting == 0).any():
        raise DomainError("events must contain both settings")
    Lam = lambda_decompose(lam)
    freq = counts / per_setting[:, None, None]
    theta = (Lam * freq).sum(axis=(1, 2))
    var = np.maximum((Lam * Lam * freq).sum(axis=(1, 2)) - theta * theta, 0.0)
    eps = math.sqrt(float((var / per_setting).sum()))
    rhs = rhs_sup(lam)[0]
    gap = float(theta.sum()) - rhs
    if eps > 0:
        v_hat = gap / eps
    else:
        v_hat = 0.0 if gap == 0 else math.copysign(math.inf, gap)
    return EstimateResult((float(theta[0]), float(theta[1])), eps, v_hat, rhs, int(per_setting.min()))
