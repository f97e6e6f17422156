"""Nonnegative matrix factorization by Euclidean multiplicative updates.

Factorizes a nonnegative matrix x (n x m) into w (n x r) and h (m x r)
with x ~= w @ h.T, minimizing the Frobenius reconstruction error under
nonnegativity constraints. Uses the classical multiplicative update rule
of Lee & Seung (2001), which keeps both factors nonnegative and never
increases the objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidRankError, NonNegativityError, ShapeMismatchError
from .ingest import NormalizedMatrix

# Lower clamp for update-rule denominators; avoids division by zero on
# zero rows/columns without perturbing healthy entries.
_DENOM_FLOOR = 1e-12

INIT_RANDOM = "random"
INIT_NNDSVD = "nndsvd"


@dataclass(frozen=True)
class NmfConfig:
    """Solver settings: rank, iteration budget, stopping tolerance, init scheme."""

    rank: int
    max_iters: int = 500
    tol: float = 1e-5
    seed: int = 0
    init: str = INIT_RANDOM

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise InvalidRankError(f"rank must be >= 1, got {self.rank}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.init not in (INIT_RANDOM, INIT_NNDSVD):
            raise ValueError(f"unknown init scheme {self.init!r}")


@dataclass
class FactorPair:
    """Factorization result: location loadings w, time loadings h, diagnostics.

    objective_trace[0] is the loss at initialization, followed by one entry
    per multiplicative-update iteration; it is non-increasing.
    """

    w: np.ndarray
    h: np.ndarray
    objective_trace: list[float] = field(default_factory=list)
    converged: bool = False
    iterations_run: int = 0

    @property
    def rank(self) -> int:
        return self.w.shape[1]

    def reconstruct(self) -> np.ndarray:
        return self.w @ self.h.T


def _as_array(x: NormalizedMatrix | np.ndarray) -> np.ndarray:
    if isinstance(x, NormalizedMatrix):
        return x.values
    return np.asarray(x, dtype=float)


def _random_init(x: np.ndarray, rank: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    # Uniform in (0, 1] so no entry starts frozen at zero, scaled so the
    # initial product is on the same order as the data.
    rng = np.random.default_rng(seed)
    scale = np.sqrt(x.mean() / rank)
    w = (1.0 - rng.random((x.shape[0], rank))) * scale
    h = (1.0 - rng.random((x.shape[1], rank))) * scale
    return w, h


def _nndsvd_init(x: np.ndarray, rank: int) -> tuple[np.ndarray, np.ndarray]:
    """Nonnegative double SVD initialization (Boutsidis & Gallopoulos, 2008).

    Deterministic. Zero entries are filled with the data mean (the "a"
    variant) because exact zeros never move under multiplicative updates.
    """
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    n, m = x.shape
    w = np.zeros((n, rank))
    h = np.zeros((m, rank))

    w[:, 0] = np.sqrt(s[0]) * np.abs(u[:, 0])
    h[:, 0] = np.sqrt(s[0]) * np.abs(vt[0, :])

    for j in range(1, rank):
        uj, vj = u[:, j], vt[j, :]
        up, un = np.maximum(uj, 0.0), np.maximum(-uj, 0.0)
        vp, vn = np.maximum(vj, 0.0), np.maximum(-vj, 0.0)
        up_n, un_n = np.linalg.norm(up), np.linalg.norm(un)
        vp_n, vn_n = np.linalg.norm(vp), np.linalg.norm(vn)
        mp, mn = up_n * vp_n, un_n * vn_n
        if mp >= mn:
            if mp == 0.0:
                continue
            sigma = np.sqrt(s[j] * mp)
            w[:, j] = sigma * up / up_n
            h[:, j] = sigma * vp / vp_n
        else:
            sigma = np.sqrt(s[j] * mn)
            w[:, j] = sigma * un / un_n
            h[:, j] = sigma * vn / vn_n

    fill = x.mean()
    if fill > 0:
        w[w == 0] = fill
        h[h == 0] = fill
    return w, h


def factorize(x: NormalizedMatrix | np.ndarray, cfg: NmfConfig) -> FactorPair:
    """Run multiplicative updates until the relative loss change drops below
    cfg.tol or cfg.max_iters is reached.

    Deterministic for a fixed input, config, and seed. Raises
    InvalidRankError if cfg.rank exceeds min(n, m) and NonNegativityError
    if the input has a negative entry.
    """
    data = _as_array(x)
    n, m = data.shape
    if cfg.rank > min(n, m):
        raise InvalidRankError(f"rank {cfg.rank} exceeds min matrix dimension {min(n, m)}")
    if (data < 0).any():
        raise NonNegativityError("input matrix has negative entries")

    if cfg.init == INIT_NNDSVD:
        w, h = _nndsvd_init(data, cfg.rank)
    else:
        w, h = _random_init(data, cfg.rank, cfg.seed)

    trace = [float(np.linalg.norm(data - w @ h.T))]
    converged = False
    iterations = 0
    for _ in range(cfg.max_iters):
        h *= (data.T @ w) / np.maximum(h @ (w.T @ w), _DENOM_FLOOR)
        w *= (data @ h) / np.maximum(w @ (h.T @ h), _DENOM_FLOOR)
        loss = float(np.linalg.norm(data - w @ h.T))
        trace.append(loss)
        iterations += 1
        prev = trace[-2]
        if abs(prev - loss) <= cfg.tol * max(prev, _DENOM_FLOOR):
            converged = True
            break

    return FactorPair(w=w, h=h, objective_trace=trace, converged=converged,
                      iterations_run=iterations)


def reconstruction_error(x: NormalizedMatrix | np.ndarray, pair: FactorPair) -> float:
    """Frobenius norm of (x - w @ h.T); zero iff the reconstruction is exact."""
    data = _as_array(x)
    if data.shape != (pair.w.shape[0], pair.h.shape[0]):
        raise ShapeMismatchError(
            f"matrix shape {data.shape} does not match factors "
            f"({pair.w.shape[0]}x{pair.w.shape[1]}, {pair.h.shape[0]}x{pair.h.shape[1]})"
        )
    return float(np.linalg.norm(data - pair.reconstruct()))
