"""The GDCI iteration x+ = C(x) - gamma * grad f(C(x)) and trajectory recording."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .compression import IDENTITY, OperatorSpec, as_generator, identity
from .objectives import Objective, OptimumCertificate


@dataclass(frozen=True)
class GdciConfig:
    gamma: float
    max_iters: int
    operator: OperatorSpec = field(default_factory=identity)
    record_every: int = 1
    divergence_threshold: float = 1e12

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")


@dataclass
class Trajectory:
    """Recorded iterates.

    ``fired[j]`` is True when compression altered an iterate on any step
    since the previous record (always False at k = 0).
    """

    k: np.ndarray
    sq_dist: np.ndarray
    func_gap: np.ndarray
    iterate_norm: np.ndarray
    fired: np.ndarray
    diverged: bool = False
    diverged_at: int | None = None
    final_iterate: np.ndarray | None = None

    def __len__(self):
        return len(self.k)


def gdci_step(obj: Objective, op: OperatorSpec, x: np.ndarray, gamma: float, rng) -> tuple[np.ndarray, bool]:
    out, fired = op.sample(x, rng, 1)
    y = out[0]
    x_next = y - gamma * obj.gradient(y)
    # plain operators count as fired on every step; identity never fires
    return x_next, bool(fired[0]) and op.kind != IDENTITY


def gd_step(obj: Objective, x: np.ndarray, gamma: float) -> np.ndarray:
    return x - gamma * obj.gradient(x)


def run(obj: Objective, config: GdciConfig, x0, optimum: OptimumCertificate, rng=None) -> Trajectory:
    if optimum is None:
        raise ValueError("an optimum certificate is required to record distances")
    gen = as_generator(rng)
    x = np.array(x0, dtype=float)
    if x.shape != (obj.dim,) or not np.all(np.isfinite(x)):
        raise ValueError("x0 must be a finite vector of the objective's dimension")
    x_star, f_star = optimum.x_star, optimum.f_star

    ks, sq, gap, norms, fired = [], [], [], [], []

    def record(k, x, any_fired):
        diff = x - x_star
        ks.append(k)
        sq.append(float(diff @ diff))
        gap.append(float(obj.value(x)) - f_star)
        norms.append(float(np.linalg.norm(x)))
        fired.append(any_fired)

    record(0, x, False)
    diverged_at = None
    pending = False
    last_recorded = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, config.max_iters + 1):
            try:
                x, f = gdci_step(obj, config.operator, x, config.gamma, gen)
            except ValueError:
                # gradient of a non-finite point
                diverged_at = k
                break
            pending |= f
            nrm = float(np.linalg.norm(x))
            if not np.isfinite(nrm) or nrm > config.divergence_threshold:
                diverged_at = k
                break
            if k % config.record_every == 0 or k == config.max_iters:
                record(k, x, pending)
                pending = False
                last_recorded = k

    if diverged_at is not None:
        if np.all(np.isfinite(x)):
            record(diverged_at, x, pending)
        return Trajectory(
            np.array(ks), np.array(sq), np.array(gap), np.array(norms), np.array(fired, dtype=bool),
            diverged=True, diverged_at=diverged_at, final_iterate=x,
        )
    assert last_recorded == config.max_iters or config.max_iters == 0
    return Trajectory(np.array(ks), np.array(sq), np.array(gap), np.array(norms), np.array(fired, dtype=bool), final_iterate=x)
