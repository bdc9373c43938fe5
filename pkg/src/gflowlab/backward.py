"""Backward-policy approaches behind one strategy interface.

Five kinds: ``uniform`` and ``maxent`` freeze PB at construction; ``naive``
lets the forward objective's gradient flow into PB; ``tlm`` fits PB to the
freshly sampled on-policy batch by likelihood maximization; ``pessimistic``
fits PB to a FIFO buffer of recent trajectories.

The trainer calls ``strategy.step(bundle, batch, iteration)`` once per
iteration, strictly before the forward update; every step ends with the
EMA tick of the backward target copy.
"""

from __future__ import annotations

import numpy as np

from . import objectives
from .envs import DagEnv, TrajectoryBatch
from .oracle import PathCountTable, count_paths
from .params import ParamBundle
from .replay import TrajectoryBuffer

BACKWARD_KINDS = ("uniform", "naive", "tlm", "maxent", "pessimistic")


def maxent_table(env: DagEnv) -> tuple[PathCountTable, np.ndarray]:
    """Exact maximum-trajectory-entropy backward policy.

    PB(s|s') = n(s)/n(s') falls out of softmax-normalizing logits
    log n(parent) over each parent row; no learning involved.
    """
    table = count_paths(env)
    logits = table.log_n[env.parent_idx].copy()
    logits[~np.isfinite(logits)] = -1e9  # unreachable parents (not expected)
    # shift each parent row by its max: softmax-invariant, and rows with equal
    # counts become exactly zero (bit-identical to the uniform policy)
    counts = np.diff(env.parent_ptr)
    ne = counts > 0
    if ne.any():
        rmax = np.maximum.reduceat(logits, env.parent_ptr[:-1][ne])
        logits -= np.repeat(rmax, counts[ne])
    return table, logits


def naive_coupling(grads: dict[str, np.ndarray]) -> np.ndarray | None:
    """Under Naive, the forward loss's pb gradient is applied as-is."""
    return grads.get("pb")


class BackwardStrategy:
    """Base: frozen backward policy; subclasses override ``step``."""

    kind = "uniform"
    pb_view = "online"        # view the forward loss reads
    couples_forward = False   # True only for naive
    wants_pure_onpolicy = False

    def __init__(self, ema_tau: float = 0.25):
        self.ema_tau = ema_tau

    def setup(self, bundle: ParamBundle) -> None:
        bundle.pb_logits[:] = 0.0
        bundle.pb_target[:] = bundle.pb_logits

    def step(self, bundle: ParamBundle, batch: TrajectoryBatch, iteration: int) -> float | None:
        bundle.ema_tick_pb(self.ema_tau)
        return None


class UniformBackward(BackwardStrategy):
    kind = "uniform"


class MaxEntBackward(BackwardStrategy):
    kind = "maxent"

    def setup(self, bundle: ParamBundle) -> None:
        self.table, logits = maxent_table(bundle.env)
        bundle.pb_logits[:] = logits
        bundle.pb_target[:] = logits


class NaiveBackward(BackwardStrategy):
    """PB trained by the forward objective itself (shared step, forward lr)."""

    kind = "naive"
    couples_forward = True


class TlmBackward(BackwardStrategy):
    """Trajectory likelihood maximization on the current on-policy batch.

    One Adam step on the mean negative backward log-likelihood, with the
    backward learning-rate schedule, then the target EMA tick. The forward
    loss reads the target copy.
    """

    kind = "tlm"
    pb_view = "target"

    def __init__(self, ema_tau: float = 0.25, exclude_exploration: bool = False):
        super().__init__(ema_tau)
        self.wants_pure_onpolicy = exclude_exploration

    def step(self, bundle: ParamBundle, batch: TrajectoryBatch, iteration: int) -> float:
        loss, g_pb = objectives.tlm_loss(bundle, batch)
        bundle.apply_grad("pb", g_pb, iteration)
        bundle.ema_tick_pb(self.ema_tau)
        return loss


def tlm_step(strategy: TlmBackward, bundle: ParamBundle, batch: TrajectoryBatch,
             iteration: int) -> float:
    return strategy.step(bundle, batch, iteration)


class PessimisticBackward(BackwardStrategy):
    """Backward log-likelihood maximization over recently seen trajectories.

    The batch enters the FIFO buffer first, then ``num_steps`` gradient
    updates are taken on samples from it (all of it while small).
    """

    kind = "pessimistic"

    def __init__(self, ema_tau: float = 0.25, window: int = 20, sample_size: int = 16,
                 num_steps: int = 1):
        super().__init__(ema_tau)
        self.buffer = TrajectoryBuffer(window)
        self.sample_size = sample_size
        self.num_steps = num_steps

    def step(self, bundle: ParamBundle, batch: TrajectoryBatch, iteration: int) -> float:
        self.buffer.push(batch)
        loss = 0.0
        for _ in range(self.num_steps):
            sampled = self.buffer.sample(self.sample_size, self._rng)
            loss, g_pb = objectives.tlm_loss(bundle, sampled)
            bundle.apply_grad("pb", g_pb, iteration)
        bundle.ema_tick_pb(self.ema_tau)
        return loss

    def bind_rng(self, rng: np.random.Generator) -> None:
        self._rng = rng


def pessimistic_step(strategy: PessimisticBackward, bundle: ParamBundle,
                     batch: TrajectoryBatch, iteration: int) -> float:
    return strategy.step(bundle, batch, iteration)


def make_strategy(kind: str, *, ema_tau: float = 0.25, exclude_exploration: bool = False,
                  pessim_window: int = 20, pessim_sample: int = 16,
                  pessim_steps: int = 1) -> BackwardStrategy:
    if kind == "uniform":
        return UniformBackward(ema_tau)
    if kind == "maxent":
        return MaxEntBackward(ema_tau)
    if kind == "naive":
        return NaiveBackward(ema_tau)
    if kind == "tlm":
        return TlmBackward(ema_tau, exclude_exploration)
    if kind == "pessimistic":
        return PessimisticBackward(ema_tau, pessim_window, pessim_sample, pessim_steps)
    raise ValueError(f"unknown backward kind {kind!r}")
