"""Training orchestration: sampling with exploration, backward step, optional
replay, forward step, EMA/scheduler ticks, and metric snapshots.

Update order within one iteration is part of the contract: the backward
strategy steps (and EMA-ticks its target) strictly before the forward
objective consumes it, so at iteration t the forward loss sees the backward
target updated at iteration t.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels, metrics, objectives
from .backward import BackwardStrategy, make_strategy
from .config import RunConfig, build_env
from .envs import DagEnv, TrajectoryBatch, enumerate_trajectories
from .oracle import PinskerCheck, exact_traj_kl, pinsker_gap, traj_log_pb, traj_log_pf
from .params import DQN_OBJECTIVES, LrSpec, NonFiniteGradient, ParamBundle, make_bundle
from .replay import PrioritizedBuffer, TrajectoryBuffer
from .runlog import CsvWriter, MetricsRow

PINSKER_TRAJ_CAP = 300000


class TrainAbort(RuntimeError):
    def __init__(self, iteration: int, tensor: str, detail: str):
        super().__init__(f"non-finite value at iteration {iteration} ({tensor}): {detail}")
        self.iteration = iteration
        self.tensor = tensor


class RngStream:
    """Named independent substreams derived from one 64-bit seed."""

    STREAMS = {"sampling": 1, "replay": 2, "init": 3, "eval": 4, "onpolicy": 5, "pessim": 6}

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gens = {
            name: np.random.default_rng(np.random.SeedSequence([self.seed, sid]))
            for name, sid in self.STREAMS.items()
        }

    def get(self, name: str) -> np.random.Generator:
        return self._gens[name]


def anneal_epsilon(iteration: int, epsilon0: float, anneal: bool, n_iters: int) -> float:
    """Constant, or linear from epsilon0 down to 0 at iteration == n_iters."""
    if not anneal or n_iters == 0:
        return epsilon0
    frac = min(max(iteration / n_iters, 0.0), 1.0)
    return epsilon0 * (1.0 - frac)


def sample_trajectories(env: DagEnv, bundle: ParamBundle, epsilon: float, K: int,
                        rng: np.random.Generator) -> TrajectoryBatch:
    probs = np.exp(bundle.forward_log_probs())
    uniforms = rng.random((K, env.max_traj_len))
    edges, ptr = kernels.sample_batch(env.child_ptr, env.child_idx, probs,
                                      epsilon, uniforms, env.initial)
    return TrajectoryBatch(env, edges, ptr)


@dataclass
class TrainResult:
    env: DagEnv
    bundle: ParamBundle
    rows: list[MetricsRow]
    pb_hash_initial: str
    pb_hash_final: str
    pinsker: list[PinskerCheck] = field(default_factory=list)
    strategy: BackwardStrategy | None = None


class _PinskerLog:
    """Per-checkpoint trajectory laws for the post-run Pinsker diagnostic."""

    def __init__(self, env: DagEnv):
        self.batch = enumerate_trajectories(env, cap=PINSKER_TRAJ_CAP)
        self.pf_laws: list[np.ndarray] = []
        self.pb_laws: list[np.ndarray] = []
        self.kls: list[float] = []

    def record(self, log_pf, log_pb, kl) -> None:
        self.pf_laws.append(np.exp(traj_log_pf(self.batch, log_pf)).astype(np.float32))
        self.pb_laws.append(np.exp(traj_log_pb(self.batch, log_pb)).astype(np.float32))
        self.kls.append(kl)

    def evaluate(self) -> list[PinskerCheck]:
        pb_star = self.pb_laws[-1].astype(np.float64)
        sum_pf = np.zeros_like(pb_star)
        sum_pb = np.zeros_like(pb_star)
        out = []
        for t in range(len(self.pf_laws)):
            sum_pf += self.pf_laws[t]
            sum_pb += self.pb_laws[t]
            T = t + 1
            drift = float(np.abs(sum_pb / T - pb_star).sum())
            regret = float(np.mean(self.kls[:T]))
            out.append(pinsker_gap(sum_pf / T, pb_star, regret, drift))
        return out


def train(config: RunConfig, out_dir: str | None = None,
          csv_path: str | None = None) -> TrainResult:
    """Run Algorithm-style alternating training per the config.

    Deterministic given config + seed. Non-finite losses abort via
    :class:`TrainAbort` after the partial CSV has been flushed.
    """
    tcfg, ocfg, bcfg, rcfg, mcfg = (config.training, config.objective, config.backward,
                                    config.replay, config.metrics)
    env = build_env(config.env)
    bundle = make_bundle(
        env, ocfg.kind,
        lr_forward=LrSpec(tcfg.lr, tcfg.lr_decay),
        lr_backward=LrSpec(bcfg.lr, bcfg.lr_decay),
        lr_logz=LrSpec(tcfg.logz_lr, tcfg.logz_lr_decay),
        adam_betas=(tcfg.adam_beta1, tcfg.adam_beta2),
        adam_eps=tcfg.adam_eps, weight_decay=tcfg.weight_decay,
    )
    strategy = make_strategy(
        bcfg.kind, ema_tau=bcfg.ema_tau, exclude_exploration=bcfg.tlm_exclude_exploration,
        pessim_window=bcfg.pessim_window, pessim_sample=bcfg.pessim_sample,
        pessim_steps=bcfg.pessim_steps,
    )
    strategy.setup(bundle)
    rngs = RngStream(tcfg.seed)
    if hasattr(strategy, "bind_rng"):
        strategy.bind_rng(rngs.get("pessim"))

    is_dqn = ocfg.kind in DQN_OBJECTIVES
    prb = traj_buf = None
    if rcfg.enabled:
        if is_dqn:
            prb = PrioritizedBuffer(rcfg.capacity, rcfg.alpha, rcfg.beta)
        else:
            traj_buf = TrajectoryBuffer(max(rcfg.capacity // tcfg.batch_size, 1))

    window = metrics.SampleWindow(mcfg.window_capacity)
    tracker = metrics.ModeTracker(env)
    testset = None
    if env.info.get("kind") == "bitseq":
        testset = metrics.build_bitseq_testset(env, rngs.get("eval"))
    pinsker_log = _PinskerLog(env) if mcfg.pinsker else None

    writer = None
    if csv_path is None and out_dir is not None:
        import os
        csv_path = os.path.join(out_dir, "metrics.csv")
    if csv_path is not None:
        writer = CsvWriter(csv_path)

    rows: list[MetricsRow] = []
    prev_pb_probs: np.ndarray | None = None
    last_loss_f: float | None = None
    last_loss_b: float | None = None
    start = time.perf_counter()
    pb_hash_initial = bundle.pb_hash()
    K = tcfg.batch_size
    N = tcfg.iterations

    def emit(iteration: int, eps_now: float) -> None:
        nonlocal prev_pb_probs
        log_pf = bundle.forward_log_probs()
        log_pb = bundle.pb_log_probs("online")
        pb_probs = np.exp(log_pb)
        kl = exact_traj_kl(env, log_pf, log_pb)
        row = MetricsRow(
            iteration=iteration,
            trajectories_sampled=iteration * K,
            loss_forward=last_loss_f,
            loss_backward=last_loss_b,
            l1_exact=metrics.l1_exact(env, log_pf),
            kl_exact=kl,
            lr_forward=bundle.lr["q" if is_dqn else "pf"].at(iteration),
            lr_backward=bundle.lr["pb"].at(iteration),
            epsilon=eps_now,
            seed=tcfg.seed,
        )
        if len(window):
            row.l1_empirical = metrics.l1_empirical(window, env)
        if tracker.num_modes:
            row.modes_found = tracker.found
        if bundle.log_z is not None:
            row.log_z_estimate = float(bundle.log_z)
        if prev_pb_probs is not None:
            row.pb_drift_l1 = float(np.abs(pb_probs - prev_pb_probs).sum())
        prev_pb_probs = pb_probs
        if testset is not None:
            est = np.array([metrics.mc_ptheta(env, log_pf, log_pb, int(x),
                                              mcfg.mc_rollouts, rngs.get("eval"))
                            for x in testset])
            rew = np.exp(env.log_reward[testset])
            try:
                row.spearman = metrics.spearman(rew, est)
                row.pearson = metrics.pearson(np.log(rew), np.log(est))
            except ValueError:
                pass
        elif env.num_terminals >= 2:
            from .oracle import exact_marginal
            p = exact_marginal(env, log_pf).terminal_marginal
            rew = np.exp(env.log_reward[env.terminal_ids])
            try:
                row.spearman = metrics.spearman(rew, p)
                row.pearson = metrics.pearson(np.log(rew), np.log(np.maximum(p, 1e-300)))
            except ValueError:
                pass
        if mcfg.log_wall_time:
            row.wall_time_s = time.perf_counter() - start
        if pinsker_log is not None:
            pinsker_log.record(log_pf, log_pb, kl)
        rows.append(row)
        if writer is not None:
            writer.write(row)

    try:
        emit(0, anneal_epsilon(0, tcfg.epsilon, tcfg.anneal_epsilon, N))
        for t in range(N):
            eps_t = anneal_epsilon(t, tcfg.epsilon, tcfg.anneal_epsilon, N)
            batch = sample_trajectories(env, bundle, eps_t, K, rngs.get("sampling"))
            window.push(batch.terminals())
            tracker.update(batch.terminals())

            pb_batch = batch
            if strategy.wants_pure_onpolicy and eps_t > 0.0:
                pb_batch = sample_trajectories(env, bundle, 0.0, K, rngs.get("onpolicy"))
            try:
                last_loss_b = strategy.step(bundle, pb_batch, t)
            except NonFiniteGradient as exc:
                raise TrainAbort(t, exc.tensor_name, "backward gradient") from exc
            if is_dqn:
                bundle.ema_tick_q(bcfg.ema_tau)

            try:
                if is_dqn:
                    prb_weights = None
                    if prb is not None:
                        prb.push_batch(batch)
                        trans, prb_weights, idx = prb.sample(rcfg.sample_size, rngs.get("replay"))
                    else:
                        trans = batch.edges
                    if ocfg.kind == "softdqn":
                        loss, grads, td = objectives.loss_softdqn(
                            bundle, trans, prb_weights, pb_view=strategy.pb_view,
                            pb_grad=strategy.couples_forward, leaf_coef=ocfg.leaf_coef)
                    else:
                        loss, grads, td = objectives.loss_mdqn(
                            bundle, trans, prb_weights, pb_view=strategy.pb_view,
                            pb_grad=strategy.couples_forward, alpha=ocfg.mdqn_alpha,
                            l0=ocfg.mdqn_l0, leaf_coef=ocfg.leaf_coef)
                    if prb is not None:
                        prb.update_priorities(idx, td)
                else:
                    fwd_batch = batch
                    if traj_buf is not None:
                        traj_buf.push(batch)
                        fwd_batch = traj_buf.sample(K, rngs.get("replay"))
                    if ocfg.kind == "tb":
                        loss, grads = objectives.loss_tb(
                            bundle, fwd_batch, pb_view=strategy.pb_view,
                            pb_grad=strategy.couples_forward)
                    elif ocfg.kind == "db":
                        loss, grads = objectives.loss_db(
                            bundle, fwd_batch, pb_view=strategy.pb_view,
                            pb_grad=strategy.couples_forward)
                    else:
                        loss, grads = objectives.loss_subtb(
                            bundle, fwd_batch, lam=ocfg.subtb_lambda,
                            pb_view=strategy.pb_view, pb_grad=strategy.couples_forward)
                if not math.isfinite(loss):
                    raise TrainAbort(t, "loss_forward", f"value {loss}")
                last_loss_f = loss
                for name, g in grads.items():
                    bundle.apply_grad(name, g, t)
            except NonFiniteGradient as exc:
                raise TrainAbort(t, exc.tensor_name, "forward gradient") from exc

            if (t + 1) % mcfg.eval_every == 0 or t + 1 == N:
                emit(t + 1, anneal_epsilon(t + 1, tcfg.epsilon, tcfg.anneal_epsilon, N))
    finally:
        if writer is not None:
            writer.close()

    result = TrainResult(env=env, bundle=bundle, rows=rows,
                         pb_hash_initial=pb_hash_initial, pb_hash_final=bundle.pb_hash(),
                         strategy=strategy)
    if pinsker_log is not None:
        result.pinsker = pinsker_log.evaluate()
    return result
