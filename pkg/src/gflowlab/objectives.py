"""Forward-policy training losses: TB, DB, SubTB, SoftDQN, MunchausenDQN.

Each loss consumes a supplied backward-policy view (``"online"`` or
``"target"``) and returns ``(loss, grads)`` with analytic gradients w.r.t.
the raw parameter tensors. Gradients flow into the backward logits only when
``pb_grad=True`` (the Naive coupling); every other strategy treats PB as a
constant inside the forward loss.

The entropy-regularization and discount coefficients of the underlying MDP
are fixed at 1 and are not configurable.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .envs import DagEnv, TrajectoryBatch
from .params import ParamBundle


def rl_reward(env: DagEnv, log_pb: np.ndarray, s: int, sp: int) -> float:
    """Backward-policy reward of edge (s -> s'): log PB(s|s'), plus the
    terminal log-reward when s' is terminal."""
    e = env.forward_edge_id(s, sp)
    r = float(log_pb[env.fwd2bwd[e]])
    if env.is_terminal[sp]:
        r += float(env.log_reward[sp])
    return r


def _as_batch(env: DagEnv, trajectories) -> TrajectoryBatch:
    if isinstance(trajectories, TrajectoryBatch):
        return trajectories
    return TrajectoryBatch.from_state_lists(env, [list(t.states) for t in trajectories])


def loss_tb(bundle: ParamBundle, batch: TrajectoryBatch, pb_view: str = "online",
            pb_grad: bool = False) -> tuple[float, dict[str, np.ndarray]]:
    env = bundle.env
    batch = _as_batch(env, batch)
    log_pf = bundle.forward_log_probs()
    log_pb = bundle.pb_log_probs(pb_view)
    loss, g_pf, g_logz, g_pb = kernels.tb_loss(
        batch.edges, batch.ptr, env.child_idx, env.child_ptr, env.edge_sources(),
        env.fwd2bwd, env.parent_ptr, env.log_reward, log_pf, np.exp(log_pf),
        log_pb, np.exp(log_pb), float(bundle.log_z), pb_grad)
    grads = {"pf": g_pf, "log_z": g_logz}
    if pb_grad:
        grads["pb"] = g_pb
    return loss, grads


def _db_subtb(bundle: ParamBundle, batch, pb_view: str, pb_grad: bool,
              lam: float, subtb: bool):
    env = bundle.env
    batch = _as_batch(env, batch)
    log_pf = bundle.forward_log_probs()
    log_pb = bundle.pb_log_probs(pb_view)
    loss, g_pf, g_flow, g_pb = kernels.db_subtb_loss(
        batch.edges, batch.ptr, env.child_idx, env.child_ptr, env.edge_sources(),
        env.fwd2bwd, env.parent_ptr, env.log_reward, env.is_terminal,
        log_pf, np.exp(log_pf), log_pb, np.exp(log_pb),
        bundle.flow_effective(), lam, subtb, pb_grad)
    grads = {"pf": g_pf, "flow": g_flow}
    if pb_grad:
        grads["pb"] = g_pb
    return loss, grads


def loss_db(bundle: ParamBundle, batch: TrajectoryBatch, pb_view: str = "online",
            pb_grad: bool = False) -> tuple[float, dict[str, np.ndarray]]:
    """Sum of squared one-step balance residuals per trajectory."""
    return _db_subtb(bundle, batch, pb_view, pb_grad, lam=1.0, subtb=False)


def loss_subtb(bundle: ParamBundle, batch: TrajectoryBatch, lam: float = 0.9,
               pb_view: str = "online", pb_grad: bool = False):
    """All-spans residuals with lambda^(k-j) weights normalized per trajectory."""
    if lam <= 0.0:
        raise ValueError("subtb lambda must be positive")
    return _db_subtb(bundle, batch, pb_view, pb_grad, lam=lam, subtb=True)


def _dqn(bundle: ParamBundle, trans_edges: np.ndarray, weights: np.ndarray | None,
         pb_view: str, pb_grad: bool, leaf_coef: float, alpha: float, l0: float):
    env = bundle.env
    trans_edges = np.asarray(trans_edges, dtype=np.int64)
    if weights is None:
        weights = np.ones(len(trans_edges))
    log_pb = bundle.pb_log_probs(pb_view)
    vbar, logpi_bar = bundle.q_target_values()
    loss, g_q, g_pb, td_abs = kernels.dqn_loss(
        trans_edges, np.asarray(weights, dtype=np.float64), env.child_idx,
        env.child_ptr, env.edge_sources(), env.fwd2bwd, env.parent_ptr,
        env.is_terminal, env.log_reward, bundle.q, vbar, logpi_bar,
        log_pb, np.exp(log_pb), leaf_coef, alpha, l0, pb_grad)
    grads = {"q": g_q}
    if pb_grad:
        grads["pb"] = g_pb
    return loss, grads, td_abs


def loss_softdqn(bundle: ParamBundle, trans_edges, weights=None, pb_view: str = "online",
                 pb_grad: bool = False, leaf_coef: float = 1.0):
    """Soft TD error vs the frozen Q copy; terminal transitions scaled by
    ``leaf_coef``. Also returns |TD| per transition for priority updates."""
    return _dqn(bundle, trans_edges, weights, pb_view, pb_grad, leaf_coef,
                alpha=0.0, l0=0.0)


def loss_mdqn(bundle: ParamBundle, trans_edges, weights=None, pb_view: str = "online",
              pb_grad: bool = False, alpha: float = 0.15, l0: float = -100.0,
              leaf_coef: float = 1.0):
    """SoftDQN plus the clipped frozen log-policy bonus. alpha=0 recovers
    SoftDQN exactly."""
    return _dqn(bundle, trans_edges, weights, pb_view, pb_grad, leaf_coef,
                alpha=alpha, l0=l0)


def tlm_loss(bundle: ParamBundle, batch: TrajectoryBatch) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of the batch under the online backward policy;
    gradients only into the backward logits."""
    env = bundle.env
    batch = _as_batch(env, batch)
    log_pb = bundle.pb_log_probs("online")
    loss, g_pb = kernels.tlm_loss(batch.edges, batch.ptr, env.child_idx,
                                  env.fwd2bwd, env.parent_ptr, log_pb, np.exp(log_pb))
    return loss, g_pb
