"""Learnable parameters: tabular policies, flow/Q tables, Adam, EMA, schedules.

All probability math stays in the log domain; probabilities are only
materialized for sampling. Parameter tensors are flat arrays in the
environment's CSR edge layout (forward logits over child rows, backward
logits over parent rows).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envs import DagEnv, InvalidEdge
from .rowops import row_log_softmax, row_logsumexp


class NonFiniteGradient(RuntimeError):
    def __init__(self, tensor_name: str):
        super().__init__(f"non-finite gradient for tensor {tensor_name!r}; step rejected")
        self.tensor_name = tensor_name


# -- policies ----------------------------------------------------------------


@dataclass
class TabularPolicy:
    """Per-state logits over outgoing (forward) or incoming (backward) edges."""

    env: DagEnv
    direction: str                 # "forward" | "backward"
    logits: np.ndarray

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"bad direction {self.direction!r}")
        if len(self.logits) != self.env.num_edges:
            raise ValueError("logits length must equal the number of edges")

    @property
    def _ptr(self) -> np.ndarray:
        return self.env.child_ptr if self.direction == "forward" else self.env.parent_ptr

    def log_probs(self) -> np.ndarray:
        """Dense per-edge log-softmax over each state's valid edge set."""
        return row_log_softmax(self.logits, self._ptr)

    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs())

    def distribution(self, s: int) -> np.ndarray:
        lo, hi = self._ptr[s], self._ptr[s + 1]
        if lo == hi:
            raise InvalidEdge(f"state {s} has no {self.direction} edges")
        z = self.logits[lo:hi]
        z = z - z.max()
        p = np.exp(z)
        return p / p.sum()

    def log_prob(self, s: int, sp: int) -> float:
        """log P(sp | s): over children if forward, over parents if backward."""
        if self.direction == "forward":
            e = self.env.forward_edge_id(s, sp)
            lo, hi = self.env.child_ptr[s], self.env.child_ptr[s + 1]
            pos = e - lo
        else:
            e = self.env.backward_edge_id(sp, s)
            lo, hi = self.env.parent_ptr[s], self.env.parent_ptr[s + 1]
            pos = e - lo
        z = self.logits[lo:hi]
        m = z.max()
        return float(z[pos] - m - np.log(np.exp(z - m).sum()))


def policy_log_prob(policy: TabularPolicy, s: int, sp: int) -> float:
    return policy.log_prob(s, sp)


def policy_distribution(policy: TabularPolicy, s: int) -> np.ndarray:
    return policy.distribution(s)


def init_backward_uniform(pb: TabularPolicy) -> TabularPolicy:
    """Zero logits make the backward policy uniform over parents."""
    pb.logits[:] = 0.0
    return pb


@dataclass
class FlowTable:
    """log F(s) per non-terminal state; terminals read through to log R."""

    env: DagEnv
    log_flow: np.ndarray

    def effective(self) -> np.ndarray:
        return np.where(self.env.is_terminal, self.env.log_reward, self.log_flow)

    def __getitem__(self, s: int) -> float:
        if self.env.is_terminal[s]:
            return float(self.env.log_reward[s])
        return float(self.log_flow[s])


@dataclass
class QTable:
    """Soft Q(s, s') per forward edge."""

    env: DagEnv
    q: np.ndarray

    def soft_values(self) -> np.ndarray:
        """V(s) = logsumexp_child Q(s, .); terminals are 0 by convention."""
        v = row_logsumexp(self.q, self.env.child_ptr)
        v[self.env.is_terminal] = 0.0
        return v

    def log_policy(self) -> np.ndarray:
        """Greedy soft policy log pi(s'|s) = Q(s,s') - V(s)."""
        return row_log_softmax(self.q, self.env.child_ptr)


# -- optimizer ---------------------------------------------------------------


@dataclass
class AdamState:
    name: str
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def like(cls, name: str, arr: np.ndarray) -> "AdamState":
        return cls(name, np.zeros_like(arr, dtype=np.float64),
                   np.zeros_like(arr, dtype=np.float64))


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState, lr: float,
              betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
              weight_decay: float = 0.0) -> None:
    """One bias-corrected Adam step in place; rejects non-finite gradients."""
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradient(state.name)
    if lr <= 0.0:
        raise ValueError("lr must be positive")
    if weight_decay != 0.0:
        grad = grad + weight_decay * param
    b1, b2 = betas
    state.t += 1
    state.m *= b1
    state.m += (1.0 - b1) * grad
    state.v *= b2
    state.v += (1.0 - b2) * grad * grad
    m_hat = state.m / (1.0 - b1**state.t)
    v_hat = state.v / (1.0 - b2**state.t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


def ema_update(target: np.ndarray, online: np.ndarray, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, in place."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    target *= 1.0 - tau
    target += tau * online


def lr_schedule(step: int, lr0: float, gamma_decay: float) -> float:
    if not 0.0 < gamma_decay <= 1.0:
        raise ValueError("gamma_decay must lie in (0, 1]")
    return lr0 * gamma_decay**step


# -- parameter bundle ---------------------------------------------------------

TRAJ_OBJECTIVES = ("tb", "db", "subtb")
DQN_OBJECTIVES = ("softdqn", "mdqn")
OBJECTIVES = TRAJ_OBJECTIVES + DQN_OBJECTIVES


@dataclass
class LrSpec:
    lr0: float
    gamma: float = 1.0

    def at(self, step: int) -> float:
        return lr_schedule(step, self.lr0, self.gamma)


@dataclass
class ParamBundle:
    """Everything one training run learns, plus optimizer/EMA state.

    ``log_z`` exists iff the objective is TB; ``log_flow`` iff DB/SubTB;
    ``q``/``q_target`` iff a DQN objective. ``pb_target`` is the EMA copy of
    the backward logits and is never touched by gradients.
    """

    env: DagEnv
    objective: str
    pb_logits: np.ndarray
    pb_target: np.ndarray
    pf_logits: np.ndarray | None = None
    q: np.ndarray | None = None
    q_target: np.ndarray | None = None
    log_flow: np.ndarray | None = None
    log_z: np.ndarray | None = None           # shape-() array so Adam applies uniformly
    adam: dict[str, AdamState] = field(default_factory=dict)
    lr: dict[str, LrSpec] = field(default_factory=dict)
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    weight_decay: float = 0.0

    # -- views --------------------------------------------------------------

    def forward_param(self) -> np.ndarray:
        return self.q if self.objective in DQN_OBJECTIVES else self.pf_logits

    def forward_log_probs(self) -> np.ndarray:
        """Sampling policy: softmax of pf logits, or of the Q row for DQN."""
        return row_log_softmax(self.forward_param(), self.env.child_ptr)

    def pb_view(self, view: str) -> np.ndarray:
        if view == "online":
            return self.pb_logits
        if view == "target":
            return self.pb_target
        raise ValueError(f"bad pb view {view!r}")

    def pb_log_probs(self, view: str = "online") -> np.ndarray:
        return row_log_softmax(self.pb_view(view), self.env.parent_ptr)

    def flow_effective(self) -> np.ndarray:
        return np.where(self.env.is_terminal, self.env.log_reward, self.log_flow)

    def q_target_values(self) -> tuple[np.ndarray, np.ndarray]:
        """(vbar, logpi_bar) of the frozen Q copy; vbar is 0 at terminals."""
        vbar = row_logsumexp(self.q_target, self.env.child_ptr)
        vbar[self.env.is_terminal] = 0.0
        return vbar, row_log_softmax(self.q_target, self.env.child_ptr)

    # -- updates --------------------------------------------------------------

    def apply_grad(self, name: str, grad: np.ndarray | float, iteration: int) -> None:
        param = {"pf": self.pf_logits, "q": self.q, "pb": self.pb_logits,
                 "flow": self.log_flow, "log_z": self.log_z}[name]
        if param is None:
            raise ValueError(f"tensor {name!r} not present for objective {self.objective}")
        g = np.asarray(grad, dtype=np.float64)
        adam_step(param, g, self.adam[name], self.lr[name].at(iteration),
                  betas=self.adam_betas, eps=self.adam_eps,
                  weight_decay=self.weight_decay)

    def ema_tick_pb(self, tau: float) -> None:
        ema_update(self.pb_target, self.pb_logits, tau)

    def ema_tick_q(self, tau: float) -> None:
        ema_update(self.q_target, self.q, tau)

    def tensors(self) -> dict[str, np.ndarray]:
        out = {"pb": self.pb_logits, "pb_target": self.pb_target}
        if self.pf_logits is not None:
            out["pf"] = self.pf_logits
        if self.q is not None:
            out["q"] = self.q
            out["q_target"] = self.q_target
        if self.log_flow is not None:
            out["flow"] = self.log_flow
        if self.log_z is not None:
            out["log_z"] = self.log_z
        return out

    def pb_hash(self) -> str:
        import hashlib
        return hashlib.sha256(np.ascontiguousarray(self.pb_logits).tobytes()).hexdigest()

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        """Checkpoint: npz map of tensor-name -> row-major float64 values.

        Adam moments are stored as ``adam.<name>.m/v/t``. The format is
        documented in the README and stable within a major version.
        """
        payload: dict[str, np.ndarray] = {"objective": np.array(self.objective)}
        for name, arr in self.tensors().items():
            payload[name] = arr
        for name, st in self.adam.items():
            payload[f"adam.{name}.m"] = st.m
            payload[f"adam.{name}.v"] = st.v
            payload[f"adam.{name}.t"] = np.array(st.t, dtype=np.int64)
        with open(path, "wb") as fh:   # keep the exact filename (no .npz suffix)
            np.savez(fh, **payload)

    def load(self, path) -> None:
        with np.load(path, allow_pickle=False) as data:
            for name, arr in self.tensors().items():
                arr[...] = data[name]
            for name, st in self.adam.items():
                st.m[...] = data[f"adam.{name}.m"]
                st.v[...] = data[f"adam.{name}.v"]
                st.t = int(data[f"adam.{name}.t"])


def make_bundle(env: DagEnv, objective: str, lr_forward: LrSpec, lr_backward: LrSpec,
                lr_logz: LrSpec | None = None, adam_betas=(0.9, 0.999),
                adam_eps: float = 1e-8, weight_decay: float = 0.0) -> ParamBundle:
    """Zero-initialized bundle (uniform policies, unit flows, log Z = 0)."""
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    E = env.num_edges
    bundle = ParamBundle(
        env=env, objective=objective,
        pb_logits=np.zeros(E), pb_target=np.zeros(E),
        adam_betas=adam_betas, adam_eps=adam_eps, weight_decay=weight_decay,
    )
    bundle.adam["pb"] = AdamState.like("pb", bundle.pb_logits)
    bundle.lr["pb"] = lr_backward
    if objective in DQN_OBJECTIVES:
        bundle.q = np.zeros(E)
        bundle.q_target = np.zeros(E)
        bundle.adam["q"] = AdamState.like("q", bundle.q)
        bundle.lr["q"] = lr_forward
    else:
        bundle.pf_logits = np.zeros(E)
        bundle.adam["pf"] = AdamState.like("pf", bundle.pf_logits)
        bundle.lr["pf"] = lr_forward
    if objective == "tb":
        bundle.log_z = np.zeros(())
        bundle.adam["log_z"] = AdamState.like("log_z", bundle.log_z)
        bundle.lr["log_z"] = lr_logz or LrSpec(0.1)
    if objective in ("db", "subtb"):
        bundle.log_flow = np.zeros(env.num_states)
        bundle.adam["flow"] = AdamState.like("flow", bundle.log_flow)
        bundle.lr["flow"] = lr_forward
    return bundle
