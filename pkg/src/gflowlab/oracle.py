"""Exact computations on enumerable environments.

Everything here is dynamic programming over the DAG in the log domain:
marginals, trajectory KLs, soft values, proper-policy constructions, path
counts, and the one-shot exact alternating minimization. These functions are
the ground truth that the training code is tested against, so they share no
code with the loss kernels.

Policies enter as dense per-edge *log-probability* arrays whose rows are
already normalized (use ``rowops.row_log_softmax`` on raw logits).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .envs import DagEnv, TrajectoryBatch, path_counts
from .rowops import row_log_softmax, segment_sums

# Central tolerance table; tests and the CLI `oracle` command read these.
TOLERANCES = {
    "proposition1": 1e-10,
    "alternation_residual": 1e-9,
    "alternation_kl": 1e-12,
    "proper_policy": 1e-12,
    "maxent_product": 1e-12,
    "marginal": 1e-12,
    "posterior_fixed_point": 1e-12,
    "pinsker_slack": 1e-9,
}


@dataclass
class ExactDistributions:
    visit_prob: np.ndarray        # p(s) of visiting s under PF
    terminal_marginal: np.ndarray # P_theta(x) indexed like env.terminal_ids
    log_z: float
    log_visit: np.ndarray


def log_z_exact(env: DagEnv) -> float:
    lr = env.log_reward[env.terminal_ids]
    m = lr.max()
    return float(m + np.log(np.exp(lr - m).sum()))


def rl_reward_edges(env: DagEnv, log_pb: np.ndarray) -> np.ndarray:
    """r(s, s') per forward edge: log PB(s | s'), plus log R at terminal edges."""
    r = log_pb[env.fwd2bwd]
    child = env.child_idx
    r = r + np.where(env.is_terminal[child], env.log_reward[child], 0.0)
    return r


def exact_marginal(env: DagEnv, log_pf: np.ndarray) -> ExactDistributions:
    """Forward visitation DP: p(s') = sum_s p(s) PF(s'|s), in log domain."""
    lv = np.full(env.num_states, -np.inf)
    lv[env.initial] = 0.0
    src = env.edge_sources()
    for grp in env.level_edge_groups():
        if len(grp):
            np.logaddexp.at(lv, env.child_idx[grp], lv[src[grp]] + log_pf[grp])
    term = np.exp(lv[env.terminal_ids])
    return ExactDistributions(visit_prob=np.exp(lv), terminal_marginal=term,
                              log_z=log_z_exact(env), log_visit=lv)


def exact_traj_kl(env: DagEnv, log_pf: np.ndarray, log_pb: np.ndarray) -> float:
    """KL(Ptraj_PF || Ptraj_PB) over complete trajectories.

    Computed edge-wise through the visitation measure (the sum over
    trajectories factorizes by linearity of expectation), which stays exact
    for environments whose trajectory count is far beyond enumeration.
    Clipped at zero against roundoff.
    """
    dist = exact_marginal(env, log_pf)
    src = env.edge_sources()
    w = np.exp(dist.log_visit[src] + log_pf)
    kl = float(np.sum(w * (log_pf - log_pb[env.fwd2bwd])))
    kl += dist.log_z - float(np.sum(dist.terminal_marginal * env.log_reward[env.terminal_ids]))
    return max(kl, 0.0)


def soft_policy_eval(env: DagEnv, log_pf: np.ndarray, log_pb: np.ndarray) -> float:
    """Entropy-regularized value of PF at the root under backward rewards.

    V(terminal) = 0 and
    V(s) = sum_s' PF(s'|s) (r(s,s') - log PF(s'|s) + V(s')).
    """
    r = rl_reward_edges(env, log_pb)
    V = np.zeros(env.num_states)
    pf = np.exp(log_pf)
    for s in range(env.num_states - 1, -1, -1):
        lo, hi = env.child_ptr[s], env.child_ptr[s + 1]
        if lo != hi:
            kids = env.child_idx[lo:hi]
            V[s] = float(np.sum(pf[lo:hi] * (r[lo:hi] - log_pf[lo:hi] + V[kids])))
    return float(V[env.initial])


def soft_optimal_values(env: DagEnv, log_pb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Soft backup Q*(s,s') = r(s,s') + V*(s'), V*(s) = logsumexp Q*(s, .)."""
    r = rl_reward_edges(env, log_pb)
    v_star = np.zeros(env.num_states)
    q_star = np.zeros(env.num_edges)
    for s in range(env.num_states - 1, -1, -1):
        lo, hi = env.child_ptr[s], env.child_ptr[s + 1]
        if lo != hi:
            qrow = r[lo:hi] + v_star[env.child_idx[lo:hi]]
            q_star[lo:hi] = qrow
            m = qrow.max()
            v_star[s] = float(m + np.log(np.exp(qrow - m).sum()))
    return q_star, v_star


def optimal_pf_given_pb(env: DagEnv, log_pb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The unique balanced PF for a fixed PB, via the flow recursion.

    F(x) = R(x); F(s) = sum_children PB(s|s') F(s');
    PF(s'|s) = PB(s|s') F(s') / F(s). Returns (log_pf, log_flow).
    """
    lpb_f = log_pb[env.fwd2bwd]
    log_flow = np.where(env.is_terminal, env.log_reward, -np.inf)
    log_pf = np.zeros(env.num_edges)
    for s in range(env.num_states - 1, -1, -1):
        lo, hi = env.child_ptr[s], env.child_ptr[s + 1]
        if lo != hi:
            terms = lpb_f[lo:hi] + log_flow[env.child_idx[lo:hi]]
            m = terms.max()
            log_flow[s] = float(m + np.log(np.exp(terms - m).sum()))
            log_pf[lo:hi] = terms - log_flow[s]
    return log_pf, log_flow


def posterior_pb_given_pf(env: DagEnv, log_pf: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact minimizer of KL(Ptraj_PF || Ptraj_PB) over PB.

    PB(s|s') = p(s) PF(s'|s) / p(s'). Rows of states PF never visits are
    left uniform and flagged (the objective is indifferent there).
    Returns (log_pb, flagged_state_mask).
    """
    dist = exact_marginal(env, log_pf)
    lv = dist.log_visit
    num = lv[env.parent_idx] + log_pf[env.bwd2fwd]
    log_pb = row_log_softmax(num, env.parent_ptr)
    flagged = ~np.isfinite(lv)
    flagged[env.initial] = False
    if flagged.any():
        for s in np.flatnonzero(flagged):
            lo, hi = env.parent_ptr[s], env.parent_ptr[s + 1]
            log_pb[lo:hi] = -math.log(hi - lo)
    return log_pb, flagged


class AlternationResult(NamedTuple):
    log_pb: np.ndarray
    log_pf: np.ndarray
    log_flow: np.ndarray


def exact_alternation(env: DagEnv, log_pf0: np.ndarray) -> AlternationResult:
    """One exact round of the alternating KL minimization.

    The posterior step fits PB to PF's trajectory distribution; the policy
    step then rebuilds the balanced PF for that PB, after which the pair
    satisfies trajectory balance (KL = 0) -- convergence in one iteration.
    """
    log_pb1, _ = posterior_pb_given_pf(env, log_pf0)
    log_pf1, log_flow1 = optimal_pf_given_pb(env, log_pb1)
    return AlternationResult(log_pb1, log_pf1, log_flow1)


@dataclass
class PathCountTable:
    """log n(s), with n(s) the number of distinct root-to-s paths."""

    log_n: np.ndarray
    counts: list  # exact arbitrary-precision ints

    @classmethod
    def build(cls, env: DagEnv) -> "PathCountTable":
        counts = path_counts(env)
        log_n = np.array([math.log(c) if c > 0 else -math.inf for c in counts])
        return cls(log_n=log_n, counts=counts)


def count_paths(env: DagEnv) -> PathCountTable:
    return PathCountTable.build(env)


class PinskerCheck(NamedTuple):
    ok: bool
    lhs: float
    rhs: float


def pinsker_gap(avg_pf_traj: np.ndarray, pb_star_traj: np.ndarray,
                avg_regret: float, avg_pb_drift: float) -> PinskerCheck:
    """L1 between averaged forward and limit backward trajectory laws vs the
    sqrt(2 * regret) + drift bound."""
    lhs = float(np.abs(avg_pf_traj - pb_star_traj).sum())
    rhs = float(math.sqrt(max(2.0 * avg_regret, 0.0)) + avg_pb_drift)
    return PinskerCheck(lhs <= rhs + TOLERANCES["pinsker_slack"], lhs, rhs)


# -- enumerated-trajectory utilities ------------------------------------------


def traj_log_pf(batch: TrajectoryBatch, log_pf: np.ndarray) -> np.ndarray:
    """log Ptraj_PF per trajectory of the batch."""
    return segment_sums(log_pf[batch.edges], batch.ptr)


def traj_log_pb(batch: TrajectoryBatch, log_pb: np.ndarray,
                log_z: float | None = None) -> np.ndarray:
    """log Ptraj_PB per trajectory (reward-weighted backward law)."""
    env = batch.env
    if log_z is None:
        log_z = log_z_exact(env)
    back = segment_sums(log_pb[env.fwd2bwd[batch.edges]], batch.ptr)
    return env.log_reward[batch.terminals()] - log_z + back


def tb_log_residuals(batch: TrajectoryBatch, log_pf: np.ndarray, log_pb: np.ndarray,
                     log_z: float | None = None) -> np.ndarray:
    """Per-trajectory log-domain trajectory-balance residuals."""
    return traj_log_pf(batch, log_pf) - traj_log_pb(batch, log_pb, log_z)


def enumeration_marginal(batch: TrajectoryBatch, log_pf: np.ndarray) -> np.ndarray:
    """Brute-force terminal marginal; the independent cross-check for
    :func:`exact_marginal`. Indexed like ``env.terminal_ids``."""
    env = batch.env
    probs = np.exp(traj_log_pf(batch, log_pf))
    acc = np.zeros(env.num_states)
    np.add.at(acc, batch.terminals(), probs)
    return acc[env.terminal_ids]


def enumeration_traj_kl(batch: TrajectoryBatch, log_pf: np.ndarray,
                        log_pb: np.ndarray) -> float:
    """Brute-force KL over the enumerated trajectory set."""
    lpf = traj_log_pf(batch, log_pf)
    lpb = traj_log_pb(batch, log_pb)
    p = np.exp(lpf)
    return float(np.sum(p * (lpf - lpb)))


# -- verification suites (shared by tests and the CLI `oracle` command) -------


def random_log_policy(env: DagEnv, rng: np.random.Generator, direction: str,
                      scale: float = 1.0) -> np.ndarray:
    """Normalized log-probs of a random tabular policy."""
    ptr = env.child_ptr if direction == "forward" else env.parent_ptr
    return row_log_softmax(scale * rng.standard_normal(env.num_edges), ptr)


class CheckResult(NamedTuple):
    name: str
    residual: float
    tol: float
    ok: bool


def _check(name: str, residual: float, tol_key: str) -> CheckResult:
    tol = TOLERANCES[tol_key]
    return CheckResult(name, residual, tol, residual < tol)


ALL_CHECKS = ("proposition1", "alternation", "maxent", "marginal", "pinsker")


def run_checks(env: DagEnv, which=None, seed: int = 0, n_pairs: int = 100,
               n_alt_seeds: int = 5, traj_cap: int = 200000) -> list[CheckResult]:
    """Exact-identity suites; enumeration-backed checks respect ``traj_cap``."""
    which = list(which) if which else list(ALL_CHECKS)
    unknown = set(which) - set(ALL_CHECKS)
    if unknown:
        raise ValueError(f"unknown oracle checks: {sorted(unknown)}")
    out: list[CheckResult] = []
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0AC1E]))
    batch = None

    def enum():
        nonlocal batch
        if batch is None:
            from .envs import enumerate_trajectories
            batch = enumerate_trajectories(env, cap=traj_cap)
        return batch

    if "proposition1" in which:
        worst = 0.0
        lz = log_z_exact(env)
        for _ in range(n_pairs):
            lpf = random_log_policy(env, rng, "forward")
            lpb = random_log_policy(env, rng, "backward")
            v = soft_policy_eval(env, lpf, lpb)
            worst = max(worst, abs(v - (lz - exact_traj_kl(env, lpf, lpb))))
        out.append(_check("proposition1", worst, "proposition1"))
    if "alternation" in which:
        worst_res, worst_kl = 0.0, 0.0
        for _ in range(n_alt_seeds):
            lpf0 = random_log_policy(env, rng, "forward")
            alt = exact_alternation(env, lpf0)
            res = tb_log_residuals(enum(), alt.log_pf, alt.log_pb)
            worst_res = max(worst_res, float(np.abs(res).max()))
            worst_kl = max(worst_kl, exact_traj_kl(env, alt.log_pf, alt.log_pb))
        out.append(_check("alternation_residual", worst_res, "alternation_residual"))
        out.append(_check("alternation_kl", worst_kl, "alternation_kl"))
    if "maxent" in which:
        table = count_paths(env)
        b = enum()
        # exact path-count cross-check against per-terminal enumeration counts
        counted = np.bincount(b.terminals(), minlength=env.num_states)
        diff = max(abs(counted[t] - table.counts[t]) for t in env.terminal_ids)
        out.append(CheckResult("maxent_counts", float(diff), 0.5, diff == 0))
        log_pb_me = row_log_softmax(table.log_n[env.parent_idx], env.parent_ptr)
        prod = segment_sums(log_pb_me[env.fwd2bwd[b.edges]], b.ptr)
        target = -table.log_n[b.terminals()]
        worst = float(np.abs(prod - target).max())
        out.append(_check("maxent_product", worst, "maxent_product"))
    if "marginal" in which:
        lpf = random_log_policy(env, rng, "forward")
        exact = exact_marginal(env, lpf).terminal_marginal
        brute = enumeration_marginal(enum(), lpf)
        out.append(_check("marginal", float(np.abs(exact - brute).max()), "marginal"))
    if "pinsker" in which:
        worst = 0.0
        for _ in range(n_alt_seeds):
            lpf = random_log_policy(env, rng, "forward")
            lpb = random_log_policy(env, rng, "backward")
            b = enum()
            p = np.exp(traj_log_pf(b, lpf))
            q = np.exp(traj_log_pb(b, lpb))
            lhs = float(np.abs(p - q).sum())
            rhs = math.sqrt(2.0 * exact_traj_kl(env, lpf, lpb))
            worst = max(worst, lhs - rhs)
        out.append(_check("pinsker", max(worst, 0.0), "pinsker_slack"))
    return out
