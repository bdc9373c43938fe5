"""Pure numpy reference implementation of the hot training kernels.

The compiled extension (``gflowlab._ckernels``) mirrors these functions
exactly; this module is the readable specification of their behaviour and
the fallback used when the extension is not built.

Conventions shared by all kernels:

* trajectories are flat ``(edges, ptr)`` pairs of forward-edge ids,
* ``log_pf/pf_probs`` are dense per-forward-edge arrays with rows already
  softmax-normalized (see :mod:`gflowlab.rowops`),
* ``log_pb/pb_probs`` are dense per-backward-edge arrays (parent CSR),
* gradients are returned w.r.t. raw logits, with batch-mean reduction
  already applied.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def sample_batch(child_ptr, child_idx, pf_probs, epsilon, uniforms, initial):
    """Walk ``K = len(uniforms)`` trajectories from the root.

    At each non-terminal state the next edge is drawn from the epsilon-mixed
    row ``(1 - eps) * pf + eps / deg`` using one uniform per step
    (inverse-CDF over the row in action order).
    """
    K, max_len = uniforms.shape
    edges_out: list[int] = []
    ptr = np.empty(K + 1, dtype=np.int64)
    ptr[0] = 0
    for k in range(K):
        s = initial
        step = 0
        while child_ptr[s] != child_ptr[s + 1]:
            lo, hi = child_ptr[s], child_ptr[s + 1]
            row = pf_probs[lo:hi]
            if epsilon > 0.0:
                row = (1.0 - epsilon) * row + epsilon / (hi - lo)
            u = uniforms[k, step]
            cum = np.cumsum(row)
            j = int(np.searchsorted(cum, u, side="right"))
            if j >= hi - lo:
                j = hi - lo - 1
            e = int(lo + j)
            edges_out.append(e)
            s = int(child_idx[e])
            step += 1
        ptr[k + 1] = len(edges_out)
    return np.asarray(edges_out, dtype=np.int64), ptr


def _scatter_logits(g, probs, lo, hi, chosen, coef):
    # d(log softmax_chosen)/d logits = onehot - probs
    g[lo:hi] -= coef * probs[lo:hi]
    g[chosen] += coef


def tb_loss(edges, ptr, child_idx, child_ptr, edge_src, fwd2bwd, parent_ptr,
            log_reward, log_pf, pf_probs, log_pb, pb_probs, log_z, want_pb_grad):
    """Squared full-trajectory balance residual, averaged over the batch."""
    K = len(ptr) - 1
    g_pf = np.zeros_like(log_pf)
    g_pb = np.zeros_like(log_pb) if want_pb_grad else None
    g_logz = 0.0
    loss = 0.0
    for k in range(K):
        e = edges[ptr[k]:ptr[k + 1]]
        b = fwd2bwd[e]
        x = child_idx[e[-1]]
        r = log_z + log_pf[e].sum() - log_reward[x] - log_pb[b].sum()
        loss += r * r
        c = 2.0 * r / K
        g_logz += c
        for i in range(len(e)):
            s = edge_src[e[i]]
            _scatter_logits(g_pf, pf_probs, child_ptr[s], child_ptr[s + 1], e[i], c)
            if want_pb_grad:
                sp = child_idx[e[i]]
                _scatter_logits(g_pb, pb_probs, parent_ptr[sp], parent_ptr[sp + 1], b[i], -c)
    return loss / K, g_pf, float(g_logz), g_pb


def _span_grads(n, jj, kk, w, phi):
    delta = phi[jj] - phi[kk]
    loss = float(np.sum(w * delta * delta))
    dphi = np.zeros(n + 1)
    np.add.at(dphi, jj, 2.0 * w * delta)
    np.add.at(dphi, kk, -2.0 * w * delta)
    return loss, dphi


def db_subtb_loss(edges, ptr, child_idx, child_ptr, edge_src, fwd2bwd, parent_ptr,
                  log_reward, is_terminal, log_pf, pf_probs, log_pb, pb_probs,
                  log_flow_eff, lam, subtb, want_pb_grad):
    """Per-transition (DB) or weighted sub-trajectory (SubTB) residuals.

    DB sums squared one-step residuals; SubTB weights every span (j, k)
    by ``lam**(k-j)`` normalized to a unit sum per trajectory. Both read
    terminal flows through to the log-reward, so terminal entries of
    ``log_flow_eff`` must already equal the reward.
    """
    K = len(ptr) - 1
    g_pf = np.zeros_like(log_pf)
    g_pb = np.zeros_like(log_pb) if want_pb_grad else None
    g_flow = np.zeros_like(log_flow_eff)
    loss = 0.0
    for k in range(K):
        e = edges[ptr[k]:ptr[k + 1]]
        n = len(e)
        b = fwd2bwd[e]
        states = np.empty(n + 1, dtype=np.int64)
        states[0] = edge_src[e[0]]
        states[1:] = child_idx[e]
        acc = np.concatenate(([0.0], np.cumsum(log_pf[e] - log_pb[b])))
        phi = log_flow_eff[states] - acc
        if subtb:
            jj, kk = np.triu_indices(n + 1, k=1)
            w = lam ** (kk - jj).astype(np.float64)
            w = w / w.sum()
        else:
            jj = np.arange(n)
            kk = jj + 1
            w = np.ones(n)
        traj_loss, dphi = _span_grads(n, jj, kk, w, phi)
        loss += traj_loss
        dphi /= K
        # phi_t = logF(s_t) - sum_{i<=t} logpf_i + sum_{i<=t} logpb_i
        suffix = np.cumsum(dphi[::-1])[::-1]         # suffix[t] = sum_{u>=t} dphi[u]
        for t in range(n + 1):
            if not is_terminal[states[t]]:
                g_flow[states[t]] += dphi[t]
        for i in range(1, n + 1):                    # step i: s_{i-1} -> s_i
            c_pf = -suffix[i]
            s = states[i - 1]
            _scatter_logits(g_pf, pf_probs, child_ptr[s], child_ptr[s + 1], e[i - 1], c_pf)
            if want_pb_grad:
                sp = states[i]
                _scatter_logits(g_pb, pb_probs, parent_ptr[sp], parent_ptr[sp + 1],
                                b[i - 1], suffix[i])
    return loss / K, g_pf, g_flow, g_pb


def tlm_loss(edges, ptr, child_idx, fwd2bwd, parent_ptr, log_pb, pb_probs):
    """Negative backward log-likelihood of the batch, mean over trajectories."""
    K = len(ptr) - 1
    g_pb = np.zeros_like(log_pb)
    loss = 0.0
    for k in range(K):
        e = edges[ptr[k]:ptr[k + 1]]
        b = fwd2bwd[e]
        loss -= log_pb[b].sum()
        for i in range(len(e)):
            sp = child_idx[e[i]]
            _scatter_logits(g_pb, pb_probs, parent_ptr[sp], parent_ptr[sp + 1], b[i], -1.0 / K)
    return loss / K, g_pb


def dqn_loss(trans_edges, weights, child_idx, child_ptr, edge_src, fwd2bwd, parent_ptr,
             is_terminal, log_reward, q, vbar, logpi_bar, log_pb, pb_probs,
             leaf_coef, alpha, l0, want_pb_grad):
    """Soft TD loss on a transition batch (SoftDQN; MunchausenDQN if alpha > 0).

    ``vbar`` is the frozen soft state value (0 at terminals) and
    ``logpi_bar`` the frozen log-policy of the target Q-table; both are
    treated as constants. Transitions into terminals are weighted by
    ``leaf_coef`` on top of the importance weights.
    """
    B = len(trans_edges)
    g_q = np.zeros_like(q)
    g_pb = np.zeros_like(log_pb) if want_pb_grad else None
    td_abs = np.empty(B)
    loss = 0.0
    for i in range(B):
        e = int(trans_edges[i])
        sp = int(child_idx[e])
        bslot = int(fwd2bwd[e])
        r = log_pb[bslot]
        if is_terminal[sp]:
            r += log_reward[sp]
        y = r + vbar[sp]
        if alpha != 0.0:
            y += alpha * min(max(logpi_bar[e], l0), 0.0)
        d = q[e] - y
        td_abs[i] = abs(d)
        coef = weights[i] * (leaf_coef if is_terminal[sp] else 1.0)
        loss += coef * d * d
        g_q[e] += 2.0 * coef * d / B
        if want_pb_grad:
            _scatter_logits(g_pb, pb_probs, parent_ptr[sp], parent_ptr[sp + 1],
                            bslot, -2.0 * coef * d / B)
    return loss / B, g_q, g_pb, td_abs
