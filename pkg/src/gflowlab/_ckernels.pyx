# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled mirror of gflowlab.kernels.pyref (see there for contracts)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

BACKEND = "cython"

ctypedef cnp.int64_t i64
ctypedef cnp.float64_t f64


def sample_batch(cnp.ndarray[i64, ndim=1] child_ptr,
                 cnp.ndarray[i64, ndim=1] child_idx,
                 cnp.ndarray[f64, ndim=1] pf_probs,
                 double epsilon,
                 cnp.ndarray[f64, ndim=2] uniforms,
                 long initial):
    cdef Py_ssize_t K = uniforms.shape[0]
    cdef Py_ssize_t max_len = uniforms.shape[1]
    cdef cnp.ndarray[i64, ndim=1] ptr = np.empty(K + 1, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] buf = np.empty(K * max_len, dtype=np.int64)
    cdef Py_ssize_t nout = 0, k, step
    cdef long s
    cdef i64 lo, hi, j, e
    cdef double u, acc, deg_inv
    ptr[0] = 0
    for k in range(K):
        s = initial
        step = 0
        while child_ptr[s] != child_ptr[s + 1]:
            lo = child_ptr[s]
            hi = child_ptr[s + 1]
            u = uniforms[k, step]
            acc = 0.0
            j = hi - lo - 1
            if epsilon > 0.0:
                deg_inv = epsilon / (hi - lo)
                for e in range(lo, hi):
                    acc += (1.0 - epsilon) * pf_probs[e] + deg_inv
                    if u < acc:
                        j = e - lo
                        break
            else:
                for e in range(lo, hi):
                    acc += pf_probs[e]
                    if u < acc:
                        j = e - lo
                        break
            buf[nout] = lo + j
            nout += 1
            s = child_idx[lo + j]
            step += 1
        ptr[k + 1] = nout
    return buf[:nout].copy(), ptr


cdef inline void _scatter(f64* g, f64* probs, i64 lo, i64 hi, i64 chosen, double coef) nogil:
    cdef i64 e
    for e in range(lo, hi):
        g[e] -= coef * probs[e]
    g[chosen] += coef


def tb_loss(cnp.ndarray[i64, ndim=1] edges,
            cnp.ndarray[i64, ndim=1] ptr,
            cnp.ndarray[i64, ndim=1] child_idx,
            cnp.ndarray[i64, ndim=1] child_ptr,
            cnp.ndarray[i64, ndim=1] edge_src,
            cnp.ndarray[i64, ndim=1] fwd2bwd,
            cnp.ndarray[i64, ndim=1] parent_ptr,
            cnp.ndarray[f64, ndim=1] log_reward,
            cnp.ndarray[f64, ndim=1] log_pf,
            cnp.ndarray[f64, ndim=1] pf_probs,
            cnp.ndarray[f64, ndim=1] log_pb,
            cnp.ndarray[f64, ndim=1] pb_probs,
            double log_z,
            bint want_pb_grad):
    cdef Py_ssize_t K = ptr.shape[0] - 1
    cdef cnp.ndarray[f64, ndim=1] g_pf = np.zeros_like(log_pf)
    cdef cnp.ndarray[f64, ndim=1] g_pb = np.zeros_like(log_pb)
    cdef double g_logz = 0.0, loss = 0.0, r, c
    cdef Py_ssize_t k, i
    cdef i64 e, b, s, sp, x
    for k in range(K):
        r = log_z
        for i in range(ptr[k], ptr[k + 1]):
            e = edges[i]
            r += log_pf[e] - log_pb[fwd2bwd[e]]
        x = child_idx[edges[ptr[k + 1] - 1]]
        r -= log_reward[x]
        loss += r * r
        c = 2.0 * r / K
        g_logz += c
        for i in range(ptr[k], ptr[k + 1]):
            e = edges[i]
            s = edge_src[e]
            _scatter(&g_pf[0], &pf_probs[0], child_ptr[s], child_ptr[s + 1], e, c)
            if want_pb_grad:
                sp = child_idx[e]
                _scatter(&g_pb[0], &pb_probs[0], parent_ptr[sp], parent_ptr[sp + 1],
                         fwd2bwd[e], -c)
    return loss / K, g_pf, float(g_logz), (g_pb if want_pb_grad else None)


def db_subtb_loss(cnp.ndarray[i64, ndim=1] edges,
                  cnp.ndarray[i64, ndim=1] ptr,
                  cnp.ndarray[i64, ndim=1] child_idx,
                  cnp.ndarray[i64, ndim=1] child_ptr,
                  cnp.ndarray[i64, ndim=1] edge_src,
                  cnp.ndarray[i64, ndim=1] fwd2bwd,
                  cnp.ndarray[i64, ndim=1] parent_ptr,
                  cnp.ndarray[f64, ndim=1] log_reward,
                  cnp.ndarray[cnp.uint8_t, ndim=1, cast=True] is_terminal,
                  cnp.ndarray[f64, ndim=1] log_pf,
                  cnp.ndarray[f64, ndim=1] pf_probs,
                  cnp.ndarray[f64, ndim=1] log_pb,
                  cnp.ndarray[f64, ndim=1] pb_probs,
                  cnp.ndarray[f64, ndim=1] log_flow_eff,
                  double lam,
                  bint subtb,
                  bint want_pb_grad):
    cdef Py_ssize_t K = ptr.shape[0] - 1
    cdef cnp.ndarray[f64, ndim=1] g_pf = np.zeros_like(log_pf)
    cdef cnp.ndarray[f64, ndim=1] g_pb = np.zeros_like(log_pb)
    cdef cnp.ndarray[f64, ndim=1] g_flow = np.zeros_like(log_flow_eff)
    cdef Py_ssize_t max_n = 0, k, n, i, t, jj, kk
    for k in range(K):
        if ptr[k + 1] - ptr[k] > max_n:
            max_n = ptr[k + 1] - ptr[k]
    cdef cnp.ndarray[f64, ndim=1] phi = np.empty(max_n + 1)
    cdef cnp.ndarray[f64, ndim=1] dphi = np.empty(max_n + 1)
    cdef cnp.ndarray[i64, ndim=1] states = np.empty(max_n + 1, dtype=np.int64)
    cdef double loss = 0.0, acc, wsum, w, delta, traj, suffix, c
    cdef i64 e, b, s, sp
    for k in range(K):
        n = ptr[k + 1] - ptr[k]
        states[0] = edge_src[edges[ptr[k]]]
        acc = 0.0
        phi[0] = log_flow_eff[states[0]]
        for i in range(n):
            e = edges[ptr[k] + i]
            acc += log_pf[e] - log_pb[fwd2bwd[e]]
            states[i + 1] = child_idx[e]
            phi[i + 1] = log_flow_eff[states[i + 1]] - acc
        for t in range(n + 1):
            dphi[t] = 0.0
        traj = 0.0
        if subtb:
            wsum = 0.0
            for jj in range(n):
                w = 1.0
                for kk in range(jj + 1, n + 1):
                    w *= lam
                    wsum += w
            for jj in range(n):
                w = 1.0
                for kk in range(jj + 1, n + 1):
                    w *= lam
                    delta = phi[jj] - phi[kk]
                    traj += (w / wsum) * delta * delta
                    dphi[jj] += 2.0 * (w / wsum) * delta
                    dphi[kk] -= 2.0 * (w / wsum) * delta
        else:
            for t in range(n):
                delta = phi[t] - phi[t + 1]
                traj += delta * delta
                dphi[t] += 2.0 * delta
                dphi[t + 1] -= 2.0 * delta
        loss += traj
        for t in range(n + 1):
            dphi[t] /= K
            if not is_terminal[states[t]]:
                g_flow[states[t]] += dphi[t]
        suffix = 0.0
        for i in range(n, 0, -1):
            suffix += dphi[i]
            c = -suffix
            e = edges[ptr[k] + i - 1]
            s = states[i - 1]
            _scatter(&g_pf[0], &pf_probs[0], child_ptr[s], child_ptr[s + 1], e, c)
            if want_pb_grad:
                sp = states[i]
                _scatter(&g_pb[0], &pb_probs[0], parent_ptr[sp], parent_ptr[sp + 1],
                         fwd2bwd[e], suffix)
    return loss / K, g_pf, g_flow, (g_pb if want_pb_grad else None)


def tlm_loss(cnp.ndarray[i64, ndim=1] edges,
             cnp.ndarray[i64, ndim=1] ptr,
             cnp.ndarray[i64, ndim=1] child_idx,
             cnp.ndarray[i64, ndim=1] fwd2bwd,
             cnp.ndarray[i64, ndim=1] parent_ptr,
             cnp.ndarray[f64, ndim=1] log_pb,
             cnp.ndarray[f64, ndim=1] pb_probs):
    cdef Py_ssize_t K = ptr.shape[0] - 1
    cdef cnp.ndarray[f64, ndim=1] g_pb = np.zeros_like(log_pb)
    cdef double loss = 0.0
    cdef Py_ssize_t k, i
    cdef i64 e, sp
    for k in range(K):
        for i in range(ptr[k], ptr[k + 1]):
            e = edges[i]
            loss -= log_pb[fwd2bwd[e]]
            sp = child_idx[e]
            _scatter(&g_pb[0], &pb_probs[0], parent_ptr[sp], parent_ptr[sp + 1],
                     fwd2bwd[e], -1.0 / K)
    return loss / K, g_pb


def dqn_loss(cnp.ndarray[i64, ndim=1] trans_edges,
             cnp.ndarray[f64, ndim=1] weights,
             cnp.ndarray[i64, ndim=1] child_idx,
             cnp.ndarray[i64, ndim=1] child_ptr,
             cnp.ndarray[i64, ndim=1] edge_src,
             cnp.ndarray[i64, ndim=1] fwd2bwd,
             cnp.ndarray[i64, ndim=1] parent_ptr,
             cnp.ndarray[cnp.uint8_t, ndim=1, cast=True] is_terminal,
             cnp.ndarray[f64, ndim=1] log_reward,
             cnp.ndarray[f64, ndim=1] q,
             cnp.ndarray[f64, ndim=1] vbar,
             logpi_bar,
             cnp.ndarray[f64, ndim=1] log_pb,
             cnp.ndarray[f64, ndim=1] pb_probs,
             double leaf_coef,
             double alpha,
             double l0,
             bint want_pb_grad):
    cdef Py_ssize_t B = trans_edges.shape[0]
    cdef cnp.ndarray[f64, ndim=1] g_q = np.zeros_like(q)
    cdef cnp.ndarray[f64, ndim=1] g_pb = np.zeros_like(log_pb)
    cdef cnp.ndarray[f64, ndim=1] td_abs = np.empty(B)
    cdef cnp.ndarray[f64, ndim=1] lpb_arr
    cdef bint munchausen = alpha != 0.0
    if munchausen:
        lpb_arr = logpi_bar
    else:
        lpb_arr = q  # unused
    cdef double loss = 0.0, r, y, d, coef, bonus
    cdef Py_ssize_t i
    cdef i64 e, sp, b
    for i in range(B):
        e = trans_edges[i]
        sp = child_idx[e]
        b = fwd2bwd[e]
        r = log_pb[b]
        if is_terminal[sp]:
            r += log_reward[sp]
        y = r + vbar[sp]
        if munchausen:
            bonus = lpb_arr[e]
            if bonus < l0:
                bonus = l0
            if bonus > 0.0:
                bonus = 0.0
            y += alpha * bonus
        d = q[e] - y
        td_abs[i] = fabs(d)
        coef = weights[i] * (leaf_coef if is_terminal[sp] else 1.0)
        loss += coef * d * d
        g_q[e] += 2.0 * coef * d / B
        if want_pb_grad:
            _scatter(&g_pb[0], &pb_probs[0], parent_ptr[sp], parent_ptr[sp + 1],
                     b, -2.0 * coef * d / B)
    return loss / B, g_q, (g_pb if want_pb_grad else None), td_abs
