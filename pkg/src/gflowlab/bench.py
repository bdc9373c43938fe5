"""Benchmark the compiled kernels against the pure-python fallback.

Run as ``python -m gflowlab.bench``. Reports per-call times for batch
sampling and each loss kernel on a hypergrid workload, plus end-to-end
iteration throughput.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import kernels
from .envs import HypergridSpec, build_hypergrid
from .params import LrSpec, make_bundle
from .rowops import row_log_softmax


def _time(fn, repeats: int) -> float:
    fn()  # warm-up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def run(dims: int = 2, side: int = 8, batch_size: int = 64, repeats: int = 200) -> None:
    env = build_hypergrid(HypergridSpec(dims=dims, side=side))
    bundle = make_bundle(env, "subtb", LrSpec(1e-3), LrSpec(1e-3))
    rng = np.random.default_rng(0)
    bundle.pf_logits[:] = 0.3 * rng.standard_normal(env.num_edges)
    bundle.pb_logits[:] = 0.3 * rng.standard_normal(env.num_edges)
    bundle.log_flow[:] = 0.1 * rng.standard_normal(env.num_states)

    log_pf = row_log_softmax(bundle.pf_logits, env.child_ptr)
    log_pb = row_log_softmax(bundle.pb_logits, env.parent_ptr)
    pf_probs, pb_probs = np.exp(log_pf), np.exp(log_pb)
    flow_eff = bundle.flow_effective()
    uniforms = rng.random((batch_size, env.max_traj_len))
    q = 0.3 * rng.standard_normal(env.num_edges)
    vbar = np.zeros(env.num_states)

    backends = kernels.available_backends()
    print(f"env: hypergrid d={dims} H={side} ({env.num_states} states, "
          f"{env.num_edges} edges), batch={batch_size}, repeats={repeats}")
    if len(backends) == 1:
        print("note: compiled backend not built; showing python fallback only")

    rows = {}
    for impl in backends:
        edges, ptr = impl.sample_batch(env.child_ptr, env.child_idx, pf_probs,
                                       1e-3, uniforms, env.initial)
        trans = edges
        weights = np.ones(len(trans))
        cases = {
            "sample_batch": lambda im=impl: im.sample_batch(
                env.child_ptr, env.child_idx, pf_probs, 1e-3, uniforms, env.initial),
            "tb_loss": lambda im=impl: im.tb_loss(
                edges, ptr, env.child_idx, env.child_ptr, env.edge_sources(),
                env.fwd2bwd, env.parent_ptr, env.log_reward, log_pf, pf_probs,
                log_pb, pb_probs, 0.0, True),
            "subtb_loss": lambda im=impl: im.db_subtb_loss(
                edges, ptr, env.child_idx, env.child_ptr, env.edge_sources(),
                env.fwd2bwd, env.parent_ptr, env.log_reward, env.is_terminal,
                log_pf, pf_probs, log_pb, pb_probs, flow_eff, 0.9, True, False),
            "tlm_loss": lambda im=impl: im.tlm_loss(
                edges, ptr, env.child_idx, env.fwd2bwd, env.parent_ptr,
                log_pb, pb_probs),
            "dqn_loss": lambda im=impl: im.dqn_loss(
                trans, weights, env.child_idx, env.child_ptr, env.edge_sources(),
                env.fwd2bwd, env.parent_ptr, env.is_terminal, env.log_reward,
                q, vbar, log_pf, log_pb, pb_probs, 5.0, 0.15, -100.0, False),
        }
        for name, fn in cases.items():
            rows.setdefault(name, {})[impl.BACKEND] = _time(fn, repeats)

    names = [impl.BACKEND for impl in backends]
    header = f"{'kernel':<14}" + "".join(f"{n:>14}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for name, times in rows.items():
        line = f"{name:<14}" + "".join(f"{times[n] * 1e6:>12.1f}us" for n in names)
        if len(names) == 2:
            line += f"{times['python'] / times['cython']:>9.1f}x"
        print(line)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dims", type=int, default=2)
    parser.add_argument("--side", type=int, default=8)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args(argv)
    run(args.dims, args.side, args.batch_size, args.repeats)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
