import numpy as np
import pytest

from gflowlab.envs import BitSeqSpec, HypergridSpec, build_bitseq, build_hypergrid, build_micro
from gflowlab.kernels import available_backends
from gflowlab.params import LrSpec, make_bundle
from gflowlab.rowops import row_log_softmax


@pytest.fixture(scope="session")
def diamond():
    return build_micro("diamond")


@pytest.fixture(scope="session")
def chain():
    return build_micro("chain", chain_length=3)


@pytest.fixture(scope="session")
def grid22():
    return build_hypergrid(HypergridSpec(dims=2, side=2))


@pytest.fixture(scope="session")
def grid28():
    return build_hypergrid(HypergridSpec(dims=2, side=8))


@pytest.fixture(scope="session")
def bitseq():
    env, modes = build_bitseq(BitSeqSpec(), rng_seed=0)
    return env


@pytest.fixture(scope="session")
def two_terminal():
    # 0 -> 1, 0 -> 2 with unit rewards: target distribution (1/2, 1/2)
    return build_micro("custom", edges=[(0, 1), (0, 2)])


@pytest.fixture(params=[b.BACKEND for b in available_backends()])
def backend(request):
    for b in available_backends():
        if b.BACKEND == request.param:
            return b
    raise RuntimeError


def random_log_pf(env, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return row_log_softmax(scale * rng.standard_normal(env.num_edges), env.child_ptr)


def random_log_pb(env, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return row_log_softmax(scale * rng.standard_normal(env.num_edges), env.parent_ptr)


def random_bundle(env, objective, seed=0, scale=0.7):
    rng = np.random.default_rng(seed)
    bundle = make_bundle(env, objective, LrSpec(1e-3), LrSpec(1e-3))
    bundle.pb_logits[:] = scale * rng.standard_normal(env.num_edges)
    bundle.pb_target[:] = scale * rng.standard_normal(env.num_edges)
    if bundle.pf_logits is not None:
        bundle.pf_logits[:] = scale * rng.standard_normal(env.num_edges)
    if bundle.q is not None:
        bundle.q[:] = scale * rng.standard_normal(env.num_edges)
        bundle.q_target[:] = scale * rng.standard_normal(env.num_edges)
    if bundle.log_flow is not None:
        bundle.log_flow[:] = scale * rng.standard_normal(env.num_states)
    if bundle.log_z is not None:
        bundle.log_z[()] = scale * rng.standard_normal()
    return bundle


def finite_difference(f, param, h=1e-5):
    """Central differences of scalar f() w.r.t. the in-place mutable param."""
    flat = param.reshape(-1)
    out = np.zeros_like(flat)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        out[i] = (up - down) / (2.0 * h)
    return out.reshape(param.shape)


def max_rel_err(analytic, numeric):
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
    return float(np.abs(analytic - numeric).max() / scale)
