"""Evaluation metrics: L1 distances, correlations, Monte-Carlo marginal
estimates, and mode-discovery tracking."""

from __future__ import annotations

import numpy as np

from .envs import DagEnv
from .oracle import exact_marginal, log_z_exact


def target_distribution(env: DagEnv) -> np.ndarray:
    """R(x)/Z over terminals, indexed like ``env.terminal_ids``."""
    return np.exp(env.log_reward[env.terminal_ids] - log_z_exact(env))


def l1_exact(env: DagEnv, log_pf: np.ndarray) -> float:
    """Sum_x |P_theta(x) - R(x)/Z| using the exact marginal."""
    dist = exact_marginal(env, log_pf)
    return float(np.abs(dist.terminal_marginal - target_distribution(env)).sum())


class SampleWindow:
    """Ring of the most recent terminal states sampled during training."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._buf = np.zeros(capacity, dtype=np.int64)
        self._next = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, terminals: np.ndarray) -> None:
        for t in np.asarray(terminals, dtype=np.int64):
            self._buf[self._next] = t
            self._next = (self._next + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)

    def contents(self) -> np.ndarray:
        return self._buf[: self.size]


def l1_empirical(window: SampleWindow, env: DagEnv) -> float:
    """Sum_x |freq(x) - R(x)/Z| over the window's empirical distribution."""
    if len(window) == 0:
        raise ValueError("empty sample window")
    counts = np.bincount(window.contents(), minlength=env.num_states)
    freq = counts[env.terminal_ids] / len(window)
    return float(np.abs(freq - target_distribution(env)).sum())


def mc_ptheta(env: DagEnv, log_pf: np.ndarray, log_pb: np.ndarray, x: int,
              n_rollouts: int, rng: np.random.Generator) -> float:
    """Importance-sampled marginal P_theta(x) from backward rollouts.

    Averages PF(tau)/PB(tau|x) over ``n_rollouts`` backward walks from the
    terminal ``x``; unbiased for the exact marginal. Zero-probability
    backward edges would silently bias the estimate, so any visited parent
    row containing an exact zero raises instead.
    """
    if not env.is_terminal[x]:
        raise ValueError(f"state {x} is not terminal")
    pb = np.exp(log_pb)
    total = 0.0
    for _ in range(n_rollouts):
        s = x
        log_w = 0.0
        while s != env.initial:
            lo, hi = env.parent_ptr[s], env.parent_ptr[s + 1]
            row = pb[lo:hi]
            if np.any(row == 0.0):
                raise ValueError(f"zero-probability backward step at state {s}")
            u = rng.random()
            j = int(np.searchsorted(np.cumsum(row), u, side="right"))
            j = min(j, hi - lo - 1)
            b = lo + j
            e = env.bwd2fwd[b]
            log_w += log_pf[e] - log_pb[b]
            s = int(env.parent_idx[b])
        total += np.exp(log_w)
    return total / n_rollouts


def _rank_average(xs: np.ndarray) -> np.ndarray:
    """Average ranks (1-based), ties sharing the mean rank."""
    order = np.argsort(xs, kind="stable")
    ranks = np.empty(len(xs))
    sx = xs[order]
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def pearson(xs, ys) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two equal-length vectors of size >= 2")
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        raise ValueError("zero-variance input; correlation undefined")
    return float((xc * yc).sum() / denom)


def spearman(xs, ys) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two equal-length vectors of size >= 2")
    return pearson(_rank_average(xs), _rank_average(ys))


class ModeTracker:
    """Latching discovery flags for designated high-reward targets.

    Bitseq modes count as found when a sampled terminal is within Hamming
    distance ``delta``; hypergrid modes require the exact terminal state.
    """

    def __init__(self, env: DagEnv):
        info = env.info
        self.env = env
        self.kind = info.get("kind", "")
        if self.kind == "bitseq":
            self.mode_bits = np.asarray(info["modes"], dtype=np.int64)
            self.delta = int(info["spec"].mode_distance)
            self._bits_of = np.zeros(env.num_states, dtype=np.int64)
            self._bits_of[info["terminal_ids_sorted"]] = info["terminal_bits"]
            self.discovered = np.zeros(len(self.mode_bits), dtype=bool)
        elif self.kind == "hypergrid":
            spec = info["spec"]
            z = np.abs(info["coords"] / (spec.side - 1) - 0.5)
            hot = np.all((z > 0.3) & (z < 0.4), axis=-1)  # the R2-active cells
            self.mode_terminals = info["terminal_of_cell"][np.flatnonzero(hot)]
            self.discovered = np.zeros(len(self.mode_terminals), dtype=bool)
        else:
            self.discovered = np.zeros(0, dtype=bool)

    @property
    def num_modes(self) -> int:
        return len(self.discovered)

    @property
    def found(self) -> int:
        return int(self.discovered.sum())

    def update(self, terminals: np.ndarray) -> None:
        terminals = np.asarray(terminals, dtype=np.int64)
        if self.num_modes == 0 or len(terminals) == 0 or self.discovered.all():
            return
        if self.kind == "bitseq":
            bits = self._bits_of[terminals]
            pending = np.flatnonzero(~self.discovered)
            xor = bits[:, None] ^ self.mode_bits[None, pending]
            dist = np.zeros_like(xor)
            while xor.any():
                dist += xor & 1
                xor >>= 1
            hit = (dist <= self.delta).any(axis=0)
            self.discovered[pending[hit]] = True
        else:
            pending = np.flatnonzero(~self.discovered)
            hit = np.isin(self.mode_terminals[pending], terminals)
            self.discovered[pending[hit]] = True


def update_modes(tracker: ModeTracker, terminals) -> ModeTracker:
    tracker.update(np.atleast_1d(terminals))
    return tracker


def build_bitseq_testset(env: DagEnv, rng: np.random.Generator) -> np.ndarray:
    """|M| * n test terminals: each mode with i random bits flipped, 0 <= i < n.

    Deterministic given the generator state; i = 0 entries are the modes
    themselves.
    """
    info = env.info
    if info.get("kind") != "bitseq":
        raise ValueError("test set is defined for bitseq environments only")
    spec = info["spec"]
    n, k = spec.length, spec.block
    m = spec.num_slots
    radix = (2**k + 1) ** np.arange(m, dtype=np.int64)
    out = []
    for mode in info["modes"]:
        for i in range(n):
            bits = int(mode)
            for pos in rng.choice(n, size=i, replace=False):
                bits ^= 1 << int(pos)
            digits = [((bits >> (k * j)) & (2**k - 1)) + 1 for j in range(m)]
            out.append(int(np.sum(np.asarray(digits) * radix)))
    return np.asarray(out, dtype=np.int64)
