"""DAG environments: hypergrid, bit sequences, and hand-built micro graphs.

Every environment is frozen after construction and exposes the same flat
CSR adjacency layout, so policies, kernels and oracles treat all of them
uniformly:

* ``child_ptr/child_idx``  -- forward edges, one row per state, rows ordered
  by the environment's action contract (stop/exit action first, then
  coordinate/slot order).
* ``parent_ptr/parent_idx`` -- backward edges, parents listed in ascending
  source-state order.
* ``fwd2bwd/bwd2fwd``      -- slot maps between the two layouts for the same
  physical edge.

State indices are dense and topologically sorted (every edge goes from a
lower to a higher index), which makes the unique root always state 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

DEFAULT_STATE_CAP = 10**6
DEFAULT_TRAJ_CAP = 10**7


class CapExceeded(RuntimeError):
    """An enumeration guard tripped (too many states or trajectories)."""


class InvalidEdge(ValueError):
    """Queried a (state, state) pair that is not an edge of the DAG."""


class DagEnv:
    """Immutable rooted DAG with rewards on terminal states."""

    def __init__(self, children: Sequence[Sequence[int]], log_reward: dict[int, float],
                 info: dict | None = None):
        n = len(children)
        counts = np.fromiter((len(c) for c in children), dtype=np.int64, count=n)
        self.num_states = n
        self.child_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=self.child_ptr[1:])
        self.child_idx = np.fromiter(
            (c for row in children for c in row), dtype=np.int64, count=int(self.child_ptr[-1]))
        self.num_edges = int(self.child_ptr[-1])

        src = np.repeat(np.arange(n, dtype=np.int64), counts)
        if np.any(self.child_idx <= src):
            raise ValueError("edges must go from lower to higher state index (topological order)")
        if np.any(self.child_idx >= n):
            raise ValueError("edge endpoint out of range")

        # Backward CSR: edges grouped by destination, parents in ascending source order.
        order = np.lexsort((src, self.child_idx))
        self.parent_idx = src[order]
        in_counts = np.bincount(self.child_idx, minlength=n).astype(np.int64)
        self.parent_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(in_counts, out=self.parent_ptr[1:])
        self.bwd2fwd = order.astype(np.int64)
        self.fwd2bwd = np.empty_like(self.bwd2fwd)
        self.fwd2bwd[order] = np.arange(self.num_edges, dtype=np.int64)

        roots = np.flatnonzero(in_counts == 0)
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root state, found {len(roots)}")
        if roots[0] != 0:
            raise ValueError("root must be state 0 under topological indexing")
        self.initial = 0

        self.is_terminal = counts == 0
        self.terminal_ids = np.flatnonzero(self.is_terminal).astype(np.int64)
        if self.is_terminal[self.initial]:
            raise ValueError("initial state cannot be terminal")
        missing = set(self.terminal_ids.tolist()) - set(log_reward)
        if missing:
            raise ValueError(f"log_reward missing for terminal states {sorted(missing)[:5]}")
        self.log_reward = np.zeros(n, dtype=np.float64)
        for s, lr in log_reward.items():
            if not self.is_terminal[s]:
                raise ValueError(f"log_reward given for non-terminal state {s}")
            if not math.isfinite(lr):
                raise ValueError(f"non-finite log_reward at terminal {s}")
            self.log_reward[s] = lr

        # Longest-path depth from the root; every edge strictly increases it,
        # so edges grouped by source level can be processed as one vector op.
        self.level = self._compute_levels()
        self.max_traj_len = int(self.level[self.terminal_ids].max())
        self.info = info or {}
        self._level_edge_groups: list[np.ndarray] | None = None
        self._edge_src: np.ndarray | None = None

        self.child_ptr.setflags(write=False)
        self.child_idx.setflags(write=False)
        self.parent_ptr.setflags(write=False)
        self.parent_idx.setflags(write=False)
        self.fwd2bwd.setflags(write=False)
        self.bwd2fwd.setflags(write=False)
        self.log_reward.setflags(write=False)

    def _compute_levels(self) -> np.ndarray:
        level = np.zeros(self.num_states, dtype=np.int64)
        # topological indexing => a single ascending sweep suffices
        for s in range(self.num_states):
            lo, hi = self.child_ptr[s], self.child_ptr[s + 1]
            if lo != hi:
                np.maximum.at(level, self.child_idx[lo:hi], level[s] + 1)
        return level

    # -- adjacency ---------------------------------------------------------

    def children(self, s: int) -> np.ndarray:
        return self.child_idx[self.child_ptr[s]:self.child_ptr[s + 1]]

    def parents(self, s: int) -> np.ndarray:
        return self.parent_idx[self.parent_ptr[s]:self.parent_ptr[s + 1]]

    def num_children(self, s: int) -> int:
        return int(self.child_ptr[s + 1] - self.child_ptr[s])

    def num_parents(self, s: int) -> int:
        return int(self.parent_ptr[s + 1] - self.parent_ptr[s])

    def forward_edge_id(self, s: int, sp: int) -> int:
        row = self.children(s)
        pos = np.flatnonzero(row == sp)
        if len(pos) == 0:
            raise InvalidEdge(f"no edge {s} -> {sp}")
        return int(self.child_ptr[s] + pos[0])

    def backward_edge_id(self, s: int, sp: int) -> int:
        """Slot of parent ``s`` in the backward row of ``sp``."""
        return int(self.fwd2bwd[self.forward_edge_id(s, sp)])

    def edge_sources(self) -> np.ndarray:
        if self._edge_src is None:
            counts = np.diff(self.child_ptr)
            self._edge_src = np.repeat(np.arange(self.num_states, dtype=np.int64), counts)
            self._edge_src.setflags(write=False)
        return self._edge_src

    def level_edge_groups(self) -> list[np.ndarray]:
        """Forward-edge ids grouped by source-state level (cached)."""
        if self._level_edge_groups is None:
            src = self.edge_sources()
            lv = self.level[src]
            groups = []
            for L in range(self.max_traj_len):
                groups.append(np.flatnonzero(lv == L).astype(np.int64))
            self._level_edge_groups = groups
        return self._level_edge_groups

    @property
    def num_terminals(self) -> int:
        return len(self.terminal_ids)

    def __repr__(self) -> str:
        kind = self.info.get("kind", "dag")
        return (f"DagEnv({kind}, states={self.num_states}, edges={self.num_edges}, "
                f"terminals={self.num_terminals})")


# -- trajectories ------------------------------------------------------------


@dataclass
class Trajectory:
    """One complete root-to-terminal path with optionally cached log-probs."""

    states: tuple[int, ...]
    edges: np.ndarray                      # forward edge ids, len(states) - 1
    log_pf_steps: np.ndarray | None = None # pure-policy forward log-probs
    log_pb_steps: np.ndarray | None = None
    log_reward: float | None = None

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def terminal(self) -> int:
        return self.states[-1]


class TrajectoryBatch:
    """Flat batch of complete trajectories (concatenated forward-edge ids)."""

    def __init__(self, env: DagEnv, edges: np.ndarray, ptr: np.ndarray):
        self.env = env
        self.edges = np.asarray(edges, dtype=np.int64)
        self.ptr = np.asarray(ptr, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.ptr) - 1

    def lengths(self) -> np.ndarray:
        return np.diff(self.ptr)

    def terminals(self) -> np.ndarray:
        return self.env.child_idx[self.edges[self.ptr[1:] - 1]]

    def states_of(self, k: int) -> tuple[int, ...]:
        e = self.edges[self.ptr[k]:self.ptr[k + 1]]
        return (self.env.initial, *self.env.child_idx[e].tolist())

    def __iter__(self) -> Iterator[Trajectory]:
        for k in range(len(self)):
            e = self.edges[self.ptr[k]:self.ptr[k + 1]]
            yield Trajectory(states=self.states_of(k), edges=e)

    @classmethod
    def from_state_lists(cls, env: DagEnv, paths: Sequence[Sequence[int]]) -> "TrajectoryBatch":
        edges, ptr = [], [0]
        for path in paths:
            for a, b in zip(path[:-1], path[1:]):
                edges.append(env.forward_edge_id(a, b))
            ptr.append(len(edges))
        return cls(env, np.asarray(edges, dtype=np.int64), np.asarray(ptr, dtype=np.int64))


def path_counts(env: DagEnv) -> list[int]:
    """Exact number of root-to-s paths per state (arbitrary-precision ints)."""
    n = [0] * env.num_states
    n[env.initial] = 1
    for s in range(env.num_states):
        if n[s]:
            for c in env.children(s):
                n[c] += n[s]
    return n


def total_trajectories(env: DagEnv) -> int:
    n = path_counts(env)
    return sum(n[t] for t in env.terminal_ids)


def enumerate_trajectories(env: DagEnv, cap: int = DEFAULT_TRAJ_CAP) -> TrajectoryBatch:
    """All complete trajectories in deterministic DFS (action-order) order."""
    total = total_trajectories(env)
    if total > cap:
        raise CapExceeded(f"{total} complete trajectories exceeds cap {cap}")
    out_edges: list[int] = []
    ptr = [0]
    stack: list[int] = []

    def dfs(s: int) -> None:
        if env.is_terminal[s]:
            out_edges.extend(stack)
            ptr.append(len(out_edges))
            return
        for j in range(env.child_ptr[s], env.child_ptr[s + 1]):
            stack.append(j)
            dfs(int(env.child_idx[j]))
            stack.pop()

    import sys
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, env.max_traj_len + 100))
    try:
        dfs(env.initial)
    finally:
        sys.setrecursionlimit(old)
    edges = np.asarray(out_edges, dtype=np.int64)
    return TrajectoryBatch(env, edges, np.asarray(ptr, dtype=np.int64))


# -- hypergrid ---------------------------------------------------------------


@dataclass(frozen=True)
class HypergridSpec:
    dims: int = 2
    side: int = 8
    r0: float = 1e-3
    r1: float = 0.5
    r2: float = 2.0

    def __post_init__(self):
        if self.dims < 1 or self.side < 2:
            raise ValueError("hypergrid needs dims >= 1 and side >= 2")


def hypergrid_reward(coords: np.ndarray, spec: HypergridSpec) -> np.ndarray:
    """Reward for an (m, dims) array of grid coordinates."""
    z = np.abs(coords / (spec.side - 1) - 0.5)
    band1 = np.all(z > 0.25, axis=-1)
    band2 = np.all((z > 0.3) & (z < 0.4), axis=-1)
    return spec.r0 + spec.r1 * band1 + spec.r2 * band2


def build_hypergrid(spec: HypergridSpec, state_cap: int = DEFAULT_STATE_CAP) -> DagEnv:
    """Grid cells plus one terminal copy per cell (reached by the exit action).

    Cell (s_1..s_d) has children [exit-copy, +e_1, ..., +e_d] restricted to
    the grid; rewards live only on the terminal copies.
    """
    d, H = spec.dims, spec.side
    n_cells = H**d
    if 2 * n_cells > state_cap:
        raise CapExceeded(f"hypergrid would need {2 * n_cells} states (cap {state_cap})")
    # mixed radix: coordinate i contributes s_i * H^i
    weights = H ** np.arange(d, dtype=np.int64)
    cells = np.arange(n_cells, dtype=np.int64)
    coords = (cells[:, None] // weights[None, :]) % H

    children: list[list[int]] = [[] for _ in range(2 * n_cells)]
    for c in range(n_cells):
        row = [n_cells + c]  # exit action first
        for i in range(d):
            if coords[c, i] < H - 1:
                row.append(int(c + weights[i]))
        children[c] = row
    log_r = {}
    rewards = hypergrid_reward(coords.astype(np.float64), spec)
    for c in range(n_cells):
        log_r[n_cells + c] = float(np.log(rewards[c]))
    info = {"kind": "hypergrid", "spec": spec, "coords": coords,
            "terminal_of_cell": np.arange(n_cells, dtype=np.int64) + n_cells}
    return DagEnv(children, log_r, info=info)


# -- bit sequences -----------------------------------------------------------


@dataclass(frozen=True)
class BitSeqSpec:
    length: int = 12
    block: int = 3
    num_modes: int = 8
    mode_distance: int = 3
    h_set: tuple[str, ...] = ("000", "111", "110", "011")

    def __post_init__(self):
        if self.length % self.block != 0:
            raise ValueError(f"block {self.block} does not divide length {self.length}")
        for w in self.h_set:
            if len(w) != self.block or set(w) - {"0", "1"}:
                raise ValueError(f"h_set word {w!r} is not a {self.block}-bit string")

    @property
    def num_slots(self) -> int:
        return self.length // self.block


def _hamming(a: int, b: int) -> int:
    return (a ^ b).bit_count()


def build_bitseq(spec: BitSeqSpec, rng_seed: int = 0,
                 state_cap: int = DEFAULT_STATE_CAP) -> tuple[DagEnv, list[int]]:
    """Fill-any-empty-slot sequence DAG plus its sampled mode set.

    States are sequences of ``length/block`` slots, each empty or one of the
    2^block words; an action writes a word into any empty slot, so distinct
    fill orders merge (non-tree DAG). Terminal reward is
    exp(-2 * min Hamming distance to the mode set), where each mode
    concatenates ``num_slots`` draws from ``h_set`` (re-drawn until the modes
    are pairwise distinct). Bit slot j occupies bits [block*j, block*(j+1)).
    """
    k, m = spec.block, spec.num_slots
    W = 2**k          # words per slot
    B = W + 1         # slot radix (0 = empty)
    n_states = B**m
    if n_states > state_cap:
        raise CapExceeded(f"bitseq would need {n_states} states (cap {state_cap})")

    rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed), 0xB175]))
    h_words = [int(w, 2) for w in spec.h_set]
    modes: list[int] = []
    while len(modes) < spec.num_modes:
        draws = rng.integers(0, len(h_words), size=m)
        bits = 0
        for j, di in enumerate(draws):
            bits |= h_words[di] << (k * j)
        if bits not in modes:
            modes.append(bits)

    radix = B ** np.arange(m, dtype=np.int64)
    children: list[list[int]] = []
    term_bits: dict[int, int] = {}
    for s in range(n_states):
        digits = (s // radix) % B
        row: list[int] = []
        for j in range(m):          # slot order, then word order
            if digits[j] == 0:
                base = s + radix[j]
                row.extend(range(int(base), int(base + W * radix[j]), int(radix[j])))
        children.append(row)
        if not row:
            bits = 0
            for j in range(m):
                bits |= int(digits[j] - 1) << (k * j)
            term_bits[s] = bits

    mode_arr = np.asarray(modes, dtype=np.int64)
    log_r = {}
    for s, bits in term_bits.items():
        dmin = min(_hamming(bits, mo) for mo in modes)
        log_r[s] = -2.0 * dmin
    terminal_ids = np.asarray(sorted(term_bits), dtype=np.int64)
    bits_arr = np.asarray([term_bits[t] for t in terminal_ids], dtype=np.int64)
    info = {"kind": "bitseq", "spec": spec, "modes": mode_arr,
            "terminal_bits": bits_arr, "terminal_ids_sorted": terminal_ids}
    return DagEnv(children, log_r, info=info), modes


# -- micro fixtures ----------------------------------------------------------


def parse_edge_list(text: str) -> list[tuple[int, int]]:
    """Plain-text custom DAGs: one ``u v`` pair per line, '#' comments."""
    edges = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"expected 'u v' pair, got {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return edges


def _toposort_relabel(edges: list[tuple[int, int]]) -> tuple[list[list[int]], dict[int, int]]:
    nodes = sorted({u for u, _ in edges} | {v for _, v in edges})
    adj = {u: [] for u in nodes}
    indeg = {u: 0 for u in nodes}
    for u, v in edges:
        adj[u].append(v)
        indeg[v] += 1
    roots = [u for u in nodes if indeg[u] == 0]
    if len(roots) != 1:
        raise ValueError(f"custom edge list must have exactly one root, found {len(roots)}")
    # Kahn's algorithm; stable order for determinism
    order, frontier = [], [roots[0]]
    indeg = dict(indeg)
    while frontier:
        u = frontier.pop(0)
        order.append(u)
        for v in adj[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                frontier.append(v)
        frontier.sort()
    if len(order) != len(nodes):
        raise ValueError("cycle detected in custom edge list")
    relabel = {u: i for i, u in enumerate(order)}
    children = [[] for _ in nodes]
    for u, v in edges:
        children[relabel[u]].append(relabel[v])
    for row in children:
        row.sort()
    return children, relabel


def build_micro(name: str, edges: list[tuple[int, int]] | None = None,
                rewards: dict[int, float] | None = None, chain_length: int = 3) -> DagEnv:
    """Small fixtures for oracle tests: 'diamond', 'chain', or 'custom'."""
    if name == "diamond":
        children = [[1, 2], [3], [3], []]
        return DagEnv(children, {3: math.log(2.0)}, info={"kind": "micro:diamond"})
    if name == "chain":
        if chain_length < 2:
            raise ValueError("chain needs at least 2 states")
        children = [[i + 1] for i in range(chain_length - 1)] + [[]]
        return DagEnv(children, {chain_length - 1: 0.0}, info={"kind": "micro:chain"})
    if name == "custom":
        if not edges:
            raise ValueError("custom micro env needs an edge list")
        children, relabel = _toposort_relabel(edges)
        terminal = [i for i, row in enumerate(children) if not row]
        log_r = {t: 0.0 for t in terminal}
        if rewards:
            inv = {v: k for k, v in relabel.items()}
            for t in terminal:
                if inv[t] in rewards:
                    log_r[t] = math.log(rewards[inv[t]])
        return DagEnv(children, log_r, info={"kind": "micro:custom", "relabel": relabel})
    raise ValueError(f"unknown micro env {name!r}")
