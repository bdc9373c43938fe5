"""Replay storage: prioritized transitions (DQN losses) and the FIFO
trajectory window used by the pessimistic backward approach."""

from __future__ import annotations

from collections import deque

import numpy as np

from .envs import TrajectoryBatch


class PrioritizedBuffer:
    """Ring buffer of transitions with proportional prioritized sampling.

    Transitions are forward-edge ids (an edge id encodes the (s, s') pair).
    Sampling is with replacement, probability ~ priority^alpha; importance
    weights are (N p_i)^(-beta) normalized by the batch maximum. Entries
    arrive at the current maximum priority and are re-prioritized to
    |TD error| (floored at 1e-8) after each loss evaluation. A linear scan
    is fine at desk scale; the interface permits a sum-tree drop-in.
    """

    PRIORITY_FLOOR = 1e-8

    def __init__(self, capacity: int, alpha: float = 0.5, beta: float = 0.0):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.alpha = alpha
        self.beta = beta
        self.edges = np.zeros(capacity, dtype=np.int64)
        self.priorities = np.zeros(capacity)
        self.size = 0
        self._next = 0

    def __len__(self) -> int:
        return self.size

    def push(self, trans_edges: np.ndarray) -> None:
        init = self.priorities[: self.size].max() if self.size else 1.0
        for e in np.asarray(trans_edges, dtype=np.int64):
            self.edges[self._next] = e
            self.priorities[self._next] = init
            self._next = (self._next + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)

    def push_batch(self, batch: TrajectoryBatch) -> None:
        self.push(batch.edges)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Returns (edges, importance_weights, indices)."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        scaled = self.priorities[: self.size] ** self.alpha
        probs = scaled / scaled.sum()
        idx = rng.choice(self.size, size=batch_size, replace=True, p=probs)
        if self.beta == 0.0:
            weights = np.ones(batch_size)
        else:
            weights = (self.size * probs[idx]) ** (-self.beta)
            weights /= weights.max()
        return self.edges[idx], weights, idx

    def update_priorities(self, indices: np.ndarray, td_errors: np.ndarray) -> None:
        indices = np.asarray(indices)
        if indices.size and (indices.min() < 0 or indices.max() >= self.size):
            raise IndexError("replay index out of range")
        self.priorities[indices] = np.abs(td_errors) + self.PRIORITY_FLOOR


def prb_push(buffer: PrioritizedBuffer, batch: TrajectoryBatch) -> None:
    buffer.push_batch(batch)


def prb_sample(buffer: PrioritizedBuffer, batch_size: int, rng: np.random.Generator):
    return buffer.sample(batch_size, rng)


def prb_update_priorities(buffer: PrioritizedBuffer, indices, td_errors) -> None:
    buffer.update_priorities(indices, td_errors)


class TrajectoryBuffer:
    """FIFO of per-iteration trajectory batches (last ``window`` iterations)."""

    def __init__(self, window: int):
        if window <= 0:
            raise ValueError("window must be positive")
        self.window = window
        self.slots: deque[TrajectoryBatch] = deque(maxlen=window)

    def __len__(self) -> int:
        return sum(len(b) for b in self.slots)

    def push(self, batch: TrajectoryBatch) -> None:
        self.slots.append(batch)

    def all_trajectories(self) -> TrajectoryBatch:
        env = self.slots[0].env
        edges = np.concatenate([b.edges for b in self.slots])
        lens = np.concatenate([b.lengths() for b in self.slots])
        ptr = np.zeros(len(lens) + 1, dtype=np.int64)
        np.cumsum(lens, out=ptr[1:])
        return TrajectoryBatch(env, edges, ptr)

    def sample(self, sample_size: int, rng: np.random.Generator) -> TrajectoryBatch:
        """Uniform without replacement; the whole buffer while it is small."""
        if not self.slots:
            raise ValueError("cannot sample from an empty trajectory buffer")
        pool = self.all_trajectories()
        n = len(pool)
        if n <= sample_size:
            return pool
        picked = np.sort(rng.choice(n, size=sample_size, replace=False))
        edges = [pool.edges[pool.ptr[k]:pool.ptr[k + 1]] for k in picked]
        ptr = np.zeros(sample_size + 1, dtype=np.int64)
        np.cumsum([len(e) for e in edges], out=ptr[1:])
        return TrajectoryBatch(pool.env, np.concatenate(edges), ptr)
