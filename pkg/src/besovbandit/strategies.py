"""Sequential query strategies behind one ``next_query(trace, rng)`` interface."""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque

import numpy as np

__all__ = [
    "Trace",
    "Strategy",
    "RandomSearch",
    "GridExploreCommit",
    "DOO",
    "UCBDiscretization",
    "SimpleFromCumulative",
    "random_search",
    "grid_explore_commit",
    "doo_optimize",
    "ucb_discretization",
    "simple_from_cumulative",
    "lattice_centers",
]


class Trace:
    """Queries and observations of one episode, stored in preallocated arrays."""

    def __init__(self, T: int, dim: int, seed=None, description: str = ""):
        self.T = int(T)
        self.dim = int(dim)
        self.seed = seed
        self.description = description
        self._x = np.empty((self.T, self.dim))
        self._y = np.empty(self.T)
        self._n = 0

    def __len__(self) -> int:
        return self._n

    @property
    def x(self) -> np.ndarray:
        return self._x[: self._n]

    @property
    def y(self) -> np.ndarray:
        return self._y[: self._n]

    def append(self, x, y: float) -> None:
        if self._n >= self.T:
            raise IndexError(f"trace already holds T = {self.T} rounds")
        self._x[self._n] = x
        self._y[self._n] = y
        self._n += 1

    def rows(self):
        """(t, x, y) with t starting at 1."""
        for t in range(self._n):
            yield t + 1, self._x[t].copy(), float(self._y[t])


def lattice_centers(n: int, dim: int) -> np.ndarray:
    """Centers of the n^d uniform lattice cells in row-major order."""
    axis = (np.arange(n) + 0.5) / n
    return np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)


class Strategy:
    """Base class.  Subclasses keep per-episode state and read new
    observations from the trace they are handed."""

    name = "strategy"
    requires_noiseless = False

    def __init__(self, dim: int = 1, horizon_hint: int | None = None):
        self.dim = int(dim)
        self.horizon_hint = horizon_hint

    @property
    def params(self) -> dict:
        return {}

    def describe(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}({inner})"

    def next_query(self, trace: Trace, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


class RandomSearch(Strategy):
    name = "random_search"

    def next_query(self, trace, rng):
        return rng.random(self.dim)


class GridExploreCommit(Strategy):
    """Lattice exploration for T-1 rounds, then one commit query at the best
    piecewise-constant estimate.  In noisy mode the lattice is coarsened so
    each point gets about ceil(log T) visits (round-robin) and the commit uses
    the per-point average."""

    name = "grid_explore_commit"

    def __init__(self, T: int, dim: int = 1, noisy: bool = False):
        if T < 2:
            raise ValueError("grid_explore_commit needs T >= 2")
        super().__init__(dim, T)
        self.T = T
        self.noisy = noisy
        budget = T - 1
        if noisy:
            self.repeats = max(1, math.ceil(math.log(T)))
            n = max(1, int(math.floor((budget / self.repeats) ** (1.0 / dim) + 1e-9)))
            self.points = lattice_centers(n, dim)
        else:
            self.repeats = 1
            n = max(1, math.ceil(budget ** (1.0 / dim) - 1e-9))
            self.points = lattice_centers(n, dim)[:budget]
        self._sums = np.zeros(len(self.points))
        self._counts = np.zeros(len(self.points), dtype=np.int64)
        self._seen = 0

    @property
    def params(self):
        return {"T": self.T, "noisy": self.noisy}

    def _ingest(self, trace):
        while self._seen < len(trace) and self._seen < self.T - 1:
            k = self._seen % len(self.points)
            self._sums[k] += trace.y[self._seen]
            self._counts[k] += 1
            self._seen += 1

    def commit_point(self) -> np.ndarray:
        visited = self._counts > 0
        means = np.full(len(self.points), -np.inf)
        means[visited] = self._sums[visited] / self._counts[visited]
        return self.points[int(np.argmax(means))].copy()

    def next_query(self, trace, rng):
        t = len(trace)
        if t < self.T - 1:
            return self.points[t % len(self.points)].copy()
        self._ingest(trace)
        return self.commit_point()


class DOO(Strategy):
    """Deterministic optimistic optimization over the dyadic cell tree.

    A leaf's optimistic value is y(center) + L * (diam/2)^s.  Each round pops
    the leaf with the largest value (earliest-created on ties) and queries the
    centers of its 2^d children.
    """

    name = "doo"
    requires_noiseless = True
    # below this cell side, centers are no longer distinct doubles
    max_depth = 50

    def __init__(self, holder_s: float, holder_L: float, dim: int = 1):
        if not 0.0 < holder_s <= 1.0:
            raise ValueError(f"holder_s must lie in (0, 1], got {holder_s}")
        super().__init__(dim)
        self.s = holder_s
        self.L = holder_L
        self._heap: list = []
        self._counter = itertools.count()
        self._pending: deque = deque()
        self._awaiting = None
        self._seen = 0
        self._started = False
        self._offsets = np.array(list(itertools.product((0, 1), repeat=dim)), dtype=np.int64)
        self.expanded: list = []

    @property
    def params(self):
        return {"holder_s": self.s, "holder_L": self.L}

    def bonus(self, depth: int) -> float:
        diam = math.sqrt(self.dim) * 2.0**-depth
        return self.L * (diam / 2.0) ** self.s

    def _center(self, depth, cell):
        side = 2.0**-depth
        return np.array([(c + 0.5) * side for c in cell])

    def leaves(self):
        """Current leaves as (lower corner, upper corner, b-value, observed y)."""
        out = []
        for neg_b, _, depth, cell, y in self._heap:
            lo = np.asarray(cell, dtype=float) * 2.0**-depth
            out.append((lo, lo + 2.0**-depth, -neg_b, y))
        return out

    def _push(self, depth, cell, y):
        b = y + self.bonus(depth)
        heapq.heappush(self._heap, (-b, next(self._counter), depth, cell, y))

    def next_query(self, trace, rng):
        if self._awaiting is not None:
            if len(trace) != self._seen + 1:
                raise RuntimeError("DOO expects exactly one new observation per query")
            self._push(*self._awaiting, float(trace.y[-1]))
            self._awaiting = None
            self._seen += 1
        if not self._pending:
            if not self._started:
                self._started = True
                self._pending.append((0, (0,) * self.dim))
            else:
                _, _, depth, cell, _ = heapq.heappop(self._heap)
                if depth >= self.max_depth:
                    # resolution floor: re-query the leaf instead of splitting it
                    self._pending.append((depth, cell))
                else:
                    self.expanded.append((depth, cell))
                    base = [2 * c for c in cell]
                    for off in self._offsets.tolist():
                        self._pending.append((depth + 1, tuple(b + o for b, o in zip(base, off))))
        depth, cell = self._pending.popleft()
        self._awaiting = (depth, cell)
        return self._center(depth, cell)


class UCBDiscretization(Strategy):
    """UCB over K = n^d lattice arms, n = ceil((c T / log T)^{1/(2s+d)}).

    The default constant c = (L / eta)^2 comes from balancing the
    discretization bias T L n^-s against the UCB regret eta sqrt(K T log T);
    ``arms_constant`` overrides it and ``arms_per_axis`` fixes n outright.
    """

    name = "ucb_discretization"

    def __init__(
        self,
        holder_s: float,
        eta: float,
        T: int,
        dim: int = 1,
        exploration: float = 1.0,
        arms_per_axis: int | None = None,
        holder_L: float = 1.0,
        arms_constant: float | None = None,
    ):
        if not 0.0 < holder_s <= 1.0:
            raise ValueError(f"holder_s must lie in (0, 1], got {holder_s}")
        if not eta > 0:
            raise ValueError("ucb_discretization needs eta > 0")
        super().__init__(dim, T)
        self.s, self.eta, self.T, self.exploration = holder_s, eta, T, exploration
        self.L = holder_L
        self.arms_constant = (holder_L / eta) ** 2 if arms_constant is None else float(arms_constant)
        if arms_per_axis is None:
            base = self.arms_constant * (T / math.log(T) if T > 1 else 1.0)
            arms_per_axis = max(1, math.ceil(base ** (1.0 / (2.0 * holder_s + dim)) - 1e-9))
        self.arms = lattice_centers(int(arms_per_axis), dim)
        self.K = len(self.arms)
        if T < self.K:
            raise ValueError(f"horizon T = {T} is smaller than the number of arms K = {self.K}")
        self._sums = np.zeros(self.K)
        self._counts = np.zeros(self.K, dtype=np.int64)
        self._last = None
        self._log_t = math.log(T) if T > 1 else 0.0

    @property
    def params(self):
        return {"holder_s": self.s, "eta": self.eta, "T": self.T, "K": self.K}

    def next_query(self, trace, rng):
        if self._last is not None:
            self._sums[self._last] += trace.y[-1]
            self._counts[self._last] += 1
        t = len(trace)
        if t < self.K:
            arm = t
        else:
            index = self._sums / self._counts + self.exploration * self.eta * np.sqrt(
                2.0 * self._log_t / self._counts
            )
            arm = int(np.argmax(index))
        self._last = arm
        return self.arms[arm].copy()


class SimpleFromCumulative(Strategy):
    """Runs ``base`` for T-1 rounds and repeats a uniformly chosen earlier query at T."""

    name = "simple_from_cumulative"

    def __init__(self, base: Strategy, T: int):
        if T < 2:
            raise ValueError("simple_from_cumulative needs T >= 2")
        super().__init__(base.dim, T)
        self.base, self.T = base, T
        self.requires_noiseless = base.requires_noiseless

    def describe(self):
        return f"{self.name}({self.base.describe()},T={self.T})"

    def next_query(self, trace, rng):
        if len(trace) < self.T - 1:
            return self.base.next_query(trace, rng)
        k = int(rng.integers(len(trace)))
        return trace.x[k].copy()


def random_search(dim: int = 1) -> RandomSearch:
    return RandomSearch(dim)


def grid_explore_commit(T: int, dim: int = 1, noisy: bool = False) -> GridExploreCommit:
    return GridExploreCommit(T, dim, noisy)


def doo_optimize(holder_s: float, holder_L: float, dim: int = 1) -> DOO:
    return DOO(holder_s, holder_L, dim)


def ucb_discretization(holder_s: float, eta: float, T: int, dim: int = 1, **kwargs) -> UCBDiscretization:
    return UCBDiscretization(holder_s, eta, T, dim, **kwargs)


def simple_from_cumulative(base: Strategy, T: int) -> SimpleFromCumulative:
    return SimpleFromCumulative(base, T)
