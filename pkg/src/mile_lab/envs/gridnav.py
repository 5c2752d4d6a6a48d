"""GridNav: a deterministic gridworld with walls, hazards, and a single goal.

Maps are written as ASCII blocks (``#`` wall, ``G`` goal, ``H`` hazard,
``S`` fixed start, ``.`` free). The true Q-function is obtained by value
iteration, which makes the Boltzmann expert exact.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .base import FrameStack, StepResult, as_rng

ACTIONS = ("up", "down", "left", "right", "stay")
ACTION_DELTAS = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))
N_ACTIONS = len(ACTIONS)

DEFAULT_MAP = """
S . . . . . . .
. # # . # # . .
. # . . . # H .
. # . # . . . .
. . . # H # . .
# # . # . . # .
. . . . . # . .
. H # . . . . G
"""


@dataclass(frozen=True)
class GridNavSpec:
    width: int
    height: int
    walls: frozenset
    hazards: frozenset
    goal: tuple[int, int]
    start: tuple[int, int] | None = None  # None: uniform over free cells
    horizon: int = 64
    gamma: float = 0.95
    step_reward: float = -0.01
    goal_reward: float = 1.0
    hazard_reward: float = -1.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.goal in self.walls or self.goal in self.hazards:
            raise ValueError("goal cell collides with a wall or hazard")
        if self.start is not None and (
            self.start in self.walls or self.start in self.hazards or self.start == self.goal
        ):
            raise ValueError("start cell must be free")
        unreachable = self._unreachable_free_cells()
        if unreachable:
            raise ValueError(f"goal not reachable from free cells {sorted(unreachable)}")

    # -- geometry ------------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def index(self, cell: tuple[int, int]) -> int:
        return cell[0] * self.width + cell[1]

    def cell(self, index: int) -> tuple[int, int]:
        return divmod(index, self.width)

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def is_free(self, cell: tuple[int, int]) -> bool:
        return (
            self.in_bounds(cell)
            and cell not in self.walls
            and cell not in self.hazards
            and cell != self.goal
        )

    def free_cells(self) -> list[tuple[int, int]]:
        return [
            (r, c)
            for r in range(self.height)
            for c in range(self.width)
            if self.is_free((r, c))
        ]

    def next_cell(self, cell: tuple[int, int], action: int) -> tuple[int, int]:
        dr, dc = ACTION_DELTAS[action]
        nxt = (cell[0] + dr, cell[1] + dc)
        if not self.in_bounds(nxt) or nxt in self.walls:
            return cell
        return nxt

    def _unreachable_free_cells(self) -> set:
        # BFS backwards from the goal through non-wall, non-hazard cells.
        seen = {self.goal}
        frontier = deque([self.goal])
        while frontier:
            cell = frontier.popleft()
            for dr, dc in ACTION_DELTAS[:4]:
                prev = (cell[0] - dr, cell[1] - dc)
                if self.in_bounds(prev) and prev not in self.walls and prev not in self.hazards:
                    if prev not in seen:
                        seen.add(prev)
                        frontier.append(prev)
        return {c for c in self.free_cells() if c not in seen}

    # -- ascii ----------------------------------------------------------------

    @staticmethod
    def from_ascii(text: str, **overrides) -> "GridNavSpec":
        rows = [line.split() for line in text.strip().splitlines()]
        if not rows or any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("map rows must be non-empty and equal length")
        walls, hazards = set(), set()
        goal = start = None
        for r, row in enumerate(rows):
            for c, ch in enumerate(row):
                if ch == "#":
                    walls.add((r, c))
                elif ch == "H":
                    hazards.add((r, c))
                elif ch == "G":
                    if goal is not None:
                        raise ValueError("map must contain exactly one goal")
                    goal = (r, c)
                elif ch == "S":
                    start = (r, c)
                elif ch != ".":
                    raise ValueError(f"unknown map symbol {ch!r} at {(r, c)}")
        if goal is None:
            raise ValueError("map must contain exactly one goal")
        return GridNavSpec(
            width=len(rows[0]),
            height=len(rows),
            walls=frozenset(walls),
            hazards=frozenset(hazards),
            goal=goal,
            start=start,
            **overrides,
        )

    def to_ascii(self) -> str:
        rows = []
        for r in range(self.height):
            row = []
            for c in range(self.width):
                cell = (r, c)
                if cell in self.walls:
                    row.append("#")
                elif cell in self.hazards:
                    row.append("H")
                elif cell == self.goal:
                    row.append("G")
                elif cell == self.start:
                    row.append("S")
                else:
                    row.append(".")
            rows.append(" ".join(row))
        return "\n".join(rows)

    @staticmethod
    def default(**overrides) -> "GridNavSpec":
        return GridNavSpec.from_ascii(DEFAULT_MAP, **overrides)


class GridNavEnv:
    """Deterministic transitions; episode ends at goal, hazard, or horizon."""

    action_kind = "discrete"

    def __init__(self, spec: GridNavSpec):
        self.spec = spec
        self.n_actions = N_ACTIONS
        self.raw_dim = spec.n_cells
        self.obs_dim = 4 * self.raw_dim
        self._stack = FrameStack(self.raw_dim)
        self._cell: tuple[int, int] | None = None
        self._t = 0
        self._done = True

    def _raw(self) -> np.ndarray:
        onehot = np.zeros(self.raw_dim, dtype=np.float64)
        onehot[self.spec.index(self._cell)] = 1.0
        return onehot

    def reset(self, seed_or_rng=None) -> np.ndarray:
        rng = as_rng(seed_or_rng)
        if self.spec.start is not None:
            self._cell = self.spec.start
        else:
            free = self.spec.free_cells()
            self._cell = free[int(rng.integers(len(free)))]
        self._t = 0
        self._done = False
        return self._stack.reset(self._raw())

    def step(self, action: int) -> StepResult:
        if self._done:
            raise RuntimeError("step() called on a finished episode")
        action = int(action)
        if not 0 <= action < N_ACTIONS:
            raise ValueError(f"action {action} outside {{0..{N_ACTIONS - 1}}}")
        nxt = self.spec.next_cell(self._cell, action)
        self._cell = nxt
        self._t += 1
        success = nxt == self.spec.goal
        hazard = nxt in self.spec.hazards
        reward = (
            self.spec.goal_reward
            if success
            else self.spec.hazard_reward
            if hazard
            else self.spec.step_reward
        )
        self._done = success or hazard or self._t >= self.spec.horizon
        obs = self._stack.push(self._raw())
        return StepResult(obs, reward, self._done, success, {"cell": nxt})

    @property
    def cell(self) -> tuple[int, int]:
        return self._cell

    @property
    def t(self) -> int:
        return self._t

    def cell_index_from_obs(self, obs: np.ndarray) -> int:
        """Recover the current cell from the newest frame of a stacked observation."""
        return int(np.argmax(obs[: self.raw_dim]))


# -- exact Q-function ---------------------------------------------------------


@dataclass
class QTable:
    """Optimal Q-values per (cell index, action); terminal cells hold zeros."""

    q: np.ndarray
    gamma: float
    spec: GridNavSpec = field(repr=False)

    def residual(self) -> float:
        return _bellman_residual(self.spec, self.q, self.gamma)

    def greedy(self, cell_index: int) -> int:
        return int(np.argmax(self.q[cell_index]))


def _transition_tables(spec: GridNavSpec):
    n = spec.n_cells
    nxt = np.zeros((n, N_ACTIONS), dtype=np.intp)
    rew = np.full((n, N_ACTIONS), spec.step_reward, dtype=np.float64)
    terminal = np.zeros(n, dtype=bool)
    actable = np.zeros(n, dtype=bool)
    for idx in range(n):
        cell = spec.cell(idx)
        if cell in spec.walls:
            nxt[idx] = idx
            continue
        if cell == spec.goal or cell in spec.hazards:
            terminal[idx] = True
            nxt[idx] = idx
            continue
        actable[idx] = True
        for a in range(N_ACTIONS):
            ncell = spec.next_cell(cell, a)
            nxt[idx, a] = spec.index(ncell)
            if ncell == spec.goal:
                rew[idx, a] = spec.goal_reward
            elif ncell in spec.hazards:
                rew[idx, a] = spec.hazard_reward
    return nxt, rew, terminal, actable


def _bellman_residual(spec: GridNavSpec, q: np.ndarray, gamma: float) -> float:
    nxt, rew, terminal, actable = _transition_tables(spec)
    v = np.where(terminal, 0.0, q.max(axis=1))
    tq = rew + gamma * v[nxt]
    return float(np.max(np.abs(q[actable] - tq[actable])))


def value_iteration(
    spec: GridNavSpec,
    gamma: float | None = None,
    tol: float = 1e-10,
    max_iters: int = 200_000,
) -> QTable:
    """Solve the grid MDP exactly; raises if the residual fails to converge."""
    gamma = spec.gamma if gamma is None else gamma
    nxt, rew, terminal, actable = _transition_tables(spec)
    q = np.zeros((spec.n_cells, N_ACTIONS), dtype=np.float64)
    for _ in range(max_iters):
        v = np.where(terminal, 0.0, q.max(axis=1))
        tq = rew + gamma * v[nxt]
        tq[~actable] = 0.0
        delta = np.max(np.abs(tq - q))
        q = tq
        if delta < tol:
            return QTable(q=q, gamma=gamma, spec=spec)
    raise RuntimeError(f"value iteration did not converge below {tol} in {max_iters} sweeps")
