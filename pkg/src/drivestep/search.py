"""Anytime Repairing A* over the hybrid driving-stepping lattice."""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .costmap import INF, CostMap
from .errors import BudgetExhaustedError, NoPathError
from .neighbours import Manoeuvre, NeighbourGenerator, PlannerParams, StepLowerBound, heuristic
from .pose import RobotPose

log = logging.getLogger(__name__)

_CHECK_EVERY = 256


@dataclass
class AbstractPath:
    """Start-to-goal pose sequence; ``steps[i]`` is (pose, manoeuvre reaching it)."""

    steps: list
    cost: float
    weight: float
    bound: float
    expansions: int
    wall_ms: float
    iteration: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def poses(self) -> list[RobotPose]:
        return [p for p, _ in self.steps]

    @property
    def manoeuvres(self) -> list[Manoeuvre]:
        return [m for _, m in self.steps if m is not None]


class ARAStar:
    """Weighted A* searches with decreasing inflation that reuse earlier work.

    States already expanded in the current iteration whose cost improves are
    parked in an inconsistent set and re-queued for the next iteration, as in
    Likhachev et al.'s ARA*.
    """

    def __init__(self, successors: Callable[[RobotPose], list], start: RobotPose, goal: RobotPose,
                 h: Callable[[RobotPose], float]):
        self.successors = successors
        self.start = start
        self.goal = goal
        self._h = h
        self._hcache = {}
        self.g = {start: 0.0}
        self.parent = {start: None}
        self.closed = set()
        self.incons = set()
        self.open = {start: None}
        self._heap = []
        self._seq = 0
        self.expansions = 0

    def h(self, s):
        v = self._hcache.get(s)
        if v is None:
            v = self._hcache[s] = self._h(s)
        return v

    def _push(self, s, key):
        self._seq += 1
        self.open[s] = key
        # negative sequence: equal keys pop last-in first-out
        heapq.heappush(self._heap, (key, -self._seq, s))

    def _rekey(self, w):
        self._heap = []
        for s in list(self.open) + [s for s in self.incons if s not in self.open]:
            self._push(s, self.g[s] + w * self.h(s))
        self.incons = set()
        self.closed = set()

    def improve(self, w: float, deadline: float | None = None) -> bool:
        """Run one weighted search; False when the deadline hit first."""
        self._rekey(w)
        heap = self._heap
        g = self.g
        open_ = self.open
        closed = self.closed
        goal = self.goal
        count = 0
        while heap:
            key, _, s = heap[0]
            if open_.get(s) != key:
                heapq.heappop(heap)
                continue
            if g.get(goal, INF) <= key:
                break
            heapq.heappop(heap)
            del open_[s]
            closed.add(s)
            self.expansions += 1
            count += 1
            if deadline is not None and count % _CHECK_EVERY == 0 and time.perf_counter() > deadline:
                return False
            gs = g[s]
            for m in self.successors(s):
                t = m.end
                ng = gs + m.cost
                if ng < g.get(t, INF):
                    g[t] = ng
                    self.parent[t] = (s, m)
                    if t in closed:
                        self.incons.add(t)
                    else:
                        self._push(t, ng + w * self.h(t))
        return True

    def min_unweighted_f(self) -> float:
        best = INF
        for s in list(self.open) + list(self.incons):
            best = min(best, self.g[s] + self.h(s))
        return best

    def path(self):
        if self.goal not in self.g:
            return None
        steps = []
        s = self.goal
        while s is not None:
            link = self.parent[s]
            steps.append((s, link[1] if link else None))
            s = link[0] if link else None
        steps.reverse()
        return steps


def plan(costmap: CostMap, start: RobotPose, goal: RobotPose, params: PlannerParams | None = None,
         time_budget: float | None = None, generator: NeighbourGenerator | None = None,
         weights: list | None = None) -> Iterator[AbstractPath]:
    """Yield an improved path after every ARA* iteration.

    Iterations run down the heuristic weight schedule until weight 1 or until
    ``time_budget`` seconds pass; an interrupted iteration yields nothing.
    Reported costs are plain (uninflated) path costs.
    """
    params = params or PlannerParams()
    gen = generator or NeighbourGenerator(costmap, params)
    if costmap.pose_cost(start) == INF:
        raise NoPathError("start pose is untraversable")
    if costmap.pose_cost(goal) == INF or not costmap.frame.is_neutral(goal):
        raise NoPathError("goal pose is untraversable")
    res = costmap.resolution
    stepping = StepLowerBound(costmap, goal, params) if params.stepping else None
    if stepping is None:
        search = ARAStar(gen, start, goal, lambda s: heuristic(s, goal, params, res))
    else:
        search = ARAStar(gen, start, goal, lambda s: heuristic(s, goal, params, res) + stepping(s))
    t0 = time.perf_counter()
    deadline = None if time_budget is None else t0 + time_budget
    found = False
    best = None
    for i, w in enumerate(weights or params.weights()):
        it0 = time.perf_counter()
        before = search.expansions
        finished = search.improve(w, deadline)
        if not finished:
            if not found:
                raise BudgetExhaustedError(f"no solution within {time_budget} s")
            log.info("budget exhausted during weight %.3f", w)
            return
        steps = search.path()
        if steps is None:
            raise NoPathError("goal unreachable over finite-cost manoeuvres")
        # parents can improve after g(goal) was set, so the path may beat g(goal)
        cost = path_cost(steps)
        if found and cost > best[1]:
            steps, cost = best
        best = (steps, cost)
        found = True
        lower = search.min_unweighted_f()
        bound = min(w, cost / lower) if lower > 0 and lower < INF else w
        elapsed = (time.perf_counter() - it0) * 1000.0
        log.info("w=%.4f cost=%.6f expansions=%d %.1f ms", w, cost, search.expansions - before, elapsed)
        yield AbstractPath(steps, cost, w, float(max(bound, 1.0)), search.expansions - before, elapsed, i,
                           {"total_expansions": search.expansions,
                            "elapsed_ms": (time.perf_counter() - t0) * 1000.0})
        if deadline is not None and time.perf_counter() > deadline:
            return


def plan_final(costmap, start, goal, params=None, time_budget=None, generator=None, weights=None):
    """Run the anytime planner to completion and return every iteration."""
    return list(plan(costmap, start, goal, params, time_budget, generator, weights))


def path_cost(steps) -> float:
    return math.fsum(m.cost for _, m in steps if m is not None)
