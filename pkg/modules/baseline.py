"""
TSP Baseline

Closed-tour oracle over the locations a route serves, used to measure how far
Q4RPD routes are from the shortest tour through the same stops.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import TooLarge
from .model import DEPOT_ID, ProblemInstance, TravelMatrix, build_travel_matrix
from .orchestrator import Q4rpdSolution

logger = logging.getLogger(__name__)

EXACT_MAX_NODES = 14
IMPROVEMENT_EPSILON = 1e-12


class TourMethod(Enum):
    """How a tour was obtained."""
    HELD_KARP = 'held_karp'
    TWO_OPT = 'two_opt'


@dataclass(frozen=True)
class TourResult:
    """Closed tour starting and ending at the start node."""
    order: Tuple[int, ...]
    length: float
    method: TourMethod


def _tour_length(order: Sequence[int], travel: TravelMatrix) -> float:
    return travel.path_length(order)


def _trivial_tour(nodes: Sequence[int], travel: TravelMatrix, start: int,
                  method: TourMethod) -> Optional[TourResult]:
    others = [n for n in nodes if n != start]
    if len(others) > 1:
        return None
    order = (start,) + tuple(others) + (start,)
    return TourResult(order, _tour_length(order, travel), method)


def tsp_exact(nodes: Sequence[int], travel: TravelMatrix, start: int = DEPOT_ID,
              max_nodes: int = EXACT_MAX_NODES) -> TourResult:
    """
    Optimal closed tour by Held-Karp dynamic programming.

    Args:
        nodes: Location ids to visit, including start
        travel: Matrix indexed by location id
        start: First and last node of the tour
        max_nodes: Largest node count accepted

    Returns:
        TourResult with the optimal order

    Raises:
        TooLarge: More nodes than max_nodes
    """
    nodes = list(dict.fromkeys(nodes))
    if start not in nodes:
        nodes.insert(0, start)
    if len(nodes) > max_nodes:
        raise TooLarge(f"{len(nodes)} nodes exceed the exact TSP limit of {max_nodes}")
    trivial = _trivial_tour(nodes, travel, start, TourMethod.HELD_KARP)
    if trivial:
        return trivial

    others = [n for n in nodes if n != start]
    count = len(others)
    dist = [[travel[a, b] for b in others] for a in others]
    from_start = [travel[start, b] for b in others]

    # cost[(mask, last)] = (length of the best path start -> mask ending at last, previous node)
    cost: Dict[Tuple[int, int], Tuple[float, int]] = {
        (1 << k, k): (from_start[k], -1) for k in range(count)
    }
    for mask in range(1, 1 << count):
        for last in range(count):
            if (mask, last) not in cost:
                continue
            length = cost[(mask, last)][0]
            for nxt in range(count):
                if mask >> nxt & 1:
                    continue
                key = (mask | 1 << nxt, nxt)
                candidate = length + dist[last][nxt]
                if key not in cost or candidate < cost[key][0]:
                    cost[key] = (candidate, last)

    full = (1 << count) - 1
    best_last, best_length = None, None
    for last in range(count):
        length = cost[(full, last)][0] + travel[others[last], start]
        if best_length is None or length < best_length:
            best_last, best_length = last, length

    order = []
    mask, last = full, best_last
    while last != -1:
        order.append(others[last])
        previous = cost[(mask, last)][1]
        mask ^= 1 << last
        last = previous
    tour = (start,) + tuple(reversed(order)) + (start,)
    return TourResult(tour, _tour_length(tour, travel), TourMethod.HELD_KARP)


def _nearest_neighbour(nodes: Sequence[int], travel: TravelMatrix, start: int,
                       rng: np.random.Generator) -> List[int]:
    unvisited = [n for n in nodes if n != start]
    tour = [start]
    while unvisited:
        here = tour[-1]
        closest = min(travel[here, n] for n in unvisited)
        ties = [n for n in unvisited if travel[here, n] == closest]
        chosen = ties[int(rng.integers(len(ties)))]
        tour.append(chosen)
        unvisited.remove(chosen)
    return tour + [start]


def tsp_2opt(nodes: Sequence[int], travel: TravelMatrix, start: int = DEPOT_ID, seed: int = 0,
             initial: Optional[Sequence[int]] = None) -> TourResult:
    """
    Nearest-neighbour tour improved by first-improvement 2-opt.

    Args:
        nodes: Location ids to visit, including start
        travel: Matrix indexed by location id
        start: First and last node of the tour
        seed: Tie-break seed for the construction
        initial: Closed tour to improve instead of the constructed one

    Returns:
        TourResult at a 2-opt local optimum
    """
    nodes = list(dict.fromkeys(nodes))
    if start not in nodes:
        nodes.insert(0, start)
    trivial = _trivial_tour(nodes, travel, start, TourMethod.TWO_OPT)
    if trivial:
        return trivial

    if initial is not None:
        tour = list(initial)
    else:
        tour = _nearest_neighbour(nodes, travel, start, np.random.default_rng(seed))
    improved = True
    while improved:
        improved = False
        for i in range(1, len(tour) - 2):
            for j in range(i + 1, len(tour) - 1):
                a, b, c, d = tour[i - 1], tour[i], tour[j], tour[j + 1]
                delta = travel[a, c] + travel[b, d] - travel[a, b] - travel[c, d]
                if delta < -IMPROVEMENT_EPSILON:
                    tour[i:j + 1] = reversed(tour[i:j + 1])
                    improved = True
                    break
            if improved:
                break
    return TourResult(tuple(tour), _tour_length(tour, travel), TourMethod.TWO_OPT)


def deadline_misses(order: Sequence[int], travel: TravelMatrix, deadlines: Dict[int, float]) -> List[int]:
    """Location ids in deadlines that the tour reaches too late."""
    misses = []
    elapsed = 0.0
    for previous, current in zip(order, order[1:]):
        elapsed += travel[previous, current]
        if current in deadlines and elapsed > deadlines[current]:
            misses.append(current)
    return misses


@dataclass(frozen=True)
class RouteComparison:
    """One Q4RPD route against the oracle tour over its stops."""
    truck_id: int
    nodes: Tuple[int, ...]
    route_length: float
    tour: TourResult
    has_tp: bool
    tour_violates_deadline: bool

    @property
    def deviation(self) -> float:
        """Relative excess of the route over the tour."""
        if self.tour.length == 0:
            return 0.0
        return (self.route_length - self.tour.length) / self.tour.length


@dataclass(frozen=True)
class ComparisonReport:
    """Per-route comparisons and their sums."""
    routes: Tuple[RouteComparison, ...]

    @property
    def total_route_length(self) -> float:
        """Sum of o1 over the solution."""
        return float(sum(r.route_length for r in self.routes))

    @property
    def total_tour_length(self) -> float:
        """Sum of oracle tour lengths."""
        return float(sum(r.tour.length for r in self.routes))

    @property
    def deviation(self) -> float:
        """Relative excess of the solution over the oracle sum."""
        if self.total_tour_length == 0:
            return 0.0
        return (self.total_route_length - self.total_tour_length) / self.total_tour_length

    @property
    def heuristic(self) -> bool:
        """True when any route fell back to 2-opt."""
        return any(r.tour.method is TourMethod.TWO_OPT for r in self.routes)

    @property
    def deadline_violations(self) -> int:
        """Routes whose oracle tour misses a TP deadline."""
        return sum(1 for r in self.routes if r.tour_violates_deadline)

    def to_dict(self) -> Dict:
        """JSON form with a fixed key order."""
        return {
            'sum_o1': self.total_route_length,
            'sum_tsp': self.total_tour_length,
            'deviation_percent': 100.0 * self.deviation,
            'heuristic': self.heuristic,
            'deadline_violations': self.deadline_violations,
            'routes': [
                {
                    'truck_id': r.truck_id,
                    'o1': r.route_length,
                    'tsp': r.tour.length,
                    'deviation_percent': 100.0 * r.deviation,
                    'method': r.tour.method.value,
                    'tour': list(r.tour.order),
                    'has_tp': r.has_tp,
                    'tsp_violates_r2': r.tour_violates_deadline,
                }
                for r in self.routes
            ],
        }


def compare_solution(solution: Q4rpdSolution, instance: ProblemInstance,
                     exact_max_nodes: int = EXACT_MAX_NODES, seed: int = 0) -> ComparisonReport:
    """
    Compare every route with the closed TSP tour over its served locations.

    A TP-containing tour is flagged when neither driving direction meets all
    deadlines of the TP deliveries on it.

    Args:
        solution: Solution to evaluate
        instance: Instance it belongs to
        exact_max_nodes: Largest node count solved with Held-Karp
        seed: Seed of the 2-opt construction

    Returns:
        ComparisonReport
    """
    travel = build_travel_matrix(instance)
    deliveries = {d.id: d for d in instance.deliveries}
    comparisons = []
    for truck_route in solution.routes:
        stops = truck_route.route.stops
        nodes = tuple(dict.fromkeys([DEPOT_ID] + [s for s in stops if s != DEPOT_ID]))
        if len(nodes) <= exact_max_nodes:
            tour = tsp_exact(nodes, travel, DEPOT_ID, exact_max_nodes)
        else:
            tour = tsp_2opt(nodes, travel, DEPOT_ID, seed)
        deadlines = {n: deliveries[n].tp_deadline for n in nodes if n in deliveries and deliveries[n].is_tp}
        violates = bool(deadlines) and all(
            deadline_misses(order, travel, deadlines) for order in (tour.order, tour.order[::-1])
        )
        comparison = RouteComparison(truck_route.truck_id, nodes, travel.path_length(stops), tour,
                                     bool(deadlines), violates)
        logger.debug("Truck %s: o1 %.4f vs TSP %.4f (%s)", comparison.truck_id, comparison.route_length,
                     tour.length, tour.method.value)
        comparisons.append(comparison)
    return ComparisonReport(tuple(comparisons))
