"""
Solution Validation

Re-checks a solution against the raw instance data: capacity (R1), TP
deadlines (R2) and working day (R3), audits the fleet preferences P1-P3 and
accounts the cost. Nothing reported by the solver is trusted; loads, times
and distances are recomputed from the stops of each route.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .errors import MalformedSolution
from .model import DEPOT_ID, ProblemInstance, Truck, build_travel_matrix
from .orchestrator import Q4rpdSolution, TruckRoute, order_vehicles
from .srp import within_bound

logger = logging.getLogger(__name__)


class Mark(Enum):
    """Outcome of one check, printed as in the results table."""
    PASS = 'pass'
    FAIL = 'fail'
    NOT_PRESENT = 'not_present'

    @property
    def symbol(self) -> str:
        """Check mark, cross or dash."""
        return {Mark.PASS: '✓', Mark.FAIL: '×', Mark.NOT_PRESENT: '−'}[self]


@dataclass(frozen=True)
class CheckResult:
    """A mark with the failures that caused it."""
    mark: Mark
    details: Tuple[str, ...] = ()

    @classmethod
    def from_failures(cls, failures: List[str]) -> 'CheckResult':
        """Pass when there are no failures."""
        return cls(Mark.FAIL, tuple(failures)) if failures else cls(Mark.PASS)

    def to_dict(self) -> Dict:
        """JSON form."""
        return {'mark': self.mark.value, 'details': list(self.details)}


@dataclass(frozen=True)
class P3Audit:
    """Fleet-size audit; reported, never enforced."""
    satisfied: bool
    trucks_used: int
    lower_bound: int
    ffd_cover: Optional[int]
    details: Tuple[str, ...] = ()

    def to_dict(self) -> Dict:
        """JSON form."""
        return {'satisfied': self.satisfied, 'trucks_used': self.trucks_used,
                'lower_bound': self.lower_bound, 'ffd_cover': self.ffd_cover,
                'details': list(self.details)}


@dataclass(frozen=True)
class CostBreakdown:
    """Distance plus rental prices."""
    distance: float = 0.0
    rental: float = 0.0

    @property
    def total(self) -> float:
        """Distance plus rental."""
        return self.distance + self.rental

    def to_dict(self) -> Dict:
        """JSON form."""
        return {'distance': self.distance, 'rental': self.rental, 'total': self.total}


@dataclass(frozen=True)
class ValidationReport:
    """Result of validate_solution."""
    r1: CheckResult
    r2: CheckResult
    r3: CheckResult
    p1: CheckResult
    p2: CheckResult
    p3: P3Audit
    coverage: CheckResult
    cost: CostBreakdown = field(default_factory=CostBreakdown)

    @property
    def passed(self) -> bool:
        """All restrictions and the P1/P2 preferences hold and every delivery is served once."""
        return all(check.mark is not Mark.FAIL
                   for check in (self.r1, self.r2, self.r3, self.p1, self.p2, self.coverage))

    def to_dict(self) -> Dict:
        """JSON form with a fixed key order."""
        return {
            'passed': self.passed,
            'r1': self.r1.to_dict(),
            'r2': self.r2.to_dict(),
            'r3': self.r3.to_dict(),
            'p1': self.p1.to_dict(),
            'p2': self.p2.to_dict(),
            'p3': self.p3.to_dict(),
            'coverage': self.coverage.to_dict(),
            'cost': self.cost.to_dict(),
        }


def _check_structure(solution: Q4rpdSolution, instance: ProblemInstance) -> None:
    known_trucks = {t.id for t in instance.fleet}
    locations = len(instance.deliveries) + 1
    for truck_route in solution.routes:
        stops = truck_route.route.stops
        if truck_route.truck_id not in known_trucks:
            raise MalformedSolution(f"Route uses unknown truck {truck_route.truck_id}")
        if len(stops) < 2 or stops[0] != DEPOT_ID or stops[-1] != DEPOT_ID:
            raise MalformedSolution(f"Route of truck {truck_route.truck_id} does not start and end at the depot")
        if any(not 0 <= s < locations for s in stops):
            raise MalformedSolution(f"Route of truck {truck_route.truck_id} visits unknown locations")


def _served(truck_route: TruckRoute) -> List[int]:
    return [s for s in truck_route.route.stops if s != DEPOT_ID]


def _check_coverage(solution: Q4rpdSolution, instance: ProblemInstance) -> CheckResult:
    failures = []
    seen: Dict[int, int] = {}
    for truck_route in solution.routes:
        served = _served(truck_route)
        if sorted(served) != sorted(truck_route.route.served):
            failures.append(f"Truck {truck_route.truck_id} reports served {list(truck_route.route.served)} "
                            f"but stops at {served}")
        for delivery_id in served:
            seen[delivery_id] = seen.get(delivery_id, 0) + 1
    for delivery in instance.deliveries:
        count = seen.get(delivery.id, 0)
        if count != 1:
            failures.append(f"Delivery {delivery.id} served {count} times")
    return CheckResult.from_failures(failures)


def _ffd_cover(instance: ProblemInstance) -> Optional[int]:
    """Trucks opened by first-fit-decreasing over the largest trucks first."""
    trucks = sorted(instance.fleet, key=lambda t: (-t.max_weight, -t.max_dimension, t.id))
    bins: List[List[float]] = []
    opened: List[Truck] = []
    for delivery in sorted(instance.deliveries, key=lambda d: (-d.weight, -d.dimension, d.id)):
        for load, truck in zip(bins, opened):
            if (load[0] + delivery.weight <= truck.max_weight
                    and load[1] + delivery.dimension <= truck.max_dimension):
                load[0] += delivery.weight
                load[1] += delivery.dimension
                break
        else:
            if len(opened) == len(trucks):
                return None
            opened.append(trucks[len(opened)])
            bins.append([delivery.weight, delivery.dimension])
    return len(opened)


def _capacity_lower_bound(instance: ProblemInstance) -> int:
    """Fewest trucks whose combined capacity covers the total load in both dimensions."""
    total_weight = sum(d.weight for d in instance.deliveries)
    total_dimension = sum(d.dimension for d in instance.deliveries)
    bound = 0
    for total, capacities in ((total_weight, [t.max_weight for t in instance.fleet]),
                              (total_dimension, [t.max_dimension for t in instance.fleet])):
        covered, count = 0.0, 0
        for capacity in sorted(capacities, reverse=True):
            if covered >= total:
                break
            covered += capacity
            count += 1
        bound = max(bound, count)
    return bound


def _audit_p3(solution: Q4rpdSolution, instance: ProblemInstance) -> P3Audit:
    used = solution.trucks_used
    lower_bound = _capacity_lower_bound(instance)
    ffd = _ffd_cover(instance)
    details = []
    if ffd is not None and ffd < used:
        details.append(f"First-fit-decreasing covers the load with {ffd} trucks, solution uses {used}")
    return P3Audit(not details, used, lower_bound, ffd, tuple(details))


def account_cost(solution: Q4rpdSolution, instance: ProblemInstance) -> CostBreakdown:
    """
    Cost of a solution from raw travel data.

    Args:
        solution: Solution to price
        instance: Instance it belongs to

    Returns:
        CostBreakdown with route distances and rental prices of used rental trucks
    """
    travel = build_travel_matrix(instance)
    distance = sum(travel.path_length(r.route.stops) for r in solution.routes)
    trucks = {t.id: t for t in instance.fleet}
    rental = sum(trucks[r.truck_id].rental_cost for r in solution.routes
                 if r.truck_id in trucks and trucks[r.truck_id].is_rental)
    return CostBreakdown(float(distance), float(rental))


def validate_solution(solution: Q4rpdSolution, instance: ProblemInstance) -> ValidationReport:
    """
    Independently verify a solution.

    Args:
        solution: Solution to check
        instance: Instance it belongs to

    Returns:
        ValidationReport with R1-R3, P1-P3, coverage and cost

    Raises:
        MalformedSolution: Routes reference unknown trucks or locations, or do
            not start and end at the depot
    """
    _check_structure(solution, instance)
    travel = build_travel_matrix(instance)
    deliveries = {d.id: d for d in instance.deliveries}

    r1, r2, r3 = [], [], []
    arrivals: Dict[int, float] = {}
    for truck_route in solution.routes:
        truck = instance.truck(truck_route.truck_id)
        stops = truck_route.route.stops
        served = _served(truck_route)
        weight = sum(deliveries[i].weight for i in served)
        dimension = sum(deliveries[i].dimension for i in served)
        if not within_bound(weight, truck.max_weight):
            r1.append(f"Truck {truck.id} carries {weight:g} kg over {truck.max_weight:g}")
        if not within_bound(dimension, truck.max_dimension):
            r1.append(f"Truck {truck.id} carries {dimension:g} cm3 over {truck.max_dimension:g}")

        elapsed = 0.0
        for previous, current in zip(stops, stops[1:]):
            elapsed += travel[previous, current]
            if current != DEPOT_ID and current not in arrivals:
                arrivals[current] = elapsed
        if not within_bound(elapsed, instance.working_day):
            r3.append(f"Route of truck {truck.id} lasts {elapsed:.4f} over working day {instance.working_day:g}")

    tps = instance.tp_deliveries
    for tp in tps:
        if tp.id not in arrivals:
            r2.append(f"TP delivery {tp.id} is not served")
        elif not within_bound(arrivals[tp.id], tp.tp_deadline):
            r2.append(f"TP delivery {tp.id} reached at {arrivals[tp.id]:.4f} after deadline {tp.tp_deadline:g}")

    truck_ids = [r.truck_id for r in solution.routes]
    duplicates = sorted({t for t in truck_ids if truck_ids.count(t) > 1})
    p1 = [f"Truck {t} has more than one route" for t in duplicates]

    order = [t.id for t in order_vehicles(instance.fleet)]
    used = set(truck_ids)
    p2 = []
    if set(order[:len(used)]) != used:
        idle = [t for t in order[:len(used)] if t not in used]
        p2.append(f"Trucks {idle} stay idle while later trucks in the vehicle order are used")

    report = ValidationReport(
        r1=CheckResult.from_failures(r1),
        r2=CheckResult.from_failures(r2) if tps else CheckResult(Mark.NOT_PRESENT),
        r3=CheckResult.from_failures(r3),
        p1=CheckResult.from_failures(p1),
        p2=CheckResult.from_failures(p2),
        p3=_audit_p3(solution, instance),
        coverage=_check_coverage(solution, instance),
        cost=account_cost(solution, instance),
    )
    if not report.passed:
        logger.warning("Solution for %s failed validation", instance.name or 'instance')
    return report
