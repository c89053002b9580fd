"""
Q4RPD Orchestrator

Iterative scheme that turns a 2DH-PDP instance into one depot-to-depot route
per used truck. Each iteration picks a truck (S1), selects a trajectory type,
solves the resulting single routing problem (S2) and stores or concatenates
the sub-route (S3) until every delivery is served.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (ChainBroken, DeadlineImpossible, EmptyFleet, FleetExhausted, InstanceRejected,
                     MalformedSolution, NoFeasibleRoute, NonPositiveRt, NotATpDelivery)
from .model import DEPOT_ID, Delivery, ProblemInstance, TravelMatrix, Truck
from .model import build_travel_matrix, validate_instance
from .solvers import SolverConfig, solve
from .srp import (DEFAULT_OMEGA1, DEFAULT_OMEGA2, O2_PRIORITIES, SrpRoute, SrpSpec, build_srp_model,
                  objective_o2)

TP_SELECTIONS = ('earliest_deadline', 'nearest')


class TrajectoryType(Enum):
    """Kinds of (sub-)route; declaration order is the [A,B,C,D] mix order."""
    REGULAR = 'regular'
    DEPOT_TP = 'depot_tp'
    TP_TP = 'tp_tp'
    TP_DEPOT = 'tp_depot'


MIX_ORDER = tuple(TrajectoryType)


@dataclass(frozen=True)
class Trajectory:
    """Trajectory chosen for the active truck, with its TP destination if any."""
    type: TrajectoryType
    tp: Optional[Delivery] = None

    @property
    def destination(self) -> int:
        """Destination location id."""
        return self.tp.location.id if self.tp is not None else DEPOT_ID


@dataclass(frozen=True)
class SubRoute:
    """
    A section of a truck's route.

    spec is kept in memory for audits of the request that produced the route;
    it is not serialized.
    """
    type: TrajectoryType
    route: SrpRoute
    start_time: float = 0.0
    spec: Optional[SrpSpec] = field(default=None, compare=False, repr=False)

    @property
    def origin(self) -> int:
        """First location id."""
        return self.route.locations[0]

    @property
    def destination(self) -> int:
        """Last location id."""
        return self.route.locations[-1]


@dataclass(frozen=True)
class Route:
    """A complete depot-to-depot route made of one or more sub-routes."""
    stops: Tuple[int, ...]
    legs: Tuple[float, ...]
    served: Tuple[int, ...]
    duration: float
    weight: float
    dimension: float
    subroutes: Tuple[SubRoute, ...]

    @property
    def distance(self) -> float:
        """Travelled distance; equal to the duration."""
        return float(sum(self.legs))

    @property
    def arrival_times(self) -> Tuple[float, ...]:
        """Arrival time at every stop, leaving the depot at time 0."""
        times = [0.0]
        for leg in self.legs:
            times.append(times[-1] + leg)
        return tuple(times)


@dataclass(frozen=True)
class TruckRoute:
    """Route assigned to one truck."""
    truck_id: int
    route: Route


@dataclass
class Diagnostics:
    """Bookkeeping of a run that does not change the solution itself."""
    srp_builds: int = 0
    total_variables: int = 0
    total_constraints: int = 0
    skipped: List[Dict] = field(default_factory=list)


@dataclass(frozen=True)
class Q4rpdSolution:
    """Routes of a run and their totals."""
    instance_name: str
    routes: Tuple[TruckRoute, ...]
    rental_cost: float
    diagnostics: Diagnostics = field(default_factory=Diagnostics, compare=False)

    @property
    def distance(self) -> float:
        """Total distance over all routes."""
        return float(sum(r.route.distance for r in self.routes))

    @property
    def trucks_used(self) -> int:
        """Number of routes, one per truck."""
        return len(self.routes)

    @property
    def subroute_mix(self) -> List[int]:
        """Counts of [Regular, Depot-TP, TP-TP, TP-Depot] sub-routes."""
        counts = {kind: 0 for kind in MIX_ORDER}
        for truck_route in self.routes:
            for subroute in truck_route.route.subroutes:
                counts[subroute.type] += 1
        return [counts[kind] for kind in MIX_ORDER]


@dataclass
class TruckState:
    """Progress of one truck through the day."""
    truck: Truck
    position: int = DEPOT_ID
    elapsed: float = 0.0
    used_weight: float = 0.0
    used_dimension: float = 0.0
    accumulated: List[SubRoute] = field(default_factory=list)

    @property
    def at_depot(self) -> bool:
        """True before the first sub-route and after a depot-closing one."""
        return self.position == DEPOT_ID


@dataclass(frozen=True)
class OrchestratorConfig:
    """SRP weights and scheme options."""
    omega1: float = DEFAULT_OMEGA1
    omega2: float = DEFAULT_OMEGA2
    constraint_mode: str = 'aggregate'
    o2_priority: str = 'lexicographic'
    tp_selection: str = 'earliest_deadline'
    reserve_return_leg: bool = True

    @classmethod
    def from_dict(cls, config: Optional[Dict]) -> 'OrchestratorConfig':
        """Build from the srp and orchestrator blocks of config.yaml."""
        config = config or {}
        srp = config.get('srp') or {}
        orchestrator = config.get('orchestrator') or {}
        result = cls(
            omega1=float(srp.get('omega1', DEFAULT_OMEGA1)),
            omega2=float(srp.get('omega2', DEFAULT_OMEGA2)),
            constraint_mode=str(srp.get('constraint_mode', 'aggregate')),
            o2_priority=str(srp.get('o2_priority', 'lexicographic')),
            tp_selection=str(orchestrator.get('tp_selection', 'earliest_deadline')),
            reserve_return_leg=bool(orchestrator.get('reserve_return_leg', True)),
        )
        if result.tp_selection not in TP_SELECTIONS:
            raise ValueError(f"Unknown tp_selection '{result.tp_selection}'")
        if result.o2_priority not in O2_PRIORITIES:
            raise ValueError(f"Unknown o2_priority '{result.o2_priority}'")
        return result


def order_vehicles(fleet: Sequence[Truck]) -> List[Truck]:
    """
    Owned trucks first, then rentals, each by descending capacity.

    Args:
        fleet: Trucks of the instance

    Returns:
        Trucks sorted by (rental, -max_weight, -max_dimension, id)
    """
    if not fleet:
        raise EmptyFleet("Cannot order an empty fleet")
    return sorted(fleet, key=lambda t: (t.is_rental, -t.max_weight, -t.max_dimension, t.id))


def order_deliveries(deliveries: Sequence[Delivery]) -> List[Delivery]:
    """TP deliveries by deadline then id, followed by the rest by id."""
    tps = sorted((d for d in deliveries if d.is_tp), key=lambda d: (d.tp_deadline, d.id))
    others = sorted((d for d in deliveries if not d.is_tp), key=lambda d: d.id)
    return tps + others


def select_vehicle(queue: List[Truck], states: Dict[int, TruckState]) -> Truck:
    """
    Head of the queue, moving a truck with an open route to the front first.

    Args:
        queue: Trucks not yet assigned a complete route
        states: Truck states by id

    Returns:
        Truck to work with in this iteration
    """
    if not queue:
        raise FleetExhausted("Deliveries remain but every truck has been used")
    for index, truck in enumerate(queue):
        if not states[truck.id].at_depot:
            if index:
                queue.insert(0, queue.pop(index))
            return truck
    return queue[0]


def usable_capacity(state: TruckState) -> Tuple[float, float]:
    """Capacity left after the sub-routes already assigned to the truck."""
    return (state.truck.max_weight - state.used_weight,
            state.truck.max_dimension - state.used_dimension)


def is_reachable(state: TruckState, tp: Delivery, instance: ProblemInstance,
                 travel: Optional[TravelMatrix] = None) -> bool:
    """
    Whether the truck can serve a TP delivery next.

    Args:
        state: Active truck
        tp: Candidate TP delivery
        instance: Problem instance
        travel: Travel matrix, built from the instance when omitted

    Returns:
        True when the delivery fits, is on time and the depot is still reachable
    """
    if not tp.is_tp:
        raise NotATpDelivery(f"Delivery {tp.id} has no deadline")
    travel = travel or build_travel_matrix(instance)
    weight, dimension = usable_capacity(state)
    if tp.weight > weight or tp.dimension > dimension:
        return False
    arrival = state.elapsed + travel[state.position, tp.location.id]
    if arrival > tp.tp_deadline:
        return False
    return arrival + travel[tp.location.id, DEPOT_ID] <= instance.working_day


def select_route_type(state: TruckState, pending: Sequence[Delivery], instance: ProblemInstance,
                      travel: Optional[TravelMatrix] = None,
                      tp_selection: str = 'earliest_deadline') -> Trajectory:
    """
    Pick the trajectory of the next (sub-)route.

    Args:
        state: Active truck
        pending: Deliveries not yet served, in queue order
        instance: Problem instance
        travel: Travel matrix, built from the instance when omitted
        tp_selection: earliest_deadline or nearest reachable TP for TP-TP

    Returns:
        Trajectory for scenarios A to D
    """
    tps = [d for d in pending if d.is_tp]
    if not state.at_depot:
        if not tps:
            return Trajectory(TrajectoryType.TP_DEPOT)
        travel = travel or build_travel_matrix(instance)
        reachable = [tp for tp in tps if is_reachable(state, tp, instance, travel)]
        if not reachable:
            return Trajectory(TrajectoryType.TP_DEPOT)
        if tp_selection == 'nearest':
            rank = {tp.id: index for index, tp in enumerate(reachable)}
            chosen = min(reachable, key=lambda tp: (travel[state.position, tp.location.id], rank[tp.id]))
        else:
            chosen = reachable[0]
        return Trajectory(TrajectoryType.TP_TP, chosen)
    if tps:
        return Trajectory(TrajectoryType.DEPOT_TP, tps[0])
    return Trajectory(TrajectoryType.REGULAR)


def compute_rt(kind: TrajectoryType, state: TruckState, tp_deadline: Optional[float],
               working_day: float) -> float:
    """
    Maximum duration of the next (sub-)route.

    Args:
        kind: Trajectory type
        state: Active truck
        tp_deadline: Deadline of the TP destination, for TP-ending types
        working_day: Driver working day

    Returns:
        rt for the trajectory

    Raises:
        NonPositiveRt: No time is left for the trajectory
    """
    if kind is TrajectoryType.TP_TP:
        rt = tp_deadline - state.elapsed
    elif kind is TrajectoryType.TP_DEPOT:
        rt = working_day - state.elapsed
    elif kind is TrajectoryType.DEPOT_TP:
        rt = tp_deadline
    else:
        rt = working_day
    if rt <= 0:
        raise NonPositiveRt(f"{kind.value} trajectory for truck {state.truck.id} has rt={rt:g}")
    return rt


def build_spec(trajectory: Trajectory, state: TruckState, pending: Sequence[Delivery],
               instance: ProblemInstance, config: Optional[OrchestratorConfig] = None,
               travel: Optional[TravelMatrix] = None) -> SrpSpec:
    """
    Assemble the SRP request of a trajectory.

    Candidates are pending non-TP deliveries that fit individually next to
    the destination delivery; other TPs are left for their own trajectories.

    Args:
        trajectory: Trajectory type and TP destination
        state: Active truck
        pending: Deliveries not yet served
        instance: Problem instance
        config: Objective weights and scheme options
        travel: Travel matrix, built from the instance when omitted

    Returns:
        SrpSpec for the trajectory
    """
    config = config or OrchestratorConfig()
    travel = travel or build_travel_matrix(instance)
    tp = trajectory.tp
    rt = compute_rt(trajectory.type, state, tp.tp_deadline if tp else None, instance.working_day)
    if tp is not None and config.reserve_return_leg:
        rt = min(rt, instance.working_day - state.elapsed - travel[tp.location.id, DEPOT_ID])
        if rt <= 0:
            raise NonPositiveRt(f"No time left to return to the depot after delivery {tp.id}")

    weight, dimension = usable_capacity(state)
    room_weight = weight - (tp.weight if tp else 0.0)
    room_dimension = dimension - (tp.dimension if tp else 0.0)
    candidates = [d for d in pending
                  if not d.is_tp and d.weight <= room_weight and d.dimension <= room_dimension]
    return SrpSpec.create(travel, state.position, trajectory.destination, candidates, rt,
                          weight, dimension, tp, omega1=config.omega1, omega2=config.omega2,
                          constraint_mode=config.constraint_mode, o2_priority=config.o2_priority)


def concatenate(subroutes: Sequence[SubRoute]) -> Route:
    """
    Join a chain of sub-routes into one route.

    Args:
        subroutes: Sub-routes in driving order

    Returns:
        Depot-to-depot route

    Raises:
        ChainBroken: The chain does not start and end at the depot or a link
            starts somewhere other than where the previous one ended
    """
    if not subroutes:
        raise ChainBroken("No sub-routes to concatenate")
    if subroutes[0].origin != DEPOT_ID:
        raise ChainBroken(f"Route starts at {subroutes[0].origin}, not at the depot")
    if subroutes[-1].destination != DEPOT_ID:
        raise ChainBroken(f"Route ends at {subroutes[-1].destination}, not at the depot")
    for previous, current in zip(subroutes, subroutes[1:]):
        if current.origin != previous.destination:
            raise ChainBroken(
                f"{current.type.value} starts at {current.origin} but previous sub-route ended at "
                f"{previous.destination}"
            )

    stops = [DEPOT_ID]
    legs: List[float] = []
    served: List[int] = []
    for subroute in subroutes:
        stops.extend(subroute.route.locations[1:])
        legs.extend(subroute.route.legs)
        served.extend(subroute.route.served)
    return Route(
        stops=tuple(stops),
        legs=tuple(legs),
        served=tuple(served),
        duration=float(sum(s.route.duration for s in subroutes)),
        weight=float(sum(s.route.weight for s in subroutes)),
        dimension=float(sum(s.route.dimension for s in subroutes)),
        subroutes=tuple(subroutes),
    )


class Q4rpdOrchestrator:
    """Runs the S1-S3 loop for one instance."""

    def __init__(self, solver_config: Optional[SolverConfig] = None,
                 config: Optional[OrchestratorConfig] = None):
        self.solver_config = solver_config or SolverConfig()
        self.config = config or OrchestratorConfig()
        self.logger = logging.getLogger(__name__)

    def run(self, instance: ProblemInstance) -> Q4rpdSolution:
        """
        Solve an instance.

        Args:
            instance: Problem instance without validation issues

        Returns:
            Q4rpdSolution with one route per used truck
        """
        issues = validate_instance(instance)
        if issues:
            raise InstanceRejected(f"Instance has {len(issues)} issue(s): "
                                   + '; '.join(issue.message for issue in issues), issues)
        self.solver_config.validate()
        travel = build_travel_matrix(instance)
        queue = order_vehicles(instance.fleet)
        states = {truck.id: TruckState(truck) for truck in queue}
        pending = order_deliveries(instance.deliveries)
        diagnostics = Diagnostics()
        routes: List[TruckRoute] = []
        iteration = 0

        while pending or any(not states[t.id].at_depot for t in queue):
            iteration += 1
            truck = select_vehicle(queue, states)
            state = states[truck.id]
            trajectory = select_route_type(state, pending, instance, travel, self.config.tp_selection)

            if trajectory.type is TrajectoryType.DEPOT_TP:
                state, subroute = self._solve_depot_tp(trajectory, queue, states, pending,
                                                       instance, travel, diagnostics)
            else:
                subroute = self._solve_trajectory(trajectory, state, pending, instance, travel, diagnostics)

            self._apply(state, subroute)
            served = set(subroute.route.served)
            pending = [d for d in pending if d.id not in served]
            self.logger.info("Iteration %s: truck %s %s %s -> %s, served %s, %s pending",
                             iteration, state.truck.id, subroute.type.value, subroute.origin,
                             subroute.destination, len(served), len(pending))

            if state.at_depot:
                queue.remove(state.truck)
                if subroute.type is TrajectoryType.REGULAR and not served:
                    self.logger.warning("Truck %s cannot serve any pending delivery; releasing it",
                                        state.truck.id)
                    diagnostics.skipped.append({'truck_id': state.truck.id, 'reason': 'empty_route'})
                    continue
                routes.append(TruckRoute(state.truck.id, concatenate(state.accumulated)))

        rental_cost = sum(instance.truck(r.truck_id).rental_cost for r in routes
                          if instance.truck(r.truck_id).is_rental)
        solution = Q4rpdSolution(instance.name, tuple(routes), float(rental_cost), diagnostics)
        self.logger.info("Solved %s: %s routes, distance %.2f, mix %s",
                         instance.name or 'instance', solution.trucks_used, solution.distance,
                         solution.subroute_mix)
        return solution

    def _solve_depot_tp(self, trajectory: Trajectory, queue: List[Truck], states: Dict[int, TruckState],
                        pending: Sequence[Delivery], instance: ProblemInstance, travel: TravelMatrix,
                        diagnostics: Diagnostics) -> Tuple[TruckState, SubRoute]:
        """Try the queue in order until a truck can serve the TP."""
        for truck in list(queue):
            state = states[truck.id]
            try:
                return state, self._solve_trajectory(trajectory, state, pending, instance, travel, diagnostics)
            except (NoFeasibleRoute, NonPositiveRt) as exc:
                self.logger.warning("Truck %s cannot reach TP delivery %s (%s); trying the next truck",
                                    truck.id, trajectory.tp.id, exc)
                diagnostics.skipped.append({'truck_id': truck.id, 'reason': 'tp_unreachable',
                                            'delivery_id': trajectory.tp.id})
        raise DeadlineImpossible(f"No truck can serve TP delivery {trajectory.tp.id} "
                                 f"before its deadline {trajectory.tp.tp_deadline:g}")

    def _solve_trajectory(self, trajectory: Trajectory, state: TruckState, pending: Sequence[Delivery],
                          instance: ProblemInstance, travel: TravelMatrix,
                          diagnostics: Diagnostics) -> SubRoute:
        weight, dimension = usable_capacity(state)
        if trajectory.type is TrajectoryType.TP_DEPOT and (weight <= 0 or dimension <= 0):
            return SubRoute(trajectory.type, self._direct_return(state, travel), state.elapsed)

        spec = build_spec(trajectory, state, pending, instance, self.config, travel)
        model, _ = build_srp_model(spec)
        diagnostics.srp_builds += 1
        diagnostics.total_variables += model.num_variables
        diagnostics.total_constraints += model.num_constraints
        self.logger.debug("Truck %s %s: M=%s rt=%.3f W=%.3f D=%.3f",
                          state.truck.id, trajectory.type.value, spec.M, spec.rt,
                          spec.max_weight, spec.max_dimension)
        try:
            route = solve(spec, self.solver_config, model)
        except NoFeasibleRoute as exc:
            exc.context.update({'truck': state.truck.id, 'trajectory': trajectory.type.value})
            raise
        return SubRoute(trajectory.type, route, state.elapsed, spec)

    def _direct_return(self, state: TruckState, travel: TravelMatrix) -> SrpRoute:
        """Return leg of a fully loaded truck; no SRP is needed."""
        leg = travel[state.position, DEPOT_ID]
        o2 = objective_o2(1, 1)
        self.logger.debug("Truck %s is full; returning directly from %s", state.truck.id, state.position)
        return SrpRoute((0, 1), (state.position, DEPOT_ID), (), (leg,), leg, 0.0, 0.0, leg, o2,
                        self.config.omega1 * leg + self.config.omega2 * o2)

    @staticmethod
    def _apply(state: TruckState, subroute: SubRoute) -> None:
        state.accumulated.append(subroute)
        state.elapsed += subroute.route.duration
        state.used_weight += subroute.route.weight
        state.used_dimension += subroute.route.dimension
        state.position = subroute.destination


def run(instance: ProblemInstance, solver_config: Optional[SolverConfig] = None,
        config: Optional[OrchestratorConfig] = None) -> Q4rpdSolution:
    """Solve an instance with the Q4RPD scheme."""
    return Q4rpdOrchestrator(solver_config, config).run(instance)


def _subroute_to_dict(subroute: SubRoute) -> Dict:
    route = subroute.route
    return {
        'type': subroute.type.value,
        'start_time': subroute.start_time,
        'stops': list(route.locations),
        'slots': list(route.slots),
        'served': list(route.served),
        'legs': list(route.legs),
        'duration': route.duration,
        'weight': route.weight,
        'dimension': route.dimension,
        'o1': route.o1,
        'o2': route.o2,
        'score': route.score,
    }


def solution_to_dict(solution: Q4rpdSolution, instance: Optional[ProblemInstance] = None) -> Dict:
    """
    Serialize a solution with a fixed key order.

    Args:
        solution: Solution to write
        instance: Instance the solution belongs to, for truck ownership

    Returns:
        JSON-ready dictionary
    """
    routes = []
    for truck_route in solution.routes:
        route = truck_route.route
        entry = {'truck_id': truck_route.truck_id}
        if instance is not None:
            entry['ownership'] = instance.truck(truck_route.truck_id).ownership.value
        entry.update({
            'stops': list(route.stops),
            'arrival_times': list(route.arrival_times),
            'served': list(route.served),
            'distance': route.distance,
            'duration': route.duration,
            'weight': route.weight,
            'dimension': route.dimension,
            'subroutes': [_subroute_to_dict(s) for s in route.subroutes],
        })
        routes.append(entry)
    diagnostics = solution.diagnostics
    return {
        'instance': solution.instance_name,
        'routes': routes,
        'totals': {
            'distance': solution.distance,
            'rental_cost': solution.rental_cost,
            'total_cost': solution.distance + solution.rental_cost,
            'trucks_used': solution.trucks_used,
            'subroute_mix': solution.subroute_mix,
        },
        'diagnostics': {
            'srp_builds': diagnostics.srp_builds,
            'variables': diagnostics.total_variables,
            'constraints': diagnostics.total_constraints,
            'skipped': list(diagnostics.skipped),
        },
    }


def _subroute_from_dict(data: Dict) -> SubRoute:
    route = SrpRoute(
        slots=tuple(int(s) for s in data['slots']),
        locations=tuple(int(s) for s in data['stops']),
        served=tuple(int(s) for s in data['served']),
        legs=tuple(float(v) for v in data['legs']),
        duration=float(data['duration']),
        weight=float(data['weight']),
        dimension=float(data['dimension']),
        o1=float(data['o1']),
        o2=float(data['o2']),
        score=float(data['score']),
    )
    return SubRoute(TrajectoryType(data['type']), route, float(data.get('start_time', 0.0)))


def solution_from_dict(data: Dict) -> Q4rpdSolution:
    """
    Parse a solution document.

    Args:
        data: Decoded solution JSON

    Returns:
        Q4rpdSolution

    Raises:
        MalformedSolution: A required field is missing or has the wrong shape
    """
    try:
        routes = []
        for entry in data['routes']:
            subroutes = [_subroute_from_dict(s) for s in entry['subroutes']]
            routes.append(TruckRoute(int(entry['truck_id']), concatenate(subroutes)))
        raw = data.get('diagnostics') or {}
        diagnostics = Diagnostics(int(raw.get('srp_builds', 0)), int(raw.get('variables', 0)),
                                  int(raw.get('constraints', 0)), list(raw.get('skipped', [])))
        return Q4rpdSolution(str(data.get('instance', '')), tuple(routes),
                             float(data['totals']['rental_cost']), diagnostics)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedSolution(f"Solution document is incomplete: {exc}") from exc
