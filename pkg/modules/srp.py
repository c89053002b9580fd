"""
Single Routing Problem

Node-based CQM for one (sub-)route: x[i, p] = 1 when slot i is visited at
position p. Slot 0 is the origin, slot 1 the destination and slots 2..M the
candidate deliveries. Regular and TP-Depot requests use the depot for both
slot 0 and slot 1, so their shared distance is zero.

With raw weights a depot-to-depot request scores the empty route best as
soon as a detour costs more than omega2 per delivery. Lexicographic o2
priority (the default) scales omega2 by an integer factor above
omega1 * rt / omega2, which no feasible o1 difference can outweigh.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cqm import CqmBuilder, CqmModel, Sense
from .errors import DestinationNotLast, InfeasibleAssignment, LengthMismatch, SpecInvalid
from .model import Delivery, TravelMatrix

logger = logging.getLogger(__name__)

ORIGIN_SLOT = 0
DESTINATION_SLOT = 1
FIRST_CANDIDATE_SLOT = 2

DEFAULT_OMEGA1 = 1.0
DEFAULT_OMEGA2 = 2.0
CONSTRAINT_MODES = ('aggregate', 'literal')
O2_PRIORITIES = ('lexicographic', 'weighted')
BOUND_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SrpSpec:
    """
    One (sub-)route request.

    travel is indexed by slot, not by location id; use SrpSpec.create to
    restrict an instance matrix.
    """
    origin: int
    destination: int
    candidates: Tuple[Delivery, ...]
    rt: float
    max_weight: float
    max_dimension: float
    travel: TravelMatrix
    destination_delivery: Optional[Delivery] = None
    omega1: float = DEFAULT_OMEGA1
    omega2: float = DEFAULT_OMEGA2
    constraint_mode: str = 'aggregate'
    o2_priority: str = 'lexicographic'

    @classmethod
    def create(cls, travel: TravelMatrix, origin: int, destination: int,
               candidates: Sequence[Delivery], rt: float, max_weight: float,
               max_dimension: float, destination_delivery: Optional[Delivery] = None,
               **weights) -> 'SrpSpec':
        """
        Build a spec from an instance-wide travel matrix.

        Args:
            travel: Matrix indexed by location id
            origin: Origin location id
            destination: Destination location id
            candidates: Deliveries that may be served on the way
            rt: Maximum duration
            max_weight: Usable weight capacity W
            max_dimension: Usable dimension capacity D
            destination_delivery: Delivery dropped at the destination, if any
            **weights: omega1, omega2, constraint_mode, o2_priority overrides

        Returns:
            SrpSpec with the slot-indexed sub-matrix
        """
        candidates = tuple(candidates)
        ids = [origin, destination] + [c.location.id for c in candidates]
        return cls(origin, destination, candidates, float(rt), float(max_weight),
                   float(max_dimension), travel.restrict(ids), destination_delivery, **weights)

    @property
    def M(self) -> int:  # pylint: disable=invalid-name
        """Highest slot index; slots and positions both run over 0..M."""
        return len(self.candidates) + 1

    @property
    def o2_weight(self) -> float:
        """
        Weight applied to o2 in the model and in route scores.

        Under lexicographic priority every feasible route has o1 <= rt, so a
        factor above omega1 * rt / omega2 makes one more served delivery worth
        more than any change in distance.
        """
        if self.o2_priority == 'weighted' or self.omega2 == 0:
            return self.omega2
        bound = self.rt + BOUND_TOLERANCE * max(1.0, abs(self.rt))
        return self.omega2 * (math.floor(self.omega1 * bound / self.omega2) + 1)

    @property
    def slot_locations(self) -> Tuple[int, ...]:
        """Location id of every slot."""
        return (self.origin, self.destination) + tuple(c.location.id for c in self.candidates)

    def slot_delivery(self, slot: int) -> Optional[Delivery]:
        """Delivery dropped when visiting a slot, None for the origin and a depot destination."""
        if slot == ORIGIN_SLOT:
            return None
        if slot == DESTINATION_SLOT:
            return self.destination_delivery
        return self.candidates[slot - FIRST_CANDIDATE_SLOT]

    @property
    def slot_weights(self) -> Tuple[float, ...]:
        """Load added by visiting each slot."""
        return tuple(d.weight if d else 0.0 for d in map(self.slot_delivery, range(self.M + 1)))

    @property
    def slot_dimensions(self) -> Tuple[float, ...]:
        """Volume added by visiting each slot."""
        return tuple(d.dimension if d else 0.0 for d in map(self.slot_delivery, range(self.M + 1)))

    def validate(self) -> None:
        """Raise SpecInvalid when the request breaks an invariant."""
        if self.rt <= 0:
            raise SpecInvalid(f"rt must be positive, got {self.rt}")
        if self.max_weight <= 0 or self.max_dimension <= 0:
            raise SpecInvalid(f"Capacities must be positive, got W={self.max_weight} D={self.max_dimension}")
        if self.travel.size != self.M + 1:
            raise SpecInvalid(f"Travel matrix has {self.travel.size} slots, expected {self.M + 1}")
        if self.constraint_mode not in CONSTRAINT_MODES:
            raise SpecInvalid(f"Unknown constraint mode '{self.constraint_mode}'")
        if self.o2_priority not in O2_PRIORITIES:
            raise SpecInvalid(f"Unknown o2 priority '{self.o2_priority}'")
        if self.omega1 < 0 or self.omega2 < 0:
            raise SpecInvalid("Objective weights must be non-negative")
        ids = [c.id for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise SpecInvalid("Candidate deliveries must be distinct")
        reserved = {self.origin, self.destination}
        if reserved.intersection(c.location.id for c in self.candidates):
            raise SpecInvalid("Origin and destination cannot also be candidates")
        if self.destination_delivery is not None and self.destination_delivery.location.id != self.destination:
            raise SpecInvalid("Destination delivery is not located at the destination")


@dataclass(frozen=True)
class SrpEncoding:
    """Bijection between (slot, position) pairs and variable indices."""
    M: int  # pylint: disable=invalid-name

    @property
    def num_variables(self) -> int:
        """(M+1) squared."""
        return (self.M + 1) ** 2

    def index(self, slot: int, position: int) -> int:
        """Variable index of x[slot, position]."""
        if not (0 <= slot <= self.M and 0 <= position <= self.M):
            raise IndexError(f"x[{slot}, {position}] outside 0..{self.M}")
        return slot * (self.M + 1) + position

    def pair(self, index: int) -> Tuple[int, int]:
        """(slot, position) of a variable index."""
        return divmod(index, self.M + 1)

    @property
    def fixed(self) -> Dict[int, int]:
        """x[0,0] = 1 and its consequences x[0,p] = 0 and x[i,0] = 0."""
        fixed = {self.index(ORIGIN_SLOT, 0): 1}
        for k in range(1, self.M + 1):
            fixed[self.index(ORIGIN_SLOT, k)] = 0
            fixed[self.index(k, 0)] = 0
        return fixed


@dataclass(frozen=True)
class SrpRoute:
    """A decoded (sub-)route."""
    slots: Tuple[int, ...]
    locations: Tuple[int, ...]
    served: Tuple[int, ...]
    legs: Tuple[float, ...]
    duration: float
    weight: float
    dimension: float
    o1: float
    o2: float
    score: float

    @property
    def destination_position(self) -> int:
        """Position of the destination slot."""
        return len(self.slots) - 1

    @property
    def extra_deliveries(self) -> int:
        """Candidates served before the destination."""
        return len(self.slots) - 2


def objective_o1(slots: Sequence[int], travel: TravelMatrix) -> float:
    """
    Total distance of consecutive visits.

    Args:
        slots: Visited slots (or location ids) in order
        travel: Matrix indexed like slots

    Returns:
        Sum of d[i, j] over consecutive visits
    """
    return travel.path_length(slots)


def objective_o2(destination_position: int, M: int) -> float:  # pylint: disable=invalid-name
    """Value of the destination-lateness objective with the destination at the given position."""
    if not 0 <= destination_position <= M:
        raise ValueError(f"Destination position {destination_position} outside 0..{M}")
    return -1.0 - (destination_position + 1)


def within_bound(value: float, bound: float) -> bool:
    """Compare against an upper bound with a relative tolerance."""
    return value <= bound + BOUND_TOLERANCE * max(1.0, abs(bound))


def _route_bounds_errors(spec: SrpSpec, duration: float, weight: float, dimension: float) -> List[str]:
    errors = []
    if not within_bound(duration, spec.rt):
        errors.append(f"duration {duration:g} exceeds rt {spec.rt:g}")
    if not within_bound(weight, spec.max_weight):
        errors.append(f"weight {weight:g} exceeds W {spec.max_weight:g}")
    if not within_bound(dimension, spec.max_dimension):
        errors.append(f"dimension {dimension:g} exceeds D {spec.max_dimension:g}")
    return errors


def route_from_slots(spec: SrpSpec, slots: Sequence[int], check_bounds: bool = True) -> SrpRoute:
    """
    Materialize a route from its slot sequence.

    Args:
        spec: Request the route belongs to
        slots: Origin slot first, destination slot last
        check_bounds: Reject routes beyond rt, W or D

    Returns:
        SrpRoute with legs, loads and objective values
    """
    slots = tuple(int(s) for s in slots)
    if len(slots) < 2 or slots[0] != ORIGIN_SLOT or slots[-1] != DESTINATION_SLOT:
        raise InfeasibleAssignment(f"Route {slots} must start at the origin and end at the destination")
    if len(set(slots)) != len(slots) or not all(0 <= s <= spec.M for s in slots):
        raise InfeasibleAssignment(f"Route {slots} repeats or invents slots")

    legs = tuple(spec.travel[a, b] for a, b in zip(slots, slots[1:]))
    duration = float(sum(legs))
    weights = spec.slot_weights
    dimensions = spec.slot_dimensions
    weight = float(sum(weights[s] for s in slots))
    dimension = float(sum(dimensions[s] for s in slots))
    if check_bounds:
        errors = _route_bounds_errors(spec, duration, weight, dimension)
        if errors:
            raise InfeasibleAssignment(f"Route {slots}: " + '; '.join(errors))

    o1 = duration
    o2 = objective_o2(len(slots) - 1, spec.M)
    served = tuple(d.id for d in map(spec.slot_delivery, slots[1:]) if d is not None)
    locations = tuple(spec.slot_locations[s] for s in slots)
    return SrpRoute(slots, locations, served, legs, duration, weight, dimension,
                    o1, o2, spec.omega1 * o1 + spec.o2_weight * o2)


def _leg_terms(spec: SrpSpec, encoding: SrpEncoding, positions: Sequence[int]):
    terms = []
    values = spec.travel.values
    size = spec.M + 1
    for p in positions:
        for i in range(size):
            for j in range(size):
                if i != j and values[i, j] != 0:
                    terms.append((encoding.index(i, p), encoding.index(j, p + 1), float(values[i, j])))
    return terms


def build_srp_model(spec: SrpSpec) -> Tuple[CqmModel, SrpEncoding]:
    """
    Build the CQM of a (sub-)route request.

    Args:
        spec: Request

    Returns:
        Tuple of (model reduced over the fixed variables, encoding)
    """
    spec.validate()
    M = spec.M  # pylint: disable=invalid-name
    encoding = SrpEncoding(M)
    builder = CqmBuilder(encoding.num_variables)
    x = encoding.index
    slots = range(M + 1)

    for u, v, distance in _leg_terms(spec, encoding, range(M)):
        builder.add_quadratic(u, v, spec.omega1 * distance)
    o2_weight = spec.o2_weight
    for q in slots:
        builder.add_linear(x(DESTINATION_SLOT, q), o2_weight * (-2.0 - q))

    for i in slots:
        builder.add_constraint(f"delivery-consistency-{i}", Sense.LE, 1,
                               linear=[(x(i, p), 1.0) for p in slots])
    for p in slots:
        builder.add_constraint(f"location-consistency-{p}", Sense.LE, 1,
                               linear=[(x(i, p), 1.0) for i in slots])
    for p in range(M):
        builder.add_constraint(f"delivery-consecutiveness-{p}", Sense.GE, 0,
                               linear=[(x(i, p), 1.0) for i in slots] + [(x(i, p + 1), -1.0) for i in slots])
    builder.add_constraint("destination-inclusion", Sense.EQ, 1,
                           linear=[(x(DESTINATION_SLOT, p), 1.0) for p in slots])

    weights = spec.slot_weights
    dimensions = spec.slot_dimensions
    if spec.constraint_mode == 'aggregate':
        builder.add_constraint("time-restriction", Sense.LE, spec.rt,
                               quadratic=_leg_terms(spec, encoding, range(M)))
        builder.add_constraint("weight-restriction", Sense.LE, spec.max_weight,
                               linear=[(x(i, p), weights[i]) for i in slots for p in slots if weights[i]])
        builder.add_constraint("dimension-restriction", Sense.LE, spec.max_dimension,
                               linear=[(x(i, p), dimensions[i]) for i in slots for p in slots if dimensions[i]])
    else:
        for p in range(M):
            builder.add_constraint(f"time-restriction-{p}", Sense.LE, spec.rt,
                                   quadratic=_leg_terms(spec, encoding, [p]))
        for i in slots:
            builder.add_constraint(f"weight-restriction-{i}", Sense.LE, spec.max_weight,
                                   linear=[(x(i, p), weights[i]) for p in slots if weights[i]])
        for i in slots:
            builder.add_constraint(f"dimension-restriction-{i}", Sense.LE, spec.max_dimension,
                                   linear=[(x(i, p), dimensions[i]) for p in slots if dimensions[i]])

    for index, value in encoding.fixed.items():
        builder.fix(index, value)
    model = builder.build()
    logger.debug("SRP model M=%s: %s variables, %s constraints, %s quadratic terms",
                 M, model.num_variables, model.num_constraints, len(model.quadratic))
    return model, encoding


def encode_route(encoding: SrpEncoding, slots: Sequence[int]) -> List[int]:
    """Assignment with x[slot, position] = 1 for every visit of the route."""
    assignment = [0] * encoding.num_variables
    for position, slot in enumerate(slots):
        assignment[encoding.index(slot, position)] = 1
    return assignment


def decode_assignment(encoding: SrpEncoding, assignment: Sequence[int], spec: SrpSpec) -> SrpRoute:
    """
    Read a route out of a solver assignment.

    Args:
        encoding: Variable map of the model
        assignment: 0/1 values, one per variable
        spec: Request the model was built from

    Returns:
        SrpRoute in position order

    Raises:
        DestinationNotLast: A slot is visited after the destination
        InfeasibleAssignment: Positions are not a prefix, a slot or position
            is used twice, or rt/W/D is exceeded
    """
    if len(assignment) != encoding.num_variables:
        raise LengthMismatch(
            f"Assignment has {len(assignment)} values, encoding has {encoding.num_variables} variables"
        )
    grid = np.asarray(assignment, dtype=int).reshape(encoding.M + 1, encoding.M + 1)
    if np.any(grid.sum(axis=1) > 1):
        raise InfeasibleAssignment("A slot is visited more than once")
    per_position = grid.sum(axis=0)
    if np.any(per_position > 1):
        raise InfeasibleAssignment("A position holds more than one slot")

    occupied = np.flatnonzero(per_position)
    if len(occupied) == 0 or not np.array_equal(occupied, np.arange(len(occupied))):
        raise InfeasibleAssignment(f"Occupied positions {occupied.tolist()} are not a prefix")
    slots = [int(np.flatnonzero(grid[:, p])[0]) for p in occupied]

    if grid[DESTINATION_SLOT].sum() != 1:
        raise InfeasibleAssignment("Destination is not in the route")
    if slots[-1] != DESTINATION_SLOT:
        raise DestinationNotLast(
            f"Destination at position {slots.index(DESTINATION_SLOT)}, route continues to {slots[-1]}"
        )
    return route_from_slots(spec, slots)
