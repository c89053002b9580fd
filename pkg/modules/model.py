"""
Problem Model

Domain types for 2DH-PDP instances (depot, deliveries, heterogeneous fleet),
the shared travel matrix, instance validation and the instance JSON format.
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import AsymmetricMatrix, InstanceFormatError, NegativeEntry

logger = logging.getLogger(__name__)

DEPOT_ID = 0
MATRIX_TOLERANCE = 1e-9

INSTANCE_FIELDS = ('name', 'depot', 'working_day', 'deliveries', 'trucks', 'travel_matrix')
DELIVERY_FIELDS = ('id', 'x', 'y', 'weight', 'dimension', 'tp_deadline', 'customer_id')
TRUCK_FIELDS = ('id', 'ownership', 'max_weight', 'max_dimension', 'rental_cost')


class Ownership(Enum):
    """Whether a truck belongs to the company or is rented for the day."""
    OWNED = 'owned'
    RENTAL = 'rental'


@dataclass(frozen=True)
class Location:
    """A point of the plane; id 0 is the depot, other ids match delivery ids."""
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Delivery:
    """A package to drop at a location, optionally Top-Priority."""
    id: int
    location: Location
    weight: float
    dimension: float
    tp_deadline: Optional[float] = None
    customer_id: int = 0

    @property
    def is_tp(self) -> bool:
        """True for Top-Priority deliveries."""
        return self.tp_deadline is not None


@dataclass(frozen=True)
class Truck:
    """A vehicle with two-dimensional capacity."""
    id: int
    ownership: Ownership
    max_weight: float
    max_dimension: float
    rental_cost: float = 0.0

    @property
    def is_rental(self) -> bool:
        """True for rented trucks."""
        return self.ownership is Ownership.RENTAL

    def fits(self, weight: float, dimension: float) -> bool:
        """Check whether a load fits in an empty truck."""
        return weight <= self.max_weight and dimension <= self.max_dimension


class TravelMatrix:
    """
    Square matrix over location ids. Entry (i, j) is both the distance and the
    travel time from i to j.
    """

    def __init__(self, values):
        array = np.array(values, dtype=float)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise InstanceFormatError(f"Travel matrix must be square, got shape {array.shape}")
        array.setflags(write=False)
        self._values = array

    @property
    def values(self) -> np.ndarray:
        """Read-only matrix values."""
        return self._values

    @property
    def size(self) -> int:
        """Number of locations covered by the matrix."""
        return self._values.shape[0]

    def __getitem__(self, key: Tuple[int, int]) -> float:
        return float(self._values[key])

    def __eq__(self, other) -> bool:
        if not isinstance(other, TravelMatrix):
            return NotImplemented
        return np.array_equal(self._values, other.values)

    def __hash__(self):
        return hash(self._values.tobytes())

    def restrict(self, location_ids: Sequence[int]) -> 'TravelMatrix':
        """
        Build the sub-matrix for an ordered list of locations.

        Args:
            location_ids: Location ids in slot order; repeated ids are allowed

        Returns:
            TravelMatrix indexed by slot position
        """
        index = np.asarray(location_ids, dtype=int)
        return TravelMatrix(self._values[np.ix_(index, index)])

    def path_length(self, stops: Sequence[int]) -> float:
        """Sum of consecutive legs along a sequence of location ids."""
        return float(sum(self._values[a, b] for a, b in zip(stops, stops[1:])))

    def to_list(self) -> List[List[float]]:
        """Row-major nested list."""
        return self._values.tolist()


@dataclass(frozen=True)
class ProblemInstance:
    """A complete 2DH-PDP day: depot, orders, fleet and working day."""
    depot: Location
    deliveries: Tuple[Delivery, ...]
    fleet: Tuple[Truck, ...]
    working_day: float
    travel: Optional[TravelMatrix] = None
    name: str = ''

    @property
    def tp_deliveries(self) -> List[Delivery]:
        """Top-Priority deliveries in id order."""
        return [d for d in self.deliveries if d.is_tp]

    def delivery(self, delivery_id: int) -> Delivery:
        """Look up a delivery by id."""
        for delivery in self.deliveries:
            if delivery.id == delivery_id:
                return delivery
        raise KeyError(f"Unknown delivery id {delivery_id}")

    def truck(self, truck_id: int) -> Truck:
        """Look up a truck by id."""
        for truck in self.fleet:
            if truck.id == truck_id:
                return truck
        raise KeyError(f"Unknown truck id {truck_id}")

    def location(self, location_id: int) -> Location:
        """Look up a location (depot or delivery) by id."""
        if location_id == DEPOT_ID:
            return self.depot
        return self.delivery(location_id).location


@dataclass(frozen=True)
class InstanceIssue:
    """One reason why an instance cannot be solved as given."""
    code: str
    message: str
    subject: Optional[int] = None


def _check_explicit_matrix(matrix: TravelMatrix, expected_size: int) -> None:
    values = matrix.values
    if matrix.size != expected_size:
        raise InstanceFormatError(
            f"Travel matrix has {matrix.size} rows, instance has {expected_size} locations"
        )
    if np.any(values < 0):
        i, j = np.argwhere(values < 0)[0]
        raise NegativeEntry(f"Negative travel entry at ({i}, {j}): {values[i, j]}")
    if not np.allclose(values, values.T, rtol=0.0, atol=MATRIX_TOLERANCE):
        i, j = np.argwhere(np.abs(values - values.T) > MATRIX_TOLERANCE)[0]
        raise AsymmetricMatrix(f"Travel entries ({i}, {j}) and ({j}, {i}) differ")
    if np.any(np.abs(np.diag(values)) > MATRIX_TOLERANCE):
        raise InstanceFormatError("Travel matrix diagonal must be zero")


def build_travel_matrix(instance: ProblemInstance) -> TravelMatrix:
    """
    Build the travel matrix of an instance.

    Args:
        instance: Problem instance

    Returns:
        The explicit matrix verbatim when one is given, otherwise Euclidean
        distances between the depot (row 0) and delivery locations (row = id)
    """
    size = len(instance.deliveries) + 1
    if instance.travel is not None:
        _check_explicit_matrix(instance.travel, size)
        return instance.travel

    coords = np.zeros((size, 2))
    coords[DEPOT_ID] = (instance.depot.x, instance.depot.y)
    for delivery in instance.deliveries:
        coords[delivery.id] = (delivery.location.x, delivery.location.y)
    delta = coords[:, None, :] - coords[None, :, :]
    return TravelMatrix(np.hypot(delta[..., 0], delta[..., 1]))


def _structural_issues(instance: ProblemInstance) -> List[InstanceIssue]:
    issues = []
    if instance.working_day <= 0:
        issues.append(InstanceIssue('NonPositiveWorkingDay',
                                    f"Working day must be positive, got {instance.working_day}"))
    if instance.depot.id != DEPOT_ID:
        issues.append(InstanceIssue('DepotId', f"Depot id must be 0, got {instance.depot.id}"))

    ids = sorted(d.id for d in instance.deliveries)
    if ids != list(range(1, len(ids) + 1)):
        issues.append(InstanceIssue('NonDenseIds', "Delivery ids must be exactly 1..M"))

    for delivery in instance.deliveries:
        if delivery.location.id != delivery.id:
            issues.append(InstanceIssue('LocationId',
                                        f"Delivery {delivery.id} has location id {delivery.location.id}",
                                        delivery.id))
        if delivery.weight <= 0:
            issues.append(InstanceIssue('NonPositiveWeight',
                                        f"Delivery {delivery.id} weight must be positive", delivery.id))
        if delivery.dimension <= 0:
            issues.append(InstanceIssue('NonPositiveDimension',
                                        f"Delivery {delivery.id} dimension must be positive", delivery.id))
        if delivery.is_tp:
            if delivery.tp_deadline <= 0:
                issues.append(InstanceIssue('NonPositiveDeadline',
                                            f"Delivery {delivery.id} deadline must be positive",
                                            delivery.id))
            elif delivery.tp_deadline > instance.working_day:
                issues.append(InstanceIssue('DeadlineAfterWorkingDay',
                                            f"Delivery {delivery.id} deadline {delivery.tp_deadline} "
                                            f"exceeds working day {instance.working_day}", delivery.id))

    if not instance.fleet:
        issues.append(InstanceIssue('EmptyFleet', "Fleet has no trucks"))
    truck_ids = [t.id for t in instance.fleet]
    if len(set(truck_ids)) != len(truck_ids):
        issues.append(InstanceIssue('DuplicateTruckId', "Truck ids must be unique"))
    for truck in instance.fleet:
        if truck.max_weight <= 0 or truck.max_dimension <= 0:
            issues.append(InstanceIssue('InvalidTruck',
                                        f"Truck {truck.id} capacities must be positive", truck.id))
        if truck.rental_cost < 0:
            issues.append(InstanceIssue('InvalidTruck',
                                        f"Truck {truck.id} rental cost must be non-negative", truck.id))
        if truck.ownership is Ownership.OWNED and truck.rental_cost != 0:
            issues.append(InstanceIssue('InvalidTruck',
                                        f"Owned truck {truck.id} must have zero rental cost", truck.id))
    return issues


def validate_instance(instance: ProblemInstance) -> List[InstanceIssue]:
    """
    Check every instance invariant without raising.

    Args:
        instance: Problem instance

    Returns:
        List of issues; empty when the instance can be handed to the solver
    """
    issues = _structural_issues(instance)

    for delivery in instance.deliveries:
        if instance.fleet and not any(t.fits(delivery.weight, delivery.dimension) for t in instance.fleet):
            issues.append(InstanceIssue('UnservableDelivery',
                                        f"Delivery {delivery.id} ({delivery.weight} kg, "
                                        f"{delivery.dimension} cm3) fits in no truck", delivery.id))

    if any(issue.code == 'NonDenseIds' for issue in issues):
        return issues
    try:
        travel = build_travel_matrix(instance)
    except (AsymmetricMatrix, NegativeEntry, InstanceFormatError) as exc:
        issues.append(InstanceIssue(type(exc).__name__, str(exc)))
        return issues

    for delivery in instance.deliveries:
        if not delivery.is_tp or not 0 < delivery.id < travel.size:
            continue
        arrival = travel[DEPOT_ID, delivery.id]
        if arrival > delivery.tp_deadline:
            issues.append(InstanceIssue('UnreachableDeadline',
                                        f"Delivery {delivery.id} needs {arrival:.2f} from the depot "
                                        f"but its deadline is {delivery.tp_deadline}", delivery.id))
    return issues


def _require(data: Dict, key: str, where: str):
    if key not in data:
        raise InstanceFormatError(f"Missing field '{key}' in {where}")
    return data[key]


def _unknown_fields(data: Dict, known: Sequence[str], where: str) -> List[str]:
    return [f"Unknown field '{key}' in {where}" for key in data if key not in known]


def instance_from_dict(data: Dict) -> Tuple[ProblemInstance, List[str]]:
    """
    Parse an instance document.

    Args:
        data: Decoded instance JSON

    Returns:
        Tuple of (instance, warnings about ignored unknown fields)
    """
    if not isinstance(data, dict):
        raise InstanceFormatError("Instance document must be a JSON object")
    warnings = _unknown_fields(data, INSTANCE_FIELDS, 'instance')

    depot_data = _require(data, 'depot', 'instance')
    warnings += _unknown_fields(depot_data, ('x', 'y'), 'depot')
    depot = Location(DEPOT_ID, float(_require(depot_data, 'x', 'depot')),
                     float(_require(depot_data, 'y', 'depot')))

    deliveries = []
    for raw in _require(data, 'deliveries', 'instance'):
        delivery_id = int(_require(raw, 'id', 'delivery'))
        where = f"delivery {delivery_id}"
        warnings += _unknown_fields(raw, DELIVERY_FIELDS, where)
        deadline = raw.get('tp_deadline')
        deliveries.append(Delivery(
            id=delivery_id,
            location=Location(delivery_id, float(_require(raw, 'x', where)), float(_require(raw, 'y', where))),
            weight=float(_require(raw, 'weight', where)),
            dimension=float(_require(raw, 'dimension', where)),
            tp_deadline=None if deadline is None else float(deadline),
            customer_id=int(raw.get('customer_id', delivery_id)),
        ))

    fleet = []
    for raw in _require(data, 'trucks', 'instance'):
        truck_id = int(_require(raw, 'id', 'truck'))
        where = f"truck {truck_id}"
        warnings += _unknown_fields(raw, TRUCK_FIELDS, where)
        try:
            ownership = Ownership(str(_require(raw, 'ownership', where)).lower())
        except ValueError as exc:
            raise InstanceFormatError(f"Invalid ownership for {where}: {raw['ownership']}") from exc
        fleet.append(Truck(
            id=truck_id,
            ownership=ownership,
            max_weight=float(_require(raw, 'max_weight', where)),
            max_dimension=float(_require(raw, 'max_dimension', where)),
            rental_cost=float(raw.get('rental_cost', 0.0)),
        ))

    travel = None
    if data.get('travel_matrix') is not None:
        travel = TravelMatrix(data['travel_matrix'])

    instance = ProblemInstance(
        depot=depot,
        deliveries=tuple(sorted(deliveries, key=lambda d: d.id)),
        fleet=tuple(fleet),
        working_day=float(_require(data, 'working_day', 'instance')),
        travel=travel,
        name=str(data.get('name', '')),
    )
    for warning in warnings:
        logger.warning(warning)
    return instance, warnings


def instance_to_dict(instance: ProblemInstance) -> Dict:
    """Serialize an instance with a fixed key order."""
    data = {
        'name': instance.name,
        'depot': {'x': instance.depot.x, 'y': instance.depot.y},
        'working_day': instance.working_day,
        'deliveries': [
            {
                'id': d.id,
                'x': d.location.x,
                'y': d.location.y,
                'weight': d.weight,
                'dimension': d.dimension,
                'tp_deadline': d.tp_deadline,
                'customer_id': d.customer_id,
            }
            for d in instance.deliveries
        ],
        'trucks': [
            {
                'id': t.id,
                'ownership': t.ownership.value,
                'max_weight': t.max_weight,
                'max_dimension': t.max_dimension,
                'rental_cost': t.rental_cost,
            }
            for t in instance.fleet
        ],
    }
    if instance.travel is not None:
        data['travel_matrix'] = instance.travel.to_list()
    return data


def load_instance(path: str) -> ProblemInstance:
    """Read an instance JSON file."""
    try:
        with open(path, 'r', encoding='utf-8') as file:
            data = json.load(file)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"Invalid JSON in {path}: {exc}") from exc
    instance, _ = instance_from_dict(data)
    return instance


def save_instance(instance: ProblemInstance, path: str) -> None:
    """Write an instance JSON file."""
    with open(path, 'w', encoding='utf-8') as file:
        json.dump(instance_to_dict(instance), file, indent=2)
        file.write('\n')


@dataclass
class InstanceSummary:
    """Counts used in logs and report headers."""
    deliveries: int
    tp_deliveries: int
    owned: int
    rental: int
    working_day: float

    @classmethod
    def of(cls, instance: ProblemInstance) -> 'InstanceSummary':
        """Summarize an instance."""
        owned = sum(1 for t in instance.fleet if not t.is_rental)
        return cls(
            deliveries=len(instance.deliveries),
            tp_deliveries=len(instance.tp_deliveries),
            owned=owned,
            rental=len(instance.fleet) - owned,
            working_day=instance.working_day,
        )

    @property
    def fleet_label(self) -> str:
        """Fleet as printed in benchmark tables, e.g. '2o,3r'."""
        return f"{self.owned}o,{self.rental}r"
