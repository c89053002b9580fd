"""
Instance Generator

Seeded synthetic 2DH-PDP instances. Named profiles follow the six benchmark
instances (deliveries, TP count, fleet mix, working day); their geometry is a
peripheral depot serving a delivery district wide enough that visiting order
matters.
"""

import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Tuple

import numpy as np
import yaml

from .errors import ProfileInvalid
from .model import DEPOT_ID, Delivery, Location, Ownership, ProblemInstance, Truck, validate_instance

logger = logging.getLogger(__name__)

COORDINATE_DECIMALS = 4
MIN_TP_GAP = 1e-3
PLACEMENT_ATTEMPTS = 100


@dataclass(frozen=True)
class InstanceProfile:
    """Recipe for a generated instance."""
    name: str
    deliveries: int
    tp_count: int
    owned: int
    rental: int
    working_day: float
    seed: int = 0
    depot_distance: float = 50.0
    district_radius: Optional[float] = 20.0
    coordinate_bound: float = 100.0
    weight_range: Tuple[float, float] = (20.0, 250.0)
    dimension_range: Tuple[float, float] = (5.0e4, 1.5e6)
    owned_weight_range: Tuple[float, float] = (1000.0, 1500.0)
    rental_weight_range: Tuple[float, float] = (1500.0, 2000.0)
    owned_dimension_range: Tuple[float, float] = (8.0e6, 1.2e7)
    rental_dimension_range: Tuple[float, float] = (1.2e7, 1.6e7)
    rental_cost_range: Tuple[float, float] = (50.0, 150.0)
    load_ratio: float = 0.5
    duplicate_customers: int = 0
    separate_tps: bool = False
    tp_slack_range: Tuple[float, float] = (0.25, 0.75)

    def validate(self) -> None:
        """Raise ProfileInvalid when the profile cannot produce an instance."""
        if self.deliveries < 1:
            raise ProfileInvalid(f"{self.name}: at least one delivery is needed")
        if not 0 <= self.tp_count <= self.deliveries:
            raise ProfileInvalid(f"{self.name}: tp_count must be within 0..{self.deliveries}")
        if self.owned < 0 or self.rental < 0 or self.owned + self.rental == 0:
            raise ProfileInvalid(f"{self.name}: fleet must have at least one truck")
        if self.working_day <= 0:
            raise ProfileInvalid(f"{self.name}: working day must be positive")
        if self.seed < 0:
            raise ProfileInvalid(f"{self.name}: seed must be non-negative")
        if not 0 < self.load_ratio <= 1:
            raise ProfileInvalid(f"{self.name}: load_ratio must be in (0, 1]")
        if not 0 <= self.duplicate_customers <= (self.deliveries - self.tp_count) // 2:
            raise ProfileInvalid(f"{self.name}: too many duplicate customers")
        for label in ('weight_range', 'dimension_range', 'owned_weight_range', 'rental_weight_range',
                      'owned_dimension_range', 'rental_dimension_range', 'rental_cost_range'):
            low, high = getattr(self, label)
            if low <= 0 or low > high:
                raise ProfileInvalid(f"{self.name}: {label} must be positive and ordered")
        low, high = self.tp_slack_range
        if not 0 <= low <= high <= 1:
            raise ProfileInvalid(f"{self.name}: tp_slack_range must lie within [0, 1] and be ordered")
        if self.district_radius is not None:
            if self.district_radius <= 0 or self.depot_distance <= self.district_radius:
                raise ProfileInvalid(f"{self.name}: district must lie away from the depot")
            if self.working_day < 2 * (self.depot_distance + self.district_radius):
                raise ProfileInvalid(f"{self.name}: working day too short to reach the district")
        named = NAMED_PROFILES.get(self.name)
        if named is not None and _counts(named) != _counts(self):
            raise ProfileInvalid(f"{self.name}: counts differ from the named profile {_counts(named)}")

    @classmethod
    def from_dict(cls, data: Dict) -> 'InstanceProfile':
        """Build a profile from a mapping, e.g. a YAML document."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ProfileInvalid(f"Unknown profile fields: {unknown}")
        values = dict(data)
        for key, value in values.items():
            if key.endswith('_range'):
                values[key] = tuple(float(v) for v in value)
        try:
            return cls(**values)
        except TypeError as exc:
            raise ProfileInvalid(f"Incomplete profile: {exc}") from exc

    def to_dict(self) -> Dict:
        """Plain mapping of all fields."""
        data = asdict(self)
        return {key: list(value) if isinstance(value, tuple) else value for key, value in data.items()}


def _counts(profile: InstanceProfile) -> Tuple[int, int, int, int, float]:
    return profile.deliveries, profile.tp_count, profile.owned, profile.rental, profile.working_day


NAMED_PROFILES: Dict[str, InstanceProfile] = {
    profile.name: profile for profile in (
        InstanceProfile('D14_P1', 14, 1, 2, 3, 480.0, seed=1401, depot_distance=52.0, district_radius=20.0),
        InstanceProfile('D16_P1', 16, 1, 0, 4, 90.0, seed=1601, depot_distance=25.0, district_radius=8.0,
                        duplicate_customers=1),
        InstanceProfile('D14_P2', 14, 2, 2, 3, 480.0, seed=1402, depot_distance=61.0, district_radius=20.0,
                        duplicate_customers=1, separate_tps=True),
        InstanceProfile('D21_P2', 21, 2, 3, 2, 480.0, seed=2102, depot_distance=52.0, district_radius=20.0,
                        separate_tps=True),
        InstanceProfile('D21_P0', 21, 0, 2, 2, 480.0, seed=2100, depot_distance=64.0, district_radius=20.0),
        InstanceProfile('D29_P0', 29, 0, 0, 4, 480.0, seed=2900, depot_distance=70.0, district_radius=20.0),
    )
}


def named_profile(name: str, seed: Optional[int] = None) -> InstanceProfile:
    """
    Look up one of the six benchmark profiles.

    Args:
        name: Profile name such as 'D14_P1'
        seed: Replacement seed, keeping the in-repo seed when None

    Returns:
        InstanceProfile
    """
    if name not in NAMED_PROFILES:
        raise ProfileInvalid(f"Unknown profile '{name}'; choose from {sorted(NAMED_PROFILES)}")
    profile = NAMED_PROFILES[name]
    if seed is None:
        return profile
    return InstanceProfile.from_dict({**profile.to_dict(), 'seed': seed})


def load_profile(reference: str, seed: Optional[int] = None) -> InstanceProfile:
    """Named profile, or a YAML/JSON profile file."""
    if reference in NAMED_PROFILES:
        return named_profile(reference, seed)
    try:
        with open(reference, 'r', encoding='utf-8') as file:
            data = yaml.safe_load(file)
    except FileNotFoundError as exc:
        raise ProfileInvalid(f"'{reference}' is neither a named profile nor a profile file") from exc
    except yaml.YAMLError as exc:
        raise ProfileInvalid(f"Cannot parse profile file {reference}: {exc}") from exc
    if not isinstance(data, dict):
        raise ProfileInvalid(f"Profile file {reference} must contain a mapping")
    if seed is not None:
        data['seed'] = seed
    return InstanceProfile.from_dict(data)


def _uniform(rng: np.random.Generator, bounds: Tuple[float, float], size: int) -> np.ndarray:
    return rng.uniform(bounds[0], bounds[1], size)


def _place_deliveries(profile: InstanceProfile, rng: np.random.Generator) -> np.ndarray:
    count = profile.deliveries
    if profile.district_radius is None:
        return rng.uniform(-profile.coordinate_bound, profile.coordinate_bound, (count, 2))
    angle = rng.uniform(0.0, 2.0 * math.pi)
    centre = profile.depot_distance * np.array([math.cos(angle), math.sin(angle)])
    radius = profile.district_radius * np.sqrt(rng.uniform(0.0, 1.0, count))
    theta = rng.uniform(0.0, 2.0 * math.pi, count)
    return centre + np.column_stack((radius * np.cos(theta), radius * np.sin(theta)))


def _tp_gaps(coords: np.ndarray, tp_rows: List[int]) -> List[float]:
    """For each TP, half the smallest detour via another TP."""
    gaps = []
    for j in tp_rows:
        detours = [np.linalg.norm(coords[i]) + np.linalg.norm(coords[i] - coords[j]) - np.linalg.norm(coords[j])
                   for i in tp_rows if i != j]
        gaps.append(0.5 * min(detours))
    return gaps


def _fleet(profile: InstanceProfile, rng: np.random.Generator) -> List[Truck]:
    trucks = []
    for index in range(profile.owned + profile.rental):
        owned = index < profile.owned
        weight_range = profile.owned_weight_range if owned else profile.rental_weight_range
        dimension_range = profile.owned_dimension_range if owned else profile.rental_dimension_range
        trucks.append(Truck(
            id=index + 1,
            ownership=Ownership.OWNED if owned else Ownership.RENTAL,
            max_weight=round(float(rng.uniform(*weight_range)), -1),
            max_dimension=round(float(rng.uniform(*dimension_range)), -4),
            rental_cost=0.0 if owned else round(float(rng.uniform(*profile.rental_cost_range)), 2),
        ))
    return trucks


def generate_instance(profile: InstanceProfile) -> ProblemInstance:
    """
    Generate an instance from a profile.

    Args:
        profile: Named or custom profile

    Returns:
        ProblemInstance; identical for identical profiles

    Raises:
        ProfileInvalid: The profile is inconsistent or produced an unsolvable instance
    """
    profile.validate()
    rng = np.random.default_rng(profile.seed)
    fleet = _fleet(profile, rng)

    tp_rows = list(range(profile.tp_count))
    for _ in range(PLACEMENT_ATTEMPTS):
        coords = np.round(_place_deliveries(profile, rng), COORDINATE_DECIMALS)
        if not profile.separate_tps or len(tp_rows) < 2 or min(_tp_gaps(coords, tp_rows)) > MIN_TP_GAP:
            break
    else:
        raise ProfileInvalid(f"{profile.name}: cannot place TP deliveries far enough apart")

    weights = _uniform(rng, profile.weight_range, profile.deliveries)
    dimensions = _uniform(rng, profile.dimension_range, profile.deliveries)
    weight_scale = min(1.0, profile.load_ratio * sum(t.max_weight for t in fleet) / weights.sum())
    dimension_scale = min(1.0, profile.load_ratio * sum(t.max_dimension for t in fleet) / dimensions.sum())
    weights = np.round(weights * weight_scale, 1)
    dimensions = np.round(dimensions * dimension_scale, -3)

    # Duplicate customers place their second order on the first one's spot.
    customers = list(range(1, profile.deliveries + 1))
    regular_rows = list(range(profile.tp_count, profile.deliveries))
    for pair in range(profile.duplicate_customers):
        first, second = regular_rows[2 * pair], regular_rows[2 * pair + 1]
        coords[second] = coords[first]
        customers[second] = customers[first]

    deadlines: Dict[int, float] = {}
    gaps = _tp_gaps(coords, tp_rows) if profile.separate_tps and len(tp_rows) > 1 else None
    for position, row in enumerate(tp_rows):
        direct = float(np.linalg.norm(coords[row]))
        if gaps is not None:
            slack = gaps[position]
        else:
            share = float(rng.uniform(*profile.tp_slack_range))
            slack = share * max(profile.working_day - 2.0 * direct, 0.0)
        deadlines[row] = round(min(direct + slack, profile.working_day), COORDINATE_DECIMALS)
        if deadlines[row] < direct:
            deadlines[row] = math.ceil(direct * 10 ** COORDINATE_DECIMALS) / 10 ** COORDINATE_DECIMALS

    deliveries = []
    for row in range(profile.deliveries):
        delivery_id = row + 1
        deliveries.append(Delivery(
            id=delivery_id,
            location=Location(delivery_id, float(coords[row, 0]), float(coords[row, 1])),
            weight=float(weights[row]),
            dimension=float(dimensions[row]),
            tp_deadline=deadlines.get(row),
            customer_id=customers[row],
        ))

    instance = ProblemInstance(
        depot=Location(DEPOT_ID, 0.0, 0.0),
        deliveries=tuple(deliveries),
        fleet=tuple(fleet),
        working_day=float(profile.working_day),
        name=profile.name,
    )
    issues = validate_instance(instance)
    if issues:
        raise ProfileInvalid(f"{profile.name}: generated instance is invalid: "
                             + '; '.join(issue.message for issue in issues))
    logger.info("Generated %s (seed %s): %s deliveries, %s TP, fleet %so,%sr",
                profile.name, profile.seed, profile.deliveries, profile.tp_count,
                profile.owned, profile.rental)
    return instance
