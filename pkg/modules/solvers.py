"""
SRP Solvers

Exact enumeration and simulated annealing over route space. Both search
ordered subsets of candidate slots with the destination appended last and
score them like the SRP model does; solve() re-checks the winner against
the built CQM before returning it.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .cqm import CqmModel, check_feasibility, default_penalty_weight, is_feasible, respects_fixed
from .errors import NoFeasibleRoute, TooLarge
from .srp import (DESTINATION_SLOT, FIRST_CANDIDATE_SLOT, ORIGIN_SLOT, SrpEncoding, SrpRoute, SrpSpec,
                  build_srp_model, encode_route, objective_o2, route_from_slots, within_bound)

logger = logging.getLogger(__name__)

DEFAULT_EXACT_THRESHOLD = 9
MAX_SERVABLE_LIMIT = 16
POLISH_EPSILON = 1e-12

RouteKey = Tuple[float, float, Tuple[int, ...]]


class Backend(Enum):
    """Which solver handles an SRP."""
    EXACT = 'exact'
    ANNEAL = 'anneal'
    AUTO = 'auto'


@dataclass(frozen=True)
class AnnealConfig:
    """Simulated annealing budget and schedule."""
    restarts: int = 32
    steps: int = 20000
    initial_temperature: Optional[float] = None
    final_temperature_ratio: float = 1e-3
    penalty_weight: Optional[float] = None
    polish: bool = True


@dataclass(frozen=True)
class SolverConfig:
    """Backend selection and solver parameters."""
    backend: Backend = Backend.AUTO
    seed: int = 0
    exact_threshold: int = DEFAULT_EXACT_THRESHOLD
    workers: int = 1
    anneal: AnnealConfig = field(default_factory=AnnealConfig)

    def validate(self) -> None:
        """Raise ValueError on an unusable configuration."""
        if self.seed < 0:
            raise ValueError(f"Seed must be non-negative, got {self.seed}")
        if self.exact_threshold < 0:
            raise ValueError(f"Exact threshold must be non-negative, got {self.exact_threshold}")
        if self.workers < 1:
            raise ValueError(f"Workers must be at least 1, got {self.workers}")
        if self.anneal.restarts < 1 or self.anneal.steps < 1:
            raise ValueError("Annealing needs at least one restart and one step")
        if self.anneal.initial_temperature is not None and self.anneal.initial_temperature <= 0:
            raise ValueError("Initial temperature must be positive")
        if not 0 < self.anneal.final_temperature_ratio < 1:
            raise ValueError("Final temperature ratio must be in (0, 1) so temperatures decrease")
        if self.anneal.penalty_weight is not None and self.anneal.penalty_weight <= 0:
            raise ValueError("Penalty weight must be positive")

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> 'SolverConfig':
        """Build from the solver block of config.yaml."""
        data = dict(data or {})
        anneal = dict(data.pop('anneal', None) or {})
        config = cls(
            backend=Backend(str(data.get('backend', Backend.AUTO.value)).lower()),
            seed=int(data.get('seed', 0)),
            exact_threshold=int(data.get('exact_threshold', DEFAULT_EXACT_THRESHOLD)),
            workers=int(data.get('workers', 1)),
            anneal=AnnealConfig(**anneal),
        )
        config.validate()
        return config


@dataclass(frozen=True)
class SolveStats:
    """Work done by one solve; wall time is informational only."""
    backend: str
    evaluations: int
    restarts: int
    best_by_restart: Tuple[float, ...] = ()
    wall_time: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class SolveResult:
    """Best route of a solve."""
    route: SrpRoute
    objective: float
    feasible: bool
    stats: SolveStats


class RouteScorer:
    """Route-space view of an SRP: loads, durations and the scalar objective."""

    def __init__(self, spec: SrpSpec):
        self.spec = spec
        self.distance = spec.travel.values.tolist()
        self.weights = spec.slot_weights
        self.dimensions = spec.slot_dimensions
        self.candidates = list(range(FIRST_CANDIDATE_SLOT, spec.M + 1))
        self.o2_weight = spec.o2_weight

    def duration(self, sequence: Sequence[int]) -> float:
        """Travel time from the origin through the sequence to the destination."""
        total = 0.0
        previous = ORIGIN_SLOT
        for slot in sequence:
            total += self.distance[previous][slot]
            previous = slot
        return total + self.distance[previous][DESTINATION_SLOT]

    def load(self, sequence: Sequence[int]) -> Tuple[float, float]:
        """(weight, dimension) including the destination."""
        weight = self.weights[DESTINATION_SLOT] + sum(self.weights[s] for s in sequence)
        dimension = self.dimensions[DESTINATION_SLOT] + sum(self.dimensions[s] for s in sequence)
        return weight, dimension

    def score(self, o1: float, served: int) -> float:
        """omega1*o1 + o2 weight * o2 for a route with this many candidates."""
        return self.spec.omega1 * o1 + self.o2_weight * objective_o2(served + 1, self.spec.M)

    def violations(self, sequence: Sequence[int]) -> Tuple[float, float, float, float]:
        """(o1, time excess, weight excess, dimension excess)."""
        o1 = self.duration(sequence)
        weight, dimension = self.load(sequence)
        return (o1, max(0.0, o1 - self.spec.rt), max(0.0, weight - self.spec.max_weight),
                max(0.0, dimension - self.spec.max_dimension))

    def feasible(self, sequence: Sequence[int]) -> bool:
        """Whether the route respects rt, W and D."""
        weight, dimension = self.load(sequence)
        return (within_bound(self.duration(sequence), self.spec.rt)
                and within_bound(weight, self.spec.max_weight)
                and within_bound(dimension, self.spec.max_dimension))

    def key(self, sequence: Sequence[int]) -> RouteKey:
        """Ordering key: score, then o1, then the visit sequence."""
        o1 = self.duration(sequence)
        slots = (ORIGIN_SLOT,) + tuple(sequence) + (DESTINATION_SLOT,)
        return self.score(o1, len(sequence)), o1, slots


def _no_route(spec: SrpSpec, backend: str) -> NoFeasibleRoute:
    return NoFeasibleRoute(
        "No route satisfies rt, W and D",
        {'backend': backend, 'origin': spec.origin, 'destination': spec.destination,
         'rt': round(spec.rt, 6), 'W': round(spec.max_weight, 6), 'D': round(spec.max_dimension, 6),
         'candidates': len(spec.candidates)},
    )


def solve_exact(spec: SrpSpec, exact_threshold: int = DEFAULT_EXACT_THRESHOLD) -> SolveResult:
    """
    Enumerate every ordered subset of candidates.

    Args:
        spec: SRP request
        exact_threshold: Largest M accepted

    Returns:
        SolveResult with the optimum under (score, o1, sequence) ordering

    Raises:
        TooLarge: M exceeds the threshold
        NoFeasibleRoute: Not even the direct leg fits
    """
    spec.validate()
    if spec.M > exact_threshold:
        raise TooLarge(f"M={spec.M} exceeds exact threshold {exact_threshold}")
    started = time.perf_counter()
    scorer = RouteScorer(spec)
    distance = scorer.distance
    rt, max_weight, max_dimension = spec.rt, spec.max_weight, spec.max_dimension
    base_weight = scorer.weights[DESTINATION_SLOT]
    base_dimension = scorer.dimensions[DESTINATION_SLOT]

    best: Optional[RouteKey] = None
    evaluations = 0
    path: List[int] = []
    used = [False] * (spec.M + 1)

    def extend(last: int, elapsed: float, weight: float, dimension: float) -> None:
        nonlocal best, evaluations
        o1 = elapsed + distance[last][DESTINATION_SLOT]
        evaluations += 1
        if within_bound(o1, rt):
            key = (scorer.score(o1, len(path)), o1, (ORIGIN_SLOT,) + tuple(path) + (DESTINATION_SLOT,))
            if best is None or key < best:
                best = key
        for slot in scorer.candidates:
            if used[slot]:
                continue
            reach = elapsed + distance[last][slot]
            new_weight = weight + scorer.weights[slot]
            new_dimension = dimension + scorer.dimensions[slot]
            if not (within_bound(reach, rt) and within_bound(new_weight, max_weight)
                    and within_bound(new_dimension, max_dimension)):
                continue
            used[slot] = True
            path.append(slot)
            extend(slot, reach, new_weight, new_dimension)
            path.pop()
            used[slot] = False

    if within_bound(base_weight, max_weight) and within_bound(base_dimension, max_dimension):
        extend(ORIGIN_SLOT, 0.0, base_weight, base_dimension)
    if best is None:
        raise _no_route(spec, Backend.EXACT.value)

    route = route_from_slots(spec, best[2])
    stats = SolveStats(Backend.EXACT.value, evaluations, 0, (), time.perf_counter() - started)
    logger.debug("Exact SRP M=%s: %s routes scored, best %.4f", spec.M, evaluations, route.score)
    return SolveResult(route, route.score, True, stats)


def _restart_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng([seed, restart])


def _position(rng: np.random.Generator, length: int) -> int:
    """Uniform index in 0..length-1."""
    return int(rng.integers(length))


def _greedy_start(scorer: RouteScorer, rng: np.random.Generator) -> List[int]:
    """Randomized cheapest insertion that keeps the route feasible."""
    order = [scorer.candidates[i] for i in rng.permutation(len(scorer.candidates))]
    sequence: List[int] = []
    for slot in order:
        best_position, best_duration = None, None
        for position in range(len(sequence) + 1):
            trial = sequence[:position] + [slot] + sequence[position:]
            if not scorer.feasible(trial):
                continue
            duration = scorer.duration(trial)
            if best_duration is None or duration < best_duration:
                best_position, best_duration = position, duration
        if best_position is not None:
            sequence.insert(best_position, slot)
    return sequence


def _propose(sequence: List[int], candidates: Sequence[int], rng: np.random.Generator) -> Optional[List[int]]:
    served = set(sequence)
    unserved = [s for s in candidates if s not in served]
    moves = []
    if unserved:
        moves.append('insert')
    if sequence:
        moves.append('remove')
    if sequence and unserved:
        moves.append('exchange')
    if len(sequence) >= 2:
        moves.extend(('swap', 'relocate', 'reverse'))
    if not moves:
        return None
    move = moves[_position(rng, len(moves))]
    candidate = list(sequence)
    if move == 'insert':
        candidate.insert(_position(rng, len(candidate) + 1), unserved[_position(rng, len(unserved))])
    elif move == 'remove':
        del candidate[_position(rng, len(candidate))]
    elif move == 'exchange':
        candidate[_position(rng, len(candidate))] = unserved[_position(rng, len(unserved))]
    elif move == 'swap':
        i, j = (int(k) for k in rng.choice(len(candidate), size=2, replace=False))
        candidate[i], candidate[j] = candidate[j], candidate[i]
    elif move == 'relocate':
        slot = candidate.pop(_position(rng, len(candidate)))
        candidate.insert(_position(rng, len(candidate) + 1), slot)
    else:
        i, j = sorted(int(k) for k in rng.choice(len(candidate), size=2, replace=False))
        candidate[i:j + 1] = candidate[i:j + 1][::-1]
    return candidate


def _reorderings(sequence: Sequence[int]) -> Iterator[List[int]]:
    """Every segment reversal, then every single relocation."""
    size = len(sequence)
    for i in range(size - 1):
        for j in range(i + 1, size):
            yield list(sequence[:i]) + list(sequence[i:j + 1])[::-1] + list(sequence[j + 1:])
    for i in range(size):
        rest = list(sequence[:i]) + list(sequence[i + 1:])
        for j in range(size):
            if j != i:
                yield rest[:j] + [sequence[i]] + rest[j:]


def _polish(scorer: RouteScorer, sequence: Sequence[int]) -> List[int]:
    """First-improvement descent on duration; the served set and loads stay fixed."""
    best = list(sequence)
    length = scorer.duration(best)
    improved = True
    while improved:
        improved = False
        for trial in _reorderings(best):
            duration = scorer.duration(trial)
            if duration < length - POLISH_EPSILON:
                best, length, improved = trial, duration, True
                break
    return best


def _anneal_restart(spec: SrpSpec, anneal: AnnealConfig, penalty_weight: float,
                    seed: int, restart: int) -> Tuple[Optional[RouteKey], int]:
    """One annealing run; returns (best feasible key or None, evaluations)."""
    rng = _restart_rng(seed, restart)
    scorer = RouteScorer(spec)

    def energy(sequence: Sequence[int]) -> Tuple[float, bool]:
        o1, over_time, over_weight, over_dimension = scorer.violations(sequence)
        penalty = over_time ** 2 + over_weight ** 2 + over_dimension ** 2
        return scorer.score(o1, len(sequence)) + penalty_weight * penalty, scorer.feasible(sequence)

    t_initial = anneal.initial_temperature or float(spec.travel.values.max()) or 1.0
    cooling = anneal.final_temperature_ratio ** (1.0 / max(anneal.steps - 1, 1))

    sequence = _greedy_start(scorer, rng)
    current, feasible = energy(sequence)
    evaluations = 1
    best = scorer.key(sequence) if feasible else None
    temperature = t_initial

    for _ in range(anneal.steps):
        candidate = _propose(sequence, scorer.candidates, rng)
        if candidate is None:
            break
        value, feasible = energy(candidate)
        evaluations += 1
        delta = value - current
        if delta <= 0 or rng.random() < math.exp(-delta / temperature):
            sequence, current = candidate, value
            if feasible:
                key = scorer.key(sequence)
                if best is None or key < best:
                    best = key
        temperature *= cooling
    if best is not None and anneal.polish:
        polished = _polish(scorer, best[2][1:-1])
        if scorer.feasible(polished):
            best = min(best, scorer.key(polished))
    return best, evaluations


def solve_anneal(spec: SrpSpec, config: SolverConfig, model: Optional[CqmModel] = None) -> SolveResult:
    """
    Simulated annealing over ordered candidate subsets.

    Args:
        spec: SRP request
        config: Solver configuration (seed, anneal budget, workers)
        model: Built SRP model, used for the default penalty weight

    Returns:
        SolveResult with the best feasible route met in any restart

    Raises:
        NoFeasibleRoute: No restart reached a feasible route
    """
    spec.validate()
    config.validate()
    started = time.perf_counter()
    anneal = config.anneal
    penalty_weight = anneal.penalty_weight
    if penalty_weight is None:
        if model is None:
            model, _ = build_srp_model(spec)
        penalty_weight = default_penalty_weight(model)

    jobs = [(spec, anneal, penalty_weight, config.seed, r) for r in range(anneal.restarts)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            outcomes = list(executor.map(_anneal_restart, *zip(*jobs)))
    else:
        outcomes = [_anneal_restart(*job) for job in jobs]

    best: Optional[RouteKey] = None
    history = []
    evaluations = 0
    for key, count in outcomes:
        evaluations += count
        if key is not None and (best is None or key < best):
            best = key
        history.append(best[0] if best is not None else math.inf)
    if best is None:
        raise _no_route(spec, Backend.ANNEAL.value)

    route = route_from_slots(spec, best[2])
    stats = SolveStats(Backend.ANNEAL.value, evaluations, anneal.restarts, tuple(history),
                       time.perf_counter() - started)
    logger.debug("Anneal SRP M=%s: %s evaluations over %s restarts, best %.4f",
                 spec.M, evaluations, anneal.restarts, route.score)
    return SolveResult(route, route.score, True, stats)


def select_backend(spec: SrpSpec, config: SolverConfig) -> Backend:
    """Resolve Auto to Exact up to the threshold and Anneal beyond it."""
    if config.backend is not Backend.AUTO:
        return config.backend
    return Backend.EXACT if spec.M <= config.exact_threshold else Backend.ANNEAL


def solve(spec: SrpSpec, config: SolverConfig, model: Optional[CqmModel] = None) -> SrpRoute:
    """
    Solve one SRP and check the route against its CQM.

    Args:
        spec: SRP request
        config: Solver configuration
        model: Model built from spec, when the caller already has it

    Returns:
        Route satisfying every CQM constraint
    """
    if model is None:
        model, _ = build_srp_model(spec)
    backend = select_backend(spec, config)
    if backend is Backend.EXACT:
        result = solve_exact(spec, config.exact_threshold)
    else:
        result = solve_anneal(spec, config, model)

    assignment = encode_route(SrpEncoding(spec.M), result.route.slots)
    reports = check_feasibility(model, assignment)
    if not (is_feasible(reports) and respects_fixed(model, assignment)):
        failed = [r.label for r in reports if not r.satisfied]
        raise NoFeasibleRoute("Solver route rejected by the CQM", {'backend': backend.value, 'failed': failed})
    logger.debug("SRP solved with %s: slots %s, o1 %.4f, o2 %.0f",
                 backend.value, result.route.slots, result.route.o1, result.route.o2)
    return result.route


def max_servable(spec: SrpSpec, limit: int = MAX_SERVABLE_LIMIT) -> int:
    """
    Largest number of candidates any feasible route can serve.

    Dynamic programming over candidate subsets keeps the shortest path that
    ends at each candidate; loads depend on the subset only.

    Args:
        spec: SRP request
        limit: Largest candidate count accepted

    Returns:
        Candidate count of the largest feasible route, -1 when not even the
        direct leg is feasible
    """
    count = len(spec.candidates)
    if count > limit:
        raise TooLarge(f"{count} candidates exceed the cardinality search limit {limit}")
    scorer = RouteScorer(spec)
    distance = scorer.distance
    slots = scorer.candidates

    best = 0 if scorer.feasible([]) else -1
    shortest: Dict[Tuple[int, int], float] = {}
    for index, slot in enumerate(slots):
        if within_bound(distance[ORIGIN_SLOT][slot], spec.rt):
            shortest[(1 << index, index)] = distance[ORIGIN_SLOT][slot]

    for mask in range(1, 1 << count):
        members = [i for i in range(count) if mask >> i & 1]
        weight, dimension = scorer.load([slots[i] for i in members])
        if not (within_bound(weight, spec.max_weight) and within_bound(dimension, spec.max_dimension)):
            continue
        ends = [(mask, i) for i in members if (mask, i) in shortest]
        if any(within_bound(shortest[end] + distance[slots[end[1]]][DESTINATION_SLOT], spec.rt)
               for end in ends):
            best = max(best, len(members))
        for _, last in ends:
            elapsed = shortest[(mask, last)]
            for nxt in range(count):
                if mask >> nxt & 1:
                    continue
                reach = elapsed + distance[slots[last]][slots[nxt]]
                if not within_bound(reach, spec.rt):
                    continue
                key = (mask | 1 << nxt, nxt)
                if key not in shortest or reach < shortest[key]:
                    shortest[key] = reach
    return best
