"""
Tests for the solvers module
"""

import itertools
from dataclasses import replace
from typing import Iterator, Optional, Tuple

import numpy as np
import pytest

from modules.errors import NoFeasibleRoute, TooLarge
from modules.model import TravelMatrix
from modules.solvers import (AnnealConfig, Backend, RouteScorer, SolverConfig, _polish, max_servable,
                             select_backend, solve, solve_anneal, solve_exact)
from modules.srp import SrpSpec
from tests.factories import line_spec, make_delivery, random_spec

SMALL_ANNEAL = AnnealConfig(restarts=8, steps=3000)


def feasible_orders(spec: SrpSpec) -> Iterator[Tuple[Tuple[int, ...], float]]:
    """Every (candidate order, route length) that fits rt, W and D."""
    values = spec.travel.values
    weights = spec.slot_weights
    dimensions = spec.slot_dimensions
    candidates = range(2, spec.M + 1)
    for size in range(len(candidates) + 1):
        for order in itertools.permutations(candidates, size):
            stops = (0,) + order + (1,)
            length = sum(values[a, b] for a, b in zip(stops, stops[1:]))
            if length > spec.rt + 1e-9:
                continue
            if sum(weights[s] for s in stops) > spec.max_weight + 1e-9:
                continue
            if sum(dimensions[s] for s in stops) > spec.max_dimension + 1e-9:
                continue
            yield order, length


def brute_force_best(spec: SrpSpec) -> Optional[Tuple[int, float]]:
    """(most candidates served, shortest length at that count), None when nothing fits."""
    best = None
    for order, length in feasible_orders(spec):
        if best is None or (-len(order), length) < (-best[0], best[1]):
            best = (len(order), length)
    return best


def brute_force_weighted(spec: SrpSpec) -> Optional[float]:
    """Best omega1*o1 + omega2*o2 with the raw omega2, None when nothing fits."""
    best = None
    for order, length in feasible_orders(spec):
        # destination sits at position len(order) + 1
        value = spec.omega1 * length + spec.omega2 * (-1.0 - (len(order) + 2))
        if best is None or value < best:
            best = value
    return best


def boundary_spec() -> SrpSpec:
    """TP request whose rt equals the direct leg; every detour is strictly longer."""
    travel = TravelMatrix([
        [0, 10, 6, 7],
        [10, 0, 6, 5],
        [6, 6, 0, 3],
        [7, 5, 3, 0],
    ])
    destination = make_delivery(1, tp_deadline=10.0)
    return SrpSpec.create(travel, 0, 1, [make_delivery(2), make_delivery(3)], 10.0, 100.0, 100.0, destination)


class TestSolveExact:
    """Test cases for the exact solver."""

    def test_matches_brute_force(self):
        """Test the exact optimum against independent enumeration on 200 random requests."""
        rng = np.random.default_rng(2024)
        solved = 0
        for _ in range(200):
            spec = random_spec(rng, int(rng.integers(0, 6)), tp_destination=bool(rng.integers(0, 2)))
            expected = brute_force_best(spec)
            if expected is None:
                with pytest.raises(NoFeasibleRoute):
                    solve_exact(spec)
                continue
            result = solve_exact(spec)

            assert result.route.extra_deliveries == expected[0]
            assert result.route.o1 == pytest.approx(expected[1], abs=1e-9)
            assert result.feasible
            solved += 1
        assert solved > 150

    def test_weighted_matches_brute_force(self):
        """Test the raw-weight objective against independent enumeration."""
        rng = np.random.default_rng(2025)
        for _ in range(100):
            spec = replace(random_spec(rng, int(rng.integers(0, 6)), tp_destination=bool(rng.integers(0, 2))),
                           o2_priority='weighted')
            expected = brute_force_weighted(spec)
            if expected is None:
                continue

            assert solve_exact(spec).objective == pytest.approx(expected, abs=1e-9)

    def test_weighted_ties_pick_the_shortest_route(self):
        """Test that raw weights let the empty route tie with full ones and win on o1."""
        result = solve_exact(replace(line_spec(), o2_priority='weighted'))

        assert result.route.slots == (0, 1)
        assert result.objective == -6.0

    def test_rt_equal_to_direct_leg(self):
        """Test that only the direct leg survives when rt equals its length."""
        result = solve_exact(boundary_spec())

        assert result.route.slots == (0, 1)
        assert result.route.duration == 10.0

    def test_prefers_more_deliveries(self):
        """Test that serving every delivery beats a shorter route."""
        result = solve_exact(line_spec())

        assert result.route.slots == (0, 2, 3, 4, 1)
        assert result.route.o1 == 6.0

    def test_tight_time(self):
        """Test that rt limits how far the route goes."""
        result = solve_exact(line_spec(rt=4.0))

        assert result.route.slots == (0, 2, 3, 1)
        assert result.route.duration == 4.0

    def test_too_large(self):
        """Test that big requests are refused."""
        with pytest.raises(TooLarge):
            solve_exact(line_spec(), exact_threshold=3)

    def test_nothing_fits(self):
        """Test a request whose destination delivery is over capacity."""
        spec = random_spec(np.random.default_rng(3), 2, tp_destination=True, max_weight=0.5)

        with pytest.raises(NoFeasibleRoute) as error:
            solve_exact(spec)
        assert error.value.context['candidates'] == 2


class TestSolveAnneal:
    """Test cases for simulated annealing."""

    def test_finds_small_optimum(self):
        """Test that annealing reaches the optimum of small requests."""
        rng = np.random.default_rng(5)
        config = SolverConfig(backend=Backend.ANNEAL, seed=1, anneal=SMALL_ANNEAL)
        for _ in range(20):
            spec = random_spec(rng, int(rng.integers(1, 5)), rt=80.0)
            expected = solve_exact(spec)

            result = solve_anneal(spec, config)

            assert result.objective == pytest.approx(expected.objective, abs=1e-9)

    def test_agrees_with_exact_up_to_nine_slots(self):
        """Test that annealing matches the exact optimum on at least 95 of 100 requests with M up to 9."""
        rng = np.random.default_rng(77)
        config = SolverConfig(backend=Backend.ANNEAL, seed=3, anneal=SMALL_ANNEAL)
        agreed = 0
        for _ in range(100):
            spec = random_spec(rng, int(rng.integers(1, 9)), tp_destination=bool(rng.integers(0, 2)),
                               rt=float(rng.integers(30, 90)), max_weight=float(rng.integers(15, 60)))
            expected = solve_exact(spec)

            result = solve_anneal(spec, config)

            assert result.feasible
            assert result.objective >= expected.objective - 1e-9
            if result.objective == pytest.approx(expected.objective, abs=1e-9):
                agreed += 1
        assert agreed >= 95

    def test_rt_equal_to_direct_leg(self):
        """Test that annealing returns the direct leg when rt equals its length."""
        result = solve_anneal(boundary_spec(), SolverConfig(backend=Backend.ANNEAL, anneal=SMALL_ANNEAL))

        assert result.route.slots == (0, 1)
        assert result.objective == solve_exact(boundary_spec()).objective

    def test_best_by_restart_never_worsens(self):
        """Test that the per-restart history is the running best and ends at the result."""
        spec = random_spec(np.random.default_rng(12), 8, rt=90.0, max_weight=50.0)
        config = SolverConfig(backend=Backend.ANNEAL, seed=6, anneal=AnnealConfig(restarts=12, steps=400))

        result = solve_anneal(spec, config)
        history = result.stats.best_by_restart

        assert len(history) == 12
        assert all(later <= earlier for earlier, later in zip(history, history[1:]))
        assert history[-1] == pytest.approx(result.objective)

    def test_polish_shortens_visiting_order(self):
        """Test that the final descent keeps the served set and finds its shortest order."""
        scorer = RouteScorer(line_spec())

        polished = _polish(scorer, [4, 2, 3])

        assert sorted(polished) == [2, 3, 4]
        assert scorer.duration(polished) == 6.0

    def test_deterministic(self):
        """Test that a seed fully determines the result."""
        spec = random_spec(np.random.default_rng(9), 8, rt=120.0, max_weight=60.0)
        config = SolverConfig(backend=Backend.ANNEAL, seed=4, anneal=SMALL_ANNEAL)

        first = solve_anneal(spec, config)
        second = solve_anneal(spec, config)

        assert first.route == second.route
        assert first.stats == second.stats
        assert len(first.stats.best_by_restart) == SMALL_ANNEAL.restarts

    def test_parallel_restarts_match_sequential(self):
        """Test that worker processes do not change the outcome."""
        spec = random_spec(np.random.default_rng(10), 6, rt=100.0)
        sequential = SolverConfig(backend=Backend.ANNEAL, seed=2, anneal=AnnealConfig(restarts=4, steps=500))
        parallel = SolverConfig(backend=Backend.ANNEAL, seed=2, workers=2,
                                anneal=AnnealConfig(restarts=4, steps=500))

        assert solve_anneal(spec, sequential).route == solve_anneal(spec, parallel).route


class TestSolve:
    """Test cases for backend selection and post-validation."""

    def test_select_backend(self):
        """Test auto resolution against the exact threshold."""
        spec = line_spec()

        assert select_backend(spec, SolverConfig(exact_threshold=4)) is Backend.EXACT
        assert select_backend(spec, SolverConfig(exact_threshold=3)) is Backend.ANNEAL
        assert select_backend(spec, SolverConfig(backend=Backend.ANNEAL)) is Backend.ANNEAL

    def test_solve_returns_checked_route(self):
        """Test the full solve path for both backends."""
        spec = line_spec(rt=4.0)

        exact = solve(spec, SolverConfig())
        annealed = solve(spec, SolverConfig(backend=Backend.ANNEAL, anneal=SMALL_ANNEAL))

        assert exact.slots == (0, 2, 3, 1)
        assert annealed.score == exact.score
        assert sorted(annealed.served) == [1, 2]

    def test_config_from_dict(self):
        """Test reading the solver block of the configuration."""
        config = SolverConfig.from_dict({'backend': 'Exact', 'seed': 3, 'anneal': {'restarts': 2}})

        assert config.backend is Backend.EXACT
        assert config.seed == 3
        assert config.anneal.restarts == 2
        assert config.anneal.steps == 20000

    @pytest.mark.parametrize('data', [
        {'backend': 'quantum'},
        {'seed': -1},
        {'workers': 0},
        {'anneal': {'final_temperature_ratio': 1.5}},
    ])
    def test_invalid_config(self, data):
        """Test that unusable settings are rejected."""
        with pytest.raises(ValueError):
            SolverConfig.from_dict(data)


class TestMaxServable:
    """Test cases for the cardinality search."""

    @pytest.mark.parametrize('rt, max_weight, expected', [
        (100.0, 100.0, 3),
        (4.0, 100.0, 2),
        (2.0, 100.0, 1),
        (100.0, 15.0, 1),
    ])
    def test_line(self, rt, max_weight, expected):
        """Test the largest servable count on the line request."""
        assert max_servable(line_spec(rt=rt, max_weight=max_weight)) == expected

    def test_agrees_with_exact(self):
        """Test against the exact optimum when only the delivery count is scored."""
        rng = np.random.default_rng(21)
        for _ in range(50):
            spec = replace(random_spec(rng, int(rng.integers(1, 6))), omega1=0.0)
            best = max_servable(spec)
            if best < 0:
                continue

            assert solve_exact(spec).route.extra_deliveries == best
