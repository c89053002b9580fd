"""
Tests for the benchmark module
"""

import re
from dataclasses import replace

import pytest

from modules.benchmark import (TABLE_COLUMNS, BenchmarkReport, BenchmarkSettings, benchmark_instance,
                               check_o2_optimality, run_benchmark)
from modules.instance_generator import NAMED_PROFILES, InstanceProfile, generate_instance, named_profile
from modules.orchestrator import Q4rpdSolution, TruckRoute, concatenate, run
from modules.solvers import AnnealConfig, Backend, SolverConfig
from modules.srp import route_from_slots
from modules.validation import Mark
from tests.factories import make_delivery, make_instance, make_truck, square_instance, tp_instance

# exact_threshold 10 solves every pool of up to nine candidates exactly
QUICK_SETTINGS = BenchmarkSettings(solver=SolverConfig(seed=0, exact_threshold=10,
                                                       anneal=AnnealConfig(restarts=4, steps=2000)))


@pytest.fixture(name='report')
def report_fixture():
    """Fixture for a report over two small instances."""
    return run_benchmark([tp_instance(), square_instance()])


class TestBenchmarkInstance:
    """Test cases for single rows."""

    def test_tp_instance(self):
        """Test the row of an instance with one TP delivery."""
        row = benchmark_instance(tp_instance(), BenchmarkSettings())

        assert row.error is None
        assert row.full_routes == 2
        assert row.mix == (1, 1, 0, 1)
        assert (row.r1, row.r2, row.r3, row.p1, row.p2) == (Mark.PASS,) * 5
        assert row.o2.mark is Mark.PASS
        assert row.o2.checked == 3
        assert row.total_cost == pytest.approx(row.sum_o1 + 50.0)
        assert row.passed

    def test_regular_routes_match_oracle(self):
        """Test that exact Regular routes have no deviation from the TSP tour."""
        row = benchmark_instance(square_instance(), BenchmarkSettings())

        assert row.r2 is Mark.NOT_PRESENT
        assert row.deviation_percent == pytest.approx(0.0, abs=1e-9)
        assert not row.tsp_heuristic

    def test_failure_becomes_row(self):
        """Test that solver errors are reported instead of raised."""
        instance = make_instance([make_delivery(1, weight=500.0)], [make_truck(1)], name='heavy')

        row = benchmark_instance(instance, BenchmarkSettings())

        assert row.error.startswith('InstanceRejected')
        assert not row.passed

    @pytest.mark.parametrize('name', sorted(NAMED_PROFILES))
    def test_named_profiles(self, name):
        """Test that every benchmark profile solves within the restrictions."""
        row = benchmark_instance(generate_instance(named_profile(name)), QUICK_SETTINGS)

        assert row.error is None
        assert row.summary.deliveries == NAMED_PROFILES[name].deliveries
        assert row.r1 is Mark.PASS
        assert row.r2 in (Mark.PASS, Mark.NOT_PRESENT)
        assert row.r3 is Mark.PASS
        assert row.p1 is Mark.PASS
        assert row.p2 is Mark.PASS
        assert row.o2.mark is not Mark.FAIL, row.o2.failures
        assert row.mix[1] == row.mix[3]
        assert row.mix[1] + row.mix[2] == NAMED_PROFILES[name].tp_count

    def test_uniform_geometry_profile(self):
        """Test a profile spread over the whole coordinate square, where visiting order matters."""
        profile = InstanceProfile('uniform', 9, 1, 2, 1, 480.0, seed=4, district_radius=None,
                                  coordinate_bound=60.0)

        row = benchmark_instance(generate_instance(profile), QUICK_SETTINGS)

        assert row.error is None
        assert (row.r1, row.r2, row.r3, row.p1, row.p2) == (Mark.PASS,) * 5
        assert row.o2.mark is Mark.PASS
        assert not row.tsp_heuristic
        assert row.sum_o1 >= row.sum_tsp - 1e-9


class TestO2Optimality:
    """Test cases for the cardinality check."""

    def test_short_route_fails(self):
        """Test a sub-route that leaves servable deliveries behind."""
        instance = square_instance()
        solved = run(instance)
        subroute = solved.routes[0].route.subroutes[0]
        shorter = replace(subroute, route=route_from_slots(subroute.spec, [0, 2, 1]))
        solution = Q4rpdSolution(instance.name, (TruckRoute(1, concatenate([shorter])),), 0.0)

        check = check_o2_optimality(solution)

        assert check.mark is Mark.FAIL
        assert 'serves 1 of a possible 4' in check.failures[0]

    def test_large_pools_are_skipped(self):
        """Test that pools above the threshold are not searched."""
        check = check_o2_optimality(run(square_instance()), max_candidates=2)

        assert check.mark is Mark.NOT_PRESENT
        assert check.checked == 0


class TestBenchmarkReport:
    """Test cases for reports."""

    def test_empty(self):
        """Test that no instances give an empty, passing report."""
        report = run_benchmark([])

        assert report == BenchmarkReport()
        assert report.passed
        assert report.to_dict() == {'passed': True, 'rows': []}

    def test_table(self, report):
        """Test the header, separator and cell formats."""
        lines = report.to_table().splitlines()

        assert lines[0].split()[0] == TABLE_COLUMNS[0]
        assert set(lines[1].replace(' ', '')) == {'-'}
        assert lines[2].startswith('tp ')
        assert '[1,1,0,1]' in lines[2]
        assert re.search(r'\d+\.\d{2} \([+-]\d+\.\d%\)', lines[2])
        assert '−' in lines[3]

    def test_error_row_in_table(self):
        """Test that failed instances still get a line."""
        instance = make_instance([make_delivery(1, weight=500.0)], [make_truck(1)], name='heavy')

        table = run_benchmark([instance]).to_table()

        assert 'heavy' in table
        assert 'InstanceRejected' in table

    def test_timing_only_on_request(self, report):
        """Test that wall time is left out of the default JSON."""
        assert 'wall_time' not in report.to_dict()
        assert 'wall_time' not in report.to_dict()['rows'][0]
        assert 'wall_time' in report.to_dict(include_timing=True)['rows'][0]

    def test_deterministic(self):
        """Test that two runs with the same seed produce the same document."""
        settings = BenchmarkSettings(solver=SolverConfig(backend=Backend.ANNEAL, seed=3,
                                                         anneal=AnnealConfig(restarts=2, steps=500)))
        instances = [generate_instance(named_profile('D14_P1'))]

        assert run_benchmark(instances, settings).to_dict() == run_benchmark(instances, settings).to_dict()

    def test_workers_do_not_change_rows(self, report):
        """Test that parallel runs keep input order and results."""
        parallel = run_benchmark([tp_instance(), square_instance()], workers=2)

        assert parallel == report
