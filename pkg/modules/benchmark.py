"""
Benchmark Runner

Solves a list of instances, validates every solution, compares it with the
TSP oracle and checks o2 optimality of the sub-routes. Rows mirror the
results table: full routes, sub-route mix, R1-R3 marks, total distance with
its deviation from the oracle and the o2-optimality mark.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .baseline import EXACT_MAX_NODES, compare_solution
from .errors import Q4rpdError
from .model import InstanceSummary, ProblemInstance
from .orchestrator import OrchestratorConfig, Q4rpdOrchestrator, Q4rpdSolution
from .solvers import SolverConfig, max_servable
from .validation import Mark, validate_solution

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ('Instance', 'Deliveries', 'Fleet', 'Full routes', 'Mix [A,B,C,D]',
                 'R1', 'R2', 'R3', 'Sum o1', 'o2 opt', '#Var', '#Con')
O2_MAX_CANDIDATES = 9


@dataclass(frozen=True)
class BenchmarkSettings:
    """Everything a row needs besides its instance."""
    solver: SolverConfig = field(default_factory=SolverConfig)
    orchestrator: OrchestratorConfig = field(default_factory=OrchestratorConfig)
    exact_max_nodes: int = EXACT_MAX_NODES
    baseline_seed: int = 0
    o2_max_candidates: int = O2_MAX_CANDIDATES


@dataclass(frozen=True)
class O2Check:
    """Cardinality check over the sub-routes small enough to search exhaustively."""
    mark: Mark
    checked: int = 0
    failures: Tuple[str, ...] = ()

    def to_dict(self) -> Dict:
        """JSON form."""
        return {'mark': self.mark.value, 'checked': self.checked, 'failures': list(self.failures)}


@dataclass(frozen=True)
class BenchmarkRow:
    """One instance of the report; error is set when the run failed."""
    instance: str
    summary: InstanceSummary
    full_routes: int = 0
    mix: Tuple[int, ...] = (0, 0, 0, 0)
    r1: Mark = Mark.NOT_PRESENT
    r2: Mark = Mark.NOT_PRESENT
    r3: Mark = Mark.NOT_PRESENT
    p1: Mark = Mark.NOT_PRESENT
    p2: Mark = Mark.NOT_PRESENT
    p3_satisfied: Optional[bool] = None
    sum_o1: float = 0.0
    sum_tsp: float = 0.0
    deviation_percent: float = 0.0
    tsp_heuristic: bool = False
    tsp_deadline_violations: int = 0
    o2: O2Check = field(default_factory=lambda: O2Check(Mark.NOT_PRESENT))
    variables: int = 0
    constraints: int = 0
    total_cost: float = 0.0
    error: Optional[str] = None
    wall_time: float = field(default=0.0, compare=False)

    @property
    def passed(self) -> bool:
        """Solved and nothing marked as failed."""
        return self.error is None and Mark.FAIL not in (self.r1, self.r2, self.r3, self.p1, self.p2,
                                                        self.o2.mark)

    def to_dict(self, include_timing: bool = False) -> Dict:
        """JSON form with a fixed key order."""
        data = {
            'instance': self.instance,
            'deliveries': self.summary.deliveries,
            'tp_deliveries': self.summary.tp_deliveries,
            'fleet': self.summary.fleet_label,
            'working_day': self.summary.working_day,
            'full_routes': self.full_routes,
            'subroute_mix': list(self.mix),
            'r1': self.r1.value,
            'r2': self.r2.value,
            'r3': self.r3.value,
            'p1': self.p1.value,
            'p2': self.p2.value,
            'p3_satisfied': self.p3_satisfied,
            'sum_o1': self.sum_o1,
            'sum_tsp': self.sum_tsp,
            'deviation_percent': self.deviation_percent,
            'tsp_heuristic': self.tsp_heuristic,
            'tsp_deadline_violations': self.tsp_deadline_violations,
            'o2_optimality': self.o2.to_dict(),
            'variables': self.variables,
            'constraints': self.constraints,
            'total_cost': self.total_cost,
            'error': self.error,
        }
        if include_timing:
            data['wall_time'] = self.wall_time
        return data


@dataclass(frozen=True)
class BenchmarkReport:
    """Rows in input order."""
    rows: Tuple[BenchmarkRow, ...] = ()

    @property
    def passed(self) -> bool:
        """Every row passed."""
        return all(row.passed for row in self.rows)

    def to_dict(self, include_timing: bool = False) -> Dict:
        """JSON form."""
        data = {'passed': self.passed, 'rows': [row.to_dict(include_timing) for row in self.rows]}
        if include_timing:
            data['wall_time'] = sum(row.wall_time for row in self.rows)
        return data

    def to_table(self) -> str:
        """Aligned plain-text table."""
        lines = [list(TABLE_COLUMNS)]
        for row in self.rows:
            if row.error is not None:
                lines.append([row.instance, str(row.summary.deliveries), row.summary.fleet_label,
                              'error', row.error] + [''] * (len(TABLE_COLUMNS) - 5))
                continue
            lines.append([
                row.instance,
                str(row.summary.deliveries),
                row.summary.fleet_label,
                str(row.full_routes),
                '[' + ','.join(str(n) for n in row.mix) + ']',
                row.r1.symbol,
                row.r2.symbol,
                row.r3.symbol,
                f"{row.sum_o1:.2f} ({row.deviation_percent:+.1f}%)",
                row.o2.mark.symbol,
                str(row.variables),
                str(row.constraints),
            ])
        widths = [max(len(line[i]) for line in lines) for i in range(len(TABLE_COLUMNS))]
        rendered = ['  '.join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip()
                    for line in lines]
        rendered.insert(1, '  '.join('-' * width for width in widths))
        return '\n'.join(rendered) + '\n'


def check_o2_optimality(solution: Q4rpdSolution, max_candidates: int = O2_MAX_CANDIDATES) -> O2Check:
    """
    Confirm that no feasible route over the same candidate pool serves more deliveries.

    Only sub-routes produced in this process carry their SRP request; sub-routes
    read back from JSON are not checked.

    Args:
        solution: Solution whose sub-routes are checked
        max_candidates: Largest candidate pool searched exhaustively

    Returns:
        O2Check; NOT_PRESENT when no sub-route was small enough
    """
    checked, failures = 0, []
    for truck_route in solution.routes:
        for subroute in truck_route.route.subroutes:
            spec = subroute.spec
            if spec is None or len(spec.candidates) > max_candidates:
                continue
            checked += 1
            best = max_servable(spec, max_candidates)
            if best > subroute.route.extra_deliveries:
                failures.append(f"Truck {truck_route.truck_id} {subroute.type.value} serves "
                                f"{subroute.route.extra_deliveries} of a possible {best}")
    if not checked:
        return O2Check(Mark.NOT_PRESENT)
    return O2Check(Mark.FAIL if failures else Mark.PASS, checked, tuple(failures))


def benchmark_instance(instance: ProblemInstance, settings: BenchmarkSettings) -> BenchmarkRow:
    """
    Solve, validate and compare one instance.

    Solver errors end up in the row's error field instead of propagating.
    """
    summary = InstanceSummary.of(instance)
    name = instance.name or 'instance'
    started = time.perf_counter()
    try:
        solution = Q4rpdOrchestrator(settings.solver, settings.orchestrator).run(instance)
        report = validate_solution(solution, instance)
        comparison = compare_solution(solution, instance, settings.exact_max_nodes, settings.baseline_seed)
        o2 = check_o2_optimality(solution, settings.o2_max_candidates)
    except Q4rpdError as exc:
        logger.error("Benchmark of %s failed: %s", name, exc)
        return BenchmarkRow(name, summary, error=f"{type(exc).__name__}: {exc}",
                            wall_time=time.perf_counter() - started)

    row = BenchmarkRow(
        instance=name,
        summary=summary,
        full_routes=solution.trucks_used,
        mix=tuple(solution.subroute_mix),
        r1=report.r1.mark,
        r2=report.r2.mark,
        r3=report.r3.mark,
        p1=report.p1.mark,
        p2=report.p2.mark,
        p3_satisfied=report.p3.satisfied,
        sum_o1=comparison.total_route_length,
        sum_tsp=comparison.total_tour_length,
        deviation_percent=100.0 * comparison.deviation,
        tsp_heuristic=comparison.heuristic,
        tsp_deadline_violations=comparison.deadline_violations,
        o2=o2,
        variables=solution.diagnostics.total_variables,
        constraints=solution.diagnostics.total_constraints,
        total_cost=report.cost.total,
        wall_time=time.perf_counter() - started,
    )
    logger.info("%s: %s routes, mix %s, sum o1 %.2f (%+.1f%%)", name, row.full_routes, list(row.mix),
                row.sum_o1, row.deviation_percent)
    return row


def run_benchmark(instances: Sequence[ProblemInstance], settings: Optional[BenchmarkSettings] = None,
                  workers: int = 1) -> BenchmarkReport:
    """
    Benchmark instances, optionally in parallel across instances.

    Args:
        instances: Instances to run, reported in this order
        settings: Solver, orchestrator and baseline settings
        workers: Processes used across instances

    Returns:
        BenchmarkReport with one row per instance
    """
    settings = settings or BenchmarkSettings()
    if not instances:
        return BenchmarkReport()
    if workers > 1 and len(instances) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows: List[BenchmarkRow] = list(executor.map(benchmark_instance, instances,
                                                         [settings] * len(instances)))
    else:
        rows = [benchmark_instance(instance, settings) for instance in instances]
    return BenchmarkReport(tuple(rows))
