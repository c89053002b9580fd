#!/usr/bin/env python3
"""
Q4RPD Delivery Planner

Plans a day of heterogeneous-fleet package deliveries with Top-Priority
deadlines by solving one single routing problem per iteration. Subcommands
generate instances, solve and validate them, benchmark against a TSP oracle,
plot routes and import published datasets.
"""

import copy
import functools
import json
import logging
import os
import sys
from typing import Dict, List, Optional

import click
import yaml

from modules.benchmark import BenchmarkSettings, run_benchmark
from modules.dataset_importer import import_dataset
from modules.errors import DatasetFormatError, InstanceFormatError, MalformedSolution, ProfileInvalid, Q4rpdError
from modules.instance_generator import NAMED_PROFILES, generate_instance, load_profile
from modules.model import InstanceSummary, load_instance, save_instance
from modules.orchestrator import OrchestratorConfig, Q4rpdOrchestrator, solution_from_dict, solution_to_dict
from modules.plotting import emit_svg
from modules.solvers import Backend, SolverConfig
from modules.validation import validate_solution

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INFEASIBLE = 2
EXIT_IO = 3

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'config.yaml')

DEFAULT_CONFIG: Dict = {
    'solver': {
        'backend': 'auto',
        'seed': 0,
        'exact_threshold': 9,
        'workers': 1,
        'anneal': {
            'restarts': 32,
            'steps': 20000,
            'initial_temperature': None,
            'final_temperature_ratio': 0.001,
            'penalty_weight': None,
            'polish': True,
        },
    },
    'srp': {'omega1': 1.0, 'omega2': 2.0, 'constraint_mode': 'aggregate', 'o2_priority': 'lexicographic'},
    'orchestrator': {'tp_selection': 'earliest_deadline', 'reserve_return_leg': True},
    'baseline': {'exact_max_nodes': 14, 'seed': 0},
    'benchmark': {'profiles': list(NAMED_PROFILES), 'workers': 1, 'o2_max_candidates': 9},
    'output': {'directory': 'output', 'include_timing': False},
    'logging': {'level': 'INFO', 'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s'},
}


def setup_logging(level: str = "INFO", log_format: Optional[str] = None) -> None:
    """Configure logging for the application."""
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format=log_format or DEFAULT_CONFIG['logging']['format'],
        force=True,
    )


def _merge(defaults: Dict, overrides: Dict) -> Dict:
    merged = copy.deepcopy(defaults)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_path: str) -> Dict:
    """Load configuration from YAML file, on top of the built-in defaults."""
    try:
        with open(config_path, 'r', encoding='utf-8') as file:
            return _merge(DEFAULT_CONFIG, yaml.safe_load(file) or {})
    except FileNotFoundError:
        logging.error("Configuration file not found: %s", config_path)
        sys.exit(EXIT_IO)
    except yaml.YAMLError as e:
        logging.error("Error parsing configuration file: %s", e)
        sys.exit(EXIT_IO)


def process_cli_overrides(config_data: Dict, **kwargs) -> None:
    """Process CLI argument overrides for configuration."""
    if kwargs.get('seed') is not None:
        config_data['solver']['seed'] = kwargs['seed']
    if kwargs.get('backend'):
        config_data['solver']['backend'] = kwargs['backend']
    if kwargs.get('exact_threshold') is not None:
        config_data['solver']['exact_threshold'] = kwargs['exact_threshold']
    if kwargs.get('profile'):
        config_data['benchmark']['profiles'] = list(kwargs['profile'])
    if kwargs.get('out'):
        config_data['output']['directory'] = kwargs['out']


def benchmark_settings(config_data: Dict) -> BenchmarkSettings:
    """Solver, orchestrator and baseline settings from a merged configuration."""
    return BenchmarkSettings(
        solver=SolverConfig.from_dict(config_data['solver']),
        orchestrator=OrchestratorConfig.from_dict(config_data),
        exact_max_nodes=int(config_data['baseline']['exact_max_nodes']),
        baseline_seed=int(config_data['baseline']['seed']),
        o2_max_candidates=int(config_data['benchmark']['o2_max_candidates']),
    )


def write_json(path: str, data: Dict) -> None:
    """Write JSON with a fixed layout, creating parent directories."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as file:
        json.dump(data, file, indent=2)
        file.write('\n')


def exit_code_for(error: Exception) -> int:
    """Map an exception to the process exit code."""
    if isinstance(error, (MalformedSolution, DatasetFormatError, InstanceFormatError, ProfileInvalid)):
        return EXIT_VALIDATION
    if isinstance(error, Q4rpdError):
        return EXIT_INFEASIBLE
    if isinstance(error, OSError):
        return EXIT_IO
    return EXIT_VALIDATION


def handle_errors(command):
    """Log known failures and exit with their code."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (Q4rpdError, OSError, ValueError) as error:
            code = exit_code_for(error)
            logging.getLogger(__name__).error("%s: %s", type(error).__name__, error)
            sys.exit(code)
    return wrapper


def print_summary(solution, instance) -> None:
    """Print a short summary of a solution to STDOUT."""
    summary = InstanceSummary.of(instance)
    print("\n" + "=" * 80)
    print(f"Q4RPD SOLUTION: {instance.name or 'instance'}")
    print("=" * 80)
    print(f"   • Deliveries: {summary.deliveries} ({summary.tp_deliveries} TP)")
    print(f"   • Fleet: {summary.fleet_label}, working day {summary.working_day:g}")
    print(f"   • Routes: {solution.trucks_used}, sub-route mix {solution.subroute_mix}")
    print(f"   • Distance: {solution.distance:.2f}, rental cost: {solution.rental_cost:.2f}")
    for truck_route in solution.routes:
        stops = ' -> '.join(str(s) for s in truck_route.route.stops)
        print(f"   • Truck {truck_route.truck_id}: {stops} ({truck_route.route.distance:.2f})")
    print("=" * 80)


seed_option = click.option('--seed', type=int, help='Solver seed (overrides config)')
backend_option = click.option('--backend', type=click.Choice([b.value for b in Backend]),
                              help='SRP solver backend (overrides config)')
threshold_option = click.option('--exact-threshold', type=int,
                                help='Largest candidate count solved exactly under auto')


@click.group()
@click.option('--config', '-c', default=DEFAULT_CONFIG_PATH, help='Configuration file path')
@click.option('--verbose', '-v', is_flag=True, help='Enable verbose logging')
@click.pass_context
def cli(ctx, config: str, verbose: bool) -> None:
    """Q4RPD delivery planner."""
    config_data = load_config(config)
    level = "DEBUG" if verbose else config_data['logging']['level']
    setup_logging(level, config_data['logging']['format'])
    ctx.obj = config_data


@cli.command()
@click.option('--profile', '-p', multiple=True, help='Named profile or profile file (repeatable)')
@seed_option
@click.option('--out', '-o', help='Output file for one profile, directory otherwise')
@click.pass_obj
@handle_errors
def generate(config_data: Dict, profile, seed: Optional[int], out: Optional[str]) -> None:
    """Generate instance files from profiles."""
    logger = logging.getLogger(__name__)
    references = list(profile) or config_data['benchmark']['profiles']
    for reference in references:
        instance = generate_instance(load_profile(reference, seed))
        if out and len(references) == 1 and out.endswith('.json'):
            path = out
        else:
            path = os.path.join(out or config_data['output']['directory'], f"{instance.name}.json")
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        save_instance(instance, path)
        logger.info("Instance saved to: %s", path)


@cli.command()
@click.argument('instance_file', type=click.Path(exists=True, dir_okay=False))
@seed_option
@backend_option
@threshold_option
@click.option('--out', '-o', help='Solution JSON file')
@click.option('--plot', 'plot_file', help='Also draw the solution to this SVG file')
@click.pass_obj
@handle_errors
def solve(config_data: Dict, instance_file: str, out: Optional[str], plot_file: Optional[str], **kwargs) -> None:
    """Solve an instance and write the solution JSON."""
    logger = logging.getLogger(__name__)
    process_cli_overrides(config_data, **kwargs)
    settings = benchmark_settings(config_data)
    instance = load_instance(instance_file)
    solution = Q4rpdOrchestrator(settings.solver, settings.orchestrator).run(instance)

    name = instance.name or os.path.splitext(os.path.basename(instance_file))[0]
    path = out or os.path.join(config_data['output']['directory'], f"{name}_solution.json")
    write_json(path, solution_to_dict(solution, instance))
    if plot_file:
        emit_svg(solution, instance, plot_file)
    print_summary(solution, instance)
    logger.info("Solution saved to: %s", path)


@cli.command()
@click.argument('instance_file', type=click.Path(exists=True, dir_okay=False))
@click.argument('solution_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--out', '-o', help='Validation report JSON file')
@click.pass_obj
@handle_errors
def validate(config_data: Dict, instance_file: str, solution_file: str,  # pylint: disable=unused-argument
             out: Optional[str]) -> None:
    """Check a solution against its instance."""
    instance = load_instance(instance_file)
    with open(solution_file, 'r', encoding='utf-8') as file:
        try:
            document = json.load(file)
        except json.JSONDecodeError as exc:
            raise MalformedSolution(f"Invalid JSON in {solution_file}: {exc}") from exc
    report = validate_solution(solution_from_dict(document), instance)
    if out:
        write_json(out, report.to_dict())
    click.echo(json.dumps(report.to_dict(), indent=2, ensure_ascii=False))
    if not report.passed:
        sys.exit(EXIT_VALIDATION)


@cli.command()
@click.argument('instance_files', nargs=-1, type=click.Path(exists=True, dir_okay=False))
@click.option('--profile', '-p', multiple=True, help='Named profile or profile file (repeatable)')
@seed_option
@backend_option
@threshold_option
@click.option('--out', '-o', help='Output directory (overrides config)')
@click.pass_obj
@handle_errors
def benchmark(config_data: Dict, instance_files, **kwargs) -> None:
    """Benchmark instance files, or generated profiles when none are given."""
    logger = logging.getLogger(__name__)
    process_cli_overrides(config_data, **kwargs)
    settings = benchmark_settings(config_data)
    if instance_files:
        instances = [load_instance(path) for path in instance_files]
    else:
        instances = [generate_instance(load_profile(reference))
                     for reference in config_data['benchmark']['profiles']]

    report = run_benchmark(instances, settings, int(config_data['benchmark']['workers']))
    include_timing = bool(config_data['output']['include_timing'])
    directory = config_data['output']['directory']
    write_json(os.path.join(directory, 'benchmark.json'), report.to_dict(include_timing))
    table = report.to_table()
    with open(os.path.join(directory, 'benchmark.txt'), 'w', encoding='utf-8') as file:
        file.write(table)
    click.echo(table, nl=False)
    logger.info("Benchmark report saved to: %s", directory)
    if not report.passed:
        sys.exit(EXIT_VALIDATION)


@cli.command()
@click.argument('instance_file', type=click.Path(exists=True, dir_okay=False))
@click.argument('solution_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--out', '-o', required=True, help='SVG file to write')
@click.pass_obj
@handle_errors
def plot(config_data: Dict, instance_file: str, solution_file: str,  # pylint: disable=unused-argument
         out: str) -> None:
    """Draw a solution as an SVG route map."""
    instance = load_instance(instance_file)
    with open(solution_file, 'r', encoding='utf-8') as file:
        solution = solution_from_dict(json.load(file))
    emit_svg(solution, instance, out)


@cli.command('import-dataset')
@click.argument('source')
@click.option('--out', '-o', help='Directory for the imported instance files (overrides config)')
@click.pass_obj
@handle_errors
def import_dataset_command(config_data: Dict, source: str, out: Optional[str]) -> None:
    """Import published instances from a file, directory or URL."""
    logger = logging.getLogger(__name__)
    try:
        result = import_dataset(source)
    except DatasetFormatError as error:
        for line in error.report:
            click.echo(f"   • {line}")
        raise
    directory = out or config_data['output']['directory']
    os.makedirs(directory, exist_ok=True)
    written: List[str] = []
    for instance in result.instances:
        path = os.path.join(directory, f"{instance.name}.json")
        save_instance(instance, path)
        written.append(path)
    for line in result.report:
        click.echo(f"   • {line}")
    logger.info("Imported %d instances into %s", len(written), directory)


if __name__ == '__main__':
    cli()  # pylint: disable=no-value-for-parameter
