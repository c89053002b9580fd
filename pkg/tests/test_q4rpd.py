"""
Tests for the q4rpd command line
"""

import json
from dataclasses import replace

import pytest
import yaml
from click.testing import CliRunner

from modules.errors import DatasetFormatError, InstanceRejected, MalformedSolution, NoFeasibleRoute
from modules.model import save_instance
from q4rpd import (DEFAULT_CONFIG, EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, EXIT_VALIDATION, benchmark_settings, cli,
                   exit_code_for, load_config, process_cli_overrides)
from tests.factories import make_delivery, make_instance, make_truck, square_instance, tp_instance


@pytest.fixture(name='runner')
def runner_fixture():
    """Fixture for a click test runner."""
    return CliRunner()


@pytest.fixture(name='config_file')
def config_file_fixture(tmp_path):
    """Fixture for a config file writing into the test directory."""
    path = tmp_path / 'config.yaml'
    path.write_text(yaml.safe_dump({
        'solver': {'anneal': {'restarts': 2, 'steps': 500}},
        'output': {'directory': str(tmp_path / 'out')},
        'logging': {'level': 'WARNING'},
    }), encoding='utf-8')
    return str(path)


@pytest.fixture(name='instance_file')
def instance_file_fixture(tmp_path):
    """Fixture for a saved instance with one TP delivery."""
    path = tmp_path / 'tp.json'
    save_instance(tp_instance(), str(path))
    return str(path)


def solve_to(runner, config_file, instance_file, out):
    """Run the solve command and return its result."""
    return runner.invoke(cli, ['-c', config_file, 'solve', instance_file, '--out', str(out)])


class TestConfiguration:
    """Test cases for configuration handling."""

    def test_defaults_fill_missing_blocks(self, config_file):
        """Test that the file is merged over the built-in defaults."""
        config = load_config(config_file)

        assert config['solver']['anneal']['restarts'] == 2
        assert config['solver']['anneal']['final_temperature_ratio'] == 0.001
        assert config['srp'] == DEFAULT_CONFIG['srp']

    def test_missing_file(self, tmp_path):
        """Test that a missing configuration is an I/O failure."""
        with pytest.raises(SystemExit) as error:
            load_config(str(tmp_path / 'absent.yaml'))
        assert error.value.code == EXIT_IO

    def test_cli_overrides(self, config_file):
        """Test flag overrides on a loaded configuration."""
        config = load_config(config_file)

        process_cli_overrides(config, seed=5, backend='anneal', exact_threshold=4, profile=('D14_P1',),
                              out='elsewhere')

        assert config['solver']['seed'] == 5
        assert config['solver']['backend'] == 'anneal'
        assert config['solver']['exact_threshold'] == 4
        assert config['benchmark']['profiles'] == ['D14_P1']
        assert config['output']['directory'] == 'elsewhere'
        assert benchmark_settings(config).solver.seed == 5

    @pytest.mark.parametrize('error, code', [
        (MalformedSolution('bad'), EXIT_VALIDATION),
        (DatasetFormatError('empty'), EXIT_VALIDATION),
        (InstanceRejected('issues'), EXIT_INFEASIBLE),
        (NoFeasibleRoute('none'), EXIT_INFEASIBLE),
        (FileNotFoundError('gone'), EXIT_IO),
        (ValueError('odd'), EXIT_VALIDATION),
    ])
    def test_exit_codes(self, error, code):
        """Test the exception to exit code mapping."""
        assert exit_code_for(error) == code


class TestCommands:
    """Test cases for the subcommands."""

    def test_generate(self, runner, config_file, tmp_path):
        """Test that one profile is written to the requested file, identically each time."""
        first, second = tmp_path / 'first.json', tmp_path / 'second.json'

        for path in (first, second):
            result = runner.invoke(cli, ['-c', config_file, 'generate', '-p', 'D14_P1', '--out', str(path)])
            assert result.exit_code == EXIT_OK

        assert first.read_bytes() == second.read_bytes()
        assert json.loads(first.read_text(encoding='utf-8'))['name'] == 'D14_P1'

    def test_generate_unknown_profile(self, runner, config_file):
        """Test that an unknown profile is an input error."""
        result = runner.invoke(cli, ['-c', config_file, 'generate', '-p', 'D99_P9'])

        assert result.exit_code == EXIT_VALIDATION

    def test_solve(self, runner, config_file, instance_file, tmp_path):
        """Test solving, the summary and the optional plot."""
        out, svg = tmp_path / 'solution.json', tmp_path / 'solution.svg'

        result = runner.invoke(cli, ['-c', config_file, 'solve', instance_file, '--out', str(out),
                                     '--plot', str(svg)])

        assert result.exit_code == EXIT_OK
        assert 'Q4RPD SOLUTION: tp' in result.output
        assert json.loads(out.read_text(encoding='utf-8'))['totals']['subroute_mix'] == [1, 1, 0, 1]
        assert svg.exists()

    def test_solve_is_repeatable(self, runner, config_file, instance_file, tmp_path):
        """Test byte-identical solutions across runs."""
        first, second = tmp_path / 'first.json', tmp_path / 'second.json'

        solve_to(runner, config_file, instance_file, first)
        solve_to(runner, config_file, instance_file, second)

        assert first.read_bytes() == second.read_bytes()

    def test_solve_rejected_instance(self, runner, config_file, tmp_path):
        """Test that an unsolvable instance exits with the infeasible code."""
        path = tmp_path / 'heavy.json'
        save_instance(make_instance([make_delivery(1, weight=500.0)], [make_truck(1)], name='heavy'), str(path))

        result = solve_to(runner, config_file, str(path), tmp_path / 'heavy_solution.json')

        assert result.exit_code == EXIT_INFEASIBLE

    def test_validate(self, runner, config_file, instance_file, tmp_path):
        """Test a passing report and one for a solution missing a route."""
        solution, broken = tmp_path / 'solution.json', tmp_path / 'broken.json'
        solve_to(runner, config_file, instance_file, solution)
        document = json.loads(solution.read_text(encoding='utf-8'))
        document['routes'] = document['routes'][:1]
        broken.write_text(json.dumps(document), encoding='utf-8')

        passed = runner.invoke(cli, ['-c', config_file, 'validate', instance_file, str(solution)])
        failed = runner.invoke(cli, ['-c', config_file, 'validate', instance_file, str(broken),
                                     '--out', str(tmp_path / 'report.json')])

        assert passed.exit_code == EXIT_OK
        assert failed.exit_code == EXIT_VALIDATION
        assert json.loads((tmp_path / 'report.json').read_text(encoding='utf-8'))['coverage']['mark'] == 'fail'

    def test_validate_malformed(self, runner, config_file, instance_file, tmp_path):
        """Test that an unreadable solution is a validation failure."""
        path = tmp_path / 'solution.json'
        path.write_text('{"routes": [', encoding='utf-8')

        result = runner.invoke(cli, ['-c', config_file, 'validate', instance_file, str(path)])

        assert result.exit_code == EXIT_VALIDATION

    def test_benchmark(self, runner, config_file, instance_file, tmp_path):
        """Test the JSON and text reports of instance files."""
        square = tmp_path / 'square.json'
        save_instance(square_instance(), str(square))
        out = tmp_path / 'bench'

        result = runner.invoke(cli, ['-c', config_file, 'benchmark', instance_file, str(square),
                                     '--out', str(out)])

        report = json.loads((out / 'benchmark.json').read_text(encoding='utf-8'))
        assert result.exit_code == EXIT_OK
        assert [row['instance'] for row in report['rows']] == ['tp', 'square']
        assert 'wall_time' not in report
        assert (out / 'benchmark.txt').read_text(encoding='utf-8') in result.output

    def test_benchmark_failure_exit_code(self, runner, config_file, tmp_path):
        """Test that a failed row makes the benchmark exit with the validation code."""
        path = tmp_path / 'late.json'
        instance = replace(tp_instance(), fleet=(make_truck(1, max_weight=30.0),), working_day=6.5)
        save_instance(instance, str(path))

        result = runner.invoke(cli, ['-c', config_file, 'benchmark', str(path), '--out', str(tmp_path / 'b')])

        assert result.exit_code == EXIT_VALIDATION

    def test_plot(self, runner, config_file, instance_file, tmp_path):
        """Test drawing a saved solution."""
        solution, svg = tmp_path / 'solution.json', tmp_path / 'map.svg'
        solve_to(runner, config_file, instance_file, solution)

        result = runner.invoke(cli, ['-c', config_file, 'plot', instance_file, str(solution), '--out', str(svg)])

        assert result.exit_code == EXIT_OK
        assert '<svg' in svg.read_text(encoding='utf-8')

    def test_import_dataset(self, runner, config_file, tmp_path):
        """Test importing a directory of instance files."""
        source, out = tmp_path / 'published', tmp_path / 'imported'
        source.mkdir()
        save_instance(square_instance('D00_P0'), str(source / 'first.json'))
        (source / 'notes.txt').write_text('readme', encoding='utf-8')

        result = runner.invoke(cli, ['-c', config_file, 'import-dataset', str(source), '--out', str(out)])

        assert result.exit_code == EXIT_OK
        assert (out / 'D00_P0.json').exists()
        assert 'notes.txt: skipped' in result.output

    def test_import_dataset_without_instances(self, runner, config_file, tmp_path):
        """Test that a source without instances reports why and fails."""
        source = tmp_path / 'empty.json'
        source.write_text('[]', encoding='utf-8')

        result = runner.invoke(cli, ['-c', config_file, 'import-dataset', str(source)])

        assert result.exit_code == EXIT_VALIDATION
