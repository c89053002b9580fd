"""
Tests for the dataset_importer module
"""

import json
import os
import zipfile
from unittest.mock import MagicMock, patch

import pytest
import requests

from modules.dataset_importer import DatasetImporter, import_dataset
from modules.errors import DatasetFormatError
from modules.model import instance_to_dict, validate_instance
from modules.orchestrator import run
from tests.factories import square_instance, tp_instance

# Total distance and [Regular, Depot-TP, TP-TP, TP-Depot] counts reported for the published instances
PUBLISHED_RESULTS = [
    ('D14_P1', 210.43, [1, 1, 0, 1]),
    ('D16_P1', 223.74, [2, 1, 0, 1]),
    ('D14_P2', 245.30, [0, 2, 0, 2]),
    ('D21_P2', 309.99, [1, 2, 0, 2]),
    ('D21_P0', 381.46, [3, 0, 0, 0]),
    ('D29_P0', 562.11, [4, 0, 0, 0]),
]


@pytest.fixture(name='importer')
def importer_fixture():
    """Fixture for DatasetImporter instance."""
    return DatasetImporter(timeout=5)


def document(instance, name=None):
    """Instance JSON, optionally renamed or with the name removed."""
    data = instance_to_dict(instance)
    if name is None:
        data.pop('name')
    else:
        data['name'] = name
    return data


def fake_response(content, content_type='application/json', url='https://example.org/data/'):
    """Response stand-in for requests.get."""
    response = MagicMock()
    response.content = content
    response.headers = {'Content-Type': content_type}
    response.url = url
    response.raise_for_status.return_value = None
    return response


class TestLocalSources:
    """Test cases for files, directories and archives."""

    def test_single_file(self, importer, tmp_path):
        """Test one instance per file."""
        path = tmp_path / 'square.json'
        path.write_text(json.dumps(document(square_instance(), 'square')), encoding='utf-8')

        result = importer.import_source(str(path))

        assert [i.name for i in result.instances] == ['square']
        assert result.instances[0] == square_instance()
        assert result.report == []

    def test_directory(self, importer, tmp_path):
        """Test that unusable files are reported and skipped."""
        (tmp_path / 'b.json').write_text(json.dumps(document(tp_instance())), encoding='utf-8')
        (tmp_path / 'a.json').write_text(json.dumps(document(square_instance(), 'square')), encoding='utf-8')
        (tmp_path / 'notes.txt').write_text('not data', encoding='utf-8')
        (tmp_path / 'broken.json').write_text('{"deliveries": [', encoding='utf-8')

        result = importer.import_source(str(tmp_path))

        assert [i.name for i in result.instances] == ['b', 'square']
        assert any('notes.txt: skipped' in line for line in result.report)
        assert any('broken.json: not valid JSON' in line for line in result.report)

    def test_zip_archive(self, importer, tmp_path):
        """Test members of a zip archive."""
        path = tmp_path / 'bundle.zip'
        with zipfile.ZipFile(path, 'w') as archive:
            archive.writestr('set/square.json', json.dumps(document(square_instance())))
            archive.writestr('set/readme.md', '# instances')

        result = importer.import_source(str(path))

        assert [i.name for i in result.instances] == ['square']
        assert any('readme.md: skipped' in line for line in result.report)

    def test_wrapper_and_mapping(self, importer, tmp_path):
        """Test list wrappers and name-keyed mappings."""
        wrapper = tmp_path / 'wrapper.json'
        wrapper.write_text(json.dumps({'instances': [document(square_instance()), document(tp_instance())]}),
                           encoding='utf-8')
        mapping = tmp_path / 'mapping.json'
        mapping.write_text(json.dumps({'east': document(tp_instance()), 'west': document(square_instance())}),
                           encoding='utf-8')

        assert [i.name for i in importer.import_source(str(wrapper)).instances] == ['wrapper_0', 'wrapper_1']
        assert [i.name for i in importer.import_source(str(mapping)).instances] == ['east', 'west']

    def test_unknown_fields_are_reported(self, importer, tmp_path):
        """Test that extra fields become report lines."""
        data = document(square_instance(), 'square')
        data['source'] = 'survey'
        path = tmp_path / 'square.json'
        path.write_text(json.dumps(data), encoding='utf-8')

        result = importer.import_source(str(path))

        assert result.report == [f"{path}: Unknown field 'source' in instance"]

    def test_nothing_found(self, importer, tmp_path):
        """Test that a source without instances raises with the report."""
        path = tmp_path / 'other.json'
        path.write_text(json.dumps({'version': 1}), encoding='utf-8')

        with pytest.raises(DatasetFormatError) as error:
            importer.import_source(str(path))
        assert 'no instance found' in error.value.report[0]

    def test_missing_file(self, tmp_path):
        """Test that unreadable sources raise OSError."""
        with pytest.raises(OSError):
            import_dataset(str(tmp_path / 'absent.json'))


class TestRemoteSources:
    """Test cases for http(s) sources."""

    @patch('modules.dataset_importer.requests.get')
    def test_json_url(self, mock_get, importer):
        """Test a URL that serves an instance document."""
        mock_get.return_value = fake_response(json.dumps(document(tp_instance(), 'tp')).encode('utf-8'))

        result = importer.import_source('https://example.org/data/tp.json')

        assert [i.name for i in result.instances] == ['tp']
        mock_get.assert_called_once_with('https://example.org/data/tp.json', timeout=5)

    @patch('modules.dataset_importer.requests.get')
    def test_html_landing_page(self, mock_get, importer):
        """Test that links to data files on an HTML page are followed."""
        page = (b'<html><body><a href="square.json">Square</a> <a href="/about.html">About</a>'
                b'<a href="https://mirror.example.org/tp.json?raw=1">TP</a></body></html>')
        responses = {
            'https://example.org/data/': fake_response(page, 'text/html; charset=utf-8'),
            'https://example.org/data/square.json': fake_response(
                json.dumps(document(square_instance())).encode('utf-8')),
            'https://mirror.example.org/tp.json?raw=1': fake_response(
                json.dumps(document(tp_instance(), 'tp')).encode('utf-8')),
        }
        mock_get.side_effect = lambda url, timeout: responses[url]

        result = importer.import_source('https://example.org/data/')

        assert [i.name for i in result.instances] == ['square', 'tp']
        assert mock_get.call_count == 3

    @patch('modules.dataset_importer.requests.get')
    def test_page_without_links(self, mock_get, importer):
        """Test an HTML page that links to no data."""
        mock_get.return_value = fake_response(b'<html><a href="index.html">Home</a></html>', 'text/html')

        with pytest.raises(DatasetFormatError) as error:
            importer.import_source('https://example.org/data/')
        assert 'without links' in error.value.report[0]

    @patch('modules.dataset_importer.requests.get')
    def test_http_error(self, mock_get, importer):
        """Test that HTTP errors surface as OSError."""
        response = fake_response(b'')
        response.raise_for_status.side_effect = requests.HTTPError('404 Client Error')
        mock_get.return_value = response

        with pytest.raises(OSError):
            importer.import_source('https://example.org/data/missing.json')


@pytest.mark.skipif(not os.environ.get('Q4RPD_DATASET_DIR'), reason='Q4RPD_DATASET_DIR is not set')
class TestPublishedDataset:
    """Checks against a local copy of the published benchmark instances."""

    def test_instances_are_valid(self):
        """Test that every published instance imports without issues."""
        result = import_dataset(os.environ['Q4RPD_DATASET_DIR'])

        assert result.instances
        for instance in result.instances:
            assert validate_instance(instance) == [], instance.name

    @pytest.mark.parametrize('name, sum_o1, mix', PUBLISHED_RESULTS)
    def test_reproduces_published_results(self, name, sum_o1, mix):
        """Test total distance and sub-route mix of a published instance."""
        instances = {i.name: i for i in import_dataset(os.environ['Q4RPD_DATASET_DIR']).instances}
        if name not in instances:
            pytest.skip(f"{name} is not in the local dataset")

        solution = run(instances[name])

        assert solution.distance == pytest.approx(sum_o1, abs=1e-2)
        assert solution.subroute_mix == mix
