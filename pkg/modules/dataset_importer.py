"""
Dataset Importer

Reads published instances from a JSON file, a directory, a zip archive or an
http(s) URL. Documents use the instance JSON schema; a document may hold one
instance, a list of them, an {"instances": [...]} wrapper or a name-keyed
mapping. HTML landing pages are scanned for links to JSON or zip files.
"""

import io
import json
import logging
import os
import zipfile
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple
from urllib.parse import urljoin

import requests
from bs4 import BeautifulSoup

from .errors import DatasetFormatError, InstanceFormatError
from .model import ProblemInstance, instance_from_dict

DATA_SUFFIXES = ('.json', '.zip')
REQUEST_TIMEOUT = 30


@dataclass
class DatasetImport:
    """Instances found in a source and notes on everything skipped."""
    source: str
    instances: List[ProblemInstance] = field(default_factory=list)
    report: List[str] = field(default_factory=list)


def _looks_like_instance(data) -> bool:
    return isinstance(data, dict) and 'deliveries' in data and 'trucks' in data


class DatasetImporter:
    """Collects instances from local or remote sources."""

    def __init__(self, timeout: int = REQUEST_TIMEOUT):
        self.timeout = timeout
        self.logger = logging.getLogger(__name__)

    def import_source(self, source: str) -> DatasetImport:
        """
        Import every instance a source holds.

        Args:
            source: File path, directory path or http(s) URL

        Returns:
            DatasetImport with instances sorted by name

        Raises:
            DatasetFormatError: No instance could be read; the report says why
            OSError: The source cannot be read or fetched
        """
        result = DatasetImport(source)
        if source.startswith(('http://', 'https://')):
            self._import_url(source, result)
        elif os.path.isdir(source):
            self._import_directory(source, result)
        else:
            with open(source, 'rb') as file:
                self._import_bytes(source, file.read(), result)

        if not result.instances:
            raise DatasetFormatError(f"No instances found in {source}", result.report)
        names = [instance.name for instance in result.instances]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            result.report.append(f"Duplicate instance names: {duplicates}")
        result.instances.sort(key=lambda instance: instance.name)
        self.logger.info("Imported %d instances from %s", len(result.instances), source)
        for line in result.report:
            self.logger.warning(line)
        return result

    def _import_directory(self, directory: str, result: DatasetImport) -> None:
        for root, _, files in sorted(os.walk(directory)):
            for name in sorted(files):
                path = os.path.join(root, name)
                if not name.lower().endswith(DATA_SUFFIXES):
                    result.report.append(f"{path}: skipped, not a JSON or zip file")
                    continue
                with open(path, 'rb') as file:
                    self._import_bytes(path, file.read(), result)

    def _import_url(self, url: str, result: DatasetImport) -> None:
        self.logger.info("Fetching dataset from %s", url)
        response = requests.get(url, timeout=self.timeout)
        response.raise_for_status()
        content_type = response.headers.get('Content-Type', '')
        if 'html' not in content_type:
            self._import_bytes(url, response.content, result)
            return

        soup = BeautifulSoup(response.content, 'html.parser')
        links = sorted({urljoin(response.url or url, anchor['href'])
                        for anchor in soup.find_all('a', href=True)
                        if anchor['href'].lower().split('?')[0].endswith(DATA_SUFFIXES)})
        if not links:
            result.report.append(f"{url}: HTML page without links to JSON or zip files")
            return
        for link in links:
            self.logger.debug("Following data link %s", link)
            linked = requests.get(link, timeout=self.timeout)
            linked.raise_for_status()
            self._import_bytes(link, linked.content, result)

    def _import_bytes(self, origin: str, content: bytes, result: DatasetImport) -> None:
        if zipfile.is_zipfile(io.BytesIO(content)):
            with zipfile.ZipFile(io.BytesIO(content)) as archive:
                for member in sorted(archive.namelist()):
                    if member.endswith('/'):
                        continue
                    where = f"{origin}!{member}"
                    if not member.lower().endswith('.json'):
                        result.report.append(f"{where}: skipped, not a JSON file")
                        continue
                    self._import_document(where, archive.read(member), result)
            return
        self._import_document(origin, content, result)

    def _import_document(self, origin: str, content: bytes, result: DatasetImport) -> None:
        try:
            data = json.loads(content.decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            result.report.append(f"{origin}: not valid JSON ({exc})")
            return
        for name, entry in self._candidates(origin, data, result):
            try:
                instance, warnings = instance_from_dict(entry)
            except (InstanceFormatError, KeyError, TypeError, ValueError) as exc:
                result.report.append(f"{origin}: {name or 'entry'} is not an instance ({exc})")
                continue
            if not instance.name:
                instance = replace(instance, name=name)
            result.report.extend(f"{origin}: {warning}" for warning in warnings)
            result.instances.append(instance)

    @staticmethod
    def _candidates(origin: str, data, result: DatasetImport) -> List[Tuple[Optional[str], Dict]]:
        stem = os.path.splitext(os.path.basename(origin.split('!')[-1]))[0]
        if _looks_like_instance(data):
            return [(stem, data)]
        if isinstance(data, dict) and isinstance(data.get('instances'), list):
            data = data['instances']
        if isinstance(data, list):
            return [(f"{stem}_{index}", entry) for index, entry in enumerate(data)]
        if isinstance(data, dict) and data and all(_looks_like_instance(v) for v in data.values()):
            return [(key, value) for key, value in sorted(data.items())]
        result.report.append(f"{origin}: no instance found; top-level keys "
                             f"{sorted(data) if isinstance(data, dict) else type(data).__name__}")
        return []


def import_dataset(source: str, timeout: int = REQUEST_TIMEOUT) -> DatasetImport:
    """Import a dataset with a default importer."""
    return DatasetImporter(timeout).import_source(source)
