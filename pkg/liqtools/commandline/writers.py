"""writers.py

Output writers for command results. A writer owns one destination and
records every file it produces so the run manifest can list them.

All numbers are written with 17 significant digits, so reruns with the
same config and seed produce byte-identical files."""

import csv
import json
import logging
import os
from abc import ABCMeta, abstractmethod

import numpy as np

log = logging.getLogger(__name__)

NUMBER_FORMAT = '%.17g'


def formatCell(value):
    """Formats one CSV cell: floats at full precision, the rest as str."""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return NUMBER_FORMAT % value
    if isinstance(value, (int, np.integer)):
        return str(int(value))

    return str(value)


class OutputWriter(metaclass=ABCMeta):
    """Abstract destination for tables, json documents and figures."""

    def __init__(self):
        self._written = []

    @property
    def written(self):
        """Names of everything written so far, in order."""
        return list(self._written)

    def _record(self, name):
        if name in self._written:
            raise ValueError("Output '%s' written twice." % name)
        self._written.append(name)

    @abstractmethod
    def writeTable(self, name, header, rows):
        """Writes a numeric table; 'rows' is a 2D array-like."""
        raise NotImplementedError

    @abstractmethod
    def writeRecords(self, name, header, records):
        """Writes rows of mixed strings and numbers."""
        raise NotImplementedError

    @abstractmethod
    def writeJson(self, name, document):
        raise NotImplementedError

    @abstractmethod
    def writeFigure(self, name, figure):
        """Writes a matplotlib figure as SVG."""
        raise NotImplementedError


class DirectoryWriter(OutputWriter):
    """OutputWriter implementation that writes files into one directory,
    creating it on first use."""

    def __init__(self, directory):
        super().__init__()
        self.directory = directory

    def _path(self, name):
        os.makedirs(self.directory, exist_ok=True)
        self._record(name)
        return os.path.join(self.directory, name)

    def writeTable(self, name, header, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        path = self._path(name)
        np.savetxt(path, rows, fmt=NUMBER_FORMAT, delimiter=',', header=','.join(header), comments='')
        log.debug("Wrote %s (%d rows).", path, rows.shape[0])

    def writeRecords(self, name, header, records):
        path = self._path(name)
        with open(path, 'w', newline='') as f:
            out = csv.writer(f, lineterminator='\n')
            out.writerow(header)
            for record in records:
                out.writerow([formatCell(v) for v in record])
        log.debug("Wrote %s.", path)

    def writeJson(self, name, document):
        path = self._path(name)
        with open(path, 'w') as f:
            json.dump(document, f, indent=2, sort_keys=True, default=_jsonDefault)
            f.write('\n')

    def writeFigure(self, name, figure):
        path = self._path(name)
        figure.savefig(path, format='svg', metadata={'Date': None})
        log.debug("Wrote %s.", path)


def _jsonDefault(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()

    raise TypeError("Not JSON serializable: %r" % type(value))
