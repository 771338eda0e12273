# /bitflip/io.py
# Module handles the import of experiment configurations and the output of results.
#
#
# Copyright (C) 2024 The bitflip developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program. If not, see <https://www.gnu.org/licenses/>.

import csv
import json
import logging
import math
import os

import numpy as np

from . import __version__

logger = logging.getLogger(__name__)


def read_config(path):
    """
    Read an experiment configuration document.

    Parameters
    ----------
    path : str
        Path of the JSON file.

    Returns
    -------
    str
        The document text, parsed later by :func:`bitflip.cli.parse_config`.

    Examples
    --------
    >>> text = bitflip.read_config("experiments/bf_geometric.json")
    """
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _plain(value):
    """Convert numpy scalars, tuples and non-finite floats into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def _dumps(payload):
    return json.dumps(_plain(payload), sort_keys=True, indent=2, separators=(",", ": "))


def header_block(resolved_config):
    """Version and resolved configuration written at the top of every output."""
    return {"bitflip": __version__, "config": resolved_config}


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_csv(path, rows, columns, header):
    """
    Write rows to a CSV file preceded by a commented header block.

    Parameters
    ----------
    path : str
        Output file. Missing parent directories are created.
    rows : iterable of sequence
        One sequence per row, in ``columns`` order.
    columns : list of str
        Column names of the header row.
    header : dict
        Resolved configuration; written as ``#`` comment lines.

    Examples
    --------
    >>> write_csv("moments.csv", [(0.25, 0.5, 0.596)], ["p", "r_lower", "r_upper"], resolved)
    """
    _make_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(f"# bitflip {__version__}\n")
        for line in _dumps(header).splitlines():
            handle.write(f"# {line}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.info("Results written to %s.", path)


def write_json(path, payload, header):
    """
    Write a JSON result with sorted keys, ``header`` merged at the top level.

    The file has no timestamps, so identical inputs give identical bytes.
    """
    _make_parent(path)
    document = dict(header_block(header))
    document["result"] = payload
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(_dumps(document))
        handle.write("\n")
    logger.info("Results written to %s.", path)


def read_csv(path):
    """
    Load a CSV written by :func:`write_csv`.

    Returns
    -------
    (list of str, numpy.ndarray)
        Column names and the data as a float array.
    """
    with open(path, "r", encoding="utf-8") as handle:
        lines = [line for line in handle if not line.startswith("#")]
    columns = lines[0].strip().split(",")
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2) if len(lines) > 1 else np.empty((0, len(columns)))
    return columns, data


def _make_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
