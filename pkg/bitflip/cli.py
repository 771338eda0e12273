# /bitflip/cli.py
# Command line entry point: JSON experiment configurations in, CSV/JSON results out.
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

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass
from typing import Optional

from .analyze import ExperimentPipeline
from .config import config
from .distributions import BitDistribution
from .engine import Model, SnapshotMethod
from .exceptions import BitflipError, ConfigError
from .io import read_config

logger = logging.getLogger(__name__)

COMMANDS = ("simulate", "snapshot", "analyze", "classify", "moments", "clt", "couple-audit")

# Fields each command cannot do without (seed is always required).
REQUIRED = {
    "simulate": ("dist",),
    "snapshot": ("dist", "t"),
    "analyze": ("dist",),
    "classify": ("dist",),
    "moments": (),
    "clt": ("dist", "t"),
    "couple-audit": ("dist",),
}

FIELDS = ("command", "model", "dist", "seed", "replicas", "horizon", "t", "method",
          "r_grid", "m_grid", "p_grid", "k_grid", "steps", "projection_m", "m0",
          "tolerance", "t_max", "output", "workers")

EXTENSIONS = {"simulate": "csv", "snapshot": "csv", "moments": "csv"}


@dataclass
class ExperimentConfig:
    """
    A validated experiment. Build it with :func:`parse_config`.

    ``resolved()`` is the configuration written into every output header;
    it leaves out the output path and the worker count, neither of which
    changes the results.
    """
    command: str
    seed: int
    model: Model = Model.BF
    dist: Optional[BitDistribution] = None
    replicas: int = config.get("cli.replicas")
    horizon: int = config.get("cli.horizon")
    t: Optional[float] = None
    method: SnapshotMethod = SnapshotMethod.PER_BIT
    r_grid: tuple = tuple(config.get("cli.r_grid"))
    m_grid: Optional[tuple] = None
    p_grid: tuple = tuple(config.get("cli.p_grid"))
    k_grid: Optional[tuple] = None
    steps: int = config.get("coupling.audit_steps")
    projection_m: Optional[int] = None
    m0: Optional[int] = None
    tolerance: float = config.get("analytics.tolerance")
    t_max: float = config.get("analytics.t_max")
    output: Optional[str] = None
    workers: int = config.get("engine.workers")

    def resolved(self):
        return {
            "command": self.command,
            "model": self.model.value,
            "dist": self.dist.to_spec() if self.dist is not None else None,
            "seed": self.seed,
            "replicas": self.replicas,
            "horizon": self.horizon,
            "t": self.t,
            "method": self.method.value,
            "r_grid": list(self.r_grid),
            "m_grid": list(self.m_grid) if self.m_grid else None,
            "p_grid": list(self.p_grid),
            "k_grid": list(self.k_grid) if self.k_grid else None,
            "steps": self.steps,
            "projection_m": self.projection_m,
            "m0": self.m0,
            "tolerance": self.tolerance,
            "t_max": self.t_max,
        }

    def default_output(self):
        return f"{self.command}.{EXTENSIONS.get(self.command, 'json')}"


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _integer(doc, key, low, high=None):
    value = doc[key]
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(key, f"must be an integer, got {value!r}.")
    if value < low or (high is not None and value > high):
        bound = f"[{low}, {high}]" if high is not None else f">= {low}"
        raise ConfigError(key, f"value {value} outside {bound}.")
    return value


def _positive_real(doc, key):
    value = doc[key]
    if not _is_number(value) or not math.isfinite(value) or value <= 0:
        raise ConfigError(key, f"must be a positive number, got {value!r}.")
    return float(value)


def _grid(doc, key, check):
    values = doc[key]
    if not isinstance(values, list) or not values:
        raise ConfigError(key, "must be a non-empty list.")
    for i, value in enumerate(values):
        if not check(value):
            raise ConfigError(f"{key}[{i}]", f"invalid entry {value!r}.")
    return tuple(values)


def _choice(doc, key, enum):
    try:
        return enum(doc[key])
    except ValueError:
        options = ", ".join(e.value for e in enum)
        raise ConfigError(key, f"unknown value {doc[key]!r}; expected one of {options}.") from None


def parse_config(text, command=None):
    """
    Parse and validate a JSON experiment configuration.

    Parameters
    ----------
    text : str
        JSON document.
    command : str, optional
        Overrides the document's ``command`` field.

    Returns
    -------
    ExperimentConfig

    Raises
    ------
    ConfigError
        Malformed JSON, unknown fields or commands, missing seed, or invalid
        values. The error names the offending field.

    Examples
    --------
    >>> exp = parse_config('{"command": "classify", "seed": 1, '
    ...                    '"dist": {"family": "geometric", "p": 0.6}}')
    >>> exp.dist
    BitDistribution.geometric(p=0.6)
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("<document>", f"invalid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "the configuration must be a JSON object.")

    for key in doc:
        if key not in FIELDS:
            raise ConfigError(key, "unknown field.")
    if command is not None:
        doc["command"] = command
    if "command" not in doc:
        raise ConfigError("command", "missing required field.")
    if doc["command"] not in COMMANDS:
        raise ConfigError("command", f"unknown command {doc['command']!r}; "
                          f"expected one of {', '.join(COMMANDS)}.")
    if "seed" not in doc:
        raise ConfigError("seed", "missing required field; every experiment needs an explicit seed.")
    for key in REQUIRED[doc["command"]]:
        if key not in doc:
            raise ConfigError(key, f"required by the {doc['command']!r} command.")

    exp = ExperimentConfig(command=doc["command"], seed=_integer(doc, "seed", 0, 2**64 - 1))
    if "model" in doc:
        exp.model = _choice(doc, "model", Model)
    if "method" in doc:
        exp.method = _choice(doc, "method", SnapshotMethod)
    if "dist" in doc:
        exp.dist = BitDistribution.from_spec(doc["dist"], path="dist")

    for key in ("replicas", "horizon", "steps", "projection_m", "m0", "workers"):
        if key in doc:
            setattr(exp, key, _integer(doc, key, 1))
    for key in ("t", "tolerance", "t_max"):
        if key in doc:
            setattr(exp, key, _positive_real(doc, key))

    if "r_grid" in doc:
        exp.r_grid = _grid(doc, "r_grid", lambda r: _is_number(r) and 0 < r < 1)
    if "p_grid" in doc:
        exp.p_grid = _grid(doc, "p_grid", lambda p: _is_number(p) and 0 < p < 0.5)
    for key in ("m_grid", "k_grid"):
        if key in doc:
            setattr(exp, key, _grid(doc, key, lambda m: isinstance(m, int)
                                    and not isinstance(m, bool) and m >= 0))
    if exp.k_grid and min(exp.k_grid) < 1:
        raise ConfigError("k_grid", "bit indices start at 1.")

    if "output" in doc:
        if not isinstance(doc["output"], str) or not doc["output"]:
            raise ConfigError("output", "must be a non-empty path.")
        exp.output = doc["output"]
    if exp.projection_m and exp.model is not Model.BF:
        raise ConfigError("projection_m", "projected return times need model 'bf'.")
    return exp


def run_command(experiment, output=None):
    """
    Run a validated experiment and write its outputs.

    Returns
    -------
    int
        0 on success, 1 on a runtime or I/O failure (reported on stderr).
    """
    path = output or experiment.output or experiment.default_output()
    try:
        ExperimentPipeline(experiment).run().save(path)
    except (BitflipError, OSError, ValueError, ArithmeticError) as err:
        logger.error("%s failed: %s", experiment.command, err)
        print(f"bitflip: error: {err}", file=sys.stderr)
        return 1
    return 0


def _configure_logging(verbose):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(config.get("logging.format")))
    root = logging.getLogger("bitflip")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO if verbose else config.get("logging.level"))


def main(argv=None):
    """Console entry point, ``bitflip CONFIG [--command C] [--output PATH]``."""
    parser = argparse.ArgumentParser(
        prog="bitflip",
        description="Simulation and numerics for the Binary Flipping and Damaged Bits models.")
    parser.add_argument("config", help="JSON experiment configuration")
    parser.add_argument("--command", choices=COMMANDS, help="override the configuration's command")
    parser.add_argument("--output", help="override the output path")
    parser.add_argument("--verbose", action="store_true", help="log progress at INFO level")
    args = parser.parse_args(argv)

    _configure_logging(args.verbose)
    try:
        text = read_config(args.config)
    except OSError as err:
        print(f"bitflip: error: cannot read {args.config}: {err}", file=sys.stderr)
        return 1
    try:
        experiment = parse_config(text, command=args.command)
    except ConfigError as err:
        print(f"bitflip: config error: {err}", file=sys.stderr)
        return 2
    return run_command(experiment, output=args.output)


if __name__ == "__main__":
    sys.exit(main())
