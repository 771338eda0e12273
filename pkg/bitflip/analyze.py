# /bitflip/analyze.py
# Experiment pipelines behind the command line.
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

import logging

from bitflip import analytics, coupling, distributions, engine, estimators, io
from .config import config
from .exceptions import DomainError

logger = logging.getLogger(__name__)

SIMULATE_COLUMNS = ["replica_id", "tau", "censored", "m0", "peak_m"]
SNAPSHOT_COLUMNS = ["replica_id", "n_active", "n_damaged", "max_active"]
MOMENTS_COLUMNS = ["p", "r_lower", "r_upper"]


class ExperimentPipeline:
    """
    Runs one experiment command and writes its outputs.

    Parameters
    ----------
    experiment : ExperimentConfig
        Validated configuration (see :func:`bitflip.cli.parse_config`).

    Examples
    --------
    >>> pipeline = ExperimentPipeline(parse_config(text)).run()
    >>> pipeline.save("returns.csv")
    """

    def __init__(self, experiment):
        self.experiment = experiment

        # Results
        self.outcomes = None
        self.summary = None
        self.tail = None
        self.snapshots = None
        self.reports = None
        self.verdicts = None
        self.bounds = None
        self.growth = None
        self.clt_summary = None
        self.audit = None

    def simulate(self):
        exp = self.experiment
        initial = None
        if exp.m0:
            initial = engine.BitState.single(exp.model, exp.m0)

        self.outcomes = engine.simulate_returns(exp.model, exp.dist, exp.horizon, exp.replicas, exp.seed,
                                                initial=initial, projection_m=exp.projection_m,
                                                workers=exp.workers)

        logger.info("Summarising return times...")
        try:
            self.summary = estimators.return_stats(self.outcomes, r_grid=exp.r_grid)
        except DomainError as err:
            logger.warning("No return-time summary: %s", err)
        uncensored = sum(not o.censored for o in self.outcomes)
        if uncensored >= config.get("estimators.min_tail_samples"):
            self.tail = estimators.tail_index(self.outcomes)
        logger.info("...done!")

    def snapshot(self):
        exp = self.experiment
        self.snapshots = engine.sample_active_counts(exp.model, exp.dist, exp.t, exp.method,
                                                     exp.replicas, exp.seed, workers=exp.workers)

    def analyze(self):
        exp = self.experiment
        self.reports = {}
        if exp.t is not None:
            self.reports["expected_active"] = analytics.expected_active(exp.dist, exp.model, exp.t)
            self.reports["variance_active"] = analytics.variance_active(exp.dist, exp.model, exp.t)
        if exp.model is engine.Model.BF:
            occupancy = analytics.ground_occupancy_bf(exp.dist, t_max=exp.t_max, tol=exp.tolerance)
        else:
            occupancy = analytics.ground_occupancy_db(exp.dist, t_max=exp.t_max, tol=exp.tolerance)
        self.reports["ground_occupancy"] = occupancy
        if exp.k_grid:
            logger.info("Evaluating P(B_k | A_k) on %d indices...", len(exp.k_grid))
            self.reports["bk_given_ak"] = {k: analytics.bk_given_ak(exp.dist, k, tol=exp.tolerance)
                                           for k in exp.k_grid}
            logger.info("...done!")

    def classify(self):
        dist = self.experiment.dist
        self.verdicts = {"bf": distributions.classify_bf(dist).value,
                         "db": distributions.classify_db(dist).value}

    def moments(self):
        exp = self.experiment
        self.bounds = [analytics.moment_bounds(p) for p in exp.p_grid]
        if exp.m_grid:
            if exp.dist is None or exp.dist.family is not distributions.Family.GEOMETRIC:
                raise DomainError("m_grid needs a geometric distribution.")
            r_lower = analytics.moment_bounds(exp.dist.p).r_lower
            self.growth = {}
            for r in exp.r_grid:
                if r >= r_lower:
                    logger.warning("Skipping growth fit at r = %g: needs r < r_lower = %.4f.",
                                   r, r_lower)
                    continue
                logger.info("Fitting %s moment growth at r = %g...", exp.model.value, r)
                self.growth[r] = estimators.conditional_moment_growth(
                    exp.dist, r, exp.m_grid, exp.replicas, horizon=exp.horizon,
                    seed=exp.seed, model=exp.model, workers=exp.workers)
                logger.info("...done!")

    def clt(self):
        exp = self.experiment
        self.clt_summary = estimators.clt_check(exp.dist, exp.model, exp.t, exp.replicas,
                                                seed=exp.seed, method=exp.method, workers=exp.workers)

    def couple_audit(self):
        exp = self.experiment
        swap = coupling.swap_uniformity(exp.dist, config.get("coupling.swap_samples"), exp.seed)
        self.audit = {
            "domination": coupling.audit_domination(exp.dist, runs=exp.replicas, steps=exp.steps,
                                                    seed=exp.seed, workers=exp.workers).to_dict(),
            "bf_db": coupling.audit_bf_db(exp.dist, exp.replicas, exp.horizon, exp.seed,
                                          workers=exp.workers).to_dict(),
            "swap_uniformity": [{"ks_statistic": s, "p_value": p} for s, p in swap],
        }

    def run(self):
        steps = {
            "simulate": self.simulate,
            "snapshot": self.snapshot,
            "analyze": self.analyze,
            "classify": self.classify,
            "moments": self.moments,
            "clt": self.clt,
            "couple-audit": self.couple_audit,
        }
        command = self.experiment.command
        if command not in steps:
            raise ValueError(f"Unknown command: {command}")
        logger.info("Running %s...", command)
        steps[command]()
        logger.info("...done!")
        return self

    def save(self, path):
        """Write the result of the last command to ``path`` (and sidecars)."""
        exp = self.experiment
        header = exp.resolved()
        command = exp.command

        if command == "simulate":
            rows = ((i, o.time, o.censored, o.m0, o.peak_m) for i, o in enumerate(self.outcomes))
            io.write_csv(path, rows, SIMULATE_COLUMNS, header)
            if self.summary is not None:
                sidecar = self.summary.to_dict()
                if self.tail is not None:
                    sidecar["tail_index"] = self.tail.to_dict()
                io.write_json(f"{path}.summary.json", sidecar, header)

        elif command == "snapshot":
            rows = ((i, *row) for i, row in enumerate(self.snapshots.tolist()))
            io.write_csv(path, rows, SNAPSHOT_COLUMNS, header)

        elif command == "analyze":
            payload = {}
            for name, report in self.reports.items():
                payload[name] = report if name == "bk_given_ak" else report.to_dict()
            io.write_json(path, payload, header)

        elif command == "classify":
            io.write_json(path, self.verdicts, header)

        elif command == "moments":
            rows = ((b.p, b.r_lower, b.r_upper) for b in self.bounds)
            io.write_csv(path, rows, MOMENTS_COLUMNS, header)
            if self.growth:
                io.write_json(f"{path}.growth.json",
                              {repr(float(r)): fit.to_dict() for r, fit in self.growth.items()}, header)

        elif command == "clt":
            io.write_json(path, self.clt_summary.to_dict(), header)

        else:
            io.write_json(path, self.audit, header)
        return self

    def get(self, step_name):
        if step_name == "outcomes":
            return self.outcomes
        elif step_name == "summary":
            return self.summary
        elif step_name == "tail index":
            return self.tail
        elif step_name == "snapshots":
            return self.snapshots
        elif step_name == "reports":
            return self.reports
        elif step_name == "verdicts":
            return self.verdicts
        elif step_name == "moment bounds":
            return self.bounds
        elif step_name == "growth":
            return self.growth
        elif step_name == "clt":
            return self.clt_summary
        elif step_name == "audit":
            return self.audit
        else:
            raise ValueError(f"Unknown step: {step_name}")
