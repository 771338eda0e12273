# /bitflip/__init__.py
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

__version__ = "0.1.0"

from .config import config
from .exceptions import BitflipError, DomainError, CouplingError, ConfigError
from .distributions import BitDistribution, Family, Verdict, classify_bf, classify_db, kappa_exponent
from .engine import (Model, SnapshotMethod, BitState, ReturnOutcome, step_bf, step_db, replay,
                     run_indices, run_return_time, run_projected_return, exact_projected_return,
                     sample_snapshot, ground_time_mc, simulate_returns, sample_active_counts,
                     simulate_ground_time, index_batches, scan_return)
from .coupling import (CoupledPair, buffer_index_k, swap_map, coupled_step, couple_bf_db,
                       audit_domination, audit_bf_db, swap_uniformity)
from .analytics import (AnalyticReport, MomentBounds, state_probs, expected_active, variance_active,
                        occupancy_integrand, ground_occupancy_bf, ground_occupancy_db, moment_bounds,
                        bk_given_ak, band_count, integrand_slope)
from .estimators import (EstimatorSummary, TailIndex, return_stats, mean_growth, tail_index,
                         conditional_moment_growth, clt_check)
from .io import read_config, read_csv, write_csv, write_json
from .analyze import ExperimentPipeline
from .cli import ExperimentConfig, parse_config, run_command, main
from .utilities import derive_seed, replica_rng, run_replicas

__all__ = []
