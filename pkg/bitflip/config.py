# /bitflip/config.py
# Configuration.
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

import copy


class Config:
    """
    A class to manage the global configuration settings for the bitflip package.
    """

    _defaults = {
        "distributions": {
            "normalization_rtol": 1e-14,    # Stretched-exp normaliser: tail bound / partial sum
            "max_terms": 10**8,             # Hard cap on directly summed terms
            "prefix_block": 1024,           # Initial size of the lazy prefix-sum cache
            "max_index": 2**40,             # Quantile search gives up beyond this index
        },

        "engine": {
            "batch_size": 4096,             # Largest number of flip indices drawn per batch
            "first_batch": 16,              # First batch of a run, doubled on every refill
            "snapshot_truncation": 1e-9,    # PerBit: stop at the first K with Q_K * t below this
            "workers": 1,
            "progress": False,              # tqdm progress bars for replica loops
        },

        "coupling": {
            "audit_runs": 1000,
            "audit_steps": 1000,
            "swap_samples": 10**5,          # Uniforms per discrepancy set in the swap KS test
        },

        "analytics": {
            # Active probability of a BF bit at Poisson time x = p_k * t.
            # "poisson_parity" is (1 - exp(-2x)) / 2, from the parity of a
            # Poisson count. It is the only supported convention.
            "bf_active_convention": "poisson_parity",
            "series_truncation": 1e-9,      # E N_t / Var N_t: tail bound Q_K * t
            "product_truncation": 1e-8,     # Occupancy products: log error bound Q_K * t
            "t_max": 1e8,
            "tolerance": 1e-8,              # Relative quadrature target
            "epsabs": 1e-14,                # Absolute quadrature floor
            "quad_limit": 500,              # Maximal number of bisection subintervals
            "sandwich_epsilon": 0.01,       # epsilon of the (2 - epsilon) power-law bound
        },

        "estimators": {
            "min_samples": 100,
            "min_tail_samples": 10**4,
            "k_fraction": 0.1,              # Hill estimator: top order statistics fraction
            "ci_level": 0.95,
            "heavy_tail_threshold": 2.0,    # theta below this is reported as heavy-tailed
            "stability_fraction": 0.1,      # Subsample size of the moment stability diagnostic
            "stability_rtol": 0.1,
            "horizon_fraction": 0.5,        # tau at this share of the horizon: mean is a lower bound
            "growth_block": 1000,           # Block size of the divergent-mean diagnostic
            "growth_tolerance": 0.2,
            "clt_jitter": True,             # Uniform continuity correction of integer N_t
            "min_variance": 1e-6,
        },

        "cli": {
            "p_grid": [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45],
            "r_grid": [0.1, 0.2, 0.3, 0.4, 0.5],
            "horizon": 10**6,
            "replicas": 1000,
        },

        "logging": {
            "level": "WARNING",
            "format": "%(asctime)s %(name)s %(levelname)s: %(message)s",
        },
    }

    def __init__(self):
        # Store the current configuration, initially set to defaults
        self._config = copy.deepcopy(self._defaults)

    def get(self, key):
        """
        Get the current value of a configuration key.

        Parameters
        ----------
        key : str
            Dot-separated key to retrieve a configuration value
            (e.g., "engine.batch_size").

        Returns
        -------
        value : any
            The current value of the requested configuration key.

        Raises
        ------
        KeyError
            If the key does not exist.
        """
        keys = key.split(".")
        config = self._config
        for k in keys:
            if k not in config:
                raise KeyError(f"Configuration key '{key}' not found.")
            config = config[k]
        return config

    def set(self, key, value):
        """
        Set the value of a configuration key.

        Parameters
        ----------
        key : str
            Dot-separated key to set a configuration value
            (e.g., "analytics.tolerance").
        value : any
            The new value for the configuration key.

        Raises
        ------
        KeyError
            If the key does not exist.
        ValueError
            If an unsupported BF activity convention is requested.
        """
        keys = key.split(".")
        config = self._config
        for k in keys[:-1]:
            if k not in config:
                raise KeyError(f"Configuration key '{key}' not found.")
            config = config[k]
        if keys[-1] not in config:
            raise KeyError(f"Configuration key '{key}' not found.")
        if key == "analytics.bf_active_convention" and value != "poisson_parity":
            raise ValueError("Only the 'poisson_parity' BF convention is supported.")
        config[keys[-1]] = value

    def reset(self, key=None):
        """
        Reset a configuration key or all configurations to their default values.

        Parameters
        ----------
        key : str, optional
            Dot-separated key to reset a specific configuration value.
            If not provided, resets all configurations.
        """
        if key is None:
            self._config = copy.deepcopy(self._defaults)
        else:
            keys = key.split(".")
            config = self._config
            default_config = self._defaults
            for k in keys[:-1]:
                if k not in config or k not in default_config:
                    raise KeyError(f"Configuration key '{key}' not found.")
                config = config[k]
                default_config = default_config[k]
            if keys[-1] not in default_config:
                raise KeyError(f"Configuration key '{key}' not found.")
            config[keys[-1]] = copy.deepcopy(default_config[keys[-1]])

    def get_all(self):
        """
        Get the entire configuration dictionary.

        Returns
        -------
        dict
            A deep copy of the current configuration.
        """
        return copy.deepcopy(self._config)

# Create a global instance of Config
config = Config()
