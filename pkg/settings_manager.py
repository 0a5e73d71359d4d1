import json
import math
import os
import logging
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

import psutil

from errors import InvalidSetting, ParseError
from similarity import DistanceParams

logger = logging.getLogger(__name__)


def _is_count(x, low, high=None):
    """Integral number in [low, high]; booleans are not numbers here"""
    if isinstance(x, bool) or int(x) != x:
        return False
    return int(x) >= low and (high is None or int(x) <= high)


def machine_workers():
    """Logical CPU count, at least 1"""
    return psutil.cpu_count(logical=True) or 1


@dataclass(frozen=True)
class RunConfig:
    """Effective parameters of one command run"""
    n_classes: int = 1000
    k: int = 60
    m_ratio: float = 10000.0
    min_shared: int = 10
    p: int = 100
    workers: int = 1
    seed: int = 0
    strict_prob: bool = False
    relevance: str = 'shared'

    def __post_init__(self):
        for name in ('n_classes', 'k', 'p', 'workers'):
            if getattr(self, name) < 1:
                raise InvalidSetting(f"{name} must be positive, got {getattr(self, name)}")
        if not (math.isfinite(self.m_ratio) and self.m_ratio > 0):
            raise InvalidSetting(f"m_ratio must be positive and finite, got {self.m_ratio}")
        if self.min_shared < 0 or self.seed < 0:
            raise InvalidSetting("min_shared and seed must be non-negative")
        if self.k > self.n_classes:
            raise InvalidSetting(f"k={self.k} exceeds n_classes={self.n_classes}")

    def distance_params(self, k: Optional[int] = None, m_ratio: Optional[float] = None) -> DistanceParams:
        return DistanceParams.from_ratio(m_ratio or self.m_ratio, self.min_shared, k or self.k)


class SettingsManager:
    """Run settings: built-in defaults, overlaid by a JSON file, overlaid by command-line values"""

    def __init__(self, settings_file=None):
        self.settings_file = settings_file
        self.default_settings = {
            # Features
            'n_classes': 1000,
            'k': 60,
            'strict_prob': False,

            # Distance
            'm_ratio': 10000.0,  # M1 / M2 with M2 = 1
            'min_shared': 10,

            # Evaluation
            'p': 100,
            'relevance': 'shared',

            # Performance
            'workers': None,  # None = logical CPU count

            # Synthetic corpus
            'seed': 0,

            # Advanced
            'log_level': 'INFO'
        }
        self.settings = self.load_settings()

    def load_settings(self):
        """Load settings from file merged over the defaults"""
        settings = self.default_settings.copy()
        if not self.settings_file:
            return settings
        if not os.path.exists(self.settings_file):
            logger.warning(f"Settings file {self.settings_file} not found, using defaults")
            return settings
        try:
            with open(self.settings_file, 'r') as f:
                loaded_settings = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(self.settings_file, e.lineno, e.msg) from None
        if not isinstance(loaded_settings, dict):
            raise ParseError(self.settings_file, 1, "settings must be a JSON object")

        for key, value in loaded_settings.items():
            if key not in self.default_settings:
                continue  # unknown keys and metadata such as last_updated
            if not self.validate_setting(key, value):
                raise InvalidSetting(f"{self.settings_file}: invalid value for {key}: {value!r}")
            settings[key] = value
        return settings

    def save_settings(self, filepath):
        """Write the current settings as JSON"""
        settings = self.settings.copy()
        settings['last_updated'] = datetime.now().isoformat()
        with open(filepath, 'w') as f:
            json.dump(settings, f, indent=4)
        logger.info(f"Settings written to {filepath}")

    def get(self, key, default=None):
        """Get a setting value"""
        return self.settings.get(key, default)

    def update(self, new_settings):
        """Apply overrides; None values are skipped"""
        for key, value in new_settings.items():
            if value is None:
                continue
            if key not in self.default_settings:
                raise InvalidSetting(f"Unknown setting: {key}")
            if not self.validate_setting(key, value):
                raise InvalidSetting(f"Invalid value for {key}: {value!r}")
            self.settings[key] = value

    def get_all(self):
        """Get all settings"""
        return self.settings.copy()

    def validate_setting(self, key, value):
        """Validate a setting value"""
        validators = {
            'n_classes': lambda x: _is_count(x, 1, 1_000_000),
            'k': lambda x: _is_count(x, 1),
            'strict_prob': lambda x: isinstance(x, bool),
            'm_ratio': lambda x: not isinstance(x, (bool, str)) and math.isfinite(float(x)) and float(x) > 0,
            'min_shared': lambda x: _is_count(x, 0),
            'p': lambda x: _is_count(x, 1),
            'relevance': lambda x: x in ('shared', 'binary'),
            'workers': lambda x: x is None or _is_count(x, 1, 1024),
            'seed': lambda x: _is_count(x, 0),
            'log_level': lambda x: str(x).upper() in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'),
        }

        if key in validators:
            try:
                return bool(validators[key](value))
            except (TypeError, ValueError):
                return False
        return True

    def get_setting_info(self, key):
        """Get information about a setting"""
        info = {
            'n_classes': {'description': 'Number of classifier output classes (N)', 'type': 'int', 'min': 1},
            'k': {'description': 'Classes kept per image by top-K truncation', 'type': 'int', 'min': 1},
            'strict_prob': {'description': 'Require probability vectors to sum to 1 (+-1e-3)', 'type': 'bool'},
            'm_ratio': {'description': 'Weight ratio M1/M2 of the distance (M2 = 1)', 'type': 'float', 'min': 0},
            'min_shared': {'description': 'Coarse filter: minimum shared classes before scoring', 'type': 'int', 'min': 0},
            'p': {'description': 'Truncation position of ranked lists and metrics', 'type': 'int', 'min': 1},
            'relevance': {'description': 'Relevance definition: shared label count or binary', 'type': 'str'},
            'workers': {'description': 'Parallel query workers (default: logical CPUs)', 'type': 'int', 'min': 1},
            'seed': {'description': 'Random seed of the synthetic corpus generator', 'type': 'int', 'min': 0},
            'log_level': {'description': 'Logging level', 'type': 'str'},
        }
        return info.get(key, {'description': 'Setting', 'type': 'str'})

    def to_run_config(self):
        """RunConfig from the effective settings"""
        workers = self.settings['workers']
        return RunConfig(
            n_classes=int(self.settings['n_classes']),
            k=int(self.settings['k']),
            m_ratio=float(self.settings['m_ratio']),
            min_shared=int(self.settings['min_shared']),
            p=int(self.settings['p']),
            workers=int(workers) if workers is not None else machine_workers(),
            seed=int(self.settings['seed']),
            strict_prob=bool(self.settings['strict_prob']),
            relevance=self.settings['relevance'],
        )
