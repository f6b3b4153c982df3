"""Pipeline configuration.

Config files are plain text, one "key = value" per line with dotted
section keys and '#' comments.  Every key has a default, so an empty
config runs the reference configuration: SGM with sub-pixel refinement
(DE) and direct depth-map downsampling (DD) enabled, adaptive
downsampling (AD) off.

Environment variables override file values: PSEUDOLIDAR_<KEY> with dots
spelled as double underscores, e.g. PSEUDOLIDAR_SGM__P1=12 sets sgm.p1.
CLI flags override both.
"""

import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .errors import ConfigError
from .pillars import PillarConfig
from .refine import AdaptiveSamplingPolicy
from .sgm import SgmParams
from .types import ScopeCrop

ENV_PREFIX = "PSEUDOLIDAR_"

# Keys reserved for kernel-backend selection, not pipeline options.
_ENV_IGNORE = {"PSEUDOLIDAR_BACKEND"}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (type converter, default)
DEFAULTS = {
    "max_disparity": (int, 128),
    "d_min": (float, 0.5),
    "census.width": (int, 5),
    "census.height": (int, 5),
    "sgm.p1": (int, 10),
    "sgm.p2": (int, 120),
    "sgm.num_paths": (int, 8),
    "sgm.lr_threshold": (float, 1.0),
    "de.enabled": (_parse_bool, True),
    "dd.enabled": (_parse_bool, True),
    "ad.enabled": (_parse_bool, False),
    "ad.near_keep_prob": (float, 0.25),
    "ad.far_keep_prob": (float, 1.0),
    "ad.z_near": (float, 0.0),
    "ad.z_far": (float, 40.0),
    "ad.seed": (int, 0),
    "scope.x_min": (float, 0.0),
    "scope.x_max": (float, 69.12),
    "scope.y_min": (float, -39.68),
    "scope.y_max": (float, 39.68),
    "scope.z_min": (float, -3.0),
    "scope.z_max": (float, 1.0),
    "pillar.size_x": (float, 0.12),
    "pillar.size_y": (float, 0.12),
    "pillar.size_z": (float, 4.0),
    "pillar.max_points": (int, 32),
    "pillar.max_pillars": (int, 12000),
    "input.left_dir": (str, ""),
    "input.right_dir": (str, ""),
    "input.calib_dir": (str, ""),
    "output.dir": (str, "out"),
    "output.write_ply": (_parse_bool, False),
    "output.write_pillars": (_parse_bool, False),
    "output.write_disparity_png": (_parse_bool, False),
    "threads": (int, 1),
}


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    mapping = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def _env_overrides(environ) -> Dict[str, str]:
    overrides = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX) or name in _ENV_IGNORE:
            continue
        key = name[len(ENV_PREFIX):].lower().replace("__", ".")
        if key in DEFAULTS:
            overrides[key] = value
    return overrides


@dataclass
class PipelineConfig:
    """Fully-resolved settings plus the frame list to process."""

    values: Dict[str, object]
    frames: List[str] = field(default_factory=list)

    @classmethod
    def load(cls, config_path: Optional[str] = None, overrides: Optional[Dict[str, str]] = None,
             environ=None, frames: Optional[List[str]] = None) -> "PipelineConfig":
        raw: Dict[str, str] = {}
        if config_path is not None:
            if not os.path.isfile(config_path):
                raise ConfigError(f"config file not found: {config_path}")
            with open(config_path) as fh:
                raw.update(parse_config_text(fh.read(), source=str(config_path)))
        raw.update(_env_overrides(os.environ if environ is None else environ))
        if overrides:
            raw.update({k: str(v) for k, v in overrides.items()})

        values = {key: default for key, (_, default) in DEFAULTS.items()}
        for key, text in raw.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key: {key}")
            convert, _ = DEFAULTS[key]
            try:
                values[key] = convert(text)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from exc
        return cls(values=values, frames=list(frames or []))

    def __getitem__(self, key):
        return self.values[key]

    @property
    def sgm_params(self) -> SgmParams:
        try:
            return SgmParams(
                p1=self["sgm.p1"],
                p2=self["sgm.p2"],
                num_paths=self["sgm.num_paths"],
                lr_threshold=self["sgm.lr_threshold"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def scope(self) -> ScopeCrop:
        try:
            return ScopeCrop(
                x_min=self["scope.x_min"], x_max=self["scope.x_max"],
                y_min=self["scope.y_min"], y_max=self["scope.y_max"],
                z_min=self["scope.z_min"], z_max=self["scope.z_max"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def adaptive_policy(self) -> AdaptiveSamplingPolicy:
        try:
            return AdaptiveSamplingPolicy(
                near_keep_prob=self["ad.near_keep_prob"],
                far_keep_prob=self["ad.far_keep_prob"],
                z_near=self["ad.z_near"],
                z_far=self["ad.z_far"],
                seed=self["ad.seed"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def pillar_config(self) -> PillarConfig:
        try:
            return PillarConfig(
                pillar_x=self["pillar.size_x"],
                pillar_y=self["pillar.size_y"],
                pillar_z=self["pillar.size_z"],
                scope=self.scope,
                max_points_per_pillar=self["pillar.max_points"],
                max_pillars=self["pillar.max_pillars"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def census_window(self) -> tuple:
        return (self["census.width"], self["census.height"])
