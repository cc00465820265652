"""Global flat key=value configuration covering every tunable default."""

from dataclasses import dataclass, field

from .assignment import GatingPolicy
from .cmc import RansacConfig
from .ddcf import DcfConfig
from .errors import ConfigError, TrackingError
from .formats import parse_kv_text
from .gog import GogConfig
from .lifecycle import LifecycleConfig
from .motion import MotionConfig
from .pipeline import TrackerConfig

_INT_KEYS = {
    "min_hits", "max_age", "cls_lead", "tentative_miss_tolerance",
    "pending_fail_patience", "dcf_patch_cells", "ransac_iters",
    "ransac_min_inliers", "gog_max_gap",
}
_FLOAT_KEYS = {
    "base_radius_px", "reference_altitude_m", "cls_confirm_threshold",
    "dcf_lambda", "dcf_learning_rate", "dcf_label_sigma", "dcf_psr_min",
    "ransac_inlier_px", "gog_entry_cost", "gog_exit_cost", "gog_gap_penalty",
    "idsw_gate_px", "process_noise_pos", "process_noise_vel",
    "measurement_noise", "initial_pos_var", "initial_vel_var",
}
_BOOL_KEYS = {"emit_coasted"}

KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS


@dataclass(frozen=True)
class ToolkitConfig:
    """Everything the CLI subcommands need, resolved from one file."""

    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    gog: GogConfig = field(default_factory=GogConfig)
    idsw_gate: float = 10.0


def _typed(key: str, raw: str):
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {raw!r}") from None
    if key in _FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {raw!r}") from None
    lowered = raw.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {raw!r}")


def toolkit_config_from_kv(values: dict[str, str]) -> ToolkitConfig:
    typed = {}
    for key, raw in values.items():
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        typed[key] = _typed(key, raw)

    def pick(cls, mapping: dict[str, str]):
        kwargs = {attr: typed[key] for key, attr in mapping.items() if key in typed}
        try:
            return cls(**kwargs)
        except TrackingError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    motion = pick(MotionConfig, {
        "process_noise_pos": "process_noise_pos",
        "process_noise_vel": "process_noise_vel",
        "measurement_noise": "measurement_noise",
        "initial_pos_var": "initial_pos_var",
        "initial_vel_var": "initial_vel_var",
    })
    gating = pick(GatingPolicy, {
        "base_radius_px": "base_radius",
        "reference_altitude_m": "reference_altitude",
    })
    lifecycle = pick(LifecycleConfig, {
        "min_hits": "min_hits",
        "max_age": "max_age",
        "cls_lead": "cls_lead",
        "cls_confirm_threshold": "cls_confirm_threshold",
        "tentative_miss_tolerance": "tentative_miss_tolerance",
        "pending_fail_patience": "pending_fail_patience",
    })
    dcf = pick(DcfConfig, {
        "dcf_patch_cells": "patch_cells",
        "dcf_lambda": "regularization",
        "dcf_learning_rate": "learning_rate",
        "dcf_label_sigma": "label_sigma",
        "dcf_psr_min": "psr_min",
    })
    ransac = pick(RansacConfig, {
        "ransac_iters": "iterations",
        "ransac_inlier_px": "inlier_threshold",
        "ransac_min_inliers": "min_inliers",
    })
    gog = pick(GogConfig, {
        "gog_entry_cost": "entry_cost",
        "gog_exit_cost": "exit_cost",
        "gog_gap_penalty": "gap_penalty",
        "gog_max_gap": "max_gap",
        "base_radius_px": "gate",
    })
    tracker = TrackerConfig(
        motion=motion, gating=gating, lifecycle=lifecycle, dcf=dcf, ransac=ransac,
        emit_coasted=typed.get("emit_coasted", False),
    )
    return ToolkitConfig(tracker=tracker, gog=gog,
                         idsw_gate=typed.get("idsw_gate_px", 10.0))


def load_toolkit_config(path=None) -> ToolkitConfig:
    """Read the config file; None gives all defaults."""
    if path is None:
        return ToolkitConfig()
    from pathlib import Path
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} does not exist")
    return toolkit_config_from_kv(parse_kv_text(p.read_text()))
