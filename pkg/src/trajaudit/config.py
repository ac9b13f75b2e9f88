"""Run configuration (INI sections mirroring module configs) and run manifests.

Angles in config files are degrees with an explicit ``_deg`` suffix and are
converted to radians at this boundary. CLI ``--set section.key=value``
overrides beat file values. Every subcommand writes a manifest next to its
outputs recording input hashes and the resolved config, so a run can be
audited and reproduced.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from pathlib import Path

from .errors import SchemaError
from .miner import ScreeningConfig
from .records import FORMAT_VERSION
from .refinement import RefinementConfig
from .stabilizer import StabilizerConfig
from .tracker import TrackerConfig

ConfigMap = dict[str, dict[str, str]]


def load_config(path: str | Path | None) -> ConfigMap:
    cfg: ConfigMap = {}
    if path is None:
        return cfg
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    parser = configparser.ConfigParser()
    parser.read(path, encoding="utf-8")
    for section in parser.sections():
        cfg[section] = dict(parser.items(section))
    return cfg


def apply_overrides(cfg: ConfigMap, overrides: list[str] | None) -> ConfigMap:
    """Apply repeatable --set section.key=value flags."""
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise SchemaError(f"--set expects section.key=value, got {item!r}")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        cfg.setdefault(section.strip(), {})[key.strip()] = value.strip()
    return cfg


def _get(cfg: ConfigMap, section: str, key: str, cast, default):
    raw = cfg.get(section, {}).get(key)
    if raw is None:
        return default
    try:
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    except ValueError as exc:
        raise SchemaError(f"bad value for {section}.{key}: {raw!r}") from exc


def tracker_config(cfg: ConfigMap, dt: float | None = None) -> TrackerConfig:
    d = TrackerConfig()
    return TrackerConfig(
        gate_radius=_get(cfg, "tracker", "gate_radius", float, d.gate_radius),
        max_misses=_get(cfg, "tracker", "max_misses", int, d.max_misses),
        min_hits=_get(cfg, "tracker", "min_hits", int, d.min_hits),
        dt=dt if dt is not None else _get(cfg, "tracker", "dt", float, d.dt),
        process_noise=_get(cfg, "tracker", "process_noise", float, d.process_noise),
        measurement_noise=_get(
            cfg, "tracker", "measurement_noise", float, d.measurement_noise
        ),
        gate_mode=_get(cfg, "tracker", "gate_mode", str, d.gate_mode),
        iou_threshold=_get(cfg, "tracker", "iou_threshold", float, d.iou_threshold),
    )


def refinement_config(cfg: ConfigMap) -> RefinementConfig:
    d = RefinementConfig()
    return RefinementConfig(
        suspicion_threshold=_get(
            cfg, "refinement", "suspicion_threshold", float, d.suspicion_threshold
        ),
        yaw_step_limit=math.radians(
            _get(cfg, "refinement", "yaw_step_limit_deg", float, math.degrees(d.yaw_step_limit))
        ),
        yaw_step_scale=math.radians(
            _get(cfg, "refinement", "yaw_step_scale_deg", float, math.degrees(d.yaw_step_scale))
        ),
        residual_scale=_get(cfg, "refinement", "residual_scale", float, d.residual_scale),
        residual_limit=_get(cfg, "refinement", "residual_limit", float, d.residual_limit),
        score_drop_scale=_get(
            cfg, "refinement", "score_drop_scale", float, d.score_drop_scale
        ),
        pos_cap=_get(cfg, "refinement", "pos_cap", float, d.pos_cap),
        yaw_cap=math.radians(
            _get(cfg, "refinement", "yaw_cap_deg", float, math.degrees(d.yaw_cap))
        ),
        registration_ok_residual=_get(
            cfg, "refinement", "registration_ok_residual", float, d.registration_ok_residual
        ),
        window=_get(cfg, "refinement", "window", int, d.window),
    )


def stabilizer_config(cfg: ConfigMap, dt: float | None = None) -> StabilizerConfig:
    d = StabilizerConfig()
    return StabilizerConfig(
        window=_get(cfg, "stabilizer", "window", int, d.window),
        alpha=_get(cfg, "stabilizer", "alpha", float, d.alpha),
        alpha_low=_get(cfg, "stabilizer", "alpha_low", float, d.alpha_low),
        alpha_high=_get(cfg, "stabilizer", "alpha_high", float, d.alpha_high),
        s_min=_get(cfg, "stabilizer", "s_min", float, d.s_min),
        eps_psi=math.radians(
            _get(cfg, "stabilizer", "eps_psi_deg", float, math.degrees(d.eps_psi))
        ),
        max_step=math.radians(
            _get(cfg, "stabilizer", "max_step_deg", float, math.degrees(d.max_step))
        ),
        backprop_heading=_get(
            cfg, "stabilizer", "backprop_heading", bool, d.backprop_heading
        ),
        dt=dt if dt is not None else _get(cfg, "stabilizer", "dt", float, d.dt),
    )


def screening_config(cfg: ConfigMap) -> ScreeningConfig:
    d = ScreeningConfig()
    return ScreeningConfig(
        ttc_threshold=_get(cfg, "screening", "ttc_threshold", float, d.ttc_threshold),
        sep_threshold=_get(cfg, "screening", "sep_threshold", float, d.sep_threshold),
        min_track_displacement=_get(
            cfg, "screening", "min_track_displacement", float, d.min_track_displacement
        ),
        min_track_length=_get(
            cfg, "screening", "min_track_length", int, d.min_track_length
        ),
        stationary_speed=_get(
            cfg, "screening", "stationary_speed", float, d.stationary_speed
        ),
        anti_repeat_gap=_get(cfg, "screening", "anti_repeat_gap", int, d.anti_repeat_gap),
        buffer=_get(cfg, "screening", "buffer", float, d.buffer),
    )


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_digest(resolved: dict) -> str:
    return hashlib.sha256(
        json.dumps(resolved, sort_keys=True).encode("utf-8")
    ).hexdigest()


def write_manifest(
    manifest_path: str | Path,
    subcommand: str,
    inputs: dict[str, str],
    outputs: dict[str, str],
    resolved_config: dict,
) -> None:
    """Deterministic run record: input hashes, outputs, resolved config."""
    from . import __version__

    body = {
        "format_version": FORMAT_VERSION,
        "tool": "trajaudit",
        "version": __version__,
        "subcommand": subcommand,
        "inputs": {
            name: {"path": str(p), "sha256": sha256_file(p)}
            for name, p in inputs.items()
        },
        "outputs": {name: str(p) for name, p in outputs.items()},
        "config": resolved_config,
        "config_sha256": config_digest(resolved_config),
    }
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(body, fh, ensure_ascii=False, indent=1, sort_keys=True)
        fh.write("\n")
