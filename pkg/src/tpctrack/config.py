"""Configuration loading: packaged defaults, optional user file, flag overrides.

The file format is a single YAML document whose sections mirror the spec
dataclasses. A user file only needs the keys it wants to change; everything
else falls back to the packaged defaults.
"""

from __future__ import annotations

import copy
import math
from importlib import resources
from typing import Optional

import yaml

from .detector import ConfigError, DetectorSpec, GasSpec, ImageGridSpec, VoxelGridSpec
from .padplane import PadPlaneSpec
from .simkit import DistSpec, KinematicsRanges, NoiseSpec, SimConfig


def default_config_dict() -> dict:
    text = resources.files("tpctrack.data").joinpath("default.yaml").read_text()
    return yaml.safe_load(text)


def load_config_dict(path: Optional[str] = None) -> dict:
    """Packaged defaults, deep-merged with the user file when given."""
    config = default_config_dict()
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            user = yaml.safe_load(fh) or {}
        config = _deep_merge(config, user)
    return config


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def gas_spec(config: dict) -> GasSpec:
    g = config["gas"]
    return GasSpec(
        name=g["name"],
        density=float(g["density"]),
        z_over_a=float(g["z_over_a"]),
        mean_excitation_energy=float(g["mean_excitation_energy"]),
        w_value=float(g["w_value"]),
    )


def detector_spec(config: dict) -> DetectorSpec:
    d = config["detector"]
    return DetectorSpec(
        gas=gas_spec(config),
        length_z=float(d["length_z"]),
        radius=float(d["radius"]),
        b_field=float(d["b_field"]),
        drift_field=float(d["drift_field"]),
        drift_velocity=float(d["drift_velocity"]),
        n_time_buckets=int(d["n_time_buckets"]),
        window_us=d.get("window_us"),
    )


def voxel_grid_spec(config: dict) -> VoxelGridSpec:
    v = config["voxel_grid"]
    det = config["detector"]
    return VoxelGridSpec(
        nx=int(v["nx"]), ny=int(v["ny"]), nz=int(v["nz"]),
        radius_mm=float(det["radius"]) * 1000.0,
        length_mm=float(det["length_z"]) * 1000.0,
    )


def image_grid_spec(config: dict, size: Optional[int] = None) -> ImageGridSpec:
    i = config["image_grid"]
    det = config["detector"]
    rows = size if size is not None else int(i["rows"])
    cols = size if size is not None else int(i["cols"])
    return ImageGridSpec(rows=rows, cols=cols,
                         radius_mm=float(det["radius"]) * 1000.0)


def pad_plane_spec(config: dict) -> PadPlaneSpec:
    p = config["pad_plane"]
    det = config["detector"]
    return PadPlaneSpec(
        target_pad_count=int(p["target_pad_count"]),
        radius_mm=float(det["radius"]) * 1000.0,
        inner_radius_mm=float(p["inner_radius_mm"]),
        inner_edge_mm=float(p["inner_edge_mm"]),
        outer_edge_mm=float(p["outer_edge_mm"]),
    )


def _dist_spec(node: dict) -> DistSpec:
    return DistSpec(family=node["family"], params=tuple(float(v) for v in node["params"]))


def sim_config(config: dict, master_seed: int = 0) -> SimConfig:
    s = config["sim"]
    k = s["kinematics"]
    kinematics = KinematicsRanges(
        z_range=tuple(float(v) for v in k["z_range"]),
        theta_range=tuple(float(v) for v in k["theta_range"]),
        phi_range=tuple(float(v) for v in k["phi_range"]),
        energy_range={name: tuple(float(v) for v in rng)
                      for name, rng in k["energy_range"].items()},
    )
    noise = NoiseSpec(count=_dist_spec(s["noise"]["count"]),
                      charge=_dist_spec(s["noise"]["charge"]))
    saturation = s.get("charge_saturation")
    per_class = s.get("per_class_acceptance") or None
    if per_class:
        per_class = {cls: {key: float(val) for key, val in over.items()}
                     for cls, over in per_class.items()}
    return SimConfig(
        detector=detector_spec(config),
        integrator_step=float(s["integrator_step"]),
        diffusion_transverse=float(s["diffusion_transverse"]),
        diffusion_longitudinal=float(s["diffusion_longitudinal"]),
        kinematics=kinematics,
        noise=noise,
        min_hits=int(s["min_hits"]),
        min_mean_radius_mm=float(s["min_mean_radius_mm"]),
        energy_cutoff_mev=float(s["energy_cutoff_mev"]),
        max_steps=int(s["max_steps"]),
        other_count_range=tuple(int(v) for v in s["other_count_range"]),
        rejection_ceiling=float(s["rejection_ceiling"]),
        max_attempts_per_event=int(s["max_attempts_per_event"]),
        charge_saturation=None if saturation is None else float(saturation),
        acceptance_mode=s.get("acceptance_mode", "all"),
        per_class_acceptance=per_class,
        master_seed=master_seed,
    )
