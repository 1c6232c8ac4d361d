"""Run configuration: built-in defaults < TOML file < command-line flags.

Input paths left unset resolve under ``<out>/synth/``, where ``synth``
writes its city, so ``synth`` followed by any other command works with no
config file at all.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from scootflow import __version__
from scootflow.errors import DomainError

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "out": "out",
    "tz": "Australia/Melbourne",
    "origin": None,  # [lat, lon]; default is the centre of the zones file
    "inputs": {
        "zones": None,
        "pois": None,
        "paths": None,
        "census": None,
        "weather": None,
        "snapshots": None,
        "events": None,
    },
    "poller": {
        "endpoint_url": "",
        "interval": 60.0,
        "timeout": 20.0,
    },
    "derive": {
        "rotation_radius": 15.0,
        "min_absence": 1,
        "battery_filter": False,
        "battery_jump": 30.0,
        "battery_window_min": 60.0,
    },
    "fit": {
        "models": ["NBR", "RFR", "NN"],
        "ratio": 0.7,
        "frames": True,
        "zones": "auto",
    },
    "forest": {"n_estimators": 20, "min_samples_leaf": 17, "min_samples_split": 10},
    "nn": {
        "hidden": [16, 8],
        "learning_rate": 0.01,
        "grid": {"batch_size": [16, 64], "epochs": [50, 200]},
    },
    "buffers": {
        "poi_radius": 60.0,
        "path_radius": 10.0,
        "categories": ["cafe", "shop", "office", "recreation", "campus", "residential",
                       "tram_stop", "bus_stop", "train_station"],
        "path_kinds": ["footpath", "cycle_lane", "shared_path"],
        "pairing": "day",
    },
    "synth": {
        "grid": 12,
        "zone_side_m": 500.0,
        "days": 7,
        "n_vehicles": 80,
        "trips_per_vehicle_hour": 0.3,
        "gps_jitter": 0.0,
        "stop_path_bias": 0.15,
    },
}

SYNTH_FILES = {
    "zones": "zones.geojson",
    "pois": "pois.geojson",
    "paths": "paths.geojson",
    "census": "census.csv",
    "weather": "weather.csv",
    "snapshots": "snapshots.ndjson",
}

# keys that locate files rather than change results; left out of the hash
_UNHASHED = ("out", "inputs")


def _merge(base: dict, over: Mapping, where: str = "") -> None:
    for k, v in over.items():
        key = f"{where}{k}"
        if k not in base:
            raise DomainError(f"unknown config key {key!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, Mapping):
                raise DomainError(f"config key {key!r} must be a table")
            _merge(base[k], v, key + ".")
        else:
            base[k] = v


def _drop_unset(over: Mapping) -> dict:
    """Overrides without None values at any depth; None means "flag not given"."""
    return {k: (_drop_unset(v) if isinstance(v, Mapping) else v)
            for k, v in over.items() if v is not None}


class RunConfig:
    """Effective configuration for one command invocation."""

    def __init__(self, data: dict, base_dir: Path):
        self.data = data
        self.base_dir = base_dir

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: Mapping | None = None) -> "RunConfig":
        data = copy.deepcopy(DEFAULTS)
        base = Path.cwd()
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise DomainError(f"config file not found: {p}")
            try:
                doc = tomllib.loads(p.read_text(encoding="utf-8"))
            except tomllib.TOMLDecodeError as exc:
                raise DomainError(f"{p}: {exc}") from exc
            _merge(data, doc)
            base = p.resolve().parent
            # relative paths inside the file are relative to the file
            for k, v in data["inputs"].items():
                if v is not None and not Path(v).is_absolute():
                    data["inputs"][k] = str(base / v)
            if "out" in doc and not Path(doc["out"]).is_absolute():
                data["out"] = str(base / doc["out"])
        if overrides:
            _merge(data, _drop_unset(overrides))
        cfg = cls(data, base)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        d = self.data
        if not isinstance(d["seed"], int) or d["seed"] < 0:
            raise DomainError("seed must be a non-negative integer")
        if not 0 < float(d["fit"]["ratio"]) < 1:
            raise DomainError("fit.ratio must be in (0, 1)")
        for m in d["fit"]["models"]:
            if m not in ("NBR", "RFR", "NN"):
                raise DomainError(f"fit.models: unknown model {m!r} (choose NBR, RFR, NN)")
        if d["buffers"]["pairing"] not in ("day", "frame"):
            raise DomainError("buffers.pairing must be 'day' or 'frame'")
        if d["origin"] is not None and len(d["origin"]) != 2:
            raise DomainError("origin must be [lat, lon]")

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def out(self) -> Path:
        return Path(self.data["out"])

    def input_path(self, key: str) -> Path:
        """Configured input, or its default location; missing files raise a
        DomainError that names the config key."""
        p = self.data["inputs"][key]
        if p is None:
            p = self.out / "events.csv" if key == "events" else self.out / "synth" / SYNTH_FILES[key]
        p = Path(p)
        if not p.exists():
            raise DomainError(f"input file for config key inputs.{key} not found: {p}")
        return p

    def hash(self) -> str:
        """Short digest of every setting that can change results."""
        payload = {k: v for k, v in self.data.items() if k not in _UNHASHED}
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    def provenance(self) -> str:
        return f"scootflow {__version__} config={self.hash()} seed={self.seed}"
