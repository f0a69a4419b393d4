"""Flat typed experiment configuration with INI sections, plus the run
manifest that pins outputs to the config that produced them.

Every field has a default; unknown sections or keys are errors, not
warnings. to_text/from_text round-trip exactly, and config_hash is the
sha256 of the canonical text, so equal hashes mean equal runs.
"""
from __future__ import annotations

import configparser
import hashlib
import io
import json
import os
from dataclasses import dataclass, fields as dc_fields, replace
from pathlib import Path

from .fields import BURST_SIGNS, MODEL_KINDS

__all__ = [
    "ConfigError",
    "DataError",
    "ExperimentConfig",
    "RunManifest",
    "ENV_SEED",
    "ENV_OUTDIR",
]

ENV_SEED = "PHOTODYNE_SEED"
ENV_OUTDIR = "PHOTODYNE_OUTDIR"

FIELD_KINDS = MODEL_KINDS
SOURCES = ("semiclassical", "quantum")


class ConfigError(ValueError):
    """Bad configuration or arguments; maps to exit code 2."""


class DataError(ValueError):
    """Missing or inconsistent input data; maps to exit code 3."""


# (section, key) -> (attribute, type). One flat dataclass, INI only groups.
_SCHEMA: dict[tuple[str, str], tuple[str, type]] = {}


def _schema_field(section: str, key: str, typ: type):
    _SCHEMA[(section, key)] = (key, typ)
    return key


@dataclass(frozen=True)
class ExperimentConfig:
    # [system]
    g: float = 0.75
    kappa: float = 1.0
    gamma: float = 1.0
    drive: float = 0.18
    fock_cutoff: int = 8
    # [field]
    kind: str = "thermal_ou"
    amplitude: float = 1.0
    phase: float = 0.0
    mean_intensity: float = 1.0
    tau_c: float = 2.0
    burst_rate: float = 0.05
    burst_freq: float = 1.5
    burst_decay: float = 0.35
    # relative burst height; kept in the weak-modulation regime where the
    # click-triggered current reads as the wave amplitude (stays under h = 2)
    burst_amp: float = 1.5
    burst_sign: str = "positive"
    # [detection]
    lo_amplitude: float = 8.0
    lo_phase: float = 0.0
    lo_align: bool = True
    bandwidth: float = 0.5
    efficiency: float = 1.0
    dark_rate: float = 0.0
    dead_time: float = 0.0
    # [run]
    source: str = "quantum"
    seed: int = 20260819
    duration: float = 400.0
    dt: float = 0.02
    n_trajectories: int = 32
    jump_fraction: float = 0.5
    burn_in: float = 25.0
    workers: int = 1
    # [analysis]
    max_lag: float = 12.0
    bin_width: float = 0.25
    halfwidth: float = 12.0
    n_frequencies: int = 401
    max_frequency: float = 0.0
    si_rate_scale_mhz: float = 20.0
    # [output]
    outdir: str = "out"
    label: str = "run"

    def __post_init__(self) -> None:
        if self.kind not in FIELD_KINDS:
            raise ConfigError(f"field.kind must be one of {FIELD_KINDS}")
        if self.burst_sign not in BURST_SIGNS:
            raise ConfigError(f"field.burst_sign must be one of {BURST_SIGNS}")
        if self.source not in SOURCES:
            raise ConfigError(f"run.source must be one of {SOURCES}")
        if self.dt <= 0 or self.duration <= 0:
            raise ConfigError("run.dt and run.duration must be > 0")
        if self.n_trajectories < 1 or self.workers < 1:
            raise ConfigError("run.n_trajectories and run.workers must be >= 1")
        if not 0.0 <= self.jump_fraction <= 1.0:
            raise ConfigError("run.jump_fraction must be inside [0, 1]")
        if self.seed < 0:
            raise ConfigError("run.seed must be >= 0")

    def to_text(self) -> str:
        by_section: dict[str, list[tuple[str, str]]] = {}
        vals = {f.name: getattr(self, f.name) for f in dc_fields(self)}
        for (section, key), (attr, typ) in _SCHEMA.items():
            v = vals[attr]
            if typ is bool:
                text = "true" if v else "false"
            elif typ is float:
                text = repr(float(v))
            else:
                text = str(v)
            by_section.setdefault(section, []).append((key, text))
        out = io.StringIO()
        for section in _SECTION_ORDER:
            out.write(f"[{section}]\n")
            for key, text in by_section[section]:
                out.write(f"{key} = {text}\n")
            out.write("\n")
        return out.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unparseable config: {exc}") from exc
        kwargs = {}
        for section in parser.sections():
            if section not in _SECTION_ORDER:
                raise ConfigError(f"unknown section [{section}]")
            for key, raw in parser.items(section):
                spec = _SCHEMA.get((section, key))
                if spec is None:
                    raise ConfigError(f"unknown key {section}.{key}")
                attr, typ = spec
                try:
                    if typ is bool:
                        low = raw.strip().lower()
                        if low in ("true", "1", "yes", "on"):
                            kwargs[attr] = True
                        elif low in ("false", "0", "no", "off"):
                            kwargs[attr] = False
                        else:
                            raise ValueError(f"not a boolean: {raw!r}")
                    elif typ is int:
                        kwargs[attr] = int(raw)
                    elif typ is float:
                        kwargs[attr] = float(raw)
                    else:
                        kwargs[attr] = raw.strip()
                except ValueError as exc:
                    raise ConfigError(f"bad value for {section}.{key}: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        return cls.from_text(p.read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def with_env_overrides(self, env=None) -> tuple["ExperimentConfig", dict]:
        """Apply the two supported environment overrides, seed and outdir."""
        env = os.environ if env is None else env
        applied = {}
        cfg = self
        if ENV_SEED in env:
            raw = env[ENV_SEED]
            try:
                seed = int(raw)
            except ValueError as exc:
                raise ConfigError(f"{ENV_SEED} must be an integer: {raw!r}") from exc
            cfg = replace(cfg, seed=seed)
            applied["seed"] = seed
        if ENV_OUTDIR in env:
            cfg = replace(cfg, outdir=env[ENV_OUTDIR])
            applied["outdir"] = env[ENV_OUTDIR]
        return cfg, applied


_SECTION_ORDER = ("system", "field", "detection", "run", "analysis", "output")

for _sec, _key, _typ in [
    ("system", "g", float),
    ("system", "kappa", float),
    ("system", "gamma", float),
    ("system", "drive", float),
    ("system", "fock_cutoff", int),
    ("field", "kind", str),
    ("field", "amplitude", float),
    ("field", "phase", float),
    ("field", "mean_intensity", float),
    ("field", "tau_c", float),
    ("field", "burst_rate", float),
    ("field", "burst_freq", float),
    ("field", "burst_decay", float),
    ("field", "burst_amp", float),
    ("field", "burst_sign", str),
    ("detection", "lo_amplitude", float),
    ("detection", "lo_phase", float),
    ("detection", "lo_align", bool),
    ("detection", "bandwidth", float),
    ("detection", "efficiency", float),
    ("detection", "dark_rate", float),
    ("detection", "dead_time", float),
    ("run", "source", str),
    ("run", "seed", int),
    ("run", "duration", float),
    ("run", "dt", float),
    ("run", "n_trajectories", int),
    ("run", "jump_fraction", float),
    ("run", "burn_in", float),
    ("run", "workers", int),
    ("analysis", "max_lag", float),
    ("analysis", "bin_width", float),
    ("analysis", "halfwidth", float),
    ("analysis", "n_frequencies", int),
    ("analysis", "max_frequency", float),
    ("analysis", "si_rate_scale_mhz", float),
    ("output", "outdir", str),
    ("output", "label", str),
]:
    _schema_field(_sec, _key, _typ)


@dataclass(frozen=True)
class RunManifest:
    """What a run produced: config hash, seed, and output byte sizes.

    Deliberately timestamp-free so reruns of the same config are
    byte-identical end to end.
    """

    config_hash: str
    seed: int
    source: str
    files: tuple[tuple[str, int], ...]

    def to_json(self) -> str:
        payload = {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "source": self.source,
            "files": [{"name": n, "bytes": b} for n, b in self.files],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        try:
            payload = json.loads(text)
            files = tuple((f["name"], int(f["bytes"])) for f in payload["files"])
            return cls(
                config_hash=payload["config_hash"],
                seed=int(payload["seed"]),
                source=payload["source"],
                files=files,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad manifest: {exc}") from exc

    @classmethod
    def for_directory(cls, outdir, config: ExperimentConfig) -> "RunManifest":
        base = Path(outdir)
        names = sorted(
            p.name
            for p in base.iterdir()
            if p.is_file() and p.name not in ("manifest.json",)
        )
        files = tuple((n, (base / n).stat().st_size) for n in names)
        return cls(
            config_hash=config.config_hash(),
            seed=config.seed,
            source=config.source,
            files=files,
        )

    def save(self, outdir) -> None:
        (Path(outdir) / "manifest.json").write_text(self.to_json())

    @classmethod
    def load(cls, outdir) -> "RunManifest":
        p = Path(outdir) / "manifest.json"
        if not p.is_file():
            raise DataError(f"manifest not found in {outdir}")
        return cls.from_json(p.read_text())

    def validate_files(self, outdir) -> None:
        base = Path(outdir)
        for name, size in self.files:
            p = base / name
            if not p.is_file():
                raise DataError(f"missing output file {name}")
            actual = p.stat().st_size
            if actual != size:
                raise DataError(
                    f"output file {name} is {actual} bytes, manifest says {size}"
                )
