"""Scenario command line: reproducible tables and phase-space grids.

Reads a TOML scenario config, runs one of five commands (prepare, sweep,
displace-curve, ghz, simulate), and writes CSV tables and Wigner JSON grids
stamped with the config hash, seed, and package version so every output can
be traced back to the exact inputs that produced it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .conditioning import (
    HomodyneProjection,
    WindowedConditional,
    condition_sequence,
    condition_windowed,
    predicted_displacement,
    remaining_modes,
    windowed_marginal,
)
from .conventions import r_from_db
from .errors import AccuracyError, NumericalDegeneracyError, WindowUnderflowError
from .gaussian import (
    EprParams,
    GaussianState,
    apply_loss,
    epr_state,
    ghz_like,
    marginal,
    quad_selector,
    squeezing_db,
    tmsv,
    vacuum,
    wigner_at,
)
from .metrics import estimate_squeezed_fit
from .montecarlo import (
    MeasurementPlan,
    estimate_conditional,
    postselect,
    sample_joint,
)

__all__ = [
    "ConfigError",
    "ResultTable",
    "ScenarioConfig",
    "load_config",
    "config_from_mapping",
    "read_table",
    "main",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_ACCURACY = 4

_STATION_NAMES = ("Alice", "Bob", "Claire")

_SOURCE_KINDS = ("tmsv", "epr", "ghz", "vacuum")
_SWEEP_VARIABLES = ("eta_a", "eta_b", "delta", "source_db", "alpha")
_GHZ_SCENARIOS = ("single-x", "collective-p")


class ConfigError(ValueError):
    """A scenario config is malformed or inconsistent."""


def station_name(index: int) -> str:
    """Human label for an original mode index (Alice, Bob, Claire, Node4...)."""
    if index < len(_STATION_NAMES):
        return _STATION_NAMES[index]
    return f"Node{index + 1}"


# ---------------------------------------------------------------------------
# Config schema
# ---------------------------------------------------------------------------


def _as_float(section: str, key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}")
    out = float(value)
    if not math.isfinite(out):
        raise ConfigError(f"[{section}] {key} must be finite, got {value!r}")
    return out


def _as_int(section: str, key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}")
    return int(value)


def _as_bool(section: str, key: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"[{section}] {key} must be true or false, got {value!r}")
    return bool(value)


def _as_str(section: str, key: str, value: Any, choices: tuple[str, ...] | None = None) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"[{section}] {key} must be a string, got {value!r}")
    if choices is not None and value not in choices:
        raise ConfigError(
            f"[{section}] {key} must be one of {', '.join(choices)}; got {value!r}"
        )
    return value


def _as_float_list(section: str, key: str, value: Any) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        raise ConfigError(f"[{section}] {key} must be a non-empty list of numbers")
    return tuple(_as_float(section, f"{key}[{i}]", v) for i, v in enumerate(value))


def _check_keys(section: str, raw: dict, allowed: tuple[str, ...]) -> None:
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(
            f"unknown key(s) in [{section}]: {', '.join(unknown)}; "
            f"allowed: {', '.join(allowed)}"
        )


@dataclass(frozen=True)
class SourceSpec:
    """Validated [source] section."""

    kind: str
    r: float = 0.0
    n_modes: int = 2
    v_s: float | None = None
    v_a: float | None = None
    eta_a: float = 1.0
    eta_b: float = 1.0


@dataclass(frozen=True)
class ProjectionSpec:
    """Validated [[projection]] entry."""

    mode: int
    theta: float
    alpha: float
    delta: float = 0.0


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    points: int
    log: bool = False


@dataclass(frozen=True)
class DisplaceSpec:
    alphas: tuple[float, ...]
    db_start: float
    db_stop: float
    points: int


@dataclass(frozen=True)
class GhzSpec:
    scenario: str
    alpha: float = 0.0


@dataclass(frozen=True)
class AnalysisSpec:
    fit: bool = True
    wigner: bool = False
    grid_bounds: float = 4.0
    grid_points: int = 201


@dataclass(frozen=True)
class MonteCarloSpec:
    shots: int
    seed: int | None = None
    angles: tuple[float, ...] | None = None


@dataclass(frozen=True)
class OutputSpec:
    table: str | None = None
    wigner: str | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    """A fully validated scenario: one command plus its inputs."""

    command: str
    source: SourceSpec
    channel: tuple[float, ...] | None = None
    projections: tuple[ProjectionSpec, ...] = ()
    sweep: SweepSpec | None = None
    displace: DisplaceSpec | None = None
    ghz: GhzSpec | None = None
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    montecarlo: MonteCarloSpec | None = None
    output: OutputSpec = field(default_factory=OutputSpec)

    def to_mapping(self) -> dict:
        """Canonical plain mapping; hash input and round-trip format.

        Emits only the sections the command accepts, with defaults resolved,
        so config_from_mapping(command, to_mapping()) validates unchanged.
        """
        out: dict[str, Any] = {}
        if self.command != "displace-curve":
            out["source"] = {
                "kind": self.source.kind,
                "r": self.source.r,
                "n_modes": self.source.n_modes,
                "eta_a": self.source.eta_a,
                "eta_b": self.source.eta_b,
            }
            if self.source.kind in ("vacuum", "epr"):
                del out["source"]["r"]
            if self.source.v_s is not None:
                out["source"]["v_s"] = self.source.v_s
                out["source"]["v_a"] = self.source.v_a
            if self.source.kind == "ghz":
                del out["source"]["eta_a"]
                del out["source"]["eta_b"]
        if self.channel is not None:
            out["channel"] = {"eta": list(self.channel)}
        if self.projections:
            out["projection"] = [
                {"mode": p.mode, "theta": p.theta, "alpha": p.alpha, "delta": p.delta}
                for p in self.projections
            ]
        if self.sweep is not None:
            out["sweep"] = {
                "variable": self.sweep.variable,
                "start": self.sweep.start,
                "stop": self.sweep.stop,
                "points": self.sweep.points,
                "log": self.sweep.log,
            }
        if self.displace is not None:
            out["displace"] = {
                "alphas": list(self.displace.alphas),
                "db_start": self.displace.db_start,
                "db_stop": self.displace.db_stop,
                "points": self.displace.points,
            }
        if self.ghz is not None:
            out["ghz"] = {"scenario": self.ghz.scenario, "alpha": self.ghz.alpha}
        if self.command in ("prepare", "sweep", "ghz"):
            out["analysis"] = {
                "fit": self.analysis.fit,
                "wigner": self.analysis.wigner,
                "grid_bounds": self.analysis.grid_bounds,
                "grid_points": self.analysis.grid_points,
            }
        if self.montecarlo is not None:
            mc: dict[str, Any] = {"shots": self.montecarlo.shots}
            if self.montecarlo.seed is not None:
                mc["seed"] = self.montecarlo.seed
            if self.montecarlo.angles is not None:
                mc["angles"] = list(self.montecarlo.angles)
            out["montecarlo"] = mc
        output: dict[str, Any] = {}
        if self.output.table is not None:
            output["table"] = self.output.table
        if self.output.wigner is not None:
            output["wigner"] = self.output.wigner
        if output:
            out["output"] = output
        return out

    def config_hash(self) -> str:
        """SHA-256 of the canonical command + mapping JSON.

        Output paths are excluded: the hash identifies the computation, so
        the same scenario written to a different file keeps its identity.
        """
        payload = {"command": self.command, **self.to_mapping()}
        payload.pop("output", None)
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _parse_source(raw: Any) -> SourceSpec:
    if not isinstance(raw, dict):
        raise ConfigError("[source] must be a table")
    _check_keys("source", raw, ("kind", "r", "db", "n_modes", "v_s", "v_a", "eta_a", "eta_b"))
    kind = _as_str("source", "kind", raw.get("kind", "tmsv"), _SOURCE_KINDS)
    has_r = "r" in raw
    has_db = "db" in raw
    if has_r and has_db:
        raise ConfigError("[source] give either r or db, not both")
    if has_db:
        db = _as_float("source", "db", raw["db"])
        if db > 0:
            raise ConfigError(f"[source] db states squeezing and must be <= 0, got {db}")
        r = r_from_db(db)
    elif has_r:
        r = _as_float("source", "r", raw["r"])
        if r < 0:
            raise ConfigError(f"[source] r must be >= 0, got {r}")
    else:
        r = 0.0

    n_modes = _as_int("source", "n_modes", raw.get("n_modes", 2))
    eta_a = _as_float("source", "eta_a", raw.get("eta_a", 1.0))
    eta_b = _as_float("source", "eta_b", raw.get("eta_b", 1.0))
    for key, eta in (("eta_a", eta_a), ("eta_b", eta_b)):
        if not 0.0 <= eta <= 1.0:
            raise ConfigError(f"[source] {key} must lie in [0, 1], got {eta}")

    v_s = v_a = None
    if kind == "epr":
        if "v_s" not in raw or "v_a" not in raw:
            raise ConfigError("[source] kind = 'epr' requires v_s and v_a")
        if has_r or has_db:
            raise ConfigError("[source] kind = 'epr' takes v_s/v_a, not r or db")
        v_s = _as_float("source", "v_s", raw["v_s"])
        v_a = _as_float("source", "v_a", raw["v_a"])
    else:
        if "v_s" in raw or "v_a" in raw:
            raise ConfigError(f"[source] v_s/v_a only apply to kind = 'epr', not {kind!r}")
    if kind == "ghz":
        if not 2 <= n_modes <= 8:
            raise ConfigError(f"[source] ghz n_modes must lie in [2, 8], got {n_modes}")
        if (eta_a, eta_b) != (1.0, 1.0):
            raise ConfigError("[source] eta_a/eta_b do not apply to kind = 'ghz'")
    else:
        if "n_modes" in raw and n_modes != 2:
            raise ConfigError(f"[source] kind = {kind!r} is two-mode; n_modes must be 2")
        n_modes = 2
    if kind == "vacuum" and (has_r or has_db):
        raise ConfigError("[source] kind = 'vacuum' takes no r or db")
    return SourceSpec(
        kind=kind, r=r, n_modes=n_modes, v_s=v_s, v_a=v_a, eta_a=eta_a, eta_b=eta_b
    )


def _parse_channel(raw: Any, n_modes: int) -> tuple[float, ...]:
    if not isinstance(raw, dict):
        raise ConfigError("[channel] must be a table")
    _check_keys("channel", raw, ("eta",))
    if "eta" not in raw:
        raise ConfigError("[channel] requires an eta list")
    eta = _as_float_list("channel", "eta", raw["eta"])
    if len(eta) != n_modes:
        raise ConfigError(
            f"[channel] eta must list one transmission per mode ({n_modes}), got {len(eta)}"
        )
    for i, e in enumerate(eta):
        if not 0.0 <= e <= 1.0:
            raise ConfigError(f"[channel] eta[{i}] must lie in [0, 1], got {e}")
    return eta


def _parse_projections(raw: Any, n_modes: int) -> tuple[ProjectionSpec, ...]:
    if not isinstance(raw, list) or not all(isinstance(p, dict) for p in raw):
        raise ConfigError("[[projection]] must be an array of tables")
    out = []
    for i, entry in enumerate(raw):
        section = f"projection[{i}]"
        _check_keys(section, entry, ("mode", "theta", "alpha", "delta"))
        if "mode" not in entry:
            raise ConfigError(f"[{section}] requires a mode")
        mode = _as_int(section, "mode", entry["mode"])
        if not 0 <= mode < n_modes:
            raise ConfigError(f"[{section}] mode {mode} out of range for {n_modes} modes")
        theta = _as_float(section, "theta", entry.get("theta", 0.0))
        alpha = _as_float(section, "alpha", entry.get("alpha", 0.0))
        delta = _as_float(section, "delta", entry.get("delta", 0.0))
        if delta < 0:
            raise ConfigError(f"[{section}] delta must be >= 0, got {delta}")
        out.append(ProjectionSpec(mode=mode, theta=theta, alpha=alpha, delta=delta))
    modes = [p.mode for p in out]
    if len(set(modes)) != len(modes):
        raise ConfigError(f"projections address duplicate modes: {modes}")
    if len(out) >= n_modes:
        raise ConfigError("at least one mode must survive the projection chain")
    windowed = [i for i, p in enumerate(out) if p.delta > 0]
    if len(windowed) > 1:
        raise ConfigError("at most one projection may have delta > 0")
    if windowed and windowed[0] != len(out) - 1:
        raise ConfigError("the windowed projection must come last in the chain")
    return tuple(out)


def _parse_sweep(raw: Any) -> SweepSpec:
    if not isinstance(raw, dict):
        raise ConfigError("[sweep] must be a table")
    _check_keys("sweep", raw, ("variable", "start", "stop", "points", "log"))
    for key in ("variable", "start", "stop", "points"):
        if key not in raw:
            raise ConfigError(f"[sweep] requires {key}")
    variable = _as_str("sweep", "variable", raw["variable"], _SWEEP_VARIABLES)
    start = _as_float("sweep", "start", raw["start"])
    stop = _as_float("sweep", "stop", raw["stop"])
    points = _as_int("sweep", "points", raw["points"])
    log = _as_bool("sweep", "log", raw.get("log", False))
    if points < 1:
        raise ConfigError(f"[sweep] points must be >= 1, got {points}")
    if log and (start <= 0 or stop <= 0):
        raise ConfigError("[sweep] log spacing requires positive start and stop")
    if variable in ("eta_a", "eta_b"):
        for key, v in (("start", start), ("stop", stop)):
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"[sweep] {variable} {key} must lie in [0, 1], got {v}")
    if variable == "delta" and (start <= 0 or stop <= 0):
        raise ConfigError("[sweep] delta values must be > 0")
    if variable == "source_db" and (start > 0 or stop > 0):
        raise ConfigError("[sweep] source_db values must be <= 0")
    return SweepSpec(variable=variable, start=start, stop=stop, points=points, log=log)


def _parse_displace(raw: Any) -> DisplaceSpec:
    if not isinstance(raw, dict):
        raise ConfigError("[displace] must be a table")
    _check_keys("displace", raw, ("alphas", "db_start", "db_stop", "points"))
    for key in ("alphas", "db_start", "db_stop", "points"):
        if key not in raw:
            raise ConfigError(f"[displace] requires {key}")
    alphas = _as_float_list("displace", "alphas", raw["alphas"])
    db_start = _as_float("displace", "db_start", raw["db_start"])
    db_stop = _as_float("displace", "db_stop", raw["db_stop"])
    points = _as_int("displace", "points", raw["points"])
    if db_start > 0 or db_stop > 0:
        raise ConfigError("[displace] db values state squeezing and must be <= 0")
    if points < 1:
        raise ConfigError(f"[displace] points must be >= 1, got {points}")
    return DisplaceSpec(alphas=alphas, db_start=db_start, db_stop=db_stop, points=points)


def _parse_ghz(raw: Any) -> GhzSpec:
    if not isinstance(raw, dict):
        raise ConfigError("[ghz] must be a table")
    _check_keys("ghz", raw, ("scenario", "alpha"))
    if "scenario" not in raw:
        raise ConfigError("[ghz] requires a scenario")
    scenario = _as_str("ghz", "scenario", raw["scenario"], _GHZ_SCENARIOS)
    alpha = _as_float("ghz", "alpha", raw.get("alpha", 0.0))
    return GhzSpec(scenario=scenario, alpha=alpha)


def _parse_analysis(raw: Any) -> AnalysisSpec:
    if not isinstance(raw, dict):
        raise ConfigError("[analysis] must be a table")
    _check_keys("analysis", raw, ("fit", "wigner", "grid_bounds", "grid_points"))
    fit = _as_bool("analysis", "fit", raw.get("fit", True))
    wigner = _as_bool("analysis", "wigner", raw.get("wigner", False))
    grid_bounds = _as_float("analysis", "grid_bounds", raw.get("grid_bounds", 4.0))
    grid_points = _as_int("analysis", "grid_points", raw.get("grid_points", 201))
    if grid_bounds <= 0:
        raise ConfigError(f"[analysis] grid_bounds must be > 0, got {grid_bounds}")
    if grid_points < 2:
        raise ConfigError(f"[analysis] grid_points must be >= 2, got {grid_points}")
    return AnalysisSpec(fit=fit, wigner=wigner, grid_bounds=grid_bounds, grid_points=grid_points)


def _parse_montecarlo(raw: Any, *, n_modes: int) -> MonteCarloSpec:
    if not isinstance(raw, dict):
        raise ConfigError("[montecarlo] must be a table")
    _check_keys("montecarlo", raw, ("shots", "seed", "angles"))
    if "shots" not in raw:
        raise ConfigError("[montecarlo] requires shots")
    shots = _as_int("montecarlo", "shots", raw["shots"])
    if shots < 1:
        raise ConfigError(f"[montecarlo] shots must be >= 1, got {shots}")
    seed = None
    if "seed" in raw:
        seed = _as_int("montecarlo", "seed", raw["seed"])
        if not 0 <= seed < 2**64:
            raise ConfigError(f"[montecarlo] seed must lie in [0, 2^64), got {seed}")
    angles = None
    if "angles" in raw:
        angles = _as_float_list("montecarlo", "angles", raw["angles"])
        if len(angles) != n_modes:
            raise ConfigError(
                f"[montecarlo] angles must list one angle per mode ({n_modes}), "
                f"got {len(angles)}"
            )
    return MonteCarloSpec(shots=shots, seed=seed, angles=angles)


def _parse_output(raw: Any) -> OutputSpec:
    if not isinstance(raw, dict):
        raise ConfigError("[output] must be a table")
    _check_keys("output", raw, ("table", "wigner"))
    table = wigner = None
    if "table" in raw:
        table = _as_str("output", "table", raw["table"])
    if "wigner" in raw:
        wigner = _as_str("output", "wigner", raw["wigner"])
    return OutputSpec(table=table, wigner=wigner)


def config_from_mapping(command: str, raw: dict, *, seed_from_flag: bool = False,
                        strict: bool = False) -> ScenarioConfig:
    """Validate a raw (TOML-shaped) mapping into a ScenarioConfig."""
    if command not in ("prepare", "sweep", "displace-curve", "ghz", "simulate"):
        raise ConfigError(f"unknown command {command!r}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table at top level")
    allowed_sections = {
        "prepare": ("source", "channel", "projection", "analysis", "output"),
        "sweep": ("source", "channel", "projection", "sweep", "analysis", "output"),
        "displace-curve": ("displace", "output"),
        "ghz": ("source", "channel", "ghz", "analysis", "output"),
        "simulate": ("source", "channel", "projection", "montecarlo", "output"),
    }[command]
    _check_keys("top level", raw, allowed_sections)

    if command == "displace-curve":
        if "displace" not in raw:
            raise ConfigError("displace-curve requires a [displace] section")
        return ScenarioConfig(
            command=command,
            source=SourceSpec(kind="tmsv"),
            displace=_parse_displace(raw["displace"]),
            output=_parse_output(raw.get("output", {})),
        )

    if "source" not in raw:
        raise ConfigError(f"{command} requires a [source] section")
    source = _parse_source(raw["source"])
    channel = None
    if "channel" in raw:
        channel = _parse_channel(raw["channel"], source.n_modes)
    analysis = _parse_analysis(raw.get("analysis", {}))
    output = _parse_output(raw.get("output", {}))

    if command == "ghz":
        if source.kind != "ghz":
            raise ConfigError("the ghz command requires [source] kind = 'ghz'")
        if "ghz" not in raw:
            raise ConfigError("the ghz command requires a [ghz] section")
        return ScenarioConfig(
            command=command,
            source=source,
            channel=channel,
            ghz=_parse_ghz(raw["ghz"]),
            analysis=analysis,
            output=output,
        )

    if "projection" not in raw or not raw["projection"]:
        raise ConfigError(f"{command} requires at least one [[projection]]")
    projections = _parse_projections(raw["projection"], source.n_modes)

    if command == "prepare":
        return ScenarioConfig(
            command=command,
            source=source,
            channel=channel,
            projections=projections,
            analysis=analysis,
            output=output,
        )

    if command == "sweep":
        if "sweep" not in raw:
            raise ConfigError("sweep requires a [sweep] section")
        sweep = _parse_sweep(raw["sweep"])
        if sweep.variable in ("eta_a", "eta_b") and source.kind not in ("epr", "tmsv"):
            raise ConfigError(
                f"sweeping {sweep.variable} requires a tmsv or epr source, "
                f"got {source.kind!r}"
            )
        if sweep.variable == "source_db" and source.kind not in ("tmsv", "ghz"):
            raise ConfigError(
                f"sweeping source_db requires a tmsv or ghz source, got {source.kind!r}"
            )
        return ScenarioConfig(
            command=command,
            source=source,
            channel=channel,
            projections=projections,
            sweep=sweep,
            analysis=analysis,
            output=output,
        )

    # simulate
    if "montecarlo" not in raw:
        raise ConfigError("simulate requires a [montecarlo] section")
    montecarlo = _parse_montecarlo(raw["montecarlo"], n_modes=source.n_modes)
    if len(projections) != 1 or projections[0].delta <= 0:
        raise ConfigError("simulate requires exactly one projection with delta > 0")
    if montecarlo.seed is None:
        raise ConfigError("simulate requires a seed ([montecarlo] seed or --seed)")
    if strict and not seed_from_flag:
        raise ConfigError("simulate --strict requires the seed on the command line (--seed)")
    return ScenarioConfig(
        command=command,
        source=source,
        channel=channel,
        projections=projections,
        montecarlo=montecarlo,
        output=output,
    )


def load_config(path: str | Path, command: str, *, overrides: dict | None = None,
                seed_from_flag: bool = False, strict: bool = False) -> ScenarioConfig:
    """Read a TOML scenario file, apply flag overrides, and validate."""
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file is not valid TOML: {exc}") from None
    if overrides:
        for section, values in overrides.items():
            raw.setdefault(section, {})
            if not isinstance(raw[section], dict):
                raise ConfigError(f"[{section}] must be a table")
            raw[section].update(values)
    return config_from_mapping(command, raw, seed_from_flag=seed_from_flag, strict=strict)


# ---------------------------------------------------------------------------
# Result tables
# ---------------------------------------------------------------------------


def _format_cell(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _parse_cell(text: str) -> Any:
    if text in ("true", "false"):
        return text == "true"
    try:
        v = int(text)
        if str(v) == text:
            return v
    except ValueError:
        pass
    try:
        v = float(text)
        if repr(v) == text:
            return v
    except ValueError:
        pass
    return text


@dataclass(frozen=True)
class ResultTable:
    """A provenance-stamped table of scenario results.

    Serializes to CSV with leading comment lines carrying the config hash,
    seed, package version, and per-column units; `read_table` refuses any
    file missing those stamps so downstream consumers fail closed.
    """

    columns: tuple[str, ...]
    units: tuple[str, ...]
    rows: tuple[tuple, ...]
    provenance: dict

    def __post_init__(self) -> None:
        if len(self.units) != len(self.columns):
            raise ValueError("units must match columns one to one")
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(
                    f"row width {len(row)} does not match {len(self.columns)} columns"
                )
        for key in ("config-sha256", "seed", "version"):
            if key not in self.provenance:
                raise ValueError(f"provenance is missing {key!r}")

    def to_csv(self) -> str:
        lines = [
            f"# config-sha256={self.provenance['config-sha256']}",
            f"# seed={self.provenance['seed']}",
            f"# version={self.provenance['version']}",
            f"# units={','.join(self.units)}",
            ",".join(self.columns),
        ]
        for row in self.rows:
            lines.append(",".join(_format_cell(v) for v in row))
        return "\n".join(lines) + "\n"


def read_table(path: str | Path) -> ResultTable:
    """Parse a scenario CSV, requiring the full provenance header."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    provenance: dict[str, str] = {}
    units: tuple[str, ...] | None = None
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith("# "):
            body_start = i
            break
        key, _, value = line[2:].partition("=")
        if key == "units":
            units = tuple(value.split(","))
        else:
            provenance[key] = value
    else:
        raise ValueError(f"{path}: no table header found")
    missing = [k for k in ("config-sha256", "seed", "version") if k not in provenance]
    if missing:
        raise ValueError(f"{path}: missing provenance line(s): {', '.join(missing)}")
    if units is None:
        raise ValueError(f"{path}: missing units line")
    header = lines[body_start].split(",")
    if len(units) != len(header):
        raise ValueError(f"{path}: units count does not match column count")
    rows = []
    for line in lines[body_start + 1:]:
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise ValueError(f"{path}: row width does not match header")
        rows.append(tuple(_parse_cell(c) for c in cells))
    return ResultTable(
        columns=tuple(header), units=units, rows=tuple(rows), provenance=provenance
    )


def _wigner_grid_json(state: GaussianState | WindowedConditional,
                      analysis: AnalysisSpec, provenance: dict) -> dict:
    """Single-mode Wigner values on the square grid, row-major over x."""
    b = analysis.grid_bounds
    n = analysis.grid_points
    axis = np.linspace(-b, b, n)
    xg, pg = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([xg, pg], axis=-1)
    if isinstance(state, WindowedConditional):
        if state.n_modes != 1:
            raise ValueError("wigner grid requires a single-mode state")
        values = state.wigner_at(pts)
    else:
        if state.n_modes != 1:
            raise ValueError("wigner grid requires a single-mode state")
        values = wigner_at(state, pts)
    return {
        "convention": "vacuum-variance-1/2",
        "x_axis": [float(v) for v in axis],
        "p_axis": [float(v) for v in axis],
        "values": [[float(v) for v in row] for row in values],
        "provenance": dict(provenance),
    }


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------

_STATION_COLUMNS = (
    "station",
    "mean_x",
    "mean_p",
    "var_x",
    "var_p",
    "cov_xp",
    "squeezing_db",
    "fidelity",
    "fit_r",
    "fit_a",
    "fit_b",
    "fit_phi",
    "success_probability",
    "outcome_density",
)
_STATION_UNITS = ("", "qu", "qu", "qu2", "qu2", "qu2", "dB", "", "", "qu", "qu", "rad", "", "")


def _build_source_state(src: SourceSpec) -> GaussianState:
    if src.kind == "vacuum":
        return vacuum(src.n_modes)
    if src.kind == "tmsv":
        if (src.eta_a, src.eta_b) != (1.0, 1.0):
            params = EprParams(
                v_s=0.5 * math.exp(-2.0 * src.r),
                v_a=0.5 * math.exp(2.0 * src.r),
                eta_a=src.eta_a,
                eta_b=src.eta_b,
            )
            return epr_state(params)
        return tmsv(src.r)
    if src.kind == "epr":
        params = EprParams(v_s=src.v_s, v_a=src.v_a, eta_a=src.eta_a, eta_b=src.eta_b)
        return epr_state(params)
    if src.kind == "ghz":
        return ghz_like(src.n_modes, src.r)
    raise ConfigError(f"unknown source kind {src.kind!r}")


def _apply_channel(state: GaussianState, channel: tuple[float, ...] | None) -> GaussianState:
    if channel is None:
        return state
    out = state
    for mode, eta in enumerate(channel):
        if eta != 1.0:
            out = apply_loss(out, mode, eta)
    return out


@dataclass(frozen=True)
class _PipelineResult:
    """Surviving modes after a projection chain, exact or windowed."""

    survivors: tuple[int, ...]
    exact: GaussianState | None
    windowed: WindowedConditional | None
    outcome_density: float
    success_probability: float


def _run_pipeline(state: GaussianState, projections: tuple[ProjectionSpec, ...]) -> _PipelineResult:
    survivors = tuple(remaining_modes(state.n_modes, [
        HomodyneProjection(p.mode, p.theta, p.alpha) for p in projections
    ]))
    exact_specs = [p for p in projections if p.delta == 0.0]
    window_spec = projections[-1] if projections[-1].delta > 0 else None

    current = state
    labels = list(range(state.n_modes))
    density = 1.0
    if exact_specs:
        chain = [
            HomodyneProjection(mode=p.mode, theta=p.theta, alpha=p.alpha)
            for p in exact_specs
        ]
        # condition_sequence re-indexes internally; run it on original labels.
        current, density = condition_sequence(current, chain)
        for p in exact_specs:
            labels.remove(p.mode)
    if window_spec is None:
        return _PipelineResult(
            survivors=survivors,
            exact=current,
            windowed=None,
            outcome_density=density,
            success_probability=float("nan"),
        )
    local = labels.index(window_spec.mode)
    wc = condition_windowed(
        current,
        HomodyneProjection(
            mode=local,
            theta=window_spec.theta,
            alpha=window_spec.alpha,
            half_width=window_spec.delta,
        ),
    )
    return _PipelineResult(
        survivors=survivors,
        exact=None,
        windowed=wc,
        outcome_density=density if exact_specs else float("nan"),
        success_probability=wc.success_probability,
    )


def _station_row(label: str, station: GaussianState | WindowedConditional,
                 result: _PipelineResult, analysis: AnalysisSpec) -> tuple:
    moments = station.moments if isinstance(station, WindowedConditional) else station
    mean = moments.mode_mean(0)
    cov = moments.mode_cov(0)
    v_min = float(np.linalg.eigvalsh(cov)[0])
    sq_db = squeezing_db(v_min)
    if analysis.fit:
        fit = estimate_squeezed_fit(station)
        fid, fr, fa, fb, fphi = (
            fit.fidelity, fit.target.r, fit.target.a, fit.target.b, fit.target.phi
        )
    else:
        fid = fr = fa = fb = fphi = float("nan")
    return (
        label,
        float(mean[0]),
        float(mean[1]),
        float(cov[0, 0]),
        float(cov[1, 1]),
        float(cov[0, 1]),
        sq_db,
        fid,
        fr,
        fa,
        fb,
        fphi,
        result.success_probability,
        result.outcome_density,
    )


def _station_state(result: _PipelineResult, local: int) -> GaussianState | WindowedConditional:
    if result.windowed is not None:
        return windowed_marginal(result.windowed, [local])
    return marginal(result.exact, [local])


def _stations_table(state: GaussianState, projections: tuple[ProjectionSpec, ...],
                    analysis: AnalysisSpec, provenance: dict) -> tuple[ResultTable, list]:
    result = _run_pipeline(state, projections)
    rows = []
    wigner_jobs = []
    for local, original in enumerate(result.survivors):
        station = _station_state(result, local)
        label = station_name(original)
        rows.append(_station_row(label, station, result, analysis))
        if analysis.wigner:
            wigner_jobs.append((label, station))
    table = ResultTable(
        columns=_STATION_COLUMNS,
        units=_STATION_UNITS,
        rows=tuple(rows),
        provenance=provenance,
    )
    return table, wigner_jobs


def run_prepare(cfg: ScenarioConfig, provenance: dict) -> tuple[ResultTable, list]:
    state = _apply_channel(_build_source_state(cfg.source), cfg.channel)
    return _stations_table(state, cfg.projections, cfg.analysis, provenance)


def _sweep_point_config(cfg: ScenarioConfig, value: float) -> ScenarioConfig:
    variable = cfg.sweep.variable
    if variable == "eta_a":
        return replace(cfg, source=replace(cfg.source, eta_a=float(value)))
    if variable == "eta_b":
        return replace(cfg, source=replace(cfg.source, eta_b=float(value)))
    if variable == "source_db":
        return replace(cfg, source=replace(cfg.source, r=r_from_db(float(value))))
    last = cfg.projections[-1]
    if variable == "delta":
        new_last = replace(last, delta=float(value))
    elif variable == "alpha":
        new_last = replace(last, alpha=float(value))
    else:
        raise ConfigError(f"unknown sweep variable {variable!r}")
    return replace(cfg, projections=cfg.projections[:-1] + (new_last,))


def run_sweep(cfg: ScenarioConfig, provenance: dict) -> tuple[ResultTable, list]:
    sweep = cfg.sweep
    if sweep.points == 1:
        values = np.array([sweep.start])
    elif sweep.log:
        values = np.geomspace(sweep.start, sweep.stop, sweep.points)
    else:
        values = np.linspace(sweep.start, sweep.stop, sweep.points)
    rows = []
    for value in values:
        point = _sweep_point_config(cfg, float(value))
        state = _apply_channel(_build_source_state(point.source), point.channel)
        result = _run_pipeline(state, point.projections)
        station = _station_state(result, 0)
        label = station_name(result.survivors[0])
        row = _station_row(label, station, result, cfg.analysis)
        rows.append((float(value),) + row)
    unit = {"eta_a": "", "eta_b": "", "delta": "qu", "source_db": "dB", "alpha": "qu"}[
        sweep.variable
    ]
    table = ResultTable(
        columns=(sweep.variable,) + _STATION_COLUMNS,
        units=(unit,) + _STATION_UNITS,
        rows=tuple(rows),
        provenance=provenance,
    )
    return table, []


def run_displace_curve(cfg: ScenarioConfig, provenance: dict) -> tuple[ResultTable, list]:
    spec = cfg.displace
    if spec.points == 1:
        dbs = np.array([spec.db_start])
    else:
        dbs = np.linspace(spec.db_start, spec.db_stop, spec.points)
    rows = []
    for alpha in spec.alphas:
        for db in dbs:
            r = r_from_db(float(db))
            predicted = predicted_displacement(r, alpha)
            state = tmsv(r)
            conditioned, _ = condition_sequence(
                state, [HomodyneProjection(mode=0, theta=0.0, alpha=float(alpha))]
            )
            rows.append(
                (float(db), float(alpha), predicted, float(conditioned.mean[0]))
            )
    table = ResultTable(
        columns=("source_db", "alpha", "predicted_x", "conditioned_mean_x"),
        units=("dB", "qu", "qu", "qu"),
        rows=tuple(rows),
        provenance=provenance,
    )
    return table, []


def run_ghz(cfg: ScenarioConfig, provenance: dict) -> tuple[ResultTable, list]:
    state = _apply_channel(_build_source_state(cfg.source), cfg.channel)
    n = cfg.source.n_modes
    if cfg.ghz.scenario == "single-x":
        projections = (ProjectionSpec(mode=0, theta=0.0, alpha=cfg.ghz.alpha),)
    else:
        projections = tuple(
            ProjectionSpec(mode=m, theta=math.pi / 2.0, alpha=cfg.ghz.alpha)
            for m in range(n - 1)
        )
    return _stations_table(state, projections, cfg.analysis, provenance)


def run_simulate(cfg: ScenarioConfig, provenance: dict, *, strict: bool) -> tuple[ResultTable, list]:
    state = _apply_channel(_build_source_state(cfg.source), cfg.channel)
    proj_spec = cfg.projections[0]
    mc = cfg.montecarlo
    angles = mc.angles
    if angles is None:
        angles = tuple(proj_spec.theta for _ in range(state.n_modes))
    plan = MeasurementPlan(angles=angles, shots=mc.shots, seed=mc.seed)
    batch = sample_joint(state, plan)
    selection = postselect(batch, proj_spec.mode, proj_spec.alpha, proj_spec.delta)

    wc = condition_windowed(
        state,
        HomodyneProjection(
            mode=proj_spec.mode,
            theta=proj_spec.theta,
            alpha=proj_spec.alpha,
            half_width=proj_spec.delta,
        ),
    )
    survivors = remaining_modes(state.n_modes, [
        HomodyneProjection(proj_spec.mode, proj_spec.theta, proj_spec.alpha)
    ])
    target = survivors[0]
    target_local = survivors.index(target)
    u = quad_selector(wc.n_modes, target_local, angles[target])[2 * target_local: 2 * target_local + 2]
    block_mean = wc.moments.mode_mean(target_local)
    block_cov = wc.moments.mode_cov(target_local)
    analytic_mean = float(u @ block_mean)
    analytic_var = float(u @ block_cov @ u)
    p = wc.success_probability

    n_sel = int(selection.indices.size)
    frac = selection.fraction
    se_frac = math.sqrt(p * (1.0 - p) / mc.shots)
    nan = float("nan")
    low_stats = n_sel < 100
    if n_sel >= 2:
        est = estimate_conditional(batch, selection, target)
        est_rows = [
            ("conditional_mean", est.mean, est.se_mean, analytic_mean),
            ("conditional_variance", est.variance, est.se_variance, analytic_var),
        ]
        low_stats = est.low_statistics
    else:
        est_rows = [
            ("conditional_mean", nan, nan, analytic_mean),
            ("conditional_variance", nan, nan, analytic_var),
        ]
    rows = [("survival_fraction", frac, se_frac, p)] + est_rows
    out_rows = []
    for name, estimate, se, analytic in rows:
        if math.isfinite(estimate) and math.isfinite(se) and se > 0:
            z = (estimate - analytic) / se
            within = abs(z) <= 3.0
        else:
            z = nan
            within = False
        out_rows.append((name, estimate, se, analytic, z, within))
    out_rows.append(("n_selected", float(n_sel), nan, p * mc.shots, nan, ""))
    if strict and low_stats:
        raise AccuracyError(
            f"only {n_sel} of {mc.shots} shots fell in the acceptance window; "
            "raise shots or widen delta for a strict run"
        )
    table = ResultTable(
        columns=("quantity", "estimated", "std_error", "analytic", "z_score", "within_3se"),
        units=("", "", "", "", "", ""),
        rows=tuple(out_rows),
        provenance=provenance,
    )
    return table, []


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _wigner_path(base: str, label: str, n_jobs: int) -> Path:
    p = Path(base)
    if n_jobs == 1:
        return p
    return p.with_name(f"{p.stem}-{label.lower()}{p.suffix}")


def _emit(cfg: ScenarioConfig, table: ResultTable, wigner_jobs: list, provenance: dict) -> None:
    csv_text = table.to_csv()
    if cfg.output.table is not None:
        path = Path(cfg.output.table)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(csv_text, encoding="utf-8")
        print(f"wrote table: {path}", file=sys.stderr)
    else:
        sys.stdout.write(csv_text)
    if wigner_jobs:
        if cfg.output.wigner is None:
            raise ConfigError(
                "analysis requested wigner grids but [output] has no wigner path"
            )
        for label, station in wigner_jobs:
            grid = _wigner_grid_json(station, cfg.analysis, provenance)
            path = _wigner_path(cfg.output.wigner, label, len(wigner_jobs))
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(
                json.dumps(grid, sort_keys=True, separators=(",", ":")) + "\n",
                encoding="utf-8",
            )
            print(f"wrote wigner grid: {path}", file=sys.stderr)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsqueeze",
        description="Scenario runner for remotely prepared squeezed states",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("prepare", "condition a shared state and report the surviving stations"),
        ("sweep", "repeat a preparation while one variable sweeps a range"),
        ("displace-curve", "tabulate prepared displacement against the closed form"),
        ("ghz", "multipartite scenarios on the N-mode entangled source"),
        ("simulate", "Monte Carlo homodyne run checked against the analytic state"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="scenario TOML file")
        cmd.add_argument("--out", help="override [output] table path")
        cmd.add_argument("--seed", type=int, help="override [montecarlo] seed")
        cmd.add_argument(
            "--strict",
            action="store_true",
            help="fail on low statistics; simulate then requires --seed",
        )
        cmd.add_argument(
            "--grid-bounds", type=float, help="override [analysis] grid_bounds"
        )
        cmd.add_argument(
            "--grid-points", type=int, help="override [analysis] grid_points"
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    overrides: dict[str, dict] = {}
    if args.out is not None:
        overrides.setdefault("output", {})["table"] = args.out
    if args.seed is not None:
        overrides.setdefault("montecarlo", {})["seed"] = args.seed
    if args.grid_bounds is not None:
        overrides.setdefault("analysis", {})["grid_bounds"] = args.grid_bounds
    if args.grid_points is not None:
        overrides.setdefault("analysis", {})["grid_points"] = args.grid_points

    try:
        cfg = load_config(
            args.config,
            args.command,
            overrides=overrides,
            seed_from_flag=args.seed is not None,
            strict=args.strict,
        )
        seed = cfg.montecarlo.seed if cfg.montecarlo is not None else None
        provenance = {
            "config-sha256": cfg.config_hash(),
            "seed": "none" if seed is None else str(seed),
            "version": __version__,
        }
        if cfg.command == "prepare":
            table, jobs = run_prepare(cfg, provenance)
        elif cfg.command == "sweep":
            table, jobs = run_sweep(cfg, provenance)
        elif cfg.command == "displace-curve":
            table, jobs = run_displace_curve(cfg, provenance)
        elif cfg.command == "ghz":
            table, jobs = run_ghz(cfg, provenance)
        else:
            table, jobs = run_simulate(cfg, provenance, strict=args.strict)
        _emit(cfg, table, jobs, provenance)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # Invalid physical parameters surface as config problems for the CLI.
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalDegeneracyError, WindowUnderflowError) as exc:
        print(f"degenerate scenario: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except AccuracyError as exc:
        print(f"accuracy failure: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
