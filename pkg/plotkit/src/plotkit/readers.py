"""Fail-closed readers for scenario CSV tables and Wigner JSON grids.

Both formats are consumed exactly as the scenario CLI documents them; any
deviation (missing provenance lines, unknown grid keys, ragged rows) is an
InputError rather than a best-effort parse, so figures can never be built
from files whose origin or meaning is in doubt.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

PROVENANCE_KEYS = ("config-sha256", "seed", "version")

WIGNER_KEYS = ("convention", "x_axis", "p_axis", "values", "provenance")
WIGNER_CONVENTION = "vacuum-variance-1/2"


def _parse_cell(text: str):
    if text == "":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return float(text)
    except ValueError:
        return text


@dataclass(frozen=True)
class Table:
    """One provenance-stamped CSV table, with typed column access."""

    path: str
    columns: tuple[str, ...]
    units: tuple[str, ...]
    rows: tuple[tuple, ...]
    provenance: dict

    def _index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise InputError(
                f"{self.path}: missing column {name!r}; "
                f"available: {', '.join(self.columns)}"
            ) from None

    def column(self, name: str) -> list:
        i = self._index(name)
        return [row[i] for row in self.rows]

    def numeric_column(self, name: str) -> np.ndarray:
        values = self.column(name)
        bad = [v for v in values if not isinstance(v, float)]
        if bad:
            raise InputError(
                f"{self.path}: column {name!r} has non-numeric value {bad[0]!r}"
            )
        return np.asarray(values, dtype=float)

    def unit(self, name: str) -> str:
        return self.units[self._index(name)]


def read_table(path: str | Path) -> Table:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: input file not found")
    lines = path.read_text(encoding="utf-8").splitlines()

    provenance: dict[str, str] = {}
    units: tuple[str, ...] | None = None
    header: tuple[str, ...] | None = None
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("# "):
            key, sep, value = line[2:].partition("=")
            if not sep:
                raise InputError(f"{path}: malformed header line {line!r}")
            if key == "units":
                units = tuple(value.split(","))
            else:
                provenance[key] = value
        else:
            header = tuple(line.split(","))
            body_start = i + 1
            break
    if header is None:
        raise InputError(f"{path}: no table header found")
    missing = [k for k in PROVENANCE_KEYS if k not in provenance]
    if missing:
        raise InputError(
            f"{path}: missing provenance line(s): {', '.join(missing)}"
        )
    if units is None:
        raise InputError(f"{path}: missing units line")
    if len(units) != len(header):
        raise InputError(
            f"{path}: units line has {len(units)} entries for "
            f"{len(header)} columns"
        )

    rows = []
    for line in lines[body_start:]:
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise InputError(
                f"{path}: row width {len(cells)} does not match header "
                f"width {len(header)}"
            )
        rows.append(tuple(_parse_cell(c) for c in cells))
    return Table(
        path=str(path),
        columns=header,
        units=units,
        rows=tuple(rows),
        provenance=provenance,
    )


@dataclass(frozen=True)
class WignerGrid:
    """One phase-space grid: values[i, j] is the density at (x[i], p[j])."""

    path: str
    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray
    provenance: dict


def read_wigner(path: str | Path) -> WignerGrid:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: input file not found")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise InputError(f"{path}: grid file must hold a JSON object")
    missing = [k for k in WIGNER_KEYS if k not in raw]
    if missing:
        raise InputError(f"{path}: missing grid key(s): {', '.join(missing)}")
    unknown = sorted(set(raw) - set(WIGNER_KEYS))
    if unknown:
        raise InputError(f"{path}: unknown grid key(s): {', '.join(unknown)}")
    if raw["convention"] != WIGNER_CONVENTION:
        raise InputError(
            f"{path}: convention {raw['convention']!r} is not "
            f"{WIGNER_CONVENTION!r}; refusing to guess units"
        )
    provenance = raw["provenance"]
    if not isinstance(provenance, dict):
        raise InputError(f"{path}: provenance must be an object")
    missing = [k for k in PROVENANCE_KEYS if k not in provenance]
    if missing:
        raise InputError(
            f"{path}: provenance is missing: {', '.join(missing)}"
        )
    try:
        x_axis = np.asarray(raw["x_axis"], dtype=float)
        p_axis = np.asarray(raw["p_axis"], dtype=float)
        values = np.asarray(raw["values"], dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{path}: axes and values must be numeric arrays") from None
    if x_axis.ndim != 1 or p_axis.ndim != 1 or x_axis.size < 2 or p_axis.size < 2:
        raise InputError(f"{path}: axes must be 1-D with at least 2 points")
    if values.shape != (x_axis.size, p_axis.size):
        raise InputError(
            f"{path}: values shape {values.shape} does not match axes "
            f"({x_axis.size}, {p_axis.size})"
        )
    if not np.all(np.isfinite(values)):
        raise InputError(f"{path}: values contain non-finite entries")
    return WignerGrid(
        path=str(path),
        x_axis=x_axis,
        p_axis=p_axis,
        values=values,
        provenance=dict(provenance),
    )
