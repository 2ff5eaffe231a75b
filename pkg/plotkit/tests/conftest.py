"""Shared fixtures: real scenario outputs generated through the rsqueeze CLI.

plotkit consumes the scenario tool only through its command line and file
formats, so the test inputs are produced the same way: by running the
installed CLI in a subprocess, never by importing its internals.
"""

import subprocess
import sys
from pathlib import Path

import pytest

PREPARE_TOML = """
[source]
kind = "tmsv"
db = -10.0

[[projection]]
mode = 0
theta = 0.0
alpha = 0.0

[analysis]
wigner = true
grid_bounds = 3.0
grid_points = 61

[output]
table = "{table}"
wigner = "{wigner}"
"""

DISPLACE_TOML = """
[displace]
alphas = [0.25, 0.5, 0.75, 1.0]
db_start = -13.0
db_stop = 0.0
points = 9

[output]
table = "{table}"
"""

SWEEP_TOML = """
[source]
kind = "tmsv"
db = -2.0

[[projection]]
mode = 0
theta = 0.0
alpha = 1.0

[sweep]
variable = "eta_b"
start = 0.05
stop = 1.0
points = 8

[output]
table = "{table}"
"""


def run_scenario(command: str, config_text: str, workdir: Path) -> None:
    config = workdir / f"{command}.toml"
    config.write_text(config_text, encoding="utf-8")
    result = subprocess.run(
        [sys.executable, "-m", "rsqueeze.cli", command, "--config", str(config)],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, f"{command} failed: {result.stderr}"


@pytest.fixture(scope="session")
def scenario_outputs(tmp_path_factory) -> dict:
    """Paths of freshly generated scenario CLI outputs."""
    root = tmp_path_factory.mktemp("scenario")
    paths = {
        "prepare_table": root / "prepare.csv",
        "wigner": root / "grid.json",
        "displace_table": root / "displace.csv",
        "sweep_table": root / "sweep.csv",
    }
    run_scenario(
        "prepare",
        PREPARE_TOML.format(table=paths["prepare_table"], wigner=paths["wigner"]),
        root,
    )
    run_scenario(
        "displace-curve", DISPLACE_TOML.format(table=paths["displace_table"]), root
    )
    run_scenario("sweep", SWEEP_TOML.format(table=paths["sweep_table"]), root)
    for path in paths.values():
        assert path.is_file()
    return {name: str(path) for name, path in paths.items()}
