"""Helpers shared by the plotting scripts: run the CLI and load its output."""

import io
import json
import os
import shutil
import subprocess
from pathlib import Path

import pandas as pd

ROOT = Path(__file__).resolve().parent.parent


def thermo_binary() -> str:
    """Locate the `thermo` executable: $THERMO_BIN, a cargo build, or PATH."""
    if env := os.environ.get("THERMO_BIN"):
        return env
    for profile in ("release", "debug"):
        candidate = ROOT / "target" / profile / "thermo"
        if candidate.exists():
            return str(candidate)
    found = shutil.which("thermo")
    if found is None:
        raise SystemExit("thermo binary not found; run `cargo build --release` or set THERMO_BIN")
    return found


def run(*args: str) -> str:
    out = subprocess.run([thermo_binary(), *args], check=False, capture_output=True, text=True)
    # `tables` exits 1 on a reference mismatch but still prints every row
    if out.returncode not in (0, 1):
        raise SystemExit(f"thermo {' '.join(args)} failed ({out.returncode}): {out.stderr.strip()}")
    return out.stdout


def read_csv(text: str) -> pd.DataFrame:
    """Parse CSV output, dropping the leading `# provenance:` comment."""
    return pd.read_csv(io.StringIO(text), comment="#")


def read_json(text: str) -> dict:
    return json.loads(text)
