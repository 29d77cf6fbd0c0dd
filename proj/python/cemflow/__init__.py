"""Relaxed CEM-GMsFEM solver for convection-diffusion problems."""

import csv
import json
from pathlib import Path

from ._cemflow import (
    RESULTS_HEADER,
    Config,
    ConfigError,
    Error,
    InvalidArgument,
    IoError,
    NumericalError,
    __version__,
    builtin_functions,
    fnv1a,
    load_config,
    parse_config,
    read_snapshot,
    run,
)


def read_results(path):
    """Rows of a results.csv as dicts; numeric columns become floats."""
    rows = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            out = {}
            for k, v in row.items():
                try:
                    out[k] = float(v)
                except ValueError:
                    out[k] = v
            rows.append(out)
    return rows


def read_manifest(output_dir):
    return json.loads((Path(output_dir) / "manifest.json").read_text())


__all__ = [
    "RESULTS_HEADER",
    "Config",
    "ConfigError",
    "Error",
    "InvalidArgument",
    "IoError",
    "NumericalError",
    "__version__",
    "builtin_functions",
    "fnv1a",
    "load_config",
    "parse_config",
    "read_manifest",
    "read_results",
    "read_snapshot",
    "run",
]
