import pathlib
import subprocess
import sys

import numpy as np
import pytest

FIXTURES = pathlib.Path(__file__).resolve().parent / "fixtures"


def run_predexport(args):
    return subprocess.run([sys.executable, "-m", "predexport.cli"] + args,
                          capture_output=True, text=True)


def run_calibdis(args):
    """Drive the analysis tool through its public CLI."""
    return subprocess.run([sys.executable, "-m", "calibdis.cli"] + args,
                          capture_output=True, text=True)


def parse_report(text):
    """key -> value for the flat lines of a calibdis report."""
    lines = text.splitlines()
    assert lines and lines[0] == "calibdis-report v1"
    out = {}
    for line in lines[1:]:
        parts = line.split(" ", 1)
        if len(parts) == 2:
            out[parts[0]] = parts[1]
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(4242)
