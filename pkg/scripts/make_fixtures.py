"""Regenerate the shipped test fixtures.

Run from the repository root:

    python3 scripts/make_fixtures.py

Everything is deterministic. The golden report and golden curve are the
frozen outputs of the shipped tool version under the default (numba)
backend; regenerating after an intentional behavior change is expected,
silently diverging bytes are not.
"""

import pathlib
import subprocess
import sys

import numpy as np

from calibdis import core, formats, worlds

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def worked_example_dataset() -> core.EnsembleDataset:
    """Ten copies of the one-input binary setup: prediction (0.2, 0.8)
    from both members, labels split 7/3 to make p(Y) = (0.7, 0.3)."""
    probs = np.tile(np.array([0.2, 0.8]), (2, 10, 1))
    labels = np.array([0] * 7 + [1] * 3, dtype=np.int64)
    return core.EnsembleDataset(probs, labels)


def random_fixture_dataset() -> core.EnsembleDataset:
    """Distinct rows per sample so rejection scores have no ties."""
    rng = worlds.SplitMix64(20240817)
    m, n, k = 3, 60, 4
    probs = rng.floats(m * n * k).reshape(m, n, k) + 0.02
    probs /= probs.sum(axis=2, keepdims=True)
    labels = (rng.floats(n) * k).astype(np.int64)
    return core.EnsembleDataset(probs, labels)


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)

    formats.write_dump(worked_example_dataset(), str(FIXTURES / "worked_example.bin"))
    ds = random_fixture_dataset()
    formats.write_dump(ds, str(FIXTURES / "random_dump.bin"))
    formats.write_dump(ds, str(FIXTURES / "random_dump.csv"),
                       labels_path=str(FIXTURES / "random_dump.labels.csv"))
    formats.write_world(worlds.build_two_regime_world(),
                        str(FIXTURES / "two_regime_world.txt"))

    def cli(*args):
        r = subprocess.run([sys.executable, "-m", "calibdis.cli"] + list(args),
                           capture_output=True, text=True)
        if r.returncode != 0:
            raise SystemExit("fixture CLI step failed: %s\n%s" % (args, r.stderr))

    cli("metrics", "--predictions", str(FIXTURES / "random_dump.bin"),
        "--out", str(FIXTURES / "golden_metrics_report.txt"))
    cli("rejection", "--predictions", str(FIXTURES / "random_dump.bin"),
        "--score", "pred-error", "--grid", "20",
        "--out", str(FIXTURES / "golden_curve.csv"))
    # the curve metadata sidecar embeds the output digest; not a fixture
    meta = FIXTURES / "golden_curve.csv.meta.txt"
    if meta.exists():
        meta.unlink()
    print("fixtures written to", FIXTURES)
    return 0


if __name__ == "__main__":
    sys.exit(main())
