"""Generate the committed test fixtures.

Writes a three-member logits archive with labels, then the golden dump
produced from it. Rerunning must reproduce the same bytes; the golden
test pins the exporter's output against drift.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from predexport.export import ExportManifest, export  # noqa: E402

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240817)
    n, k = 12, 4
    members = {name: rng.normal(0.0, 2.0, size=(n, k))
               for name in ("m0", "m1", "m2")}
    labels = rng.integers(0, k, size=n).astype(np.int64)

    archive = FIXTURES / "three_member_logits.npz"
    np.savez(archive, **members)
    labels_path = FIXTURES / "labels.npy"
    np.save(labels_path, labels)

    golden = FIXTURES / "golden_export.bin"
    export(ExportManifest(member_paths=(str(archive),),
                          labels_path=str(labels_path),
                          input_kind="logits",
                          out_path=str(golden)))
    print("wrote", archive.name, labels_path.name, golden.name)


if __name__ == "__main__":
    main()
