"""Byte-for-byte regression against the frozen golden artifacts.

Each golden file sits next to the manifest that produced it; regenerating
from the manifest must reproduce the bytes exactly (no timestamps, fixed
summation order).
"""

import json
from pathlib import Path

import pytest

from cvngs.cli import EXIT_OK, run

GOLDEN = Path(__file__).parent / "golden"

CASES = [
    ("fig2a.manifest.json", "fig2a.csv", "fig2a.csv"),
    ("eps_fock_R09.manifest.json", "state.csv", "eps_fock_R09.csv"),
    ("eps_pcat_lossy_R05.manifest.json", "state.csv", "eps_pcat_lossy_R05.csv"),
]


@pytest.mark.parametrize("manifest_name,artifact,golden_name", CASES)
def test_golden_regression(tmp_path, manifest_name, artifact, golden_name):
    manifest = json.loads((GOLDEN / manifest_name).read_text())
    assert run(manifest, tmp_path) == EXIT_OK
    got = (tmp_path / artifact).read_bytes()
    want = (GOLDEN / golden_name).read_bytes()
    assert got == want, f"{golden_name} drifted from the frozen output"
