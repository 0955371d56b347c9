"""
Driving the check suites from a config
======================================

The kslab command line wraps everything above: a JSON config names a
space, a walk dimension (explicit or "fit"), a seed, and a suite; `run`
executes the checks and writes a machine-readable bundle; `report` prints
it.  Same config and seed always produce byte-identical output.  This
script does a full round trip in-process.
"""

import json
import tempfile
from pathlib import Path

from kslab.cli import main

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "bundle"
    config = {
        "space": {"kind": "gasket", "level": 4},
        "d_w": "fit",
        "seed": 0,
        "suite": "all",
        "out": str(out),
    }
    cfg_path = Path(tmp) / "gasket.json"
    cfg_path.write_text(json.dumps(config, indent=2))

    print("running all applicable suites on gasket(4), d_w fitted\n")
    code = main(["run", "--config", str(cfg_path)])
    print(f"\nexit code {code}")

    summary = json.loads((out / "summary.json").read_text())
    print(f"resolved d_w = {summary['d_w']:.4f}"
          f" (source: {summary['d_w_provenance']['source']})")
    print(f"artifacts: {sorted(p.name for p in out.iterdir())}\n")

    main(["report", str(out)])
