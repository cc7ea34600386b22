"""Run the whole command-line pipeline on the bundled fixtures.

Outputs are written to a temporary directory and summarised.
"""

import json
import shutil
import tempfile
from pathlib import Path

from paxflow import cli

fixtures = Path(__file__).resolve().parents[1] / "fixtures"
with tempfile.TemporaryDirectory() as tmp:
    for f in fixtures.glob("*"):
        if f.is_file():
            shutil.copy(f, tmp)
    code = cli.main(["all", "--config", str(Path(tmp) / "paxflow.ini")])
    out = Path(tmp) / "out"
    print("exit code", code)
    for p in sorted(out.rglob("*")):
        if p.is_file():
            print(" ", p.relative_to(out))
    summary = json.loads((out / "analyze" / "summary.json").read_text())
    print(json.dumps(summary, indent=2)[:1500])
