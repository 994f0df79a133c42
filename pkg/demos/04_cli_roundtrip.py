"""Drive the command line tool end to end.

``sparsebreaks synth`` writes a panel CSV with its ground truth,
``sparsebreaks fit`` reads it back and writes a JSON report plus a CSV of
the coefficient path. The same steps work from a shell; here they run
in-process through ``main``.

Run with ``python demos/04_cli_roundtrip.py``.
"""

import json
import tempfile
from pathlib import Path

from sparsebreaks.cli import main

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp)
    main(["synth", "--output", str(out / "data"), "--seed", "11", "--break-at", "25", "--break-at", "45"])
    truth = json.loads((out / "data" / "truth.json").read_text())
    print("planted:", [(j["period"], [round(v, 2) for v in j["jump"]]) for j in truth["jumps"]])

    code = main(["fit", "--input", str(out / "data" / "panel.csv"), "--output", str(out / "fit"), "--fixed-k", "2"])
    report = json.loads((out / "fit" / "report.json").read_text())
    print(f"fit exit code {code}, criterion {report['criterion']}, lambda {report['lambda']:.4g}")
    for b in report["breaks"]:
        print(f"  break at period {b['period_index']} (label {b['label']}), magnitude {b['magnitude']:.2f}")
    header = (out / "fit" / "plot.csv").read_text().splitlines()[0]
    print("plot.csv columns:", header)

    # errors come back as an exit code plus one JSON line on stderr
    code = main(["fit", "--input", str(out / "missing.csv"), "--output", str(out / "x")])
    print("missing input gives exit code", code)
