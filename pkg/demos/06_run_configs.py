"""Drive the experiment harness from the config files next to this script.

Equivalent to `nonlocal-lab run --config demos/configs/<name>.cfg` for
each file.  CSVs land in demos/results/.
"""
from pathlib import Path

from nonlocal_lab import parse_config, run_experiment

here = Path(__file__).parent
out = here / "results"
for path in sorted((here / "configs").glob("*.cfg")):
    cfg = parse_config(path.read_text())
    res = run_experiment(cfg, out)
    consts = ", ".join(f"{k}={v:.4g}" for k, v in res.constants.items())
    print(f"{path.name:24} -> {res.path.name:24} rows={len(res.rows):3} status={res.status} {consts}")
