"""Run every shipped study config through the CLI and collect the outputs.

    python scripts/run_studies.py --out results [--threads 4] [--only convergence asbound]
"""

import argparse
import time
from pathlib import Path

from recurrent_pvar.cli import main

ROOT = Path(__file__).resolve().parents[1]
STUDIES = [
    ("convergence", "convergence.json"),
    ("prop1", "prop1.json"),
    ("asbound", "asbound.json"),
    ("coverage", "coverage_observed.json"),
    ("coverage", "coverage_censored.json"),
    ("coverage", "efficiency.json"),
]


def run(out: Path, threads: int, only: list[str] | None) -> int:
    status = 0
    for kind, config in STUDIES:
        name = Path(config).stem
        if only and kind not in only and name not in only:
            continue
        print(f"== {name} ({kind})", flush=True)
        start = time.perf_counter()
        code = main(["study", kind, "--config", str(ROOT / "configs" / config),
                     "--out", str(out / name), "--threads", str(threads)])
        print(f"   exit {code}, {time.perf_counter() - start:.1f} s", flush=True)
        status = status or code
    return status


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", nargs="*")
    args = ap.parse_args()
    raise SystemExit(run(Path(args.out), args.threads, args.only))
