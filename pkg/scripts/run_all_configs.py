"""Run every experiment config under configs/ and summarize task status."""
import argparse
import sys
from pathlib import Path

from metastab.config import load_config
from metastab.pipeline import run

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--configs", default=ROOT / "configs", type=Path)
    ap.add_argument("--out", default=ROOT / "runs", type=Path)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    failed = 0
    for path in sorted(args.configs.glob("*.toml")):
        cfg = load_config(path)
        bundle = run(cfg, out=args.out / path.stem, threads=args.threads)
        bad = [r for r in bundle.records if r["status"] != "ok"]
        failed += bool(bad)
        total = sum(bundle.timings.values())
        print(f"{path.stem:24s} {len(bundle.records):3d} records  {len(bad)} errors  {total:6.1f} s")
        for r in bad:
            print(f"    {r['task']} eps={r['eps']}: {r['error']['type']}: {r['error']['message']}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
