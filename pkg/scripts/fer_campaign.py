"""BP vs staged HMM FER comparison over an Eb/N0 grid, written as CSV plus a side-by-side summary.

    python scripts/fer_campaign.py --ebn0 2.0:3.0:0.5 --frames 500 --walks 5,100 --out results/
"""

import argparse
import logging
from pathlib import Path

from hmmldpc.cli import parse_ebn0
from hmmldpc.sim import SimConfig, run_fer_sweep, write_results
from hmmldpc.staged import DecoderConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ebn0", type=parse_ebn0, default=(2.0, 2.5, 3.0))
    ap.add_argument("--frames", type=int, default=500)
    ap.add_argument("--min-errors", type=int, default=None)
    ap.add_argument("--frame-bits", type=int, default=128)
    ap.add_argument("--code-seed", type=int, default=1)
    ap.add_argument("--walks", default="100", help="comma list of walk budgets for the staged decoder")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args.out.mkdir(parents=True, exist_ok=True)

    base = dict(ebn0_db=args.ebn0, frames=args.frames, min_errors=args.min_errors,
                frame_bits=args.frame_bits, code_seed=args.code_seed,
                master_seed=args.seed, workers=args.workers)
    runs = {"bp": SimConfig(decoder="bp", **base)}
    for w in (int(x) for x in args.walks.split(",")):
        runs[f"hmm{w}"] = SimConfig(decoder="hmm", decoder_config=DecoderConfig(max_walks=w), **base)

    code = next(iter(runs.values())).load_code()
    table = {}
    for name, cfg in runs.items():
        logging.info("running %s", name)
        points = run_fer_sweep(cfg, code=code)
        write_results(points, cfg, args.out / f"{name}.csv", args.out / f"{name}.json")
        table[name] = points

    names = list(table)
    print("ebn0_db " + " ".join(f"{n:>22}" for n in names))
    for i, e in enumerate(args.ebn0):
        cells = []
        for n in names:
            p = table[n][i]
            cells.append(f"{p.fer:.4f} [{p.ci_low:.3f},{p.ci_high:.3f}]")
        print(f"{e:7g} " + " ".join(f"{c:>22}" for c in cells))


if __name__ == "__main__":
    main()
