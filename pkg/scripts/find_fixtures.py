"""Search AWGN frames for regression fixtures and pin them under tests/fixtures.

chain_only:   BP alone fails, every HMM walk alone fails, HMM output fed to BP decodes.
              A single channel LLR is overwritten with a confidently wrong +16.
erasure_only: stages 1 and 2 fail, a reliability-erasure stage decodes.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from hmmldpc.bp import bp_decode
from hmmldpc.code import CodeParameters, LdpcCode, build_code
from hmmldpc.sim import make_frame
from hmmldpc.staged import DecoderConfig, decode

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def chain_only(code, ebn0, seed, cfg):
    c, llr = make_frame(code, ebn0, (seed, 0))
    zeros = np.flatnonzero(c == 0)
    llr = llr.copy()
    llr[zeros[0]] = 16.0
    if bp_decode(llr, code.H, cfg.bp_iters).converged:
        return None
    out = decode(llr, code, cfg, seed=seed)
    hist = dict(out.history)
    if out.stage == 1 and hist.get("s1:hmm", 0) > 0 and np.array_equal(out.hard, c):
        return llr, c, 1
    return None


def erasure_only(code, ebn0, seed, cfg):
    c, llr = make_frame(code, ebn0, (seed, 0))
    if bp_decode(llr, code.H, cfg.bp_iters).converged:
        return None
    out = decode(llr, code, cfg, seed=seed)
    if out.stage in (3, 4) and np.array_equal(out.hard, c):
        return llr, c, out.stage
    return None


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frame-bits", type=int, default=128)
    ap.add_argument("--code-seed", type=int, default=1)
    ap.add_argument("--ebn0", type=float, default=2.0)
    ap.add_argument("--tries", type=int, default=500)
    args = ap.parse_args()

    code = build_code(CodeParameters.from_frame_bits(args.frame_bits), args.code_seed)
    OUT.mkdir(parents=True, exist_ok=True)
    code_name = f"code_n{args.frame_bits}_s{args.code_seed}.json"
    code.save(OUT / code_name)
    code = LdpcCode.load(OUT / code_name)
    cfg = DecoderConfig()

    for name, search in (("chain_only", chain_only), ("erasure_only", erasure_only)):
        for seed in range(args.tries):
            found = search(code, args.ebn0, seed, cfg)
            if found is None:
                continue
            llr, c, stage = found
            doc = {
                "llr": [float(x) for x in llr],
                "code_ref": code_name,
                "expected_stage": stage,
                "seed": seed,
                "codeword": [int(x) for x in c],
                "ebn0_db": args.ebn0,
            }
            (OUT / f"{name}.json").write_text(json.dumps(doc))
            print(f"{name}: seed {seed}, stage {stage}")
            break
        else:
            print(f"{name}: nothing found in {args.tries} tries")


if __name__ == "__main__":
    main()
