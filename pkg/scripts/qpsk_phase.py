"""QPSK relay XOR BER against phase offset, aligned and half-symbol offset.

For delta in {0, 1/2} and phi in {0, pi/8, pi/4}, compares every curve with
the synchronous benchmark and reports, per delta, the Eb/N0 spread across
phases at BER 1e-3.

    python scripts/qpsk_phase.py --packets 10000 --out results/qpsk
"""

import argparse
import math
from pathlib import Path

from apnc import cli, harness
from apnc.harness import OutOfRange, SweepConfig

PHIS = (0.0, math.pi / 8, math.pi / 4)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--packets", type=int, default=10_000)
    ap.add_argument("--bits", type=int, default=2048)
    ap.add_argument("--ebn0", default="0:1:16")
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--target", type=float, default=1e-3)
    ap.add_argument("--out", default="results/qpsk")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ebn0s = cli.parse_range(args.ebn0)
    show = lambda r: print(f"  delta={r.delta:g} phi={r.phi:.4f} {r.ebn0_db:5.1f} dB  ber={r.ber:.3e}")

    ref = harness.sweep(SweepConfig("qpsk", (0.0,), (0.0,), ebn0s, args.packets, args.bits, args.seed),
                        threads=args.threads, progress=show)
    for j, delta in enumerate((0.0, 0.5), start=1):
        cfg = SweepConfig("qpsk", (delta,), PHIS, ebn0s, args.packets, args.bits, args.seed + j)
        recs = harness.sweep(cfg, threads=args.threads, progress=show)
        tag = f"qpsk_delta{delta:g}"
        cli.write_csv(ref + recs, out / f"{tag}.csv")
        cli.write_svg(ref + recs, out / f"{tag}.svg", title=f"QPSK XOR BER, delta = {delta:g}")
        xs = []
        for key, curve in harness.group_curves(recs).items():
            try:
                pen, se = harness.penalty_with_error(ref, curve, args.target)
                xs.append(harness.crossing(curve, args.target)[0])
                print(f"delta={delta:g} phi={key[2] / math.pi:g}pi: {pen:+.3f} +- {se:.3f} dB")
            except OutOfRange as e:
                print(f"delta={delta:g} phi={key[2] / math.pi:g}pi: {e}")
        if len(xs) > 1:
            print(f"delta={delta:g}: spread across phases {max(xs) - min(xs):.3f} dB at BER {args.target:g}")


if __name__ == "__main__":
    main()
