"""BPSK relay XOR BER under symbol and phase offsets.

Sweeps the synchronous benchmark and a set of (delta, phi) offsets, writes one
CSV and one SVG per run and prints each curve's penalty at BER 1e-3 and 1e-4.

    python scripts/bpsk_offsets.py --packets 10000 --out results/bpsk
"""

import argparse
import math
from pathlib import Path

from apnc import cli, harness
from apnc.harness import OutOfRange, SweepConfig

OFFSETS = [(0.0, math.pi / 2), (0.5, 0.0), (0.5, math.pi / 4), (0.5, math.pi / 2)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--packets", type=int, default=10_000)
    ap.add_argument("--bits", type=int, default=2048)
    ap.add_argument("--ebn0", default="0:1:11")
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", default="results/bpsk")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ebn0s = cli.parse_range(args.ebn0)

    def run(deltas, phis, seed):
        cfg = SweepConfig("bpsk", deltas, phis, ebn0s, args.packets, args.bits, seed)
        return harness.sweep(cfg, threads=args.threads, progress=lambda r: print(
            f"  delta={r.delta:g} phi={r.phi:.4f} {r.ebn0_db:5.1f} dB  ber={r.ber:.3e}"))

    ref = run((0.0,), (0.0,), args.seed)
    records = list(ref)
    for i, (d, p) in enumerate(OFFSETS, start=1):
        records += run((d,), (p,), args.seed + i)

    cli.write_csv(records, out / "bpsk_offsets.csv")
    cli.write_svg(records, out / "bpsk_offsets.svg", title="BPSK XOR BER at the relay")
    for key, curve in harness.group_curves(records).items():
        if key == ref[0].curve_key:
            continue
        for target in (1e-3, 1e-4):
            try:
                pen, se = harness.penalty_with_error(ref, curve, target)
                print(f"delta={key[1]:g} phi={key[2] / math.pi:g}pi  BER {target:g}: {pen:+.3f} +- {se:.3f} dB")
            except OutOfRange as e:
                print(f"delta={key[1]:g} phi={key[2] / math.pi:g}pi  BER {target:g}: {e}")


if __name__ == "__main__":
    main()
