"""Superimposed constellation x_A + x_B e^{j phi} seen at the relay, coloured by XOR.

Points of different XOR colour that sit close together are what costs the
aligned QPSK relay at phi = pi/4.

    python scripts/joint_constellation.py --phi pi/4 --out results/constellation_pi4.svg
"""

import argparse
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from apnc.bp_decoder import node_means  # noqa: E402
from apnc.channel import ChannelParams  # noqa: E402
from apnc.cli import parse_scaled  # noqa: E402


def min_cross_distance(mid, xor):
    """Smallest distance between superimposed points whose XOR differs."""
    pts, lab = mid.ravel(), xor.ravel()
    d = np.abs(pts[:, None] - pts[None, :])
    return float(d[lab[:, None] != lab[None, :]].min())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scheme", default="qpsk")
    ap.add_argument("--phi", default="pi/4")
    ap.add_argument("--out", default="constellation.svg")
    args = ap.parse_args()

    phi = parse_scaled(args.phi)
    params = ChannelParams(args.scheme, 1, 0.5, phi, 10.0)
    scheme = params.scheme
    _, mid, _ = node_means(params)
    xor = scheme.xor_table
    print(f"{scheme.name} phi={phi / math.pi:g}pi: min distance between XOR classes "
          f"{min_cross_distance(mid, xor):.4f}")

    plt.rcParams["svg.hashsalt"] = "apnc"
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    for c in range(scheme.order):
        sel = xor == c
        word = "".join(map(str, scheme.labels[c]))
        ax.scatter(mid[sel].real, mid[sel].imag, s=40, label=f"XOR {word}")
    ax.set_aspect("equal")
    ax.axhline(0, color="0.8", lw=0.5)
    ax.axvline(0, color="0.8", lw=0.5)
    ax.set_title(f"{scheme.name.upper()} joint symbols, phi = {phi / math.pi:g} pi")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(args.out, format="svg", metadata={"Date": None})


if __name__ == "__main__":
    main()
