"""Command-line front end: ``apnc simulate | verify | penalty | trace | decode``.

Exit codes: 0 success, 1 invalid input, 2 verification or acceptance failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import harness
from .bp_decoder import decode_packet
from .channel import ChannelParams, SampleVector, transmit
from .harness import BerRecord, OutOfRange, SweepConfig
from .modulation import bits_to_indices, indices_to_bits
from .oracle import verify_exactness

SCHEMA = 1
CSV_FIELDS = ("scheme", "delta", "phi", "ebn0_db", "bits", "errors", "ber", "stderr")
DEFAULT_TARGETS = (1e-3, 1e-4)

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# value parsing

_PI_TERM = re.compile(r"^\s*([0-9./]*)\s*\*?\s*pi\s*(?:/\s*([0-9.]+))?\s*$", re.I)


def parse_scaled(text, unit: float = 1.0) -> float:
    """Parse ``3/4``, ``0.25``, ``pi/4``, ``3pi/4`` or ``3*pi/4`` (pi only with unit=pi)."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip()
    m = _PI_TERM.match(s)
    if m:
        coef = Fraction(m.group(1)) if m.group(1) else Fraction(1)
        den = Fraction(m.group(2)) if m.group(2) else Fraction(1)
        return float(coef / den) * math.pi
    if s.lower() in ("inf", "+inf"):
        return math.inf
    try:
        return float(Fraction(s)) * unit if "/" in s else float(s) * unit
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse number {text!r}") from None


def parse_list(text, unit: float = 1.0) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [parse_scaled(v, unit) for v in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    return [parse_scaled(v, unit) for v in str(text).split(",") if v.strip()]


def parse_range(text) -> list[float]:
    """``start:step:stop`` (inclusive) or a comma list."""
    if isinstance(text, str) and ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"ebn0 range must be start:step:stop, got {text!r}")
        start, step, stop = (parse_scaled(p) for p in parts)
        if step <= 0 or stop < start:
            raise UsageError(f"ebn0 range {text!r} is empty")
        n = int(math.floor((stop - start) / step + 1e-9))
        return [round(start + i * step, 12) for i in range(n + 1)]
    return parse_list(text)


# CSV

def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def records_to_csv(records) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA}\n")
    buf.write(",".join(CSV_FIELDS) + "\n")
    for r in records:
        row = (r.scheme, r.delta, r.phi, r.ebn0_db, r.bits, r.errors, r.ber, r.stderr)
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(records, path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(records_to_csv(records))


def read_csv(path) -> list[BerRecord]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# schema={SCHEMA}":
        raise UsageError(f"{path}: missing '# schema={SCHEMA}' line")
    reader = csv.DictReader(l for l in lines[1:] if not l.startswith("#"))
    if tuple(reader.fieldnames or ()) != CSV_FIELDS:
        raise UsageError(f"{path}: header must be {','.join(CSV_FIELDS)}")
    out = []
    for row in reader:
        out.append(
            BerRecord(
                scheme=row["scheme"],
                delta=float(row["delta"]),
                phi=float(row["phi"]),
                ebn0_db=float(row["ebn0_db"]),
                bits=int(row["bits"]),
                errors=int(row["errors"]),
            )
        )
    return out


# SVG

def write_svg(records, path, title: str = "") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "apnc"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for (scheme, delta, phi), curve in harness.group_curves(records).items():
        pts = [(r.ebn0_db, r.ber) for r in curve if r.ber > 0 and math.isfinite(r.ebn0_db)]
        if not pts:
            continue
        x, y = zip(*pts)
        ax.semilogy(x, y, marker="o", label=f"{scheme} delta={delta:g} phi={phi / math.pi:g}pi")
    ax.set_xlabel("Eb/N0 (dB)")
    ax.set_ylabel("BER")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# subcommands

_SIM_DEFAULTS = dict(
    scheme="bpsk", delta="0", phi="0", ebn0="0:2:12", packets=10_000, bits=2048,
    seed=0, decoder="bp", threads=None,
)


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"config {path}: {e}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path}: top level must be an object")
    unknown = set(cfg) - set(_SIM_DEFAULTS)
    if unknown:
        raise UsageError(f"config {path}: unknown keys {sorted(unknown)}")
    return cfg


def sweep_config_from(args) -> tuple[SweepConfig, int | None]:
    """Merge defaults < config file < flags into a validated sweep config."""
    merged = dict(_SIM_DEFAULTS)
    merged.update(_load_config(getattr(args, "config", None)))
    for key in _SIM_DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    parsers = dict(
        delta=parse_list, phi=parse_list, ebn0=parse_range,
        packets=int, bits=int, seed=int, scheme=str, decoder=str,
    )
    vals = {}
    for key, parse in parsers.items():
        try:
            vals[key] = parse(merged[key])
        except (TypeError, ValueError) as e:
            raise UsageError(f"{key}: {e}") from None
    try:
        cfg = SweepConfig(
            scheme=vals["scheme"],
            deltas=vals["delta"],
            phis=vals["phi"],
            ebn0s=vals["ebn0"],
            packets=vals["packets"],
            bits_per_packet=vals["bits"],
            base_seed=vals["seed"],
            decoder=vals["decoder"],
        )
    except ValueError as e:
        raise UsageError(str(e)) from None
    threads = merged["threads"]
    if threads is None and os.environ.get("APNC_THREADS"):
        threads = os.environ["APNC_THREADS"]
    try:
        threads = harness.resolve_threads(None if threads is None else int(threads))
    except ValueError as e:
        raise UsageError(f"threads: {e}") from None
    return cfg, threads


def cmd_simulate(args) -> int:
    cfg, threads = sweep_config_from(args)

    def progress(rec):
        if args.progress:
            print(
                f"{rec.scheme} delta={rec.delta:g} phi={rec.phi:.6g} ebn0={rec.ebn0_db:g} "
                f"ber={rec.ber:.4g} ({rec.errors}/{rec.bits})",
                file=sys.stderr,
            )

    records = harness.sweep(cfg, threads=threads, progress=progress)
    if args.output:
        write_csv(records, args.output)
    else:
        sys.stdout.write(records_to_csv(records))
    if args.svg:
        write_svg(records, args.svg)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        report = verify_exactness(
            max_n=args.max_n,
            cases=tuple(int(c) for c in str(args.cases).split(",")),
            trials=args.trials,
            seed=args.seed,
            schemes=tuple(s.strip() for s in args.schemes.split(",")),
            ebn0s=tuple(parse_list(args.ebn0)),
            flip_evidence=args.inject_fault,
        )
    except ValueError as e:
        raise UsageError(str(e)) from None
    w = report.worst
    print(f"instances: {report.instances}")
    print(f"max |belief - enumeration|: {report.max_deviation:.3e} (bound {report.tolerance:g})")
    print(
        "worst: scheme={scheme} N={n} case={case} delta={delta:.6g} phi={phi:.6g} "
        "ebn0={ebn0_db:g} seed={seed} key={key}".format(**w)
    )
    if report.passed:
        print("PASS")
        return EXIT_OK
    print("FAIL: decoder beliefs differ from enumeration", file=sys.stderr)
    return EXIT_FAILED


def _single_curve(records, path) -> list[BerRecord]:
    curves = harness.group_curves(records)
    if len(curves) != 1:
        raise UsageError(f"{path}: reference must hold exactly one curve, found {len(curves)}")
    return next(iter(curves.values()))


def _label(key) -> str:
    scheme, delta, phi = key
    return f"{scheme} delta={delta:g} phi={phi:.6g}"


def cmd_penalty(args) -> int:
    ref = _single_curve(read_csv(args.reference), args.reference)
    tests = harness.group_curves(read_csv(args.test))
    explicit = args.target is not None
    targets = args.target if explicit else list(DEFAULT_TARGETS)
    status = EXIT_OK
    for i, target in enumerate(targets):
        crossings = {}
        for key, curve in tests.items():
            try:
                pen, err = harness.penalty_with_error(ref, curve, target)
                crossings[key] = harness.crossing(curve, target)[0]
            except OutOfRange as e:
                msg = f"BER {target:g}: {_label(key)}: {e}"
                if explicit or i == 0:
                    print(f"error: {msg}", file=sys.stderr)
                    status = EXIT_INVALID
                else:
                    print(f"note: {msg}")
                continue
            print(f"BER {target:g}: {_label(key)}: penalty {pen:.3f} dB +- {err:.3f}")
        if len(crossings) > 1:
            spread = max(crossings.values()) - min(crossings.values())
            print(f"BER {target:g}: spread across {len(crossings)} curves {spread:.3f} dB")
    return status


def cmd_trace(args) -> int:
    try:
        params = ChannelParams(
            args.scheme, args.n_symbols, parse_scaled(args.delta),
            parse_scaled(args.phi), parse_scaled(args.ebn0),
        )
    except ValueError as e:
        raise UsageError(str(e)) from None
    rng = harness.packet_rng(args.seed, 0)
    scheme = params.scheme
    bits = params.n_symbols * scheme.bits_per_symbol
    ba, bb = rng.integers(0, 2, bits), rng.integers(0, 2, bits)
    ia, ib = bits_to_indices(ba, scheme), bits_to_indices(bb, scheme)
    y = transmit(scheme.points[ia], scheme.points[ib], params, rng)
    doc = y.to_dict()
    doc["bits_a"] = ba.tolist()
    doc["bits_b"] = bb.tolist()
    doc["xor_bits"] = indices_to_bits(scheme.xor_table[ia, ib], scheme).tolist()
    _emit_json(doc, args.output)
    return EXIT_OK


def cmd_decode(args) -> int:
    try:
        doc = json.loads(Path(args.trace).read_text(encoding="utf-8"))
        y = SampleVector.from_dict(doc)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise UsageError(f"{args.trace}: {e}") from None
    res = decode_packet(y)
    out = {
        "scheme": y.params.scheme.name,
        "xor_bits": res.bits.tolist(),
        "xor_posterior": res.posterior.tolist(),
    }
    if "xor_bits" in doc:
        out["bit_errors"] = int(np.sum(np.asarray(doc["xor_bits"]) != res.bits))
    _emit_json(out, args.output)
    return EXIT_OK


def _emit_json(doc, path) -> None:
    text = json.dumps(doc, indent=1) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="apnc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="Monte-Carlo BER sweep to CSV")
    s.add_argument("--config", help="JSON file with any of the flag names as keys")
    s.add_argument("--scheme", choices=["bpsk", "qpsk"])
    s.add_argument("--delta", help="symbol offsets in symbol periods, e.g. 0,1/2")
    s.add_argument("--phi", help="phase offsets in radians, e.g. 0,pi/8,pi/4")
    s.add_argument("--ebn0", help="Eb/N0 dB list or start:step:stop")
    s.add_argument("--packets", type=int)
    s.add_argument("--bits", type=int, help="bits per packet")
    s.add_argument("--seed", type=int)
    s.add_argument("--decoder", choices=list(harness.DECODERS))
    s.add_argument("--threads", type=int, help="worker threads (env APNC_THREADS)")
    s.add_argument("-o", "--output", help="CSV path (default stdout)")
    s.add_argument("--svg", help="also render BER curves to this SVG")
    s.add_argument("--progress", action="store_true", help="log each point to stderr")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="decoder vs brute-force enumeration")
    v.add_argument("--max-n", type=int, default=5)
    v.add_argument("--cases", default="1,2,3,4")
    v.add_argument("--trials", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--schemes", default="bpsk,qpsk")
    v.add_argument("--ebn0", default="0,6,12")
    v.add_argument("--inject-fault", action="store_true", help="negate the evidence (self-test)")
    v.set_defaults(func=cmd_verify)

    q = sub.add_parser("penalty", help="Eb/N0 penalty of test curves against a reference")
    q.add_argument("reference")
    q.add_argument("test")
    q.add_argument("--target", type=float, action="append", help="target BER (repeatable)")
    q.set_defaults(func=cmd_penalty)

    t = sub.add_parser("trace", help="write one random received packet as JSON")
    t.add_argument("--scheme", choices=["bpsk", "qpsk"], default="bpsk")
    t.add_argument("--n-symbols", type=int, default=16)
    t.add_argument("--delta", default="0")
    t.add_argument("--phi", default="0")
    t.add_argument("--ebn0", default="8")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("-o", "--output")
    t.set_defaults(func=cmd_trace)

    d = sub.add_parser("decode", help="decode a JSON trace")
    d.add_argument("trace")
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_decode)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"apnc: error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
