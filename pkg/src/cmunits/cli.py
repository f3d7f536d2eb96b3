"""Command-line interface: ``cmus scan | classpoly | measure | report``.

Scan output is one JSON object per discriminant, written in increasing
``|delta|`` by a single writer regardless of the number of workers.  A
checkpoint (written atomically via rename) records how many bytes of output
are complete, so a resumed scan truncates any partial tail and continues with
the next discriminant.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import multiprocessing
import os
import sys
import time

from . import __version__
from .analysis import (
    count_below,
    dioapprox_ratio,
    gamma_eps_count,
    hyperbolic_measure,
    liouville_check,
    sigma_eps_measure,
    WholeDomain,
)
from .classpoly import format_poly, hilbert_class_poly, is_shifted_unit, is_squarefree
from .discriminants import discriminants_up_to, nt_correction, validate_discriminant
from .errors import EtaCollision, NotADiscriminant, PrecisionExhausted, ToleranceNotMet
from .forms import class_number
from .heights import height_from_conjugates, height_report, mahler_height

EXIT_OK, EXIT_USAGE, EXIT_PRECISION, EXIT_IO = 0, 1, 2, 3
CONST_DIGITS_MAX = 64
DEFAULT_EPS = (0.5, 0.1)
CHECKPOINT_INTERVAL_S = 0.5


# ---------------------------------------------------------------- serialization


def _dump(obj) -> str:
    """JSON text with reals at 17 significant digits (non-finite reals become null)."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        text = format(obj, ".17g")
        if not any(ch in text for ch in ".en"):
            text += ".0"
        return text
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_dump(x) for x in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_dump(v)}" for k, v in obj.items()) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def scan_record(delta: int, shifts, eps_list, *, exact_const: bool = False, timing: bool = False) -> dict:
    """The scan row for one discriminant."""
    t0 = time.perf_counter()
    D = validate_discriminant(delta)
    H = hilbert_class_poly(D)
    c0 = H.coeffs[0]
    digits = len(str(abs(c0)))
    rep = height_from_conjugates(D, H.conjugates, c0)
    rec = {
        "delta": D.delta,
        "delta0": D.delta0,
        "f": D.f,
        "h": H.degree,
        "const_term": str(c0) if exact_const or digits <= CONST_DIGITS_MAX else None,
        "const_term_digits": digits,
        "is_unit": abs(c0) == 1,
        "shifted_units": [[a, is_shifted_unit(H, a)] for a in shifts],
        "height": float(rep.height),
        "colmez_ratio": rep.ratio if -D.delta >= 4 else None,
        "gamma_counts": [[float(e), count_below(H.points, e, H.conjugates)] for e in eps_list],
        "elapsed_ms": round((time.perf_counter() - t0) * 1000) if timing else 0,
    }
    return rec


def _csv_rows(rec: dict, eps_list) -> str:
    """Flatten a record: one row per shift (a single row with empty alpha if none)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    gam = [c for _, c in rec.get("gamma_counts") or []] or [""] * len(eps_list)
    base = [rec["delta"], rec.get("delta0", ""), rec.get("f", ""), rec.get("h", ""),
            rec.get("const_term") or "", rec.get("const_term_digits", ""), rec.get("is_unit", "")]
    tail = [_dump(rec.get("height")), _dump(rec.get("colmez_ratio")), *gam, rec.get("elapsed_ms", ""),
            rec.get("error", "")]
    shifts = rec.get("shifted_units") or [["", ""]]
    for a, flag in shifts:
        w.writerow(base + [a, flag] + tail)
    return buf.getvalue()


def _csv_header(eps_list) -> str:
    cols = ["delta", "delta0", "f", "h", "const_term", "const_term_digits", "is_unit", "alpha",
            "shifted_unit", "height", "colmez_ratio", *[f"gamma_{_dump(float(e))}" for e in eps_list],
            "elapsed_ms", "error"]
    return ",".join(cols) + "\n"


def _work(args):
    delta, shifts, eps_list, exact_const, timing, max_degree = args
    if max_degree is not None and class_number(delta) > max_degree:
        return delta, None
    try:
        return delta, scan_record(delta, shifts, eps_list, exact_const=exact_const, timing=timing)
    except PrecisionExhausted as exc:
        return delta, {"delta": delta, "error": f"PrecisionExhausted: {exc}"}


# ---------------------------------------------------------------- checkpoint


def config_hash(config: dict) -> str:
    return hashlib.sha256(_dump(config).encode()).hexdigest()[:32]


def _write_checkpoint(path: str, data: dict) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(json.dumps(data, sort_keys=True))
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _read_checkpoint(path: str):
    if not path or not os.path.exists(path):
        return None
    with open(path) as fh:
        return json.load(fh)


class _Summary:
    def __init__(self):
        self.records = 0
        self.units = []
        self.shifted = []
        self.errors = []
        self.min_ratio = None

    def add(self, rec: dict) -> None:
        self.records += 1
        if "error" in rec:
            self.errors.append(rec["delta"])
            return
        if rec["is_unit"]:
            self.units.append(rec["delta"])
        for a, flag in rec["shifted_units"]:
            if flag:
                self.shifted.append((rec["delta"], a))
        r = rec["colmez_ratio"]
        if r is not None and -rec["delta"] >= 100 and (self.min_ratio is None or r < self.min_ratio[0]):
            self.min_ratio = (r, rec["delta"])

    def emit(self, stream) -> None:
        print(f"records: {self.records}", file=stream)
        print(f"units found: {len(self.units)} {self.units}", file=stream)
        print(f"shifted units found: {len(self.shifted)} "
              + " ".join(f"(delta={d}, alpha={a})" for d, a in self.shifted), file=stream)
        if self.min_ratio:
            print(f"min colmez_ratio (|delta| >= 100): {self.min_ratio[0]:.6f} at delta={self.min_ratio[1]}",
                  file=stream)
        if self.errors:
            print(f"PrecisionExhausted at: {self.errors}", file=stream)


def cmd_scan(args) -> int:
    if args.dmax < 3:
        print("error: --dmax must be at least 3", file=sys.stderr)
        return EXIT_USAGE
    if args.workers < 1:
        print("error: --workers must be positive", file=sys.stderr)
        return EXIT_USAGE
    shifts = list(args.shift or [])
    eps_list = [float(e) for e in (args.eps or DEFAULT_EPS)]
    if any(not 0 < e <= 1 for e in eps_list):
        print("error: every --eps must lie in (0, 1]", file=sys.stderr)
        return EXIT_USAGE
    if args.checkpoint and not args.out:
        print("error: --checkpoint requires --out", file=sys.stderr)
        return EXIT_USAGE
    config = {
        "dmax": args.dmax,
        "shifts": shifts,
        "eps_list": eps_list,
        "precision_policy": os.environ.get("CMUS_PRECISION_POLICY", "budget").strip(),
        "max_degree": args.max_degree,
        "format": "csv" if args.csv else "jsonl",
        "exact_const": bool(args.exact_const),
        "timing": bool(args.timing),
    }
    chash = config_hash(config)
    summary = _Summary()

    start = 3
    written = 0
    try:
        ck = _read_checkpoint(args.checkpoint)
        if ck is not None:
            if ck.get("config_hash") != chash:
                print("error: checkpoint was written with a different configuration; refusing to resume",
                      file=sys.stderr)
                return EXIT_USAGE
            start = -ck["last_completed_delta"] + 1
            written = ck["records_written"]
            with open(args.out, "r+b") as fh:
                fh.truncate(ck["out_bytes"])
            out = open(args.out, "a", newline="")
            if not args.csv:
                with open(args.out) as fh:
                    for line in fh:
                        summary.add(json.loads(line))
            print(f"resuming after delta={ck['last_completed_delta']} ({written} records)", file=sys.stderr)
        else:
            out = open(args.out, "w", newline="") if args.out else sys.stdout
            if args.csv:
                out.write(_csv_header(eps_list))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    tasks = ((D.delta, shifts, eps_list, args.exact_const, args.timing, args.max_degree)
             for D in discriminants_up_to(args.dmax, start))
    pool = multiprocessing.Pool(args.workers) if args.workers > 1 else None
    results = pool.imap(_work, tasks, chunksize=1) if pool else map(_work, tasks)
    last_ck = time.monotonic()
    last_delta = None
    try:
        for delta, rec in results:
            if rec is not None:
                out.write(_csv_rows(rec, eps_list) if args.csv else _dump(rec) + "\n")
                written += 1
                summary.add(rec)
            last_delta = delta
            if args.checkpoint and time.monotonic() - last_ck >= CHECKPOINT_INTERVAL_S:
                out.flush()
                _write_checkpoint(args.checkpoint, {
                    "last_completed_delta": delta, "config_hash": chash,
                    "records_written": written, "out_bytes": out.tell()})
                last_ck = time.monotonic()
        out.flush()
        if args.checkpoint and last_delta is not None:
            _write_checkpoint(args.checkpoint, {
                "last_completed_delta": last_delta, "config_hash": chash,
                "records_written": written, "out_bytes": out.tell()})
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    finally:
        if pool:
            pool.terminate()
        if out is not sys.stdout:
            out.close()
    summary.emit(sys.stderr)
    return EXIT_PRECISION if summary.errors else EXIT_OK


# ---------------------------------------------------------------- other commands


def cmd_classpoly(args) -> int:
    try:
        H = hilbert_class_poly(args.d)
    except NotADiscriminant as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PrecisionExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    fmt = hex if args.hex else str
    print(format_poly(H.coeffs, hex_digits=args.hex))
    print("coefficients (ascending): " + " ".join(fmt(c) for c in H.coeffs))
    print(f"rounding_margin_bits: {H.rounding_margin_bits:.1f}")
    print(f"precision_used: {H.precision_used}")
    return EXIT_OK


def cmd_measure(args) -> int:
    if args.tol <= 0:
        print("error: --tol must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.full_domain:
            m = hyperbolic_measure(WholeDomain(), args.tol)
            print(f"mu(F) = {m.value:.12f} +- {m.abserr:.3g}")
            return EXIT_OK
        if args.eps is None or not 0 < args.eps <= 1:
            print("error: --eps in (0, 1] is required", file=sys.stderr)
            return EXIT_USAGE
        m = sigma_eps_measure(args.eps, args.tol)
    except ToleranceNotMet as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    print(f"mu(Sigma_eps) = {m.value:.12g} +- {m.abserr:.3g}  (eps = {args.eps:g}, cells = {m.cells})")
    print(f"ratio mu / eps^(2/3) = {m.value / args.eps ** (2 / 3):.9g}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        D = validate_discriminant(args.d)
    except NotADiscriminant as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        H = hilbert_class_poly(D)
        rep = height_report(D, H=H)
    except PrecisionExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    p = print
    p(f"discriminant {D.delta} = {D.delta0} * {D.f}^2")
    p(f"class number h = {H.degree}")
    if H.degree <= 8:
        p(f"H = {H}")
    p(f"|H(0)| has {len(str(abs(H.coeffs[0])))} digits; unit: {'yes' if abs(H.coeffs[0]) == 1 else 'no'}")
    p(f"rounding margin {H.rounding_margin_bits:.1f} bits at {H.precision_used} bits; "
      f"squarefree certified: {is_squarefree(H)}")
    p(f"height h(J) = {float(rep.height):.12f}  (certified error {float(rep.err):.2e})")
    p(f"height from Mahler measure = {float(mahler_height(H)):.12f}")
    p(f"pos_sum = {float(rep.pos_sum):.12f}  neg_sum = {float(rep.neg_sum):.12f}  "
      f"log|H(0)| = {float(rep.log_abs_norm):.12f}")
    if -D.delta >= 4:
        p(f"colmez_ratio h(J)/log|D| = {rep.ratio:.6f}")
    p(f"nt_correction = {nt_correction(D):.12f}")
    p("conjugates (form: j, certified |j| interval):")
    shown = min(H.degree, 24)
    for pt, v in list(zip(H.points, H.conjugates))[:shown]:
        lo, hi = v.abs_bounds()
        z = complex(v.value)
        p(f"  {pt.source_form.as_tuple()}: {z.real:.10g} {z.imag:+.10g}i  |j| in [{float(lo):.10g}, {float(hi):.10g}]")
    if shown < H.degree:
        p(f"  ... {H.degree - shown} more")
    for eps in DEFAULT_EPS:
        r = gamma_eps_count(D, eps, H=H)
        p(f"Gamma_{eps:g}: {r.gamma_count} of {r.D}; mu(Sigma_{eps:g}) = {r.mu_sigma.value:.6g}; "
          f"deviation {r.deviation:.6g}")
    if D.delta == -3:
        p("liouville check skipped: the only CM point of discriminant -3 is zeta itself")
        p("dioapprox ratio skipped: the CM point coincides with zeta")
    else:
        rows = liouville_check(D)
        worst = min(rows, key=lambda r: r.min_dist)
        ok = all(r.passed for r in rows)
        p(f"liouville: {'pass' if ok else 'FAIL'}; closest point {worst.form.as_tuple()} at distance "
          f"{worst.min_dist:.6g}, -log d = {-math.log(worst.min_dist):.6f} <= {worst.bound:.6f}")
        try:
            p(f"dioapprox ratio (eta = zeta) = {dioapprox_ratio(D):.6f}")
        except EtaCollision:
            p("dioapprox ratio skipped: a CM point coincides with zeta")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cmus", description="Singular moduli, class polynomials and unit scans.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scan", help="scan discriminants by increasing |delta|")
    s.add_argument("--dmax", type=int, required=True)
    s.add_argument("--shift", type=int, action="append", metavar="A", help="test J - A for units (repeatable)")
    s.add_argument("--eps", type=float, action="append", metavar="E", help="Gamma_eps threshold (repeatable)")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", metavar="PATH")
    s.add_argument("--checkpoint", metavar="PATH")
    s.add_argument("--max-degree", type=int, metavar="D", help="emit only discriminants with h <= D")
    s.add_argument("--csv", action="store_true", help="flattened CSV, one row per (delta, alpha)")
    s.add_argument("--timing", action="store_true", help="record wall-clock elapsed_ms (non-deterministic)")
    s.add_argument("--exact-const", action="store_true", help="always store H(0) exactly")
    s.set_defaults(func=cmd_scan)

    c = sub.add_parser("classpoly", help="print the Hilbert class polynomial")
    c.add_argument("-d", type=int, required=True, metavar="DELTA")
    c.add_argument("--hex", action="store_true")
    c.set_defaults(func=cmd_classpoly)

    m = sub.add_parser("measure", help="hyperbolic measure of Sigma_eps")
    m.add_argument("--eps", type=float)
    m.add_argument("--tol", type=float, default=1e-4)
    m.add_argument("--full-domain", action="store_true")
    m.set_defaults(func=cmd_measure)

    r = sub.add_parser("report", help="all diagnostics for one discriminant")
    r.add_argument("-d", type=int, required=True, metavar="DELTA")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
