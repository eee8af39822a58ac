"""Command-line front end.

Exit codes: 0 pass, 1 tolerance failure, 2 bad configuration,
3 source exhausted, 4 oracle mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from randclt import __version__, asclt, cdf, moments, slln_bounds
from randclt.bitsource import PRNG_ID, SourceSpec, open_stream
from randclt.errors import ConfigError, OracleMismatch, SourceExhausted
from randclt.sampling import BlockScheme, sample_run

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_EXHAUSTED, EXIT_ORACLE = 0, 1, 2, 3, 4

DEFAULT_GRID = [-3.0 + 0.5 * i for i in range(13)]


def fmt(x) -> str:
    return f"{x:.12g}"


def _num(x):
    """JSON-safe value with the same 12-digit rounding as CSV output."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(fmt(x))
    return x


class Output:
    """Collects a metadata block, optional notes and tables; renders CSV or JSON."""

    def __init__(self, metadata: dict):
        self.metadata = metadata
        self.notes = []
        self.sections = {}

    def note(self, key, value):
        self.notes.append((key, value))

    def table(self, name, columns, rows):
        self.sections[name] = (columns, rows)

    def value(self, name, mapping):
        self.sections[name] = mapping

    def render(self, form: str) -> str:
        if form == "json":
            doc = {"metadata": self.metadata}
            for key, value in self.notes:
                doc[key] = _num(value)
            for name, sec in self.sections.items():
                if isinstance(sec, tuple):
                    columns, rows = sec
                    doc[name] = [{c: _num(v) for c, v in zip(columns, row)} for row in rows]
                else:
                    doc[name] = {k: _num(v) for k, v in sec.items()}
            return json.dumps(doc, indent=2) + "\n"
        buf = io.StringIO()
        for key, value in self.metadata.items():
            buf.write(f"# {key}: {value}\n")
        for key, value in self.notes:
            buf.write(f"# {key}: {fmt(value) if isinstance(value, float) else value}\n")
        w = csv.writer(buf, lineterminator="\n")
        first = True
        for name, sec in self.sections.items():
            if not isinstance(sec, tuple):
                for k, v in sec.items():
                    buf.write(f"# {name}.{k}: {fmt(v) if isinstance(v, float) else v}\n")
                continue
            if not first:
                buf.write("\n")
            first = False
            columns, rows = sec
            w.writerow(columns)
            for row in rows:
                w.writerow([_cell(v) for v in row])
        return buf.getvalue()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return v


# -- argument helpers -------------------------------------------------------

def _int_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, dash, hi = part.partition("-")
        if dash and lo:
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _float_list(text):
    return [float(p) for p in text.split(",") if p.strip()]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="randclt", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, source=True, scheme=False, seeds=False):
        if source:
            sp.add_argument("--source", required=True, help="kind:params, e.g. prng:seed=1")
        if scheme:
            sp.add_argument("--scheme", default="tri", help="tri | fixed:N | affine:a:b")
        if seeds:
            sp.add_argument("--seeds", type=_int_list, default=None,
                            help="comma list (ranges a-b allowed); overrides the prng seed")
        sp.add_argument("--out", default="-", help="output path, '-' for stdout")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("moments", help="empirical moments of the sample stream")
    common(sp, scheme=True, seeds=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--m-max", type=int, default=8)

    sp = sub.add_parser("cdf", help="exact KS distance and pointwise CDF errors")
    common(sp, scheme=True, seeds=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--x", type=_float_list, default=None, help="grid for pointwise rows")
    sp.add_argument("--ks-tol", type=float, default=0.02)

    sp = sub.add_parser("asclt", help="log-average estimator, or variance study with --ns")
    common(sp, seeds=True)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--x", type=_float_list, default=[-1.0, 0.0, 1.0])
    sp.add_argument("--weights", choices=("dk", "harmonic"), default="dk")
    sp.add_argument("--tol", type=float, default=0.25)
    sp.add_argument("--ns", type=_int_list, default=None, help="variance study step counts")
    sp.add_argument("--f", default="clip", help="clip | step:x0 | one")

    sp = sub.add_parser("oracle", help="partition formula vs enumeration")
    common(sp, source=False)
    sp.add_argument("--n", type=int, default=16, help="largest n in the grid")
    sp.add_argument("--m-max", type=int, default=10)

    sp = sub.add_parser("bounds", help="effective randomness-test plan from SLLN tail bounds")
    common(sp, source=False)
    sp.add_argument("--sigma2", type=float, default=1.0)
    sp.add_argument("--level", type=int, default=1)
    sp.add_argument("--lmax", type=int, default=8)

    sp = sub.add_parser("report", help="moments + KS + ASCLT verdict as JSON")
    common(sp, scheme=True)
    sp.add_argument("--k", type=int, default=100_000)
    sp.add_argument("--n", type=int, default=1_000_000)
    sp.add_argument("--x", type=_float_list, default=[-1.0, 0.0, 1.0])
    sp.add_argument("--m-max", type=int, default=6)
    sp.add_argument("--ks-tol", type=float, default=0.02)
    sp.add_argument("--asclt-tol", type=float, default=0.25)
    sp.set_defaults(format="json")
    return p


def metadata(args) -> dict:
    meta = {"tool": "randclt", "version": __version__, "prng": PRNG_ID}
    for key, value in sorted(vars(args).items()):
        if key in ("out", "format"):
            meta[key] = value
        elif isinstance(value, list):
            meta[key] = ",".join(fmt(v) if isinstance(v, float) else str(v) for v in value)
        else:
            meta[key] = value if value is None or isinstance(value, (int, float, str)) else str(value)
    return meta


# -- shared computations ----------------------------------------------------

def _sources(args):
    spec = SourceSpec.parse(args.source)
    seeds = getattr(args, "seeds", None)
    if seeds:
        return [(s, spec.with_seed(s)) for s in sorted(set(seeds))]
    return [(spec.seed if spec.kind == "prng" else "", spec)]


def moment_targets(scheme: BlockScheme, m: int):
    """(expected value, variance of one sample) for X^m under the scheme."""
    if scheme.kind == "fixed":
        mean = moments.scaled_block_moment(scheme.N, m)
        second = moments.scaled_block_moment(scheme.N, 2 * m)
        return mean, max(second - mean * mean, 0.0)
    mean = moments.normal_moment(m)
    return float(mean), float(moments.normal_moment(2 * m) - mean * mean)


def moment_rows(stream, scheme, k, m_max):
    table = moments.MomentTable(m_max)
    sample_run(stream, scheme, k, [table])
    rows = []
    for m in range(1, m_max + 1):
        value = table.empirical_moment(m)
        target, var = moment_targets(scheme, m)
        tol = 4.0 * math.sqrt(var / k)
        rows.append((m, value, target, value - target, tol, abs(value - target) <= tol))
    return rows


def _check_k(k):
    if k is None or k < 1:
        raise ConfigError("--k must be >= 1")


def _check_m_max(m_max):
    if not 1 <= m_max <= 8:
        raise ConfigError("--m-max must be in 1..8")


# -- commands ---------------------------------------------------------------

def cmd_moments(args):
    _check_k(args.k)
    _check_m_max(args.m_max)
    scheme = BlockScheme.parse(args.scheme)
    out = Output(metadata(args))
    rows = []
    for seed, spec in _sources(args):
        for row in moment_rows(open_stream(spec), scheme, args.k, args.m_max):
            rows.append((seed,) + row)
    out.table("moments", ["seed", "m", "empirical", "target", "diff", "tol", "ok"], rows)
    return out, all(r[-1] for r in rows)


def cmd_cdf(args):
    _check_k(args.k)
    scheme = BlockScheme.parse(args.scheme)
    grid = args.x if args.x is not None else DEFAULT_GRID
    out = Output(metadata(args))
    ks_rows, point_rows = [], []
    for seed, spec in _sources(args):
        ecdf = cdf.EmpiricalCDF()
        sample_run(open_stream(spec), scheme, args.k, [ecdf])
        d = cdf.ks_distance(ecdf)
        ks_rows.append((seed, d, d <= args.ks_tol))
        point_rows.extend((seed,) + row for row in cdf.pointwise_error(ecdf, sorted(grid)))
    out.table("ks", ["seed", "ks", "ok"], ks_rows)
    out.table("pointwise", ["seed", "t", "ecdf", "phi", "diff"], point_rows)
    return out, all(r[-1] for r in ks_rows)


def cmd_asclt(args):
    out = Output(metadata(args))
    weights = asclt.WeightSeq(args.weights)
    if args.ns:
        try:
            f = asclt.parse_test_function(args.f)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        spec = SourceSpec.parse(args.source)
        seeds = sorted(set(args.seeds or []))
        try:
            rows = asclt.variance_study(seeds, args.ns, f,
                                        lambda s: open_stream(spec.with_seed(s)), weights)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        out.table("study", ["n", "mean_tn2", "bound", "flag"],
                  [(r.n, r.mean_tn2, r.bound, r.flag) for r in rows])
        return out, not any(r.flag for r in rows)
    if args.n is None or args.n < 2:
        raise ConfigError("--n must be >= 2")
    rows = []
    for seed, spec in _sources(args):
        xs = sorted(args.x)
        est = asclt.asclt_estimate(open_stream(spec), args.n, xs, weights)
        for x, e in zip(xs, est):
            p = cdf.phi(x)
            rows.append((seed, x, e, p, e - p, abs(e - p) <= args.tol))
    out.table("asclt", ["seed", "x", "estimate", "phi", "diff", "ok"], rows)
    return out, all(r[-1] for r in rows)


def cmd_oracle(args):
    if not 1 <= args.n <= moments.MAX_BRUTE_N:
        raise ConfigError(f"--n must be in 1..{moments.MAX_BRUTE_N}")
    if not 0 <= args.m_max <= moments.MAX_ORDER:
        raise ConfigError(f"--m-max must be in 0..{moments.MAX_ORDER}")
    out = Output(metadata(args))
    rows = []
    mismatch = None
    for n in range(1, args.n + 1):
        for m in range(args.m_max + 1):
            exact = moments.exact_rademacher_moment(n, m)
            brute = moments.brute_force_moment(n, m)
            rows.append((n, m, exact, brute, exact == brute))
            if exact != brute and mismatch is None:
                mismatch = OracleMismatch(n, m, exact, brute)
    out.table("oracle", ["n", "m", "exact", "brute", "equal"], rows)
    if mismatch is not None:
        raise _Mismatch(out, mismatch)
    return out, True


class _Mismatch(Exception):
    def __init__(self, output, error):
        self.output, self.error = output, error


def cmd_bounds(args):
    if args.level < 1 or args.lmax < 1:
        raise ConfigError("--level and --lmax must be >= 1")
    try:
        spec = slln_bounds.VarianceSpec.constant(args.sigma2)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    plan = slln_bounds.build_test_plan(spec, args.level, args.lmax)
    out = Output(metadata(args))
    out.note("truncation", plan.truncation)
    out.note("total_measure_bound", plan.total_measure_bound)
    out.table("plan", ["l", "eps", "M", "bound", "threshold"],
              [(r.l, r.eps, r.M, r.bound, r.threshold) for r in plan.rows])
    return out, all(r.bound < r.threshold for r in plan.rows)


def cmd_report(args):
    _check_k(args.k)
    _check_m_max(args.m_max)
    if args.n < 2:
        raise ConfigError("--n must be >= 2")
    spec = SourceSpec.parse(args.source)
    scheme = BlockScheme.parse(args.scheme)
    out = Output(metadata(args))
    failed = []

    table = moments.MomentTable(args.m_max)
    ecdf = cdf.EmpiricalCDF()
    sample_run(open_stream(spec), scheme, args.k, [table, ecdf])
    rows = []
    for m in range(1, args.m_max + 1):
        value = table.empirical_moment(m)
        target, var = moment_targets(scheme, m)
        tol = 4.0 * math.sqrt(var / args.k)
        ok = abs(value - target) <= tol
        rows.append((m, value, target, value - target, tol, ok))
        if not ok:
            failed.append(f"moment_{m}")
    out.table("moments", ["m", "empirical", "target", "diff", "tol", "ok"], rows)

    d = cdf.ks_distance(ecdf)
    out.value("ks", {"ks": d, "tol": args.ks_tol, "ok": d <= args.ks_tol})
    if d > args.ks_tol:
        failed.append("ks")

    xs = sorted(args.x)
    est = asclt.asclt_estimate(open_stream(spec), args.n, xs)
    arows = []
    for x, e in zip(xs, est):
        p = cdf.phi(x)
        ok = abs(e - p) <= args.asclt_tol
        arows.append((x, e, p, e - p, ok))
        if not ok:
            failed.append(f"asclt_{fmt(x)}")
    out.table("asclt", ["x", "estimate", "phi", "diff", "ok"], arows)
    out.value("verdict", {"pass": not failed, "failed": ",".join(failed)})
    return out, not failed


COMMANDS = {
    "moments": cmd_moments,
    "cdf": cmd_cdf,
    "asclt": cmd_asclt,
    "oracle": cmd_oracle,
    "bounds": cmd_bounds,
    "report": cmd_report,
}


def _emit(out, args):
    text = out.render(args.format)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out, ok = COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"randclt: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SourceExhausted as exc:
        print(f"randclt: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except _Mismatch as exc:
        _emit(exc.output, args)
        print(f"randclt: {exc.error}", file=sys.stderr)
        return EXIT_ORACLE
    _emit(out, args)
    return EXIT_OK if ok else EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
