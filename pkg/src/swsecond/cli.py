"""Command-line interface.

Subcommands: ``analyze``, ``region``, ``bounds``, ``oracle``, ``simulate``
and ``mixed``.  Rates and second-order rates on the command line are read in
``--units`` (bits by default); the library works in nats.  Output goes to
stdout unless ``--output`` is given, and carries the package version, a hash
of the configuration and the seed so that reruns can be compared byte for
byte.

Exit codes: 0 success, 2 input error, 3 budget exceeded, 4 degenerate source.
"""

from __future__ import annotations

import argparse
import math
import sys
from contextlib import contextmanager
from typing import Any, Sequence

import numpy as np

from . import __version__
from .gaussian import phi1_inv
from .bounds import comparison_table, diagonal, koshelev_details, rect_grid, sum_line
from .errors import DegenerateSigma, InputError, SWError, UnsupportedCase
from .io import config_hash, load_source, write_csv, write_json
from .region import (
    CaseKind,
    RegionQuery,
    SecondOrderPoint,
    boundary_anchors,
    boundary_curve,
    classify,
    finite_n_boundary,
    first_order_region,
    membership,
    mixed_membership,
    resolve_anchor,
)
from .simulator import ensemble_error
from .source_model import UNIT_SCALE, JointPmf, MixedSource, compute_stats, make_joint_pmf, make_mixed
from .spectrum import DEFAULT_GAMMA, convergence_report, lemma1_upper, lemma2_lower, mc_Fn

# second component of the built-in two-component mixture: its entropies all
# lie well below those of the binary example, so each corner is interior or
# exterior for the other component
BUILTIN_MIX_LOW = [[0.85, 0.05], [0.05, 0.05]]
BUILTIN_MIX_HIGH = [[0.5, 0.25], [0.15, 0.1]]


def _floats(text: str, count: int | None = None) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise InputError(f"expected {count} numbers, got {text!r}")
    return vals


def parse_grid(text: str) -> list[float]:
    """``start:stop:count`` (inclusive linspace) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InputError(f"grid must look like start:stop:count, got {text!r}")
        try:
            a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise InputError(f"bad grid {text!r}") from None
        if k < 1:
            raise InputError("grid count must be >= 1")
        return [float(x) for x in np.linspace(a, b, k)]
    return _floats(text)


def _config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "output")}


def _meta(args: argparse.Namespace, **extra: Any) -> dict:
    meta = {"tool": "swsecond", "version": __version__, "command": args.command, "config_hash": config_hash(_config(args))}
    meta["units"] = args.units
    if getattr(args, "seed", None) is not None:
        meta["seed"] = args.seed
    meta.update(extra)
    return meta


@contextmanager
def _sink(args: argparse.Namespace):
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            yield fh
    else:
        yield sys.stdout


def _load_pmf(args: argparse.Namespace) -> tuple[JointPmf, str]:
    src, digest = load_source(args.source)
    if isinstance(src, MixedSource):
        if len(src) != 1:
            raise InputError("this command needs a single pmf, not a mixture")
        src = src.pmfs[0]
    return src, digest


def _stats(pmf: JointPmf, units: str):
    return compute_stats(pmf).in_units(units)


def _to_nats(units: str) -> float:
    return 1.0 / UNIT_SCALE[units]


# ------------------------------------------------------------------ commands


def cmd_analyze(args: argparse.Namespace) -> int:
    pmf, digest = _load_pmf(args)
    st = _stats(pmf, args.units)
    poly = first_order_region(st)
    report = st.to_dict()
    report["sigma_13"] = st.sigma[np.ix_([0, 2], [0, 2])].tolist()
    report["degenerate"] = not st.positive_definite
    report["polygon"] = {
        "R1_min": poly.r1_min,
        "R2_min": poly.r2_min,
        "sum_min": poly.sum_min,
        "corner1": list(poly.corner1),
        "corner2": list(poly.corner2),
    }
    meta = _meta(args, source_sha256=digest)
    with _sink(args) as out:
        if args.format == "json":
            write_json(out, {"meta": meta, "stats": report})
        else:
            rows = [(k, v) for k, v in report.items() if isinstance(v, (int, float))]
            for i in range(3):
                for j in range(3):
                    rows.append((f"sigma{i + 1}{j + 1}", float(st.sigma[i, j])))
            rows += [("corner1_R1", poly.corner1[0]), ("corner1_R2", poly.corner1[1])]
            rows += [("corner2_R1", poly.corner2[0]), ("corner2_R2", poly.corner2[1])]
            write_csv(out, meta, ["quantity", "value"], rows)
    return 0


def _corner_grid(st, case, eps: float, count: int = 41) -> list[float]:
    """Abscissae from just past the asymptote out to four deviations."""
    k = 1 if (case.double or case.which == 1) else 2
    s = st.std(k)
    t = phi1_inv(1.0 - eps, s * s)
    return [float(x) for x in np.linspace(t + 0.05 * s, t + 4.0 * s, count)]


def cmd_region(args: argparse.Namespace) -> int:
    pmf, digest = _load_pmf(args)
    st = _stats(pmf, args.units)
    anchor = resolve_anchor(st, args.anchor)
    q = RegionQuery(anchor[0], anchor[1], args.epsilon)
    case = classify(st, q)
    meta = _meta(args, source_sha256=digest, anchor=f"{anchor[0]!r},{anchor[1]!r}", case=case.label, epsilon=args.epsilon)

    if args.point is not None:
        L1, L2 = _floats(args.point, 2)
        verdict = membership(st, q, SecondOrderPoint(L1, L2))
        with _sink(args) as out:
            write_json(out, {"meta": meta, "verdict": verdict.kind.value, "probability": verdict.probability})
        return 0

    if case.kind in (CaseKind.INTERIOR, CaseKind.EXTERIOR):
        notice = "all-of-plane" if case.kind is CaseKind.INTERIOR else "empty"
        print(f"notice: the second-order region at this anchor is {notice}", file=sys.stderr)
        meta["region"] = notice
        with _sink(args) as out:
            write_csv(out, meta, ["L1", "L2"], [])
        return 0

    if args.n is not None:
        anchors = boundary_anchors(st) if args.anchor_sweep else [anchor]
        pts = finite_n_boundary(st, args.epsilon, args.n, anchors)
        meta["n"] = args.n
        meta["note"] = "gaussian approximation of the finite-n region"
        with _sink(args) as out:
            write_csv(out, meta, ["a1", "a2", "R1", "R2"], [(a[0], a[1], p[0], p[1]) for a, p in zip(anchors, pts)])
        return 0

    if args.grid is not None:
        grid = parse_grid(args.grid)
    elif case.kind is CaseKind.CORNER:
        grid = _corner_grid(st, case, args.epsilon)
    else:
        s = math.sqrt(max(st.sigma[2, 2], st.sigma[0, 0], st.sigma[1, 1]))
        grid = [float(x) for x in np.linspace(-3 * s, 3 * s, 41)]
    rows = boundary_curve(st, q, grid)
    with _sink(args) as out:
        write_csv(out, meta, ["L1", "L2"], rows)
    return 0


def cmd_bounds(args: argparse.Namespace) -> int:
    pmf, digest = _load_pmf(args)
    st = _stats(pmf, args.units)
    anchor = resolve_anchor(st, args.anchor)
    case = classify(st, RegionQuery(anchor[0], anchor[1], 0.0))
    if case.kind in (CaseKind.INTERIOR, CaseKind.EXTERIOR):
        raise UnsupportedCase(f"anchor is {case.kind.value}; bounds need a boundary anchor")
    if args.diagonal is not None:
        points, layout = diagonal(parse_grid(args.diagonal)), "diagonal"
    elif args.sum is not None:
        points, layout = sum_line(parse_grid(args.sum)), "sum"
    else:
        points, layout = rect_grid(parse_grid(args.grid_l1), parse_grid(args.grid_l2)), "grid"
    rows = comparison_table(st, case, points)
    meta = _meta(args, source_sha256=digest, anchor=f"{anchor[0]!r},{anchor[1]!r}", case=case.label, layout=layout)
    columns = ["L1", "L2", "err_second_order", "err_koshelev"]
    out_rows: list[list[Any]] = [[r.L1, r.L2, r.err_second_order, r.err_koshelev] for r in rows]
    if args.n is not None:
        f = _to_nats(args.units)
        rn = math.sqrt(args.n)
        clamped = 0
        for row in out_rows:
            det = koshelev_details(pmf, (anchor[0] + row[0] / rn) * f, (anchor[1] + row[1] / rn) * f, args.n)
            clamped += det.clamped
            row.append(det.value)
        columns.append("err_koshelev_n")
        meta["n"] = args.n
        meta["koshelev_n_clamped_rows"] = clamped
    with _sink(args) as out:
        write_csv(out, meta, columns, out_rows)
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    pmf, digest = _load_pmf(args)
    st = _stats(pmf, args.units)
    anchor = resolve_anchor(st, args.anchor)
    f = _to_nats(args.units)
    L1, L2 = _floats(args.point, 2)
    q = RegionQuery(anchor[0] * f, anchor[1] * f, 0.0)
    pt = SecondOrderPoint(L1 * f, L2 * f)
    n_list = [int(v) for v in parse_grid(args.n_list)]
    rows = convergence_report(pmf, q, pt, n_list)
    meta = _meta(args, source_sha256=digest, anchor=f"{anchor[0]!r},{anchor[1]!r}", case=classify(st, RegionQuery(*anchor, 0.0)).label)
    columns = ["n", "exact_Fn", "gaussian", "gap"]
    out_rows = [[r.n, r.exact, r.gaussian, r.gap] for r in rows]
    if args.mc_samples:
        columns += ["mc_Fn", "mc_se"]
        for row in out_rows:
            est, se = mc_Fn(pmf, row[0], q, pt, args.mc_samples, args.seed)
            row += [est, se]
    with _sink(args) as out:
        write_csv(out, meta, columns, out_rows)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    pmf, digest = _load_pmf(args)
    rep = ensemble_error(pmf, args.n, args.M1, args.M2, args.trials, args.redraw, args.seed)
    payload = {"meta": _meta(args, source_sha256=digest), "report": rep.to_dict()}
    if args.bounds:
        up = lemma1_upper(pmf, args.n, args.M1, args.M2, args.gamma)
        lo = lemma2_lower(pmf, args.n, args.M1, args.M2, args.gamma)
        payload["upper_bound"] = {"value": up.value, "unclamped": up.unclamped, "clamped": up.clamped, "z": up.z}
        payload["lower_bound"] = {"value": lo.value, "unclamped": lo.unclamped, "clamped": lo.clamped, "z": lo.z}
        payload["gamma"] = args.gamma
    with _sink(args) as out:
        write_json(out, payload)
    return 0


def _mixture_anchor(mix: MixedSource, spec: str, units: str) -> tuple[float, float]:
    """``k:<anchor>`` resolves against component ``k`` (1-based); otherwise ``a1,a2``."""
    head, sep, rest = spec.partition(":")
    if sep and head.isdigit():
        k = int(head)
        if not 1 <= k <= len(mix):
            raise InputError(f"component {k} does not exist")
        return resolve_anchor(compute_stats(mix.pmfs[k - 1]).in_units(units), rest)
    return resolve_anchor(compute_stats(mix.pmfs[0]).in_units(units), spec)


def cmd_mixed(args: argparse.Namespace) -> int:
    if args.builtin_mix is not None:
        w1 = args.builtin_mix
        if not 0.0 < w1 < 1.0:
            raise InputError("--builtin-mix weight must lie in (0, 1)")
        mix = make_mixed([(w1, make_joint_pmf(BUILTIN_MIX_HIGH)), (1.0 - w1, make_joint_pmf(BUILTIN_MIX_LOW))])
        digest = "builtin-mix"
    elif args.source:
        src, digest = load_source(args.source)
        mix = src if isinstance(src, MixedSource) else make_mixed([(1.0, src)])
    else:
        raise InputError("give a mixture file or --builtin-mix W1")
    anchor = _mixture_anchor(mix, args.anchor, args.units)
    q = RegionQuery(anchor[0], anchor[1], args.epsilon)
    meta = _meta(args, source_sha256=digest, anchor=f"{anchor[0]!r},{anchor[1]!r}", epsilon=args.epsilon)
    if args.grid_l1 is not None:
        pts = rect_grid(parse_grid(args.grid_l1), parse_grid(args.grid_l2 or args.grid_l1))
        rows = []
        for L1, L2 in pts:
            v = mixed_membership(mix, q, SecondOrderPoint(L1, L2), units=args.units)
            rows.append((L1, L2, v.kind.value, v.probability))
        with _sink(args) as out:
            write_csv(out, meta, ["L1", "L2", "verdict", "probability"], rows)
        return 0
    L1, L2 = _floats(args.point or "0,0", 2)
    v = mixed_membership(mix, q, SecondOrderPoint(L1, L2), units=args.units)
    with _sink(args) as out:
        write_json(out, {"meta": meta, "verdict": v.kind.value, "probability": v.probability})
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swsecond", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--units", choices=["bits", "nats"], default="bits")
    common.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    common.add_argument("--threads", type=int, default=1, help="accepted for compatibility; runs single-threaded")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="entropies, dispersion matrix and polygon")
    p.add_argument("source")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_analyze)

    anchor_help = "corner1 | corner2 | caseII:<lam> | caseIII-a[:<off>] | caseIII-b[:<off>] | a1,a2"
    p = sub.add_parser("region", parents=[common], help="second-order boundary or membership")
    p.add_argument("source")
    p.add_argument("--anchor", default="corner1", help=anchor_help)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--grid", default=None, help="abscissae start:stop:count or a,b,c")
    p.add_argument("--point", default=None, help="L1,L2: report membership instead of a curve")
    p.add_argument("--n", type=int, default=None, help="emit the finite-n boundary in rate coordinates")
    p.add_argument("--anchor-sweep", action="store_true", help="with --n, sample anchors along the polygon")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("bounds", parents=[common], help="second-order error vs Koshelev bound")
    p.add_argument("source")
    p.add_argument("--anchor", default="corner1", help=anchor_help)
    p.add_argument("--grid-l1", default="0:3:31")
    p.add_argument("--grid-l2", default="-1:3:41")
    p.add_argument("--diagonal", default=None, help="L1 = L2 sweep start:stop:count")
    p.add_argument("--sum", default=None, help="L1 + L2 sweep start:stop:count")
    p.add_argument("--n", type=int, default=None, help="also evaluate the finite-n bound")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("oracle", parents=[common], help="exact finite-n probabilities vs the Gaussian limit")
    p.add_argument("source")
    p.add_argument("--anchor", default="corner1", help=anchor_help)
    p.add_argument("--point", default="1,1", help="L1,L2")
    p.add_argument("--n-list", default="100,400,1600")
    p.add_argument("--mc-samples", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("simulate", parents=[common], help="random binning with ML decoding")
    p.add_argument("source")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--M1", type=int, required=True)
    p.add_argument("--M2", type=int, required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--redraw", choices=["per-trial", "fixed"], default="per-trial")
    p.add_argument("--bounds", action="store_true", help="also report the achievability/converse bounds")
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mixed", parents=[common], help="second-order membership for a finite mixture")
    p.add_argument("source", nargs="?")
    p.add_argument("--builtin-mix", type=float, default=None, metavar="W1", help="built-in two-component mixture")
    p.add_argument("--anchor", default="1:corner1", help="k:<anchor of component k> or a1,a2")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--point", default=None)
    p.add_argument("--grid-l1", default=None)
    p.add_argument("--grid-l2", default=None)
    p.set_defaults(func=cmd_mixed)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SWError as exc:
        kind = "degenerate source" if isinstance(exc, DegenerateSigma) else type(exc).__name__
        print(f"error ({kind}): {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
