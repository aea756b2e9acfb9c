"""Command-line surface: reproducible experiments with JSON/CSV artifacts.

Exit codes: 0 success, 1 certificate or invariant failure (a witness file is
written next to the other artifacts), 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction

from . import approximation as approx_mod
from . import bridging, dimension, inducing, lab, maps
from .cylinders import cylinder_csv_rows, enumerate_words, make_word
from .errors import CertificateError, DomainError, InfeasibleError, IntermitError

__all__ = ["main", "run_command"]


def _fmt(x) -> float:
    return float(f"{float(x):.17g}")


def _dump(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _parse_map(text: str) -> maps.MapSpec:
    if text == "example":
        return maps.build_example_map()
    if text.startswith("thaler:"):
        d, kappa = text.split(":", 1)[1].split(",")
        return maps.build_thaler_family(int(d), float(kappa))
    with open(text) as fh:
        return maps.MapSpec.from_json(fh.read())


def _parse_probs(text: str):
    return tuple(Fraction(t) for t in text.split(","))


def _scheme(args) -> inducing.InducedScheme:
    return inducing.build_scheme(_parse_map(args.map), args.m_max)


def cmd_describe_map(args) -> int:
    spec = _parse_map(args.map)
    rep = maps.validate_assumptions(spec)
    _dump(os.path.join(args.out, "map.json"), spec.to_dict())
    _dump(os.path.join(args.out, "assumptions.json"), {
        "ok": rep.ok,
        "min_deriv_outside": _fmt(rep.min_deriv_outside),
        "adler_sup": [_fmt(x) for x in rep.adler_sup],
        "endpoint_residuals": [_fmt(x) for x in rep.endpoint_residuals],
        "expansion_ok": rep.expansion_ok,
        "adler_ok": rep.adler_ok,
        "full_branch_ok": rep.full_branch_ok,
    })
    return 0 if rep.ok else 1


def cmd_induce(args) -> int:
    scheme = _scheme(args)
    stats = inducing.expansion_stats(scheme, depth=2, samples=args.samples, seed=args.seed)
    _dump(os.path.join(args.out, "scheme.json"), {
        "m_max": scheme.m_max,
        "y_components": [
            {"lo": _fmt(c.lo), "hi": _fmt(c.hi), "branch": c.branch, "big_image": c.big_image}
            for c in scheme.comps
        ],
        "x_regions": [{"lo": _fmt(a), "hi": _fmt(b)} for a, b in scheme.x_regions],
        "big_images": [list(g) for g in scheme.big_images],
        "untracked_mass": {str(k): _fmt(v) for k, v in sorted(scheme.residual.items())},
        "lambda_hat": _fmt(stats.lambda_hat),
        "D_hat": _fmt(stats.D_hat),
        "product_const": _fmt(stats.product_const),
        "symbols": scheme.table.n,
    })
    return 0


def cmd_tail(args) -> int:
    scheme = _scheme(args)
    table = inducing.tail_table(scheme)
    with open(os.path.join(args.out, "tail.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "n", "mass"])
        for j, n, v in table.rows():
            w.writerow([j, n, f"{v:.17g}"])
    with open(os.path.join(args.out, "tail_fit.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "alpha_hat", "gamma_hat"])
        for j, a, g in table.fit_rows():
            w.writerow([j, f"{a:.17g}", f"{g:.17g}"])
    _dump(os.path.join(args.out, "tail.json"), {
        "alpha_hat": {str(j): _fmt(a) for j, a in table.alpha_hat.items()},
        "gamma_hat": {str(j): _fmt(g) for j, g in table.gamma_hat.items()},
        "untracked": {str(j): _fmt(u) for j, u in table.untracked.items()},
        "m_max": table.m_max,
    })
    return 0


def cmd_cylinders(args) -> int:
    scheme = _scheme(args)
    if args.target:
        pool, rep = approx_mod.candidate_pool(
            scheme, args.depth, Fraction(args.eps), _parse_probs(args.target),
            budget=args.cap,
        )
        cyls = pool
    else:
        cyls = []
        for c in enumerate_words(scheme, args.depth, cap=args.cap):
            cyls.append(c)
            if len(cyls) >= args.cap:
                break
    with open(os.path.join(args.out, "cylinders.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["word", "lo", "hi", "tau_n", "tau_vec", "base", "image"])
        w.writeheader()
        for row in cylinder_csv_rows(cyls):
            row["lo"] = f"{row['lo']:.17g}"
            row["hi"] = f"{row['hi']:.17g}"
            w.writerow(row)
    return 0


def cmd_vdim(args) -> int:
    lengths = [float(x) for x in args.lengths.split(",")]
    s = dimension.vdim(lengths)
    doc = {"s": _fmt(s), "family_size": len(lengths)}
    print(json.dumps(doc, sort_keys=True))
    if args.out:
        _dump(os.path.join(args.out, "vdim.json"), doc)
    return 0


def cmd_approx(args) -> int:
    scheme = _scheme(args)
    conn = approx_mod.find_connectors(scheme)
    stats = inducing.expansion_stats(scheme, depth=2, samples=args.samples, seed=args.seed)
    eps = Fraction(args.eps)
    p_bar = _parse_probs(args.target)
    try:
        if args.mode == "window":
            fam = approx_mod.window_family(scheme, args.n, eps, p_bar, conn,
                                           budget=args.budget, tau_cap=args.tau_cap)
        else:
            pool, rep = approx_mod.candidate_pool(
                scheme, args.n - 2 * conn.k0, eps, p_bar, budget=args.budget,
                min_tau=args.min_tau,
            )
            fam = approx_mod.assemble_family(scheme, pool, conn, eps, p_bar,
                                             pool_report=rep)
        approx_mod.horizon_constants(fam, lam_hat=stats.lambda_hat, seed=args.seed)
        checks = approx_mod.verify_family(fam, ell_list=[fam.N0 + fam.n], samples=16,
                                          seed=args.seed)
    except (CertificateError, InfeasibleError) as exc:
        _dump(os.path.join(args.out, "witness.json"), {
            "error": str(exc), "witness": getattr(exc, "witness", None)})
        return 1
    with open(os.path.join(args.out, "family.json"), "w") as fh:
        fh.write(approx_mod.family_manifest(fam))
        fh.write("\n")
    with open(os.path.join(args.out, "family_cylinders.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["word", "lo", "hi", "tau_n", "tau_vec", "base", "image"])
        w.writeheader()
        for row in cylinder_csv_rows(fam.cylinders):
            row["lo"] = f"{row['lo']:.17g}"
            row["hi"] = f"{row['hi']:.17g}"
            w.writerow(row)
    bad = [c.name for c in checks if not c.ok]
    if bad:
        _dump(os.path.join(args.out, "witness.json"), {"failed_checks": bad})
        return 1
    return 0


def cmd_bridge(args) -> int:
    scheme = _scheme(args)
    if args.segment:
        verts = [_parse_probs(v) for v in args.segment.split(";")]
        target = bridging.TargetSpec.polyline(verts)
    else:
        target = bridging.TargetSpec.point(_parse_probs(args.target))
    try:
        sched = bridging.plan_schedule(scheme, target, args.levels, Fraction(args.eps0),
                                       seed=args.seed)
        point = bridging.generate_point(sched, policy=args.seed_policy,
                                        enclosure_depth=args.enclosure_depth)
        recs = bridging.verify_generic(point, sched)
        prof = bridging.local_dim_profile(point, sched)
        rep = bridging.replay_check(point, sched)
    except (CertificateError, InfeasibleError) as exc:
        os.makedirs(args.out, exist_ok=True)
        _dump(os.path.join(args.out, "witness.json"), {
            "error": str(exc), "witness": getattr(exc, "witness", None)})
        return 1
    with open(os.path.join(args.out, "schedule.json"), "w") as fh:
        fh.write(sched.to_json())
        fh.write("\n")
    with open(os.path.join(args.out, "point.json"), "w") as fh:
        fh.write(point.to_json(sched))
        fh.write("\n")
    cert = {
        "records": [
            {"level": r.level, "name": r.name, "ok": r.ok, "worst": r.worst,
             "witness": r.witness}
            for r in recs
        ],
        "profile": [
            {"level": p.level, "gamma": _fmt(p.gamma) if p.gamma == p.gamma else None,
             "band": [_fmt(x) if x == x else None for x in p.band],
             "band_inflated": [_fmt(x) if x == x else None for x in p.band_inflated],
             "samples": [[int(kb), _fmt(v)] for kb, v in p.samples],
             "ok_band": p.ok_band}
            for p in prof
        ],
        "replay": rep,
        "policy": args.seed_policy,
    }
    _dump(os.path.join(args.out, "certificate.json"), cert)
    failures = [r for r in recs if not r.ok]
    if failures or not rep["ok"]:
        _dump(os.path.join(args.out, "witness.json"), {
            "failed": [{"level": r.level, "name": r.name, "witness": r.witness}
                       for r in failures],
            "replay_ok": rep["ok"],
        })
        return 1
    return 0


@dataclass
class _ShimFamily:
    cylinders: tuple


@dataclass
class _ShimLevel:
    index: int
    eps: Fraction
    p_bar: tuple
    family: _ShimFamily
    n: int
    k: int
    t: int
    N: int
    M_sym: int


@dataclass
class _ShimSchedule:
    target: bridging.TargetSpec
    levels: list
    scheme: inducing.InducedScheme


def load_for_verify(schedule_path: str, point_path: str):
    """Rebuild enough schedule state from artifacts to re-run the exact
    point certificates (scheme from the stored map, words from symbol ids)."""
    with open(schedule_path) as fh:
        sdoc = json.load(fh)
    with open(point_path) as fh:
        pdoc = json.load(fh)
    spec = maps.MapSpec.from_dict(sdoc["map"])
    scheme = inducing.build_scheme(spec, sdoc["m_max"])
    tdoc = sdoc["target"]
    if tdoc["kind"] == "point":
        target = bridging.TargetSpec.point([Fraction(x) for x in tdoc["points"][0]])
    else:
        target = bridging.TargetSpec.polyline(
            [[Fraction(x) for x in p] for p in tdoc["points"]])
    levels = []
    blocks = []
    for lvdoc, pblk in zip(sdoc["levels"], pdoc["levels"]):
        words = {}
        local = []

        def add(wd):
            key = tuple(wd)
            if key not in words:
                words[key] = len(local)
                local.append(make_word(scheme, key))
            return words[key]

        head = tuple(add(w) for w in pblk["head"])
        cycle = tuple(add(w) for w in pblk["cycle"])
        tail = tuple(add(w) for w in pblk["tail"])
        fam = _ShimFamily(cylinders=tuple(local))
        lv = _ShimLevel(
            index=lvdoc["index"],
            eps=Fraction(lvdoc["eps"]),
            p_bar=tuple(Fraction(x) for x in lvdoc["p_bar"]),
            family=fam,
            n=lvdoc["n"],
            k=lvdoc["k"],
            t=lvdoc["t"],
            N=lvdoc["N"],
            M_sym=lvdoc["M_sym"],
        )
        levels.append(lv)
        blocks.append(bridging.LevelBlocks(
            level=lvdoc["index"],
            entry_comp=pblk["entry_comp"],
            head=head,
            cycle=cycle,
            reps=pblk["reps"],
            tail=tail,
        ))
    shim = _ShimSchedule(target=target, levels=levels, scheme=scheme)
    point = bridging.GenericPoint(
        policy=pdoc["policy"], blocks=blocks,
        checkpoints=[(d["t"], int(d["tau"]), tuple(int(v) for v in d["tau_vec"]))
                     for d in pdoc["checkpoints"]],
        enclosures=[(d["depth"], d["lo"], d["hi"]) for d in pdoc["enclosures"]],
        enclosure_depth=pdoc["enclosure_depth"],
    )
    return shim, point


def cmd_verify(args) -> int:
    try:
        shim, point = load_for_verify(args.schedule, args.point)
    except IntermitError as exc:
        if args.out:
            _dump(os.path.join(args.out, "witness.json"), {"error": str(exc)})
        print(f"verification failed to load: {exc}", file=sys.stderr)
        return 1
    recs = bridging.verify_generic(point, shim)
    stored = point.checkpoints
    recomputed = bridging._checkpoints(shim, point.blocks)
    cp_ok = stored == recomputed
    failures = [r for r in recs if not r.ok]
    doc = {
        "records": [{"level": r.level, "name": r.name, "ok": r.ok, "worst": r.worst,
                     "witness": r.witness} for r in recs],
        "checkpoints_consistent": cp_ok,
    }
    if args.out:
        _dump(os.path.join(args.out, "verify.json"), doc)
    if failures or not cp_ok:
        if args.out:
            _dump(os.path.join(args.out, "witness.json"), {
                "failed": [{"level": r.level, "name": r.name, "witness": r.witness}
                           for r in failures],
                "checkpoints_consistent": cp_ok,
            })
        return 1
    return 0


def cmd_simulate(args) -> int:
    scheme = _scheme(args)
    if args.x0 is not None:
        tr = lab.simulate_occupancy(scheme, args.x0, args.n)
        with open(os.path.join(args.out, "trace.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "tau_k"] + [f"tau{j + 1}_k" for j in range(scheme.d)])
            for k, (tau_k, vec) in enumerate(tr.ratio_series, start=1):
                w.writerow([k, tau_k] + list(vec))
        if tr.start_in_y and len(tr.return_marks) >= 2:
            rep = lab.coding_check(scheme, tr)
            _dump(os.path.join(args.out, "coding.json"), {
                "ok": rep.ok, "returns": rep.returns,
                "sandwich_ok": rep.sandwich_ok, "monotone_ok": rep.monotone_ok,
                "y_ratio_ok": rep.y_ratio_ok, "witness": rep.witness,
            })
            return 0 if rep.ok else 1
        return 0
    seeds = list(range(args.seed, args.seed + args.seeds))
    lab.ensemble_run(scheme, seeds, args.n, os.path.join(args.out, "ensemble.csv"),
                     threads=args.threads)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="intermit",
                                 description="numerical laboratory for interval maps "
                                             "with neutral fixed points")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, m_max=200):
        p.add_argument("--map", default="example",
                       help="example | thaler:d,kappa | path to a map JSON")
        p.add_argument("--m-max", dest="m_max", type=int, default=m_max)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--samples", type=int, default=200)

    p = sub.add_parser("describe-map", help="map document and assumption checks")
    common(p)
    p.set_defaults(func=cmd_describe_map)

    p = sub.add_parser("induce", help="build the induced scheme and its statistics")
    common(p)
    p.set_defaults(func=cmd_induce)

    p = sub.add_parser("tail", help="return-time tail table and exponent fits")
    common(p, m_max=10_000)
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("cylinders", help="enumerate cylinders (optionally windowed)")
    common(p, m_max=20)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--target", default=None)
    p.add_argument("--eps", default="0.4")
    p.add_argument("--cap", type=int, default=10_000)
    p.set_defaults(func=cmd_cylinders)

    p = sub.add_parser("vdim", help="virtual dimension of a length family")
    p.add_argument("--lengths", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_vdim)

    p = sub.add_parser("approx", help="build and check a ratio-window family")
    common(p, m_max=20)
    p.add_argument("--target", required=True)
    p.add_argument("--eps", default="0.4")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--budget", type=int, default=25_000)
    p.add_argument("--tau-cap", dest="tau_cap", type=int, default=None)
    p.add_argument("--min-tau", dest="min_tau", type=int, default=None)
    p.add_argument("--mode", choices=["window", "sandwich"], default="window")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("bridge", help="plan a schedule and generate a generic point")
    common(p, m_max=120)
    p.add_argument("--target", default=None, help="simplex point p1,p2,...")
    p.add_argument("--segment", default=None, help="polyline 'p;q;...'")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--eps0", default="0.4")
    p.add_argument("--seed-policy", dest="seed_policy", default="lex")
    p.add_argument("--enclosure-depth", dest="enclosure_depth", type=int, default=60)
    p.set_defaults(func=cmd_bridge)

    p = sub.add_parser("verify", help="re-verify a schedule/point artifact pair")
    p.add_argument("--schedule", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="orbit occupancy traces and ensembles")
    common(p)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--n", type=int, default=100_000)
    p.set_defaults(func=cmd_simulate)
    return ap


def run_command(argv) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    if getattr(args, "out", None):
        os.makedirs(args.out, exist_ok=True)
    try:
        return args.func(args)
    except (DomainError, maps.MapConstructionError, FileNotFoundError, ValueError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return 2
    except IntermitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
