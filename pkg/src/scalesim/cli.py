"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 computation aborted, 4 I/O error.
Every command writes ``manifest.json`` into ``--out`` before its outputs.
"""

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, dataio, sidemodels, stats
from .costs import build_template
from .errors import AbortTooSelective, DegenerateSample, NoSolution, ParseError
from .generator import (Model, ModelConfig, generate_population, harmonicity_sample,
                        preset_config)

EXIT_OK, EXIT_USAGE, EXIT_ABORT, EXIT_IO = 0, 2, 3, 4
QUICK_S = 1000


class UsageError(Exception):
    pass


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, out: Path, config, outputs, inputs=()):
    cmd = args.command + (f" {args.which}" if getattr(args, "which", None) else "")
    dataio.write_manifest(out / "manifest.json", cmd, config, getattr(args, "seed", None),
                          __version__, inputs=inputs, outputs=[out / o for o in outputs])


def _workers(args) -> int:
    return max(1, args.threads or os.cpu_count() or 1)


# --- generate ----------------------------------------------------------------

_GEN_FLAGS = {"model": "model", "n": "N", "imin": "I_min", "w": "w", "trans_n": "n", "m": "m",
              "beta": "beta", "s": "S", "seed": "seed", "cost_variant": "cost_variant",
              "hmin": "hmin", "hmax": "hmax", "A": "A", "m_fam": "m_fam",
              "rounding": "trans_rounding", "batch_size": "batch_size"}


def build_config(args) -> ModelConfig:
    """Config from --config JSON (if any), the --preset values, then flags."""
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
    for flag, key in _GEN_FLAGS.items():
        v = getattr(args, flag)
        if v is not None:
            base[key] = v.upper() if key == "model" else v
    if "model" not in base or "N" not in base:
        raise UsageError("--model and --n are required (by flag or --config)")
    model = Model(str(base["model"]).upper())
    if model is Model.RAN and (base.get("beta") or base.get("I_min")):
        raise UsageError("the RAN model takes neither --beta nor --imin")
    if model is Model.MIN and base.get("beta"):
        raise UsageError("the MIN model takes no --beta")
    if args.quick:
        base["S"] = QUICK_S
    base["workers"] = _workers(args)
    if args.preset:
        preset = preset_config(model, int(base["N"])).to_dict()
        preset.update({k: v for k, v in base.items() if k != "model"})
        base = preset
    base["model"] = model.value
    try:
        return ModelConfig.from_dict(base)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_generate(args) -> int:
    cfg = build_config(args)
    out = _out_dir(args)
    pop_name = f"population_{cfg.model.value}_N{cfg.N}.csv"
    _manifest(args, out, cfg.to_dict(), [pop_name, "config.json", "report.json"],
              [args.config] if args.config else ())
    rep = generate_population(cfg)
    dataio.write_population(rep.population, out / pop_name)
    dataio.write_json(cfg.to_dict(), out / "config.json")
    dataio.write_json(rep.summary(), out / "report.json")
    print(json.dumps(rep.summary()))
    return EXIT_OK


# --- compare -----------------------------------------------------------------

def _load_db(args):
    path = dataio.database_path(args.database)
    if path is None:
        raise FileNotFoundError(f"database not found: {args.database or dataio.DEFAULT_DATABASE}")
    db = dataio.load_database(path)
    for line, msg in db.errors:
        print(f"warning: {path}:{line}: {msg}", file=sys.stderr)
    return path, db


def cmd_compare(args) -> int:
    out = _out_dir(args)
    db_path, db = _load_db(args)
    pops = [dataio.read_population(p) for p in args.population]
    outputs = ["compare.csv", "compare_summary.json"]
    if args.bins:
        outputs += [f"notes_N{p.N}.csv" for p in pops]
    _manifest(args, out, vars_clean(args), outputs, [db_path] + list(args.population))
    rows = []
    for pop in pops:
        try:
            rows.append(analysis.compare_population(pop, db.records, args.resamples, args.seed))
        except DegenerateSample as exc:
            print(f"warning: N={pop.N} skipped: {exc}", file=sys.stderr)
            continue
        if args.bins:
            lo, hi = args.trunc
            edges = stats.note_edges(args.bins, lo, hi)
            model = stats.histogram(pop.notes(), edges)
            group = [r.notes for r in db.records if r.N == pop.N]
            data = stats.histogram(np.concatenate(group), edges)
            analysis.write_rows(out / f"notes_N{pop.N}.csv", ["bin_center", "model", "database"],
                                zip(model.grid, model.mass, data.mass))
    if not rows:
        print("error: no population shares an N with the database", file=sys.stderr)
        return EXIT_ABORT
    keys = list(rows[0])
    analysis.write_rows(out / "compare.csv", keys, ([r[k] for k in keys] for r in rows))
    w = [r["S"] for r in rows]
    summary = {k: stats.weighted_mean([r[k] for r in rows], w) for k in ("jsd", "cvm", "f_D")}
    dataio.write_json(summary, out / "compare_summary.json")
    print(json.dumps(summary))
    return EXIT_OK


def vars_clean(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
            if k != "func"}


# --- classify ----------------------------------------------------------------

def cmd_classify(args) -> int:
    out = _out_dir(args)
    db_path, db = _load_db(args)
    pops = {}
    for spec in args.pop:
        name, _, path = spec.partition("=")
        if not path:
            raise UsageError(f"--pop expects MODEL=PATH, got {spec!r}")
        pops.setdefault(name.upper(), []).append(dataio.read_population(path))
    _manifest(args, out, vars_clean(args), ["found_report.csv", "categories.json"],
              [db_path] + [s.partition("=")[2] for s in args.pop])
    recs = db.records
    found_by = [set() for _ in recs]
    for name, plist in pops.items():
        for pop in plist:
            for i, hit in enumerate(analysis.found_flags(recs, pop)):
                if hit:
                    found_by[i].add(name)
    pmin = np.zeros(len(recs))
    pany = np.zeros(len(recs))
    for i, r in enumerate(recs):
        if r.N < 4 or r.N > 9:
            continue
        dens = analysis.interval_density_min(r.N, 80.0, args.draws, args.seed)
        pmin[i] = analysis.p_min_exact(r.notes, dens)
        cfgs = [preset_config(m, r.N) for m in ("HAR", "FIF", "TRANS")]
        pany[i] = analysis.p_any(r.intervals, pmin[i], cfgs)
    rep = analysis.classify_not_found(recs, found_by, pmin, pany)
    rep.to_csv(out / "found_report.csv", sorted(pops))
    summary = {"counts": rep.counts(), "thresholds": rep.thresholds}
    dataio.write_json(summary, out / "categories.json")
    print(json.dumps(summary))
    return EXIT_OK


# --- cluster / mixing / tritone ----------------------------------------------

def cmd_cluster(args) -> int:
    out = _out_dir(args)
    db_path, db = _load_db(args)
    _manifest(args, out, vars_clean(args), ["clusters.csv", "cluster_composition.csv"], [db_path])
    try:
        res = analysis.cluster_scales(db.records, args.k)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    res.to_csv(out / "clusters.csv")
    by_id = {r.id: r for r in db.records}
    comp = {}
    for sid, lab in res.labels.items():
        key = (lab, by_id[sid].region)
        comp[key] = comp.get(key, 0) + 1
    analysis.write_rows(out / "cluster_composition.csv", ["cluster", "region", "count"],
                        ((c, reg, n) for (c, reg), n in sorted(comp.items())))
    print(json.dumps({"clusters": len(set(res.labels.values())), "scales": len(res.ids)}))
    return EXIT_OK


def cmd_mixing(args) -> int:
    out = _out_dir(args)
    pops = [dataio.read_population(p) for p in args.population]
    outputs = ["adjacency.csv"] + [f"mixed_N{p.N}.csv" for p in pops]
    _manifest(args, out, vars_clean(args), outputs, list(args.population))
    rows = []
    for pop in pops:
        mixed = analysis.mix_population(pop, args.seed)
        dataio.write_population(mixed, out / f"mixed_N{pop.N}.csv")
        for label, p in (("original", pop), ("mixed", mixed)):
            prof = analysis.adjacency_profile(p.intervals, args.x)
            for c in analysis.ADJACENCY_CLASSES:
                rows.append((pop.N, label, c, prof.observed[c], prof.baseline[c]))
    analysis.write_rows(out / "adjacency.csv", ["N", "population", "pair", "observed", "baseline"],
                        rows)
    return EXIT_OK


def cmd_tritone(args) -> int:
    out = _out_dir(args)
    sources = {}
    inputs = list(args.population or [])
    for p in inputs:
        pop = dataio.read_population(p)
        sources.setdefault("model", {})[pop.N] = pop
    if args.database:
        db_path, db = _load_db(args)
        inputs.append(db_path)
        for r in db.records:
            sources.setdefault("database", {}).setdefault(r.N, []).append(r)
    if not sources:
        raise UsageError("give --population and/or --database")
    _manifest(args, out, vars_clean(args), ["tritone.csv"], inputs)
    ft = {src: analysis.tritone_fraction(groups) for src, groups in sources.items()}
    analysis.write_rows(out / "tritone.csv", ["source", "N", "f_t"],
                        ((src, n, v) for src, d in ft.items() for n, v in sorted(d.items())))
    print(json.dumps(ft))
    return EXIT_OK


# --- side models -------------------------------------------------------------

def cmd_sidemodel(args) -> int:
    out = _out_dir(args)
    which = args.which
    if which == "prominence":
        try:
            q = sidemodels.ProminenceQuery(args.n1, args.n2, args.a)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        _manifest(args, out, vars_clean(args), ["prominence.csv"])
        rows = [(f"{r.numerator}/{r.denominator}", c) for r, c in sidemodels.prominence_counts(q)]
        analysis.write_rows(out / "prominence.csv", ["ratio", "count"], rows)
        for r, c in rows[: args.top]:
            print(f"{r}\t{sidemodels.round_sig(c, 2):g}")
        return EXIT_OK
    if which == "vmt":
        sp = args.sigma_prod or [10.0]
        se = args.sigma_per or [10.0]
        _manifest(args, out, vars_clean(args), ["vmt.csv"])
        rows = []
        for a in sp:
            for b in se:
                rows.append((a, b, sidemodels.min_interval_size(a, b, args.target)))
        analysis.write_rows(out / "vmt.csv", ["sigma_prod", "sigma_per", "I_min"], rows)
        for a, b, v in rows:
            print(f"sigma_prod={a:g} sigma_per={b:g} I_min={v:.2f}")
        return EXIT_OK
    # acceptance
    _manifest(args, out, vars_clean(args), ["acceptance.csv"])
    h = harmonicity_sample(args.N, args.imin, args.w, 1.0, QUICK_S * 10 if args.quick else args.s,
                           args.seed, _workers(args))
    dist = sidemodels.harmonicity_distribution(h, args.bin)
    lo, hi = sidemodels.support_bounds(dist)
    ref = hi if args.form in ("C1", "C3") else -lo
    a_values = args.A or list(ref + np.array([-2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0]))
    rows = []
    for m in args.m:
        rows += sidemodels.sweep_A(dist, args.form, a_values, m, args.target_jsd)
    analysis.write_rows(out / "acceptance.csv",
                        ["form", "A", "m", "beta", "acceptance", "selectivity", "admissible"],
                        (tuple(p) + (sidemodels.admissible_A(dist, p.form, p.A),) for p in rows))
    print(json.dumps({"H_min": lo, "H_max": hi, "points": len(rows)}))
    return EXIT_OK


# --- sweep -------------------------------------------------------------------

SWEEP_IMIN = (70.0, 80.0, 90.0)
SWEEP_W = (5.0, 10.0, 15.0, 20.0)
SWEEP_TRANS_N = (1, 2, 3)
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _evaluate(cfg, records):
    rep = generate_population(cfg)
    group = [r for r in records if r.N == cfg.N]
    pop = rep.population
    f_d = float(analysis.found_flags(group, pop).mean())
    j = stats.jsd(analysis.interval_distribution(pop.intervals),
                  analysis.interval_distribution(analysis.interval_matrix(group)))
    return {"beta": cfg.beta, "q": rep.q, "jsd": j, "f_D": f_d}


def optimise_beta(cfg: ModelConfig, records, betas, refine: int = 6):
    """Best beta for one parameter set.

    Maximises f_D among betas whose JSD is within 10% of the lowest JSD
    seen, first on the grid ``betas`` and then by golden-section search in
    log(beta) between the neighbours of the grid optimum.
    """
    seen = []

    def ev(b):
        try:
            r = _evaluate(cfg.with_(beta=float(b)), records)
        except AbortTooSelective:
            r = {"beta": float(b), "q": 0.0, "jsd": math.inf, "f_D": -1.0}
        seen.append(r)
        return r

    def score(r):
        floor = min(s["jsd"] for s in seen)
        return r["f_D"] if r["jsd"] <= 1.1 * floor else -1.0

    grid = [ev(b) for b in betas]
    k = max(range(len(grid)), key=lambda i: score(grid[i]))
    a = math.log(betas[max(k - 1, 0)])
    b = math.log(betas[min(k + 1, len(betas) - 1)])
    c, d = b - INV_PHI * (b - a), a + INV_PHI * (b - a)
    rc, rd = ev(math.exp(c)), ev(math.exp(d))
    for _ in range(refine):
        if score(rc) >= score(rd):
            b, d, rd = d, c, rc
            c = b - INV_PHI * (b - a)
            rc = ev(math.exp(c))
        else:
            a, c, rc = c, d, rd
            d = a + INV_PHI * (b - a)
            rd = ev(math.exp(d))
    return max(seen, key=score)


def cmd_sweep(args) -> int:
    out = _out_dir(args)
    db_path, db = _load_db(args)
    _manifest(args, out, vars_clean(args), ["sweep.csv"], [db_path])
    s = QUICK_S if args.quick else args.s
    betas = list(np.exp(np.linspace(math.log(args.beta_range[0]), math.log(args.beta_range[1]),
                                    args.beta_points)))
    rows = []
    for model in args.models:
        model = Model(model.upper())
        for n in args.n:
            for imin in SWEEP_IMIN:
                extra = ([{"w": w} for w in SWEEP_W] if model in (Model.HAR, Model.FIF)
                         else [{"n": k} for k in SWEEP_TRANS_N])
                for ex in extra:
                    cfg = preset_config(model, n, I_min=imin, S=s, seed=args.seed,
                                       workers=_workers(args), **ex)
                    best = optimise_beta(cfg, db.records, betas, args.refine)
                    rows.append((model.value, n, imin, ex.get("w", ""), ex.get("n", ""),
                                 best["beta"], best["q"], best["jsd"], best["f_D"]))
                    print(",".join(str(v) for v in rows[-1]))
    analysis.write_rows(out / "sweep.csv",
                        ["model", "N", "I_min", "w", "n", "beta", "q", "jsd", "f_D"], rows)
    return EXIT_OK


def cmd_template(args) -> int:
    out = _out_dir(args)
    _manifest(args, out, vars_clean(args), ["template.csv"])
    try:
        tpl = build_template(args.w)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    tpl.to_csv(out / "template.csv")
    print(f"{len(tpl.windows)} windows")
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def _common(p, seed=True):
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    if seed:
        p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scalesim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a scale population")
    g.add_argument("--config", help="JSON file with ModelConfig fields; flags override it")
    g.add_argument("--model", choices=[m.value.lower() for m in Model] + [m.value for m in Model])
    g.add_argument("--n", type=int)
    g.add_argument("--imin", type=float)
    g.add_argument("--w", type=float)
    g.add_argument("--trans-n", type=int)
    g.add_argument("--m", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--s", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--cost-variant", choices=["fif_alt", "C1", "C2", "C3", "C4"])
    g.add_argument("--hmin", type=float)
    g.add_argument("--hmax", type=float)
    g.add_argument("--A", type=float)
    g.add_argument("--m-fam", type=float)
    g.add_argument("--rounding", choices=["ceil", "nearest"])
    g.add_argument("--batch-size", type=int)
    g.add_argument("--preset", action="store_true", help="start from the tabulated optimal parameters")
    g.add_argument("--quick", action="store_true", help=f"S={QUICK_S}")
    g.add_argument("--out", default="out")
    g.add_argument("--threads", type=int, default=None)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("compare", help="JSD, CvM and f_D of populations against the database")
    c.add_argument("--population", nargs="+", required=True)
    c.add_argument("--database")
    c.add_argument("--resamples", type=int, default=1000)
    c.add_argument("--bins", type=float, default=None, help="also write note histograms")
    c.add_argument("--trunc", type=float, nargs=2, default=list(stats.NOTE_TRUNCATION))
    _common(c)
    c.set_defaults(func=cmd_compare)

    k = sub.add_parser("classify", help="not-found taxonomy of database scales")
    k.add_argument("--database")
    k.add_argument("--pop", action="append", default=[], metavar="MODEL=PATH")
    k.add_argument("--draws", type=int, default=1_000_000, help="MIN draws for the interval density")
    _common(k)
    k.set_defaults(func=cmd_classify)

    cl = sub.add_parser("cluster", help="Ward clustering of database scales")
    cl.add_argument("--database")
    cl.add_argument("--k", type=int, default=16)
    _common(cl)
    cl.set_defaults(func=cmd_cluster)

    mx = sub.add_parser("mixing", help="rearrange populations into well-mixed orderings")
    mx.add_argument("--population", nargs="+", required=True)
    mx.add_argument("--x", type=float, default=0.2)
    _common(mx)
    mx.set_defaults(func=cmd_mixing)

    t = sub.add_parser("tritone", help="tritone fraction per N")
    t.add_argument("--population", nargs="*")
    t.add_argument("--database")
    _common(t)
    t.set_defaults(func=cmd_tritone)

    sm = sub.add_parser("sidemodel", help="vocal mistuning, prominence and acceptance side models")
    smsub = sm.add_subparsers(dest="which", required=True)
    pr = smsub.add_parser("prominence")
    pr.add_argument("--n1", type=int, default=1)
    pr.add_argument("--n2", type=int, default=10)
    pr.add_argument("--a", type=float, default=0.0)
    pr.add_argument("--top", type=int, default=10)
    _common(pr, seed=False)
    vm = smsub.add_parser("vmt")
    vm.add_argument("--sigma-prod", type=float, nargs="+")
    vm.add_argument("--sigma-per", type=float, nargs="+")
    vm.add_argument("--target", type=float, default=0.99)
    _common(vm, seed=False)
    ac = smsub.add_parser("acceptance")
    ac.add_argument("--N", type=int, default=7)
    ac.add_argument("--imin", type=float, default=80.0)
    ac.add_argument("--w", type=float, default=20.0)
    ac.add_argument("--s", type=int, default=100_000)
    ac.add_argument("--bin", type=float, default=0.25)
    ac.add_argument("--form", choices=["C1", "C2", "C3", "C4"], default="C1")
    ac.add_argument("--A", type=float, nargs="+")
    ac.add_argument("--m", type=float, nargs="+", default=[1.0])
    ac.add_argument("--target-jsd", type=float, default=0.5)
    ac.add_argument("--quick", action="store_true")
    _common(ac)
    for p in (pr, vm, ac):
        p.set_defaults(func=cmd_sidemodel)

    sw = sub.add_parser("sweep", help="parameter grid with beta optimisation")
    sw.add_argument("--database")
    sw.add_argument("--models", nargs="+", default=["har", "fif", "trans"])
    sw.add_argument("--n", type=int, nargs="+", default=[4, 5, 6, 7, 8, 9])
    sw.add_argument("--s", type=int, default=10_000)
    sw.add_argument("--beta-range", type=float, nargs=2, default=[1.0, 1e4])
    sw.add_argument("--beta-points", type=int, default=9)
    sw.add_argument("--refine", type=int, default=6)
    sw.add_argument("--quick", action="store_true")
    _common(sw)
    sw.set_defaults(func=cmd_sweep)

    tp = sub.add_parser("template", help="dump the harmonicity template")
    tp.add_argument("--w", type=float, default=20.0)
    _common(tp, seed=False)
    tp.set_defaults(func=cmd_template)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AbortTooSelective, NoSolution) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (OSError, ParseError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
