"""Experiment runner: reproducible, config-driven runs with CSV/JSON output.

Every subcommand writes a ``manifest.json`` (full config echo, package
version, backend, wall time, capped fractions) next to its result tables;
re-running with ``--config manifest.json`` reproduces the tables byte for
byte.  ``krick all`` additionally evaluates the acceptance criteria into
``summary.json`` and encodes the verdict in its exit status (0 = all pass).
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, engine, io, philox, renewal, simulate, spectral
from .acceptance import BUDGETS, FAR_SUB_W, RunContext
from .model import ModelError, ModelParams, build_model, return_tail_target


def _model_args(sp):
    sp.add_argument("--p", type=float, default=1.5)
    sp.add_argument("--xi-tag", default="sqrt2-1")
    sp.add_argument("--ell-kind", default="constant",
                    choices=["constant", "log-power"])
    sp.add_argument("--kappa", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=1234)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--backend", default=None, choices=["cython", "python"])
    sp.add_argument("--out", default="out")
    sp.add_argument("--config", default=None,
                    help="load config from a previous manifest.json")


def _floats(text):
    return [float(x) for x in text.split(",") if x]


def _ints(text):
    return [int(x) for x in text.split(",") if x]


def build_parser():
    ap = argparse.ArgumentParser(
        prog="krick",
        description="heavy-tailed Z-extension suspension flows at desk scale")
    sub = ap.add_subparsers(dest="cmd", required=True)

    for name in ("model-report", "tail", "smooth-tail", "renewal", "mixing",
                 "spectral-sweep", "constants", "aperiodicity",
                 "inversion-check", "fga-limit", "tent-check", "all"):
        sp = sub.add_parser(name)
        _model_args(sp)
        if name in ("tail", "smooth-tail", "renewal", "mixing"):
            sp.add_argument("--trials", type=float, default=None)
        if name in ("tail", "smooth-tail"):
            sp.add_argument("--cap", type=float, default=simulate.DEFAULT_STEP_CAP)
            sp.add_argument("--anchors", default=None,
                            help="comma list of anchor times")
        if name in ("renewal", "mixing"):
            sp.add_argument("--A", default="1", help="comma list of |n| values")
            sp.add_argument("--B", default="1")
            sp.add_argument("--t", default="100,1000")
        if name == "renewal":
            sp.add_argument("--h", type=float, default=1.0)
        if name == "aperiodicity":
            sp.add_argument("--negative-control", action="store_true")
        if name == "inversion-check":
            sp.add_argument("--u", default="0.1,0.01")
            sp.add_argument("--a", default="1,4")
            sp.add_argument("--t", default="0,10")
            sp.add_argument("--lam", default="0,0.3")
        if name == "fga-limit":
            sp.add_argument("--a", type=float, default=1.0)
            sp.add_argument("--lam", type=float, default=0.0)
            sp.add_argument("--t", default="10,30,100,300,1000")
            sp.add_argument("--M-rule", default="sqrt")
        if name == "tent-check":
            sp.add_argument("--s", default="0.3,0.5,1.0")
        if name == "spectral-sweep":
            sp.add_argument("--u", default="0.0,0.01,0.1")
            sp.add_argument("--b", default=None, help="comma list")
            sp.add_argument("--theta", default=None)
        if name == "all":
            sp.add_argument("--budget", default="desk", choices=list(BUDGETS))
            sp.add_argument("--skip-acceptance", action="store_true",
                            help="produce artifacts without the criteria pass")
    return ap


def _config_from_args(args):
    if args.config:
        with open(args.config) as f:
            stored = json.load(f)["config"]
        stored.pop("command", None)
        return stored
    cfg = {
        "model": {"p": args.p, "xi_tag": args.xi_tag,
                  "ell_kind": args.ell_kind, "kappa": args.kappa},
        "seed": int(os.environ.get("KRICK_SEED", args.seed)),
        "workers": args.workers,
        "backend": args.backend,
        "out": args.out,
    }
    for key in ("trials", "cap", "anchors", "A", "B", "t", "h", "u", "a",
                "b", "lam", "s", "M_rule", "theta", "budget",
                "negative_control", "skip_acceptance"):
        if hasattr(args, key):
            cfg[key] = getattr(args, key)
    return cfg


def _write_manifest(outdir, cfg, command, extra, wall):
    manifest = {
        "config": {**cfg, "command": command},
        "version": __version__,
        "backend": engine.backend_name(cfg.get("backend")),
        "wall_time_s": wall,
        **extra,
    }
    io.write_json(os.path.join(outdir, "manifest.json"), manifest)


def _model(cfg, allow_lattice=False):
    return build_model(ModelParams.from_dict(cfg["model"]),
                       allow_lattice_roof=allow_lattice)


def cmd_model_report(cfg, outdir):
    model = _model(cfg)
    law, consts = model.law, model.constants
    ts = [1.0, 2.0, 5.0, 10.0, 100.0, 1000.0]
    report = {
        **consts.to_dict(),
        "xi": model.params.xi,
        "ell_star_samples": {str(t): consts.ell_star(t) for t in (1e2, 1e4, 1e6)},
        "ell_star_tail_samples": {str(t): consts.ell_star_tail(t)
                                  for t in (1e2, 1e4, 1e6)},
        "tail_samples": [
            {"t": t, "tail_phi": float(law.tail_phi(t)),
             "tail_r": float(law.tail_r(t)),
             "tail_abs_phi": float(law.tail_abs_phi(t))} for t in ts],
        "return_tail_target": return_tail_target(consts),
    }
    io.write_json(os.path.join(outdir, "model.json"), report)
    return {}


def cmd_tail(cfg, outdir):
    model = _model(cfg)
    trials = int(cfg.get("trials") or 10 ** 6)
    anchors = _floats(cfg["anchors"]) if cfg.get("anchors") else None
    hist = simulate.estimate_tail_histogram(
        model, trials, seed=cfg["seed"], workers=cfg["workers"],
        backend=cfg["backend"], anchors=anchors,
        step_cap=int(cfg.get("cap") or simulate.DEFAULT_STEP_CAP),
        stream=philox.STREAM_TAIL)
    rows, slope = simulate.tau_tail_rows(model, hist)
    header, data = io.rows_from_dataclasses(rows)
    io.write_csv(os.path.join(outdir, "tail.csv"), header, data)
    return {"slope": slope, "capped_fraction": hist.capped_fraction,
            "censored_fraction": hist.censored_fraction,
            "n_total": hist.n_total}


def cmd_smooth_tail(cfg, outdir):
    model = _model(cfg)
    trials = int(cfg.get("trials") or 10 ** 7)
    hist = simulate.estimate_tail_histogram(
        model, trials, seed=cfg["seed"], workers=cfg["workers"],
        backend=cfg["backend"], stream=philox.STREAM_SMOOTH)
    rows = simulate.smooth_tail_rows(model, hist)
    slope = simulate.smooth_tail_exponent(rows)
    header, data = io.rows_from_dataclasses(rows)
    io.write_csv(os.path.join(outdir, "smooth.csv"), header, data)
    return {"exponent": slope, "capped_fraction": hist.capped_fraction,
            "n_total": hist.n_total}


def cmd_renewal(cfg, outdir):
    model = _model(cfg)
    trials = int(cfg.get("trials") or 4 * 10 ** 5)
    rows, out = simulate.estimate_renewal(
        model, trials, A=_ints(cfg["A"]), B=_ints(cfg["B"]),
        t_grid=_floats(cfg["t"]), h=float(cfg.get("h", 1.0)),
        seed=cfg["seed"], workers=cfg["workers"], backend=cfg["backend"])
    header, data = io.rows_from_dataclasses(rows)
    io.write_csv(os.path.join(outdir, "renewal.csv"), header, data)
    return {"n_trials": out["n_trials"], "n_startA": out["n_startA"],
            "n_voided": out["n_voided"]}


def cmd_mixing(cfg, outdir):
    model = _model(cfg)
    trials = int(cfg.get("trials") or 10 ** 6)
    rows, out = simulate.estimate_flow_correlation(
        model, trials, A=_ints(cfg["A"]), B=_ints(cfg["B"]),
        t_grid=_floats(cfg["t"]), seed=cfg["seed"], workers=cfg["workers"],
        backend=cfg["backend"])
    beta = model.constants.beta
    hdr, data = io.rows_from_dataclasses(rows)
    hdr += ["target_adj", "rel_dev_adj"]
    for r, row in zip(rows, data):
        adj = r.target / (1.0 - beta)
        row += [adj, abs(r.product / adj - 1.0)]
    io.write_csv(os.path.join(outdir, "mixing.csv"), hdr, data)
    return {"n_trials": out["n_trials"], "n_voided": out["n_voided"]}


def cmd_spectral_sweep(cfg, outdir):
    model = _model(cfg)
    ev = spectral.SpectralEvaluator(model)
    us = _floats(cfg["u"])
    bs = _floats(cfg["b"]) if cfg.get("b") else list(np.linspace(-2, 2, 41))
    ths = _floats(cfg["theta"]) if cfg.get("theta") else \
        list(np.linspace(-np.pi, np.pi, 25, endpoint=False))
    rows = []
    for u in us:
        for b in bs:
            s = complex(u, -b)
            if s == 0:
                S_abs, S_arg = float("nan"), float("nan")
            else:
                S, _ = ev.S(s)
                S_abs, S_arg = abs(S), float(np.angle(S))
            lam = ev.lambda_hat(np.array([s]), np.array(ths))
            for th, lv in zip(ths, lam.reshape(-1)):
                rows.append([u, b, th, lv.real, lv.imag, S_abs, S_arg])
    io.write_csv(os.path.join(outdir, "spectral.csv"),
                 ["u", "b", "theta", "re_lambda", "im_lambda",
                  "abs_S", "arg_S"], rows)
    return {"points": len(rows)}


def cmd_constants(cfg, outdir):
    model = _model(cfg)
    rep = spectral.compute_constants(model)
    io.write_json(os.path.join(outdir, "constants.json"), rep.to_dict())
    return {"d_p_exact": rep.d_p_exact}


def cmd_aperiodicity(cfg, outdir):
    negative = bool(cfg.get("negative_control"))
    if negative:
        cfg = {**cfg, "model": {**cfg["model"], "xi_tag": "zero"}}
    model = _model(cfg, allow_lattice=negative)
    rep = spectral.aperiodicity_scan(model)
    io.write_json(os.path.join(outdir, "aperiodicity.json"),
                  {**rep.__dict__, "negative_control": negative})
    return {"max_abs": rep.max_abs, "passed": rep.passed}


def cmd_inversion_check(cfg, outdir):
    model = _model(cfg)
    ev = spectral.SpectralEvaluator(model)
    store = simulate.excursion_sample(
        model, 2 * 10 ** 5, seed=cfg["seed"], workers=cfg["workers"],
        backend=cfg["backend"])
    rows = []
    for u in _floats(cfg["u"]):
        for a in _floats(cfg["a"]):
            for t in _floats(cfg["t"]):
                for lam in _floats(cfg["lam"]):
                    rows.append(renewal.inversion_check(
                        model, ev, store["tau"], u, a, t, lam))
    header, data = io.rows_from_dataclasses(rows)
    header.append("ok")
    for r, row in zip(rows, data):
        row.append(r.ok)
    io.write_csv(os.path.join(outdir, "inversion.csv"), header, data)
    return {"n_ok": sum(r.ok for r in rows), "n_total": len(rows)}


def cmd_fga_limit(cfg, outdir):
    model = _model(cfg)
    ev = spectral.SpectralEvaluator(model)
    rows = renewal.fga_limit(model, ev, a=float(cfg["a"]),
                             lam=float(cfg["lam"]), t_grid=_floats(cfg["t"]),
                             M_rule=cfg.get("M_rule", "sqrt"))
    header, data = io.rows_from_dataclasses(rows)
    io.write_csv(os.path.join(outdir, "fga.csv"), header, data)
    return {"last_value_re": rows[-1].value.real, "target": rows[-1].target}


def cmd_tent_check(cfg, outdir):
    model = _model(cfg)
    store = simulate.excursion_sample(
        model, 4 * 10 ** 5, seed=cfg["seed"], workers=cfg["workers"],
        backend=cfg["backend"])
    rows = renewal.tent_laplace_check(model, store["tau"], _floats(cfg["s"]))
    header, data = io.rows_from_dataclasses(rows)
    header.append("ok")
    for r, row in zip(rows, data):
        row.append(r.ok)
    io.write_csv(os.path.join(outdir, "tent.csv"), header, data)
    return {"worst_residual": max(r.residual for r in rows)}


def cmd_all(cfg, outdir):
    budget = cfg.get("budget", "desk")
    ctx = RunContext(budget=budget, seed=cfg["seed"], workers=cfg["workers"],
                     backend=cfg["backend"],
                     params=ModelParams.from_dict(cfg["model"]))
    b = BUDGETS[budget]
    model = ctx.model

    tail_meta = cmd_tail_ctx(ctx, outdir)
    rows = simulate.smooth_tail_rows(model, ctx.smooth_hist)
    header, data = io.rows_from_dataclasses(rows)
    io.write_csv(os.path.join(outdir, "smooth.csv"), header, data)
    far_rows = simulate.smooth_tail_rows(model, ctx.far_hist,
                                         width=16 * FAR_SUB_W)
    header, data = io.rows_from_dataclasses(far_rows)
    io.write_csv(os.path.join(outdir, "smooth_far.csv"), header, data)

    rep = spectral.compute_constants(model)
    io.write_json(os.path.join(outdir, "constants.json"), rep.to_dict())

    mix_rows, _ = simulate.estimate_flow_correlation(
        model, b["mixing_trials"], A=[1], B=[1], t_grid=(100.0, 1000.0),
        seed=cfg["seed"], workers=cfg["workers"], backend=cfg["backend"],
        tail_ref=ctx.tail_hist)
    beta = model.constants.beta
    hdr, data = io.rows_from_dataclasses(mix_rows)
    hdr += ["target_adj", "rel_dev_adj"]
    for r, row in zip(mix_rows, data):
        adj = r.target / (1.0 - beta)
        row += [adj, abs(r.product / adj - 1.0)]
    io.write_csv(os.path.join(outdir, "mixing.csv"), hdr, data)

    ren_rows, _ = simulate.estimate_renewal(
        model, b["renewal_trials"], A=[1], B=[1], t_grid=(100.0, 1000.0),
        seed=cfg["seed"], workers=cfg["workers"], backend=cfg["backend"],
        tail_ref=ctx.tail_hist)
    header, data = io.rows_from_dataclasses(ren_rows)
    io.write_csv(os.path.join(outdir, "renewal.csv"), header, data)

    fga_rows = renewal.fga_limit(model, ctx.ev, a=1.0, lam=0.0,
                                 t_grid=b["fga_t"])
    header, data = io.rows_from_dataclasses(fga_rows)
    io.write_csv(os.path.join(outdir, "fga.csv"), header, data)

    tent_rows = renewal.tent_laplace_check(model, ctx.taus, b["tent_s"])
    header, data = io.rows_from_dataclasses(tent_rows)
    io.write_csv(os.path.join(outdir, "tent.csv"), header, data)

    win_rows = renewal.interval_window_check(model, ctx.smooth_hist)
    header, data = io.rows_from_dataclasses(win_rows)
    io.write_csv(os.path.join(outdir, "windows.csv"), header, data)

    meta = {"capped_fraction": ctx.tail_hist.capped_fraction, **tail_meta}
    if cfg.get("skip_acceptance"):
        return meta

    results = ctx.run(numbers=set(range(1, 11)))   # 11 shells out separately
    summary = {
        "budget": budget,
        "criteria": [{**r.__dict__} for r in results],
        "all_passed": all(r.passed for r in results),
    }
    io.write_json(os.path.join(outdir, "summary.json"), summary)
    for r in results:
        print(r.line())
    meta["all_passed"] = summary["all_passed"]
    return meta


def cmd_tail_ctx(ctx, outdir):
    rows, slope = simulate.tau_tail_rows(ctx.model, ctx.tail_hist)
    header, data = io.rows_from_dataclasses(rows)
    io.write_csv(os.path.join(outdir, "tail.csv"), header, data)
    return {"slope": slope}


COMMANDS = {
    "model-report": cmd_model_report,
    "tail": cmd_tail,
    "smooth-tail": cmd_smooth_tail,
    "renewal": cmd_renewal,
    "mixing": cmd_mixing,
    "spectral-sweep": cmd_spectral_sweep,
    "constants": cmd_constants,
    "aperiodicity": cmd_aperiodicity,
    "inversion-check": cmd_inversion_check,
    "fga-limit": cmd_fga_limit,
    "tent-check": cmd_tent_check,
    "all": cmd_all,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except (OSError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    outdir = io.ensure_dir(cfg["out"])
    t0 = time.time()
    try:
        extra = COMMANDS[args.cmd](cfg, outdir)
    except (ModelError, ValueError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _write_manifest(outdir, cfg, args.cmd, extra, time.time() - t0)
    if args.cmd == "all" and not cfg.get("skip_acceptance"):
        return 0 if extra.get("all_passed") else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
