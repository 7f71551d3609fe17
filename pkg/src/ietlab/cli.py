"""Command line driver: one JSON config in, JSON/CSV reports out.

    ietlab spectrum --config cfg.json --out results/ [--seed 7]

Subcommands: spectrum, basis, correct, solve, distributions, saddle.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import jsonschema
import numpy as np

from . import numeric as nm
from .iet_core import Iet, IetError, Perm, random_iet

KINDS = ("spectrum", "basis", "correct", "solve", "distributions", "saddle")

_perm = {
    "oneOf": [
        {"type": "object", "properties": {"symmetric": {"type": "integer", "minimum": 2}},
         "required": ["symmetric"], "additionalProperties": False},
        {"type": "object", "properties": {"pi0": {}, "pi1": {}}, "required": ["pi0", "pi1"],
         "additionalProperties": False},
    ]
}

SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"enum": list(KINDS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "iet": {
            "type": "object",
            "properties": {
                "perm": _perm,
                "lambda": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "bits": {"type": "integer", "minimum": 53},
            },
            "required": ["perm"],
            "additionalProperties": False,
        },
        "acceleration": {
            "type": "object",
            "properties": {
                "policy": {"enum": ["balanced", "zorich"]},
                "k_max": {"type": "integer", "minimum": 1},
                "n_steps": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "precision": {"type": "integer", "minimum": 64},
        "spectrum": {"type": "object"},
        "flags": {"type": "object"},
        "correction": {"type": "object"},
        "basis": {"type": "object"},
        "phi": {"type": "object"},
        "correct": {"type": "object"},
        "cohomology": {"type": "object"},
        "distributions": {"type": "object"},
        "saddle": {"type": "object"},
    },
    "required": ["iet"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


def validate(cfg):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path)
        raise ConfigError(f"{path or 'config'}: {e.message}") from None
    try:
        _perm_of(cfg["iet"]["perm"]).check_irreducible()
    except (IetError, ValueError, TypeError) as e:
        raise ConfigError(f"iet/perm: {e}") from None
    lam = cfg["iet"].get("lambda")
    if lam is not None and len(lam) != _perm_of(cfg["iet"]["perm"]).d:
        raise ConfigError("iet/lambda: need one length per letter")
    return cfg


def _perm_of(spec):
    if "symmetric" in spec:
        return Perm.symmetric(spec["symmetric"])
    return Perm.from_rows(spec["pi0"], spec["pi1"])


# -- pipeline pieces ------------------------------------------------------------

class Context:
    """Lazily built objects shared by the experiments of one config."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.get("seed", 0))
        self.seeds = {k: int(self.rng.integers(2**63)) for k in ("iet", "spectrum", "flags", "basis")}
        nm.set_precision(cfg.get("precision", 400))
        self._run = self._filt = self._basis = None

    @property
    def iet(self):
        spec = self.cfg["iet"]
        perm = _perm_of(spec["perm"])
        if "lambda" in spec:
            from fractions import Fraction
            fr = [Fraction(x) for x in spec["lambda"]]
            den = math.lcm(*[f.denominator for f in fr])
            ints = [int(f * den) for f in fr]
            return Iet(perm, tuple(ints), den)
        return random_iet(perm, np.random.default_rng(self.seeds["iet"]), bits=spec.get("bits") or self._bits())

    def _bits(self):
        # Rauzy steps eat roughly 0.07 bits each, a level about 3.5
        acc = self.cfg.get("acceleration", {})
        if acc.get("n_steps"):
            return 1600 + acc["n_steps"] // 10
        return max(1600, 6 * acc.get("k_max", 120) + 600)

    @property
    def run(self):
        if self._run is None:
            from .renorm import accelerate
            acc = self.cfg.get("acceleration", {})
            self._run = accelerate(self.iet, policy=acc.get("policy", "balanced"),
                                   k_max=acc.get("k_max", 120), n_steps=acc.get("n_steps"))
        return self._run

    @property
    def filt(self):
        if self._filt is None:
            from .oseledets import estimate_flags
            fl = self.cfg.get("flags", {})
            L = fl.get("L", min(80, self.run.k_max - 20))
            self._filt = estimate_flags(self.run, L=L, window=fl.get("window", 200), seed=self.seeds["flags"])
        return self._filt

    @property
    def corrector(self):
        from .correction import Corrector
        c = self.cfg.get("correction", {})
        k_range = tuple(self.cfg.get("basis", {}).get("k_range", (10, 40)))
        le = self.filt.local_exponents(*k_range)
        g = self.filt.g
        return Corrector(self.run, self.filt, L=c.get("L", 40), exponents=list(le[:g]), tau=c.get("tau"))

    @property
    def basis(self):
        if self._basis is None:
            from .spectral import Basis
            self._basis = Basis(self.corrector, self.cfg.get("basis", {}).get("n_max", 2))
        return self._basis

    def phi(self, spec=None):
        from .pfun import Domain, PFun
        spec = self.cfg.get("phi", {}) if spec is None else spec
        dom = Domain.of_level(self.run, 0)
        out = PFun.zero(dom)
        if "poly" in spec:
            out = out + PFun.from_global_poly(dom, spec["poly"])
        if "coboundary_poly" in spec:
            out = out + PFun.coboundary_of_poly(dom, spec["coboundary_poly"])
        for e, c in spec.get("coboundary_power", []):
            out = out + PFun.coboundary_of_power(dom, e, c)
        for at in spec.get("atoms", []):
            out = out + PFun.atom(dom, at["letter"], at.get("side", "+"), at["e"], at.get("coeff", 1), at.get("log", 0))
        g = spec.get("gamma")
        if isinstance(g, list):
            out = out + PFun.from_gamma(dom, g)
        elif isinstance(g, str):
            out = out + PFun.from_gamma(dom, self.filt.h(int(g.lstrip("h"))))
        out.n = spec.get("n", out.n)
        out.a = spec.get("a", out.a)
        return out


# -- experiments ----------------------------------------------------------------

def exp_spectrum(ctx):
    from .oseledets import estimate_spectrum
    sp_cfg = ctx.cfg.get("spectrum", {})
    sp = estimate_spectrum(ctx.run, trials=sp_cfg.get("trials", 10), seed=ctx.seeds["spectrum"],
                           bits=sp_cfg.get("bits", 256))
    res = sp.to_json()
    cum = np.cumsum(sp.log_diag, axis=0)
    order = np.argsort(-np.asarray(sp.log_diag[sp.levels[0]:sp.levels[1]].mean(axis=0)))
    res["trajectory"] = [[int(k + 1), int(i + 1), float(cum[k, order[i]])]
                         for k in range(cum.shape[0]) for i in range(cum.shape[1])]
    res["levels_run"] = ctx.run.k_max
    res["elementary_steps"] = ctx.run.levels[-1].n
    return res


def exp_basis(ctx):
    from .spectral import measure_exponent
    B = ctx.basis
    k_range = tuple(ctx.cfg.get("basis", {}).get("k_range", (10, 40)))
    le = ctx.filt.local_exponents(*k_range)
    out = {"local_exponents": [float(x) for x in le], "elements": []}
    for tag in B.tags():
        el = B.elements[tag]
        fit = measure_exponent(ctx.run, B.pfun(tag), "sup", k_range)
        out["elements"].append({
            "tag": list(tag), "order": el.order, "target": -float(le[0]) * el.order,
            "rate": fit.rate, "stderr": fit.stderr, "ks": fit.ks, "logs": fit.logs,
        })
    return out


def exp_correct(ctx):
    from .correction import correct_h, correct_h0, correct_hminus, correct_hstar
    cor = ctx.corrector
    phi = ctx.phi()
    ops = ctx.cfg.get("correct", {}).get("ops", [["h", 2, 0.0]])
    out = []
    for op in ops:
        name, args = op[0], op[1:]
        fn = {"h": correct_h, "hstar": correct_hstar, "hminus": correct_hminus, "h0": correct_h0}.get(name)
        if fn is None:
            raise ConfigError(f"correct/ops: unknown operator {name!r}")
        out.append({"op": op, "result": fn(cor, phi, *args).to_json()})
    return {"ops": out}


def exp_solve(ctx, out_dir=None):
    from .cohom import holder_exponent, solve
    from .pfun import Domain, PFun
    c = ctx.cfg.get("cohomology", {})
    fixture = c.get("fixture", "coboundary")
    if fixture == "coboundary":
        dom = Domain.of_level(ctx.run, 0)
        phi = PFun.coboundary_of_poly(dom, c.get("v", [0, 0.7, -1.2, 0.5]))
    elif fixture == "phi":
        phi = ctx.phi()
    else:
        raise ConfigError(f"cohomology/fixture: unknown fixture {fixture!r}")
    mode = c.get("mode", "gottschalk_hedlund")
    kw = {}
    if mode == "spectral_reduction":
        kw = {"basis": ctx.basis, "a": c.get("a", 0.0), "n": c.get("n"), "r": c.get("r")}
    sol = solve(ctx.run, phi, mode=mode, N=c.get("N", 100_000), **kw)
    hol = holder_exponent(sol)
    sol.notes.pop("orbit", None)
    res = sol.to_json()
    res["holder_fits"] = hol.to_json()
    res["fixture"] = fixture
    if out_dir is not None:
        xs = np.arange(1024) * sol.total / 1024
        vs = sol(xs)
        with open(os.path.join(out_dir, "solution.csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "v"])
            for x, v in zip(xs, vs):
                wr.writerow([repr(float(x)), repr(float(v))])
    return res


def exp_distributions(ctx):
    from .pfun import PFunError
    from .spectral import d_functionals, remainder_decay
    c = ctx.cfg.get("distributions", {})
    phi = ctx.phi()
    a, n = c.get("a", 0.0), c.get("n")
    try:
        rep = d_functionals(ctx.basis, phi, a=a, n=n)
    except PFunError as e:
        raise PFunError(f"phi is not regular enough for n={n if n is not None else ctx.basis.n_max}, a={a} "
                        f"({e}); set distributions.n and distributions.a") from e
    if c.get("remainder_rates", False):
        remainder_decay(ctx.run, rep, tuple(c.get("k_range", (5, 25))))
    return rep.to_json()


def exp_saddle(ctx):
    from . import saddle as sd
    c = ctx.cfg.get("saddle", {})
    out = {"jets": [], "k_r": []}
    for js in c.get("jets", []):
        J = sd.SaddleJet.from_json(js)
        k_max = min(c.get("k_max", J.order), J.order)
        out["jets"].append({
            "sigma": J.sigma, "m": J.m,
            "d": [{"k": k, "j": j, "value": _cx(sd.eval_d(J, k, j)), "hat_order": sd.hat_order(J.m, k)}
                  for k, j in sd.TD(J.m, k_max)],
            "C": [{"k": k, "l": l, "value": _cx(sd.eval_C(J, k, l)), "order": str(sd.order(J.m, k))}
                  for k, l in sd.TC(J.m, k_max)],
        })
    for m in c.get("m_values", [2, 3, 4]):
        for r in c.get("r_values", [0.2, 0.5, 1.5]):
            out["k_r"].append({"m": m, "r": r, "k_r": sd.k_r(m, r)})
    return out


def _cx(z):
    return [float(z.real), float(z.imag)]


RUNNERS = {
    "spectrum": exp_spectrum,
    "basis": exp_basis,
    "correct": exp_correct,
    "solve": exp_solve,
    "distributions": exp_distributions,
    "saddle": exp_saddle,
}


def run_experiment(cfg, kind=None, out_dir=None):
    """Run one experiment; returns the report dict and writes files to out_dir."""
    cfg = validate(copy.deepcopy(cfg))
    kind = kind or cfg.get("experiment")
    if kind not in RUNNERS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    ctx = Context(cfg)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    res = RUNNERS[kind](ctx, out_dir) if kind == "solve" else RUNNERS[kind](ctx)
    report = {"experiment": kind, "config": cfg, "result": res}
    if out_dir is not None:
        with open(os.path.join(out_dir, f"{kind}.json"), "w") as fh:
            fh.write(dumps(report))
        plot = PLOT_KIND.get(kind)
        if plot:
            with open(os.path.join(out_dir, f"{kind}_plot.csv"), "w", newline="") as fh:
                fh.write(emit_plotdata(report, plot))
    return report


def run_batch(configs, kind, out_root, workers=2):
    """Independent configs in a process pool; one subdirectory each."""
    jobs = [(cfg, kind, os.path.join(out_root, f"item{i:03d}")) for i, cfg in enumerate(configs)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_batch_item, jobs))


def _batch_item(job):
    cfg, kind, out = job
    try:
        run_experiment(cfg, kind, out)
        return {"out": out, "ok": True}
    except Exception as e:  # each item isolated
        return {"out": out, "ok": False, "error": f"{type(e).__name__}: {e}"}


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


# -- plot data ------------------------------------------------------------------

PLOT_KIND = {"spectrum": "lognorm", "basis": "decay"}


def emit_plotdata(report, kind):
    """Long-format CSV: k, quantity, value (decay adds the fitted slope)."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    res = (report or {}).get("result", {}) or {}
    if kind == "lognorm":
        wr.writerow(["k", "quantity", "value"])
        for k, i, v in res.get("trajectory", []):
            wr.writerow([k, f"log_r_{i}", repr(v)])
    elif kind == "decay":
        wr.writerow(["k", "quantity", "value", "slope"])
        for el in res.get("elements", []):
            name = "S(k)h_{}{}{}".format(*el["tag"])
            for k, y in zip(el["ks"], el["logs"]):
                wr.writerow([k, name, repr(y), repr(el["rate"])])
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    return buf.getvalue()


# -- entry point ----------------------------------------------------------------

def main(argv=None):
    p = argparse.ArgumentParser(prog="ietlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)
    for k in KINDS:
        s = sub.add_parser(k)
        s.add_argument("--config", required=True)
        s.add_argument("--out", required=True)
        s.add_argument("--seed", type=int)
    args = p.parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if args.seed is not None:
            cfg["seed"] = args.seed
        run_experiment(cfg, args.cmd, args.out)
    except (ConfigError, json.JSONDecodeError, OSError) as e:
        sys.stderr.write(dumps({"error": str(e), "kind": "config"}))
        return 2
    except Exception as e:
        sys.stderr.write(dumps({"error": str(e), "kind": type(e).__name__, "experiment": args.cmd}))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
