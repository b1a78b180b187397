"""Command line front end: ``folnerlab <experiment> [--config FILE] [--out DIR] ...``.

Every experiment walks a parameter grid and emits one row per cell.  Columns
per experiment are fixed in ``csv_schema.json``.  Exit status: 0 when every
cell passes, 1 when some cell fails, 2 for bad usage or config, 3 when a
resource budget is exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from . import folner as fol
from . import modes
from .convexity import check_eta, eta_quarter, uc_modulus
from .errors import BudgetExceeded, FolnerLabError, SearchExhausted
from .exact import as_fraction
from .groups import DEFAULT_ELEMENT_BUDGET

SCHEMA_VERSION = "folnerlab/1"
EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def load_columns() -> dict:
    text = resources.files("folnerlab").joinpath("csv_schema.json").read_text()
    return {k: v["columns"] for k, v in json.loads(text)["experiments"].items()}


# ---------------------------------------------------------------------------
# config helpers


def _frac_list(cfg, key, default):
    vals = cfg.get(key, default)
    if not isinstance(vals, list) or not vals:
        raise ConfigError(f"{key}: expected a nonempty list")
    try:
        return [as_fraction(v) for v in vals]
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"{key}: {e}") from None


def _int_list(cfg, key, default):
    vals = cfg.get(key, default)
    if not isinstance(vals, list) or not vals or not all(isinstance(v, int) for v in vals):
        raise ConfigError(f"{key}: expected a nonempty list of integers")
    return vals


def _int(cfg, key, default, lo=0):
    v = cfg.get(key, default)
    if not isinstance(v, int) or isinstance(v, bool) or v < lo:
        raise ConfigError(f"{key}: expected an integer >= {lo}")
    return v


def _rng(seed, *parts):
    return random.Random(":".join(str(p) for p in (seed,) + parts))


DEFAULT_SYSTEMS = [{"type": "torus", "d": 1, "N": 8}, {"type": "torus", "d": 1, "N": 16},
                   {"type": "torus", "d": 2, "N": 8}, {"type": "torus", "d": 2, "N": 16},
                   {"type": "bs12", "q": 5}, {"type": "bs12", "q": 9}]


def _system(spec):
    kind = spec.get("type")
    try:
        if kind == "torus":
            d = spec.get("d", 1)
            return dyn.make_torus_system(d, spec["N"]), fol.box_schedule(d)
        if kind == "bs12":
            return dyn.make_bs12_affine_system(spec["q"]), fol.bs12_schedule()
    except KeyError as e:
        raise ConfigError(f"systems: {kind} needs field {e}") from None
    except ValueError as e:
        raise ConfigError(f"systems: {e}") from None
    raise ConfigError(f"systems: unknown type {kind!r}")


def _modulus(schedule, which):
    if which == "stated":
        return schedule.stated_modulus
    if which == "sound":
        return schedule.modulus
    raise ConfigError("modulus: expected 'stated' or 'sound'")


def _schedule(spec):
    kind = spec.get("type", "box")
    if kind == "box":
        return fol.box_schedule(spec.get("d", 2))
    if kind == "interval":
        return fol.interval_schedule()
    if kind == "bs12":
        return fol.bs12_schedule(spec.get("side", "inverse"))
    raise ConfigError(f"schedule: unknown type {kind!r}")


def _eta_for(u, eps, cfg):
    eta = cfg.get("eta", "quarter")
    eta = eta_quarter(u, eps) if eta == "quarter" else as_fraction(eta)
    try:
        check_eta(u, eps, eta)
    except ValueError as e:
        raise ConfigError(f"eta: {e}") from None
    return eta


def _beta(name):
    table = {"none": None, "n+1": lambda n, e: n + 1, "n+2": lambda n, e: n + 2,
             "2n": lambda n, e: 2 * n, "superaffine": modes.superaffine_beta}
    if name not in table:
        raise ConfigError(f"beta: expected one of {sorted(table)}")
    return table[name]


def _index_map(spec):
    """``{"a": a, "b": b}`` -> ``n -> a n + b``."""
    a, b = spec.get("a", 1), spec.get("b", 1)
    if not (isinstance(a, int) and isinstance(b, int)) or a < 1 or b < 0 or a + b < 2:
        raise ConfigError("F: need integers a >= 1, b >= 0 with F(n) > n")
    return (lambda n: a * n + b), f"{a}n+{b}"


def _family(name, j, beta=None):
    if name == "S":
        return modes.family_S(j)
    if name == "S_prime":
        return modes.family_S_prime(j, beta or (lambda n, e: n + 2))
    if name == "superaffine":
        return modes.family_superaffine(j)
    if name == "step":
        return modes.family_step(j)
    raise ConfigError(f"family: unknown family {name!r}")


def _fmt(v):
    if isinstance(v, bool):
        return "pass" if v else "fail"
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    return "" if v is None else str(v)


# ---------------------------------------------------------------------------
# experiments; each yields dict rows carrying a boolean "verdict"


def exp_folner_stats(cfg, args):
    sch = _schedule(cfg.get("schedule", {"type": "box", "d": 2}))
    budget = args.budget_elements
    gens = sch.group.symmetrize(sch.group.generators())
    for n in range(1, _int(cfg, "count", 6, 1) + 1):
        if not sch.cheap(n):
            raise BudgetExceeded(f"set {n} too large", cap=budget)
        F = sch.set_at(n)
        d, g = fol.max_defect(F, gens)
        yield {"schedule": sch.name, "n": n, "cardinality": F.cardinality(),
               "generator_defect": d, "worst_generator": sch.group.element_to_json(g),
               "verdict": True}


def exp_modulus(cfg, args):
    sch = _schedule(cfg.get("schedule", {"type": "box", "d": 2}))
    which = cfg.get("modulus", "stated")
    beta = _modulus(sch, which)
    if beta is None:
        raise ConfigError(f"schedule {sch.name} has no {which} modulus")
    slack = args.horizon if args.horizon is not None else _int(cfg, "horizonSlack", 8)
    for n in _int_list(cfg, "n", [1, 2, 3, 4]):
        for eps in _frac_list(cfg, "eps", ["1/2", "1/4"]):
            b = beta(n, eps)
            chk = fol.verify_modulus(sch, beta, n, eps, b + slack, budget=args.budget_elements)
            w = chk.witness or (None, None, None)
            yield {"schedule": sch.name, "modulus": which, "n": n, "eps": eps, "beta": b,
                   "horizon": b + slack, "witness_m": w[0],
                   "witness_g": None if w[1] is None else sch.group.element_to_json(w[1]),
                   "witness_defect": w[2], "verdict": chk.passed}


def exp_fluctuations(cfg, args):
    fam = cfg.get("family", "S")
    beta_name = cfg.get("beta", "none")
    beta = _beta(beta_name)
    length = args.horizon if args.horizon is not None else _int(cfg, "length", 0)
    for j in _int_list(cfg, "params", [5]):
        seq = _family(fam, j, beta if fam == "S_prime" else None)
        n = length or _default_length(seq)
        prefix = seq.prefix(n)
        for eps in _frac_list(cfg, "eps", ["1"]):
            if beta is None or fam == "S_prime":
                rep = modes.count_fluctuations(prefix, eps)
            else:
                rep = modes.count_fluctuations_at_distance(prefix, eps, beta)
            ok = modes.check_witnesses(prefix, rep, None if fam == "S_prime" else beta)
            yield {"family": fam, "param": j, "eps": eps, "beta": beta_name, "length": n,
                   "count": rep.count, "witnesses": rep.witnesses, "verdict": ok}


def _default_length(seq):
    c = seq.constant_from or 50
    return min(c + 5, seq.index_cap)


def exp_metastability(cfg, args):
    eps = _frac_list(cfg, "eps", ["1"])
    maps = cfg.get("F", [{"a": 1, "b": 1}, {"a": 2, "b": 0}, {"a": 4, "b": 0}])
    for j in _int_list(cfg, "params", [1, 2, 3, 5, 8]):
        seq = modes.family_S(j)
        for spec in maps:
            F, name = _index_map(spec)
            for e in eps:
                res = modes.metastable_index(seq, F, e)
                phi = modes.phi_family_S(F, e)
                yield {"family": "S", "param": j, "F": name, "eps": e, "N": res.N,
                       "phi": phi, "verdict": res.N is not None and res.N <= phi}


def exp_verify_main_bound(cfg, args):
    u = uc_modulus(2)
    which = cfg.get("modulus", "stated")
    n_max = args.horizon if args.horizon is not None else _int(cfg, "nMax", 24, 1)
    count = _int(cfg, "observables", 100, 1)
    eps_grid = _frac_list(cfg, "eps", ["1/4", "1/2"])
    etas = {e: _eta_for(u, e, cfg) for e in eps_grid}
    for spec in cfg.get("systems", DEFAULT_SYSTEMS):
        sys_, sch = _system(spec)
        beta = _modulus(sch, which)
        for eps in eps_grid:
            for i in range(count):
                f = dyn.random_observable(sys_, _rng(args.seed, sys_.name, eps, i))
                r = dyn.verify_main_bound(sys_, sch, beta, f, eps, etas[eps], n_max)
                yield {"system": sys_.name, "schedule": sch.name, "modulus": which,
                       "eps": eps, "eta": etas[eps], "observable": i, "norm_sq": f.norm_sq(),
                       "bound": r.bound, "sharpened_bound": r.extra.get("sharpenedBound"),
                       "observed": r.observed, "witnesses": r.witnesses, "verdict": r.verdict}


def exp_averaging_lemma(cfg, args):
    which = cfg.get("modulus", "stated")
    count = _int(cfg, "observables", 20, 1)
    for spec in cfg.get("systems", DEFAULT_SYSTEMS):
        sys_, sch = _system(spec)
        beta = _modulus(sch, which)
        for N in _int_list(cfg, "N", [1, 2, 3]):
            for eta in _frac_list(cfg, "eta", ["1/4", "1/8"]):
                for i in range(count):
                    f = dyn.random_observable(sys_, _rng(args.seed, sys_.name, N, eta, i))
                    r = dyn.averaging_lemma_check(sys_, sch, beta, N, eta, f)
                    yield {"system": sys_.name, "schedule": sch.name, "modulus": which,
                           "N": N, "K": r.parameters["K"], "eta": eta, "observable": i,
                           "gap_sq": r.observed, "bound_sq": r.bound, "verdict": r.verdict}


def exp_verify_fast(cfg, args):
    u = uc_modulus(2)
    length = args.horizon if args.horizon is not None else _int(cfg, "length", 6, 1)
    lam = _int(cfg, "lambda", 1, 1)
    count = _int(cfg, "observables", 50, 1)
    systems = cfg.get("systems", [{"type": "torus", "d": 2, "N": 16}, {"type": "bs12", "q": 9}])
    eps_grid = _frac_list(cfg, "eps", ["1/4", "1/2"])
    for spec in systems:
        sys_, sch = _system(spec)
        for eps in eps_grid:
            eta = _eta_for(u, eps, cfg)
            # observables lie in the unit ball, so eta/3 is the smallest tolerance needed
            tol = dyn.lower_ratio(eta, 1)
            prefix = fol.fast_refine(sch, lam, tol, length)
            for i in range(count):
                f = dyn.random_observable(sys_, _rng(args.seed, sys_.name, eps, i))
                r = dyn.verify_fast_corollary(sys_, prefix, length, lam, f, eps, eta)
                yield {"system": sys_.name, "schedule": sch.name, "eps": eps, "eta": eta,
                       "lambda": lam, "indices": prefix.indices, "observable": i,
                       "bound": r.bound, "observed": r.observed, "verdict": r.verdict}


def exp_slow_rate(cfg, args):
    for d in _int_list(cfg, "d", [1, 2]):
        for n in _int_list(cfg, "n", [2, 3]):
            r = dyn.slow_rate_demo(fol.box_schedule(d), lambda k: Fraction(1, 2 ** k), n)
            yield {"d": d, "n": n, "alpha_n": r.parameters["alpha_n"], "eps": r.bound,
                   "m": r.parameters["m"], "gap": r.observed, "norm_Anf": r.extra["normAnf"],
                   "unit_norm": r.extra["unitNorm"], "mean_zero": r.extra["meanZero"],
                   "verdict": r.verdict}


def exp_upcrossings(cfg, args):
    horizon = args.horizon if args.horizon is not None else _int(cfg, "horizon", 64, 1)
    count = _int(cfg, "observables", 20, 1)
    pairs = cfg.get("intervals", [["1/8", "3/8"], ["1/4", "3/4"]])
    for N in _int_list(cfg, "N", [12, 16]):
        sys_ = dyn.make_torus_system(1, N)
        for i in range(count):
            rng = _rng(args.seed, N, i)
            f = dyn.Observable(sys_, [rng.randint(0, 1) for _ in range(N)])
            for a, b in pairs:
                for k in _int_list(cfg, "k", [1, 2, 3]):
                    r = dyn.bishop_upcrossings_check(sys_, f, a, b, k, horizon)
                    yield {"N": N, "observable": i, "alpha": as_fraction(a), "beta": as_fraction(b),
                           "k": k, "mass": r.observed, "bound": r.bound, "verdict": r.verdict}


def exp_learn(cfg, args):
    fam = cfg.get("family", "S")
    beta_name = cfg.get("beta", "none")
    beta = _beta(beta_name)
    for j in _int_list(cfg, "params", [3]):
        seq = _family(fam, j)
        prefix = seq.prefix(_default_length(seq))
        for k in _int_list(cfg, "k", [0]):
            t = modes.learn_limit(prefix, k, beta)
            yield {"family": fam, "param": j, "k": k, "beta": beta_name,
                   "mind_changes": t.mind_changes, "guesses": t.guesses,
                   "verdict": modes.replay_transcript(prefix, t, beta)}


def exp_rate_from_limit(cfg, args):
    count = _int(cfg, "observables", 10, 1)
    for N in _int_list(cfg, "N", [4, 8]):
        T = dyn.koopman_cyclic(N)
        sys_ = dyn.make_torus_system(1, N)
        for i in range(count):
            rng = _rng(args.seed, N, i)
            vals = [rng.randint(-8, 8) for _ in range(N)]
            f = dyn.Observable(sys_, vals)
            limit = float(abs(dyn.mean_projection(sys_, f).values[0]))
            for eps in _frac_list(cfg, "eps", ["1/10", "1/100"]):
                c = dyn.rate_from_limit_norm(T, np.array(vals, dtype=float), limit, float(eps))
                yield {"N": N, "observable": i, "eps": eps, "m": c.m, "i": c.i,
                       "horizon": c.horizon, "max_gap": c.max_gap, "verdict": c.passed}


EXPERIMENTS = {
    "folner-stats": exp_folner_stats,
    "modulus": exp_modulus,
    "fluctuations": exp_fluctuations,
    "metastability": exp_metastability,
    "verify-main-bound": exp_verify_main_bound,
    "averaging-lemma": exp_averaging_lemma,
    "verify-fast": exp_verify_fast,
    "slow-rate": exp_slow_rate,
    "upcrossings": exp_upcrossings,
    "learn": exp_learn,
    "rate-from-limit": exp_rate_from_limit,
}


# ---------------------------------------------------------------------------
# output


def render_csv(kind, rows) -> str:
    cols = load_columns()[kind]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def render_json(kind, rows) -> str:
    cols = load_columns()[kind]
    recs = [{c: _fmt(r.get(c)) for c in cols} for r in rows]
    return json.dumps({"schema": SCHEMA_VERSION, "experiment": kind, "rows": recs},
                      indent=1, sort_keys=True) + "\n"


def read_config(path, kind) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"config: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be an object")
    if cfg.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"schema: expected {SCHEMA_VERSION!r}, got {cfg.get('schema')!r}")
    if cfg.get("experiment", kind) != kind:
        raise ConfigError(f"experiment: config is for {cfg['experiment']!r}, not {kind!r}")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="folnerlab", description="Følner sequences, fluctuation "
                                "bounds and ergodic averages: batch experiments.")
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--out", help="directory for result files (default: stdout)")
        s.add_argument("--seed", type=int, default=0, help="seed for random observables")
        s.add_argument("--budget-elements", type=int, default=DEFAULT_ELEMENT_BUDGET)
        s.add_argument("--horizon", type=int, help="override the experiment's horizon")
        s.add_argument("--format", choices=["csv", "json", "both"], default="csv")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_PASS
    kind = args.experiment
    if not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be a 64-bit unsigned integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = read_config(args.config, kind)
        rows = list(EXPERIMENTS[kind](cfg, args))
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (BudgetExceeded, SearchExhausted) as e:
        print(f"budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except FolnerLabError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    outputs = []
    if args.format in ("csv", "both"):
        outputs.append(("csv", render_csv(kind, rows)))
    if args.format in ("json", "both"):
        outputs.append(("json", render_json(kind, rows)))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for ext, text in outputs:
            (out / f"{kind}.{ext}").write_text(text)
    else:
        for _, text in outputs:
            sys.stdout.write(text)
    failed = sum(not r["verdict"] for r in rows)
    print(f"{kind}: {len(rows)} cells, {failed} failed", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
