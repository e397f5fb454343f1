"""Scenario runner: ``pathgames run <file>`` and ``pathgames catalog``.

A scenario is a YAML file::

    schema: 1
    name: heat-residual
    command: residual
    seed: 11
    params: {...}        # command parameters; omitted ones take defaults
    tolerances: {...}    # every tolerance the command uses, spelled out

Unknown keys are rejected at every level.  ``results.json`` holds the
resolved parameters, every check with its tolerance and sample count, and
the computed data; it contains no timing information so reruns with the
same seed are byte-identical.  Timing and versions go to ``manifest.json``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 when the
scenario cannot be parsed or validated.
"""
import argparse
import csv
import json
import os
import platform
import sys
import time
from datetime import datetime, timezone

import numpy as np
import yaml

from . import __version__, _kernels, catalog, gauge, game, rng
from .bsde import BsdeDriver, RegressionBasis, solve
from .dynamics import SdeCoefficients, moment_check, simulate
from .functional_calculus import ito_convergence
from .path_space import Grid, Path
from .variational import ebp_study
from . import viscosity

SCHEMA_VERSION = 1
TOP_KEYS = {"schema", "name", "command", "seed", "params", "tolerances"}


class ScenarioError(ValueError):
    """Invalid scenario file; the message names the offending location."""


# -- command table ------------------------------------------------------------
# Each command lists its parameter defaults and the tolerance keys it needs.

COMMANDS = {}


def command(name, params, tolerances):
    def register(fn):
        COMMANDS[name] = {"fn": fn, "params": params, "tolerances": tuple(tolerances)}
        return fn

    return register


class Checks:
    def __init__(self):
        self.items = []

    def add(self, name, value, tolerance, passed, n_samples=None, **extra):
        self.items.append({
            "name": name,
            "value": _plain(value),
            "tolerance": _plain(tolerance),
            "n_samples": n_samples,
            "passed": bool(passed),
            **{k: _plain(v) for k, v in extra.items()},
        })

    @property
    def passed(self):
        return all(c["passed"] for c in self.items)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@command("gauge-verify", {"n_paths": 10000, "dims": [1, 2, 3], "orders": [2, 3, 4], "n_steps": 20},
         ["max_violations"])
def _gauge_verify(p, tol, seed, jobs, ctx):
    rep = gauge.sweep_gauge_bounds(p["n_paths"], tuple(p["dims"]), tuple(p["orders"]), p["n_steps"], seed)
    for name, agg in sorted(rep.items()):
        viol = agg["violations"]
        ctx.checks.add(f"{name}_violations", viol, tol["max_violations"],
                       viol <= tol["max_violations"], agg["n"])
    return rep


@command("ito-check", {"functionals": ["terminal-linear", "terminal-quadratic", "gauge"],
                       "n_samples": 10000, "levels": [8, 10], "dim": 1},
         ["min_ratio", "linear_abs"])
def _ito_check(p, tol, seed, jobs, ctx):
    rep = ito_convergence(p["functionals"], p["n_samples"], seed, tuple(p["levels"]), p["dim"])
    rows = []
    for name in p["functionals"]:
        rms = rep[name]["rms"]
        for lev, r in zip(p["levels"], rms):
            rows.append([name, lev, 2.0 ** -lev, r])
        if name == "terminal-linear":
            worst = max(rep[name]["max_abs"])
            ctx.checks.add(f"{name}:exact", worst, tol["linear_abs"], worst <= tol["linear_abs"],
                           p["n_samples"])
        else:
            ratio = rms[0] / rms[-1] if rms[-1] > 0 else float("inf")
            ctx.checks.add(f"{name}:rms_ratio", ratio, tol["min_ratio"], ratio >= tol["min_ratio"],
                           p["n_samples"])
    ctx.tables["ito_rms"] = (["functional", "level", "step", "rms"], rows)
    return rep


@command("ebp", {"n_domains": 50, "max_paths": 500, "min_paths": 50, "n_steps": 16, "dim": 1,
                 "delta0": 0.05},
         ["max_failures"])
def _ebp(p, tol, seed, jobs, ctx):
    rep = ebp_study(p["n_domains"], p["max_paths"], seed, p["n_steps"], p["dim"], p["delta0"],
                    p["min_paths"])
    fails = sum(not r["certified"] for r in rep["rows"])
    missed = sum(r["mutations"] - r["mutations_detected"] for r in rep["rows"])
    ctx.checks.add("certification_failures", fails, tol["max_failures"], fails <= tol["max_failures"],
                   p["n_domains"])
    ctx.checks.add("undetected_mutations", missed, 0, missed == 0, rep["total_mutations"])
    ctx.tables["ebp_domains"] = (
        ["domain", "n_paths", "iterations", "certified", "margin_iii", "mutations", "detected"],
        [[r["domain"], r["n_paths"], r["iterations"], r["certified"], r["margin_iii"],
          r["mutations"], r["mutations_detected"]] for r in rep["rows"]],
    )
    return rep


def _brownian(d):
    return SdeCoefficients(
        lambda t, h, u, v: np.zeros((h.shape[0], h.shape[2])),
        lambda t, h, u, v: np.broadcast_to(np.eye(h.shape[2]), (h.shape[0], h.shape[2], h.shape[2])),
        d, 0.0, "brownian",
    )


@command("sde-moments", {"dim": 1, "T": 1.0, "n_steps": 64, "start_index": 16, "n_samples": 10000,
                         "powers": [2, 4], "dump_bundle": False},
         ["se_multiple", "exponent_band"])
def _sde_moments(p, tol, seed, jobs, ctx):
    d = p["dim"]
    grid = Grid(0.0, p["T"], p["n_steps"])
    x = Path(grid, np.zeros((p["start_index"] + 1, d)))
    coeffs = _brownian(d)
    bundle = simulate(coeffs, x, None, None, p["n_samples"], seed, jobs=jobs)
    inc = bundle.values[:, -1] - x.terminal
    sq = np.einsum("sd,sd->s", inc, inc)
    est, se = float(sq.mean()), float(sq.std() / np.sqrt(sq.size))
    exact = d * (grid.T - x.t)
    ctx.checks.add("second_moment", est, tol["se_multiple"] * se,
                   abs(est - exact) <= tol["se_multiple"] * se, p["n_samples"],
                   exact=exact, stderr=se)
    lo, hi = tol["exponent_band"]
    out = {"second_moment": {"estimate": est, "stderr": se, "exact": exact}, "moments": {}}
    for pw in p["powers"]:
        rep = moment_check(coeffs, x, pw, p["n_samples"], seed)
        ratio = rep["increment"]["ratio"]
        ctx.checks.add(f"exponent_ratio_p{pw}", ratio, [lo, hi], lo <= ratio <= hi, p["n_samples"])
        out["moments"][str(pw)] = rep
    if p["dump_bundle"]:
        bundle.save(os.path.join(ctx.out, "bundle.bin"))
    return out


@command("bsde-solve", {"T": 1.0, "n_steps": 32, "n_samples": 10000, "dim": 1, "driver": "zero",
                        "terminal": 1.0, "c": 0.0, "r": 0.0, "basis": "path"},
         ["se_multiple", "fp_floor", "bias_factor"])
def _bsde_solve(p, tol, seed, jobs, ctx):
    grid = Grid(0.0, p["T"], p["n_steps"])
    d = p["dim"]
    x = Path(grid, np.zeros((1, d)))
    K, c, r = float(p["terminal"]), float(p["c"]), float(p["r"])
    kind = p["driver"]
    if kind == "zero":
        q, lip, exact, bias = (lambda t, h, y, z, u, v: np.zeros_like(y)), 0.0, K, 0.0
    elif kind == "constant":
        q, lip, exact, bias = (lambda t, h, y, z, u, v: np.full_like(y, c)), 0.0, K + c * grid.T, 0.0
    elif kind == "linear":
        q, lip = (lambda t, h, y, z, u, v: r * y), abs(r)
        exact = K * np.exp(r * grid.T)
        bias = tol["bias_factor"] * abs(K) * r * r * grid.T * np.exp(abs(r) * grid.T) * grid.step
    else:
        raise ScenarioError(f"params.driver: unknown driver {kind!r}")
    driver = BsdeDriver(q, lambda h: np.full(h.shape[0], K), lip, kind)
    bundle = simulate(_brownian(d), x, None, None, p["n_samples"], seed, jobs=jobs)
    sol = solve(driver, bundle, None, None, RegressionBasis(p["basis"]))
    allow = tol["se_multiple"] * sol.stderr + tol["fp_floor"] + bias
    err = abs(sol.y0 - exact)
    ctx.checks.add("y0", sol.y0, allow, err <= allow, p["n_samples"], exact=float(exact),
                   stderr=sol.stderr, bias_bound=float(bias))
    with open(os.path.join(ctx.out, "bsde_solution.json"), "w") as fh:
        fh.write(sol.to_json())
    return {"y0": sol.y0, "stderr": sol.stderr, "exact": float(exact), "flags": sol.flags}


def _entry(p):
    return catalog.get(p["entry"]).make(p["entry_params"])


@command("game-value", {"entry": "separable-lq", "entry_params": {}, "kinds": ["lower", "upper"],
                        "n_samples": 4096},
         ["se_multiple", "abs"])
def _game_value(p, tol, seed, jobs, ctx):
    e = _entry(p)
    spec, x = e["spec"], e["initial"]
    out, fields = {}, {}
    for kind in p["kinds"]:
        v, fld = game.value(spec, x, kind, p["n_samples"], seed, jobs=jobs)
        out[kind] = {"value": v, "stderr": fld.stderr, "flags": fld.flags}
        fields[kind] = fld
        ctx.tables[f"value_{kind}"] = (["time", "point", "value"], fld.table_rows())
        with open(os.path.join(ctx.out, f"value_field_{kind}.json"), "w") as fh:
            fh.write(fld.to_json())
    n = p["n_samples"]
    name = p["entry"]
    if name == "bang-bang":
        ep = catalog.get(name).make(p["entry_params"])["spec"].grid
        exact = catalog.bang_bang_brute_force(ep.n_steps, ep.T - ep.t0, float(x.terminal[0]))
        for kind in out:
            err = abs(out[kind]["value"] - exact)
            ctx.checks.add(f"{kind}_vs_enumeration", out[kind]["value"], tol["abs"], err <= tol["abs"], n,
                           exact=exact)
    elif name == "driftless-brownian":
        merged = {**catalog.get(name).defaults, **p["entry_params"]}
        if merged["payoff"] == "linear":
            exact = float(np.sum(x.terminal))
            for kind in out:
                allow = tol["se_multiple"] * out[kind]["stderr"] + tol["abs"]
                ctx.checks.add(f"{kind}_martingale", out[kind]["value"], allow,
                               abs(out[kind]["value"] - exact) <= allow, n, exact=exact)
    if "lower" in out and "upper" in out:
        se = float(np.hypot(out["lower"]["stderr"], out["upper"]["stderr"]))
        allow = tol["se_multiple"] * se + tol["abs"]
        gap = out["upper"]["value"] - out["lower"]["value"]
        ctx.checks.add("lower_le_upper", gap, -allow, gap >= -allow, n)
        if name in ("separable-lq", "driftless-brownian", "bang-bang"):
            ctx.checks.add("isaacs_values_agree", abs(gap), allow, abs(gap) <= allow, n)
    return out


def _hamiltonian_samples(spec, d, n, gen):
    grid = spec.grid
    pts = []
    for _ in range(n):
        k = int(gen.integers(0, grid.n_steps))
        vals = np.cumsum(gen.standard_normal((k + 1, d)) * 0.3, axis=0)
        A = gen.standard_normal((d, d))
        pts.append((Path(grid, vals), float(gen.standard_normal()), gen.standard_normal(d), A + A.T))
    return pts


@command("isaacs", {"entry": "separable-lq", "entry_params": {}, "n_points": 200, "expect": "holds"},
         ["gap"])
def _isaacs(p, tol, seed, jobs, ctx):
    e = _entry(p)
    spec = e["spec"]
    gen = rng.generator(seed, "isaacs")
    pts = _hamiltonian_samples(spec, e["initial"].dim, p["n_points"], gen)
    rep = game.isaacs_check(spec, pts, tol["gap"])
    ctx.checks.add("minimax_ordering", rep["min_gap"], 0.0, rep["ordering_holds"], p["n_points"])
    if p["expect"] == "holds":
        ctx.checks.add("isaacs_holds", rep["max_gap"], tol["gap"], rep["holds"], p["n_points"])
    elif p["expect"] == "gap":
        ctx.checks.add("positive_gap", rep["max_gap"], tol["gap"], rep["max_gap"] > tol["gap"], p["n_points"])
    else:
        raise ScenarioError("params.expect: must be 'holds' or 'gap'")
    return rep


@command("dpp-check", {"entry": "separable-lq", "entry_params": {}, "deltas": [0.25, 0.5],
                       "kind": "lower", "n_samples": 10000},
         ["se_multiple", "abs"])
def _dpp(p, tol, seed, jobs, ctx):
    e = _entry(p)
    out = []
    for delta in p["deltas"]:
        rep = game.dpp_consistency(e["spec"], e["initial"], delta, p["kind"], p["n_samples"], seed,
                                   floor=tol["abs"])
        allow = tol["se_multiple"] * rep["stderr"] + tol["abs"]
        ctx.checks.add(f"dpp_delta_{delta:g}", rep["discrepancy"], allow, rep["discrepancy"] <= allow,
                       p["n_samples"])
        out.append(rep)
    return {"runs": out}


def _heat_samples(grid, d, n, gen):
    out = []
    for _ in range(n):
        k = int(gen.integers(0, grid.n_steps))
        out.append(Path(grid, np.cumsum(gen.standard_normal((k + 1, d)) * 0.3, axis=0)))
    return out


def _terminal_samples(grid, d, n, gen):
    return [Path(grid, np.cumsum(gen.standard_normal((grid.n_steps + 1, d)) * 0.3, axis=0))
            for _ in range(n)]


@command("residual", {"entry": "heat-exact", "entry_params": {}, "n_points": 200, "shift": 0.01},
         ["abs"])
def _residual(p, tol, seed, jobs, ctx):
    e = _entry(p)
    F, cand, grid, d = e["generator"], e["candidate"], e["grid"], e["dim"]
    gen = rng.generator(seed, "residual")
    samples = _heat_samples(grid, d, p["n_points"], gen)
    terms = _terminal_samples(grid, d, 20, gen)
    res = [viscosity.classical_residual(F, cand, x) for x in samples]
    worst = float(np.max(np.abs(res)))
    ctx.checks.add("exact_residual", worst, tol["abs"], worst <= tol["abs"], p["n_points"])
    roles = {}
    for sign, want in ((-1.0, "subsolution"), (1.0, "supersolution")):
        c = viscosity.time_shifted(cand, sign * p["shift"], want)
        rep = viscosity.consistency_check(F, c, samples, terms, tol["abs"])
        roles[want] = rep["role"]
        ctx.checks.add(f"shift_{want}", rep["role"], want, rep["matches_declared"], p["n_points"])
    base = viscosity.consistency_check(F, cand, samples, terms, tol["abs"])
    ctx.checks.add("exact_solution", base["role"], "solution", base["matches_declared"], p["n_points"])
    return {"max_abs_residual": worst, "roles": roles, "exact_role": base["role"]}


@command("comparison", {"entry": "separable-lq", "entry_params": {}, "n_samples": 4096,
                        "n_points": 400, "planted_shift": 1.0},
         ["se_multiple", "abs"])
def _comparison(p, tol, seed, jobs, ctx):
    e = _entry(p)
    spec, x = e["spec"], e["initial"]
    lo, flo = game.value(spec, x, "lower", p["n_samples"], seed, jobs=jobs)
    up, fup = game.value(spec, x, "upper", p["n_samples"], seed, jobs=jobs)
    allow = tol["se_multiple"] * float(np.hypot(flo.stderr, fup.stderr)) + tol["abs"]
    X, _ = game.training_bundle(spec, x, p["n_samples"], rng.child_seed(seed, "probe"))
    gen = rng.generator(seed, "comparison")
    samples = []
    for _ in range(p["n_points"]):
        i = int(gen.integers(0, X.shape[0]))
        k = int(gen.integers(x.end_index + 1, spec.grid.n_steps))
        samples.append(Path(spec.grid, X[i, : k + 1]))
    terms = [Path(spec.grid, X[i]) for i in range(20)]
    w1, w2 = _field_functional(flo, spec), _field_functional(fup, spec)
    viol = viscosity.comparison_harness(w1, w2, samples, terms, allow)
    ctx.checks.add("lower_vs_upper_violations", len(viol), 0, len(viol) == 0, p["n_points"],
                   tolerance_per_point=allow)
    shift = p["planted_shift"]
    planted = viscosity.comparison_harness(lambda q: w1(q) + shift if q.end_index < spec.grid.n_steps
                                           else w1(q), w2, samples, terms, allow)
    ctx.checks.add("planted_violation_detected", len(planted), ">0", len(planted) > 0, p["n_points"])
    return {"lower": lo, "upper": up, "tolerance": allow, "violations": len(viol),
            "planted_violations": len(planted)}


def _field_functional(fld, spec):
    def w(q):
        if q.end_index == fld.end_index:
            return float(np.asarray(spec.driver.phi(q.values[None])).reshape(-1)[0])
        return float(fld.evaluate(q.end_index, q.values[None])[0])

    return w


@command("stability", {"entry": "heat-exact", "entry_params": {}, "n_points": 100,
                       "schedule": [0.1, 0.01, 0.001], "family": "shift"},
         ["abs"])
def _stability(p, tol, seed, jobs, ctx):
    e = _entry(p)
    F, cand, grid, d = e["generator"], e["candidate"], e["grid"], e["dim"]
    gen = rng.generator(seed, "stability")
    samples = _heat_samples(grid, d, p["n_points"], gen)
    if p["family"] == "shift":
        Ff = lambda eps: viscosity.GeneratorHandle(lambda q, r, g, h: F(q, r, g, h) + eps)
    elif p["family"] == "constant":
        Ff = lambda eps: viscosity.GeneratorHandle(lambda q, r, g, h: F(q, r, g, h) + 1.0)
    else:
        raise ScenarioError("params.family: must be 'shift' or 'constant'")
    cf = lambda eps: viscosity.time_shifted(cand, eps)
    rep = viscosity.stability_sweep(Ff, cf, F, cand, samples, p["schedule"], tol["abs"])
    want = p["family"] == "shift"
    ctx.checks.add("converging", rep["converging"], want, rep["converging"] == want, p["n_points"])
    ctx.checks.add("limit_residual", rep["limit_residual"], tol["abs"], rep["limit_ok"], p["n_points"])
    ctx.tables["stability"] = (["eps", "F", "v", "total"],
                               [[r["eps"], r["F"], r["v"], r["total"]] for r in rep["rows"]])
    return rep


# -- scenario parsing ---------------------------------------------------------


def load_scenario(text, source="<scenario>"):
    """Parse and validate a scenario; returns a dict with resolved params."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ScenarioError(f"{where}: YAML parse error: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: top level must be a mapping")
    unknown = set(data) - TOP_KEYS
    if unknown:
        raise ScenarioError(f"{source}: unknown keys {sorted(unknown)}")
    for key in ("schema", "name", "command", "seed"):
        if key not in data:
            raise ScenarioError(f"{source}: missing required key '{key}'")
    if data["schema"] != SCHEMA_VERSION:
        raise ScenarioError(f"{source}: schema: unsupported version {data['schema']!r}")
    cmd = data["command"]
    if cmd not in COMMANDS:
        raise ScenarioError(f"{source}: command: unknown command {cmd!r}; known: {sorted(COMMANDS)}")
    seed = data["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ScenarioError(f"{source}: seed: must be an unsigned 64-bit integer")
    spec = COMMANDS[cmd]
    params = data.get("params") or {}
    if not isinstance(params, dict):
        raise ScenarioError(f"{source}: params: must be a mapping")
    bad = set(params) - set(spec["params"])
    if bad:
        raise ScenarioError(f"{source}: params: unknown keys {sorted(bad)} for command {cmd}")
    tols = data.get("tolerances") or {}
    if not isinstance(tols, dict):
        raise ScenarioError(f"{source}: tolerances: must be a mapping")
    bad = set(tols) - set(spec["tolerances"])
    if bad:
        raise ScenarioError(f"{source}: tolerances: unknown keys {sorted(bad)} for command {cmd}")
    missing = set(spec["tolerances"]) - set(tols)
    if missing:
        raise ScenarioError(f"{source}: tolerances: missing {sorted(missing)} (no hidden defaults)")
    resolved = {**spec["params"], **params}
    if "entry" in resolved:
        try:
            entry = catalog.get(resolved["entry"])
        except KeyError as exc:
            raise ScenarioError(f"{source}: params.entry: {exc.args[0]}") from None
        ep = resolved.get("entry_params") or {}
        bad = set(ep) - set(entry.defaults)
        if bad:
            raise ScenarioError(f"{source}: params.entry_params: unknown keys {sorted(bad)}")
        resolved["entry_params"] = {**entry.defaults, **ep}
    return {"schema": SCHEMA_VERSION, "name": str(data["name"]), "command": cmd, "seed": seed,
            "params": resolved, "tolerances": tols}


class _Context:
    def __init__(self, out):
        self.out = out
        self.checks = Checks()
        self.tables = {}


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def execute(scenario, out_dir, jobs=1):
    """Run a validated scenario; returns the results dict."""
    os.makedirs(out_dir, exist_ok=True)
    ctx = _Context(out_dir)
    start = time.perf_counter()
    fn = COMMANDS[scenario["command"]]["fn"]
    data = fn(scenario["params"], scenario["tolerances"], scenario["seed"], jobs, ctx)
    wall = time.perf_counter() - start
    results = {
        "schema": scenario["schema"],
        "name": scenario["name"],
        "command": scenario["command"],
        "seed": scenario["seed"],
        "params": scenario["params"],
        "tolerances": scenario["tolerances"],
        "checks": ctx.checks.items,
        "passed": ctx.checks.passed,
        "data": _plain(data),
    }
    with open(os.path.join(out_dir, "results.json"), "w") as fh:
        json.dump(results, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    for name, (header, rows) in sorted(ctx.tables.items()):
        _write_csv(os.path.join(out_dir, f"{name}.csv"), header, rows)
    manifest = {
        "name": scenario["name"],
        "seed": scenario["seed"],
        "jobs": jobs,
        "wall_time_s": wall,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "versions": {
            "pathgames": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "pyyaml": yaml.__version__,
            "kernel_backend": _kernels.BACKEND,
        },
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return results


def _cmd_run(args):
    try:
        with open(args.file) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read {args.file}: {exc.strerror}", file=sys.stderr)
        return 2
    try:
        sc = load_scenario(text, args.file)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        sc["seed"] = args.seed
    out = args.out or os.path.join("runs", sc["name"])
    try:
        res = execute(sc, out, args.jobs)
    except (ScenarioError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for c in res["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['name']}: value={c['value']} tolerance={c['tolerance']}")
    if not res["passed"]:
        failing = [c["name"] for c in res["checks"] if not c["passed"]]
        print(f"failed checks: {', '.join(failing)}", file=sys.stderr)
        return 1
    return 0


def _cmd_catalog(args):
    for e in catalog.listing():
        print(f"{e['name']:<20} {e['kind']:<5} oracle: {e['oracle']}")
        print(f"{'':<20} {e['description']}")
    return 0


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="pathgames", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("file")
    run.add_argument("--out", help="output directory (default: runs/<name>)")
    run.add_argument("--seed", type=_u64, help="override the scenario seed")
    run.add_argument("--jobs", type=int, default=1, help="worker threads")
    run.set_defaults(func=_cmd_run)
    cat = sub.add_parser("catalog", help="list the built-in test problems")
    cat.set_defaults(func=_cmd_catalog)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
