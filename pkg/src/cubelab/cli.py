"""Batch experiment runner.

    cubelab gowers --config cfg.toml --out report.json
    cubelab nilcycle verify --config cfg.json --seed 7
    cubelab suite manifest.toml --out summary.json
    cubelab --list-checks
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .cube import vertices
from .cubespace import finite_cube_set, is_cube, nrp_classes, sample_cube
from .model import TestFamily, continuity_probe, q_uniqueness_check
from .nilcycle import (ExtractionError, coboundary_nilcycle, extract_nilcycle, nilcycle_for,
                       perturbed_nilcycle, verify_nilcycle, zero_nilcycle)
from .seminorms import (SizeCapError, TrigPolynomial, gowers_naive, gowers_recursive,
                        kronecker_limit_rotation, nonconventional_average, observable_from_json)
from .systems import (CocycleError, CyclicRotation, SkewExtension, TorusRotation, system_from_json,
                      torus_diff, twist_from_json)

log = logging.getLogger("cubelab")

EXPERIMENTS = ("gowers", "avg", "cubes", "nrp", "nilcycle-extract", "nilcycle-verify",
               "model-probe", "q-check")
VOLATILE = ("timestamp", "wall_time_s")

CHECKS = [
    ("gowers.naive_eq_recursive", "|||f|||_k = (int prod_v f(x_v) dmu^[k])^(1/2^k)"),
    ("gowers.expected", "seminorm value against a closed form"),
    ("avg.kronecker", "nonconventional average (1/N) sum_n prod_i f_i(T^{in} x)"),
    ("cubes.membership", "induced dynamical cubespace C^k(X)"),
    ("cubes.bfs_size", "HK^k orbit of the diagonal"),
    ("nrp.classes", "nilpotent regionally proximal relation"),
    ("nilcycle.fiber_constancy", "rho(c) = theta_{k+1}(a_c)"),
    ("nilcycle.oracle", "theta of a coboundary lift = sum_v (-1)^|v| h(c_v)"),
    ("nilcycle.cube_invariance", "rho o sigma(c) = sgn(sigma) rho(c)"),
    ("nilcycle.glueing", "rho(b || c) = rho(b) + rho(c)"),
    ("nilcycle.equivariance", "rho(g c) = rho(c) + sum_v (-1)^|v| beta(g_v, c_v)"),
    ("nilcycle.tricube", "sum_v (-1)^|v| rho(psi_v(t)) = rho(omega(t))"),
    ("model.bundle_shrinks", "g(-rho_x + a) = -rho_{gx} + beta(g, x) + a is continuous"),
    ("model.product_floor", "the product metric on (x, a) does not see that continuity"),
    ("model.q_uniqueness", "sum_v (-1)^|v| a_v = rho(c) determines a_0"),
]


class ConfigError(ValueError):
    pass


# -- config ----------------------------------------------------------------------------------

def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    text = path.read_text()
    try:
        if path.suffix == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _need(cfg: dict, key: str, kind=None):
    if key not in cfg:
        raise ConfigError(f"missing field {key!r}")
    val = cfg[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"field {key!r} has the wrong type")
    return val


def validate(cfg: dict) -> dict:
    exp = cfg.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"field 'experiment': unknown tag {exp!r}")
    seed = _need(cfg, "seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise ConfigError("field 'seed' must be an unsigned 64-bit integer")
    if exp != "avg" or "system" in cfg:
        _need(cfg, "system", dict)
    if "k" in cfg and (not isinstance(cfg["k"], int) or cfg["k"] < 0):
        raise ConfigError("field 'k' must be a nonnegative integer")
    return cfg


def _system(cfg):
    try:
        return system_from_json(cfg["system"])
    except (KeyError, ValueError, CocycleError) as exc:
        raise ConfigError(f"field 'system': {exc}") from exc


def _extension(spec) -> SkewExtension:
    try:
        E = system_from_json(spec)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"field 'system': {exc}") from exc
    if not isinstance(E, SkewExtension):
        raise ConfigError("field 'system': an extension is required")
    return E


def _check(name, value, tol, passed, **extra):
    return {"name": name, "value": value, "tol": tol, "pass": bool(passed), **extra}


def _nilcycle(cfg, E, k, rng):
    spec = cfg.get("nilcycle", {"kind": "closed"})
    kind = spec.get("kind", "closed")
    if kind == "zero":
        rho = zero_nilcycle(E.base, k, E.A)
    elif kind == "coboundary":
        rho = coboundary_nilcycle(E.base, twist_from_json(spec.get("twist", {"h": "step"})), k)
    elif kind == "closed":
        rho = nilcycle_for(E, k)
    elif kind == "extracted":
        rho, _ = extract_nilcycle(E, k, int(spec.get("n_cubes", 64)), int(spec.get("n_fiber", 8)),
                                  rng)
    else:
        raise ConfigError(f"field 'nilcycle.kind': unknown {kind!r}")
    if spec.get("perturb"):
        rho = perturbed_nilcycle(rho, float(spec["perturb"]))
    return rho


# -- experiments --------------------------------------------------------------------------

def _run_gowers(cfg, rng, data):
    X = _system(cfg)
    if not isinstance(X, CyclicRotation):
        raise ConfigError("field 'system': gowers needs a cyclic system")
    N, k = X.n_points, int(_need(cfg, "k"))
    tol = float(cfg.get("tol", 1e-9))
    f = observable_from_json(_need(cfg, "f", dict), N)
    try:
        rec = gowers_recursive(f, k, N)
        nai = gowers_naive(f, k, N)
    except SizeCapError as exc:
        raise ConfigError(str(exc)) from exc
    seed = cfg["seed"]
    for r in (nai, rec):
        data.append([r.method, k, N, repr(r.value), "", "", seed])
    checks = [_check("gowers.naive_eq_recursive", abs(nai.value - rec.value), tol,
                     abs(nai.value - rec.value) <= tol)]
    if "expect" in cfg:
        dev = abs(rec.value - float(cfg["expect"]))
        checks.append(_check("gowers.expected", rec.value, tol, dev <= tol,
                             expect=float(cfg["expect"])))
    return checks


def _trig(spec):
    if isinstance(spec, dict) and spec.get("f") == "trig":
        return observable_from_json(spec)
    if isinstance(spec, dict):
        return TrigPolynomial({int(k): complex(v) for k, v in spec.items()})
    raise ConfigError("field 'fs': trig polynomials expected")


def _run_avg(cfg, rng, data):
    X = _system(cfg) if "system" in cfg else TorusRotation(0.6180339887498949)
    if not isinstance(X, TorusRotation):
        raise ConfigError("field 'system': averages need a rotation")
    fs = [_trig(f) for f in _need(cfg, "fs", list)]
    N = int(cfg.get("N", 10 ** 5))
    x = float(cfg.get("x", rng.random()))
    tol = float(cfg.get("tol", 0.02))
    rows = nonconventional_average(X, x, fs, N, cfg.get("checkpoints", [N]))
    pred = complex(kronecker_limit_rotation(fs, X)(np.array(x)))
    for M, A in rows:
        data.append(["average", len(fs), M, repr(abs(A)), "", M, cfg["seed"]])
    gap = abs(rows[-1][1] - pred)
    return [_check("avg.kronecker", gap, tol, gap < tol, x=x,
                   average=[rows[-1][1].real, rows[-1][1].imag], predicted=[pred.real, pred.imag])]


def _run_cubes(cfg, rng, data):
    X = _system(cfg)
    k = int(_need(cfg, "k"))
    n = int(cfg.get("samples", 1000))
    tol = float(cfg.get("tol", 1e-9))
    ok = sum(bool(is_cube(X, sample_cube(X, k, rng), tol)) for _ in range(n))
    checks = [_check("cubes.membership", ok / n, 1.0, ok == n, samples=n)]
    if "expect_bfs" in cfg:
        size = len(finite_cube_set(X, k))
        checks.append(_check("cubes.bfs_size", size, 0, size == int(cfg["expect_bfs"])))
    return checks


def _run_nrp(cfg, rng, data):
    X = _system(cfg)
    rep = nrp_classes(X, int(cfg.get("k", 1)))
    expect = cfg.get("expect_classes")
    passed = True if expect is None else len(rep.classes) == int(expect)
    for cls in rep.classes:
        data.append(["nrp_class", rep.k, X.n_points, " ".join(map(str, cls)), "", "", cfg["seed"]])
    return [_check("nrp.classes", len(rep.classes), 0, passed, classes=rep.classes)]


def _run_extract(cfg, rng, data):
    E = _extension(cfg["system"])
    k = int(cfg.get("k", 2))
    n_cubes, n_fiber = int(cfg.get("samples", 1000)), int(cfg.get("n_fiber", 16))
    tol = float(cfg.get("tol", 1e-9))
    try:
        rho, rep = extract_nilcycle(E, k, n_cubes, n_fiber, rng, flag_tol=tol,
                                    max_flagged=float(cfg.get("max_flagged", 0.02)))
    except ExtractionError as exc:
        rep = exc.report
        return [_check("nilcycle.fiber_constancy", rep.flagged_fraction, 0.02, False,
                       error=str(exc))]
    checks = [_check("nilcycle.fiber_constancy", rep.max_dev_unflagged, tol,
                     rep.max_dev_unflagged <= tol, flagged_fraction=rep.flagged_fraction)]
    try:
        oracle = nilcycle_for(E, k)
    except ValueError:
        oracle = None
    if oracle is not None:
        worst = 0.0
        V = np.array(vertices(k + 1), dtype=float)
        for cell, params, val, spread, flagged in rep.bins:
            if flagged:
                continue
            pts = np.mod(params[0] + V @ np.array(params[1:]), 1.0)
            worst = max(worst, abs(float(torus_diff(oracle.eval_batch(pts[None, :])[0], val))))
        checks.append(_check("nilcycle.oracle", worst, tol, worst <= tol))
    for row in list(rep.csv_rows())[1:]:
        data.append(["extracted", k, "", row[-3], row[-2], n_fiber, cfg["seed"]])
    return checks


def _run_verify(cfg, rng, data):
    E = _extension(cfg["system"])
    k = int(cfg.get("k", 2))
    rho = _nilcycle(cfg, E, k, rng)
    against = _extension(cfg["against"]) if "against" in cfg else E
    n = int(cfg.get("samples", 10 ** 4))
    tol = float(cfg.get("tol", 1e-6))
    expect_fail = set(cfg.get("expect_fail", []))
    rep = verify_nilcycle(rho, against, n, rng, tol=tol, seed=cfg["seed"])
    checks = []
    for row in rep.rows:
        ident = row["identity"]
        if ident in expect_fail:
            floor = float(cfg.get("fail_floor", 0.1))
            checks.append(_check(f"nilcycle.{ident}", row["max_dev"], floor,
                                 row["max_dev"] > floor, expected="fail"))
        else:
            checks.append(_check(f"nilcycle.{ident}", row["max_dev"], tol, row["pass"]))
    return checks


def _run_probe(cfg, rng, data):
    E = _extension(cfg["system"])
    k = int(cfg.get("k", 2))
    rho = _nilcycle(cfg, E, k, rng)
    T = TestFamily.default(k, int(cfg.get("max_char", 3)), int(cfg.get("degree", 2)))
    rep = continuity_probe(E, rho, T, int(cfg.get("n_pairs", 40)),
                           cfg.get("deltas", [0.1, 0.05, 0.02, 0.01]), rng,
                           n_samples=int(cfg.get("samples", 10000)), seed=cfg["seed"])
    floor = float(cfg.get("product_floor", 0.2))
    for d, b, p in zip(rep.delta_grid, rep.bundle, rep.product):
        data.append(["bundle", k, d, repr(b), "", cfg.get("samples", 10000), cfg["seed"]])
        data.append(["product", k, d, repr(p), "", "", cfg["seed"]])
    return [
        _check("model.bundle_shrinks", rep.bundle, None, rep.bundle_monotone,
               delta_grid=rep.delta_grid),
        _check("model.product_floor", min(rep.product), floor, min(rep.product) > floor,
               product=rep.product),
    ]


def _run_q(cfg, rng, data):
    E = _extension(cfg["system"])
    k = int(cfg.get("k", 2))
    rho = _nilcycle(cfg, E, k, rng)
    tol = float(cfg.get("tol", 1e-6))
    rep = q_uniqueness_check(rho, E, int(cfg.get("samples", 1000)), rng, tol=tol,
                             seed=cfg["seed"])
    return [_check("model.q_uniqueness", rep.max_dev, tol, rep.passed)]


RUNNERS = {"gowers": _run_gowers, "avg": _run_avg, "cubes": _run_cubes, "nrp": _run_nrp,
           "nilcycle-extract": _run_extract, "nilcycle-verify": _run_verify,
           "model-probe": _run_probe, "q-check": _run_q}


def run(cfg: dict) -> tuple[dict, list]:
    """Run one experiment; returns (report, csv rows)."""
    cfg = validate(dict(cfg))
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg["seed"])
    data: list = []
    checks = RUNNERS[cfg["experiment"]](cfg, rng, data)
    report = {
        "config": cfg,
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    return report, data


def dumps(report: dict) -> str:
    return json.dumps(_plain(report), indent=2, sort_keys=True) + "\n"


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def stable_view(report: dict) -> dict:
    """The report without wall-clock fields, for determinism comparisons."""
    out = {k: v for k, v in report.items() if k not in VOLATILE}
    if "results" in out:
        out["results"] = [stable_view(r) for r in out["results"]]
    return out


def csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "k", "N", "value", "stderr", "samples", "seed"])
    w.writerows(rows)
    return buf.getvalue()


# -- suite -----------------------------------------------------------------------------------

def load_manifest(path: str | Path) -> tuple[int, list]:
    man = load_config(path)
    entries = man.get("experiments", [])
    if not isinstance(entries, list):
        raise ConfigError("manifest field 'experiments' must be a list")
    base = Path(path).parent
    configs = []
    for i, ent in enumerate(entries):
        if isinstance(ent, str):
            ent = load_config(base / ent)
        elif not isinstance(ent, dict):
            raise ConfigError(f"manifest entry {i} is neither a table nor a path")
        configs.append(dict(ent))
    return int(man.get("seed", 0)), configs


def suite(path: str | Path, threads: int | None = None) -> dict:
    master, configs = load_manifest(path)
    for i, cfg in enumerate(configs):
        if "seed" not in cfg:
            cfg["seed"] = int(np.random.SeedSequence([master, i]).generate_state(1, np.uint64)[0])
    threads = threads or int(os.environ.get("CUBELAB_THREADS", "1") or 1)

    def one(cfg):
        try:
            rep, _ = run(cfg)
        except ConfigError as exc:
            rep = {"config": cfg, "checks": [], "pass": False, "error": str(exc)}
        return rep

    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(one, configs))
    summary = [{"index": i, "name": cfg.get("name", cfg.get("experiment")),
                "experiment": cfg.get("experiment"), "pass": r["pass"]}
               for i, (cfg, r) in enumerate(zip(configs, results))]
    return {"seed": master, "summary": summary, "results": results,
            "pass": all(r["pass"] for r in results), "version": __version__,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "wall_time_s": round(time.perf_counter() - t0, 3)}


def summary_csv(agg: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "name", "experiment", "pass"])
    for s in agg["summary"]:
        w.writerow([s["index"], s["name"], s["experiment"], int(s["pass"])])
    return buf.getvalue()


# -- argument parsing ---------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="TOML or JSON experiment config")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", help="write the JSON report here (stdout otherwise)")
    p.add_argument("--csv", help="write data rows as CSV here")
    p.add_argument("--samples", type=int, help="overrides the sample count")
    p.add_argument("--tol", type=float, help="overrides the tolerance")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cubelab", description=__doc__.splitlines()[0] if __doc__
                                 else None)
    ap.add_argument("--list-checks", action="store_true", help="print every check and exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd")
    for name in ("gowers", "avg", "cubes", "nrp", "q-check"):
        _common(sub.add_parser(name))
    nil = sub.add_parser("nilcycle").add_subparsers(dest="sub", required=True)
    _common(nil.add_parser("extract"))
    _common(nil.add_parser("verify"))
    mod = sub.add_parser("model").add_subparsers(dest="sub", required=True)
    _common(mod.add_parser("probe"))
    s = sub.add_parser("suite")
    s.add_argument("manifest")
    s.add_argument("--out", help="write the aggregate JSON here")
    s.add_argument("--csv", help="write the summary table here")
    s.add_argument("--threads", type=int)
    return ap


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.list_checks:
        for name, anchor in CHECKS:
            print(f"{name:28s} {anchor}")
        return 0
    if args.cmd is None:
        ap.print_help()
        return 2
    try:
        if args.cmd == "suite":
            agg = suite(args.manifest, args.threads)
            _emit(dumps(agg), args.out)
            if args.csv:
                Path(args.csv).write_text(summary_csv(agg))
            else:
                sys.stderr.write(summary_csv(agg))
            return 0 if agg["pass"] else 1
        tag = {"nilcycle": f"nilcycle-{getattr(args, 'sub', '')}",
               "model": "model-probe"}.get(args.cmd, args.cmd)
        if not args.config:
            raise ConfigError("--config is required")
        cfg = load_config(args.config)
        if cfg.setdefault("experiment", tag) != tag:
            raise ConfigError(f"field 'experiment': config says {cfg['experiment']!r}, "
                              f"command is {tag!r}")
        for key in ("seed", "samples", "tol"):
            if getattr(args, key) is not None:
                cfg[key] = getattr(args, key)
        report, data = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    _emit(dumps(report), args.out)
    if args.csv:
        Path(args.csv).write_text(csv_text(data))
    for c in report["checks"]:
        log.info("%s %s value=%s", "PASS" if c["pass"] else "FAIL", c["name"], c["value"])
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
