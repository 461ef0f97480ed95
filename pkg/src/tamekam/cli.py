"""
Command line driver.

    tamekam straighten --config golden2d --out runs/golden
    tamekam sweep      --config box.yaml --out runs/box --threads 4

``--config`` takes a YAML file or the name of a bundled example (see
``BUILTINS``).  Exit codes: 0 converged, 1 configuration error,
2 parameter excluded, 3 diverged or not converged.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import fourier as fr
from . import kam
from . import params as pm
from . import transport as tp
from . import verify as vf
from .diffeo import VectorFieldOnTorus
from .fourier import FourierField

EXIT_OK, EXIT_CONFIG, EXIT_EXCLUDED, EXIT_DIVERGED = 0, 1, 2, 3
GOLDEN = (1 + 5 ** 0.5) / 2

_GOLDEN_F0 = [{"kind": "sin", "k": [1, 1], "amp": [1e-3, 0.0]},
              {"kind": "cos", "k": [1, 0], "amp": [0.0, 1e-3]}]

BUILTINS = {
    "golden2d": {
        "scheme": {"N": 2, "gamma": 1e-2, "K0": 8},
        "problem": {"xi": [1.0, GOLDEN], "f0": _GOLDEN_F0},
        "oracle": {"theta0": [0.3, 0.7], "rotation_T": 1e4, "flow_T": 100.0, "dt": 1e-2},
    },
    "golden2d_even": {
        "scheme": {"N": 2, "gamma": 1e-2, "K0": 8},
        "problem": {"xi": [1.0, GOLDEN],
                    "f0": [{"kind": "cos", "k": [1, 1], "amp": [1e-3, 0.0]},
                           {"kind": "cos", "k": [1, 0], "amp": [0.0, 1e-3]}]},
        "oracle": {"theta0": [0.3, 0.7], "rotation_T": 1e3, "flow_T": 100.0, "dt": 1e-2},
    },
    "zero2d": {
        "scheme": {"N": 2, "gamma": 1e-2, "K0": 8},
        "problem": {"xi": [1.0, GOLDEN], "f0": []},
        "oracle": {"theta0": [0.3, 0.7], "rotation_T": 100.0, "flow_T": 10.0, "dt": 1e-2},
    },
    "golden_box": {
        "scheme": {"N": 2, "gamma": 1e-2, "K0": 4, "K_box": 8},
        "problem": {"f0": [{"kind": "sin", "k": [1, 1], "amp": [1e-4, 0.0]},
                           {"kind": "cos", "k": [1, 0], "amp": [0.0, 1e-4]}]},
        "grid": {"box": [[1.0, 2.0], [1.0, 2.0]], "kind": "halton", "n": 1681,
                 "shift": [GOLDEN - 1, 2 ** 0.5 - 1], "gammas": [4e-2, 2e-2, 1e-2]},
    },
    "transport_golden": {
        "scheme": {"N": 2, "gamma": 1e-2, "K0": 8},
        "transport": {"nu": 1, "d": 1, "omega": [1.0], "zeta": [GOLDEN],
                      "a0": [{"kind": "cos", "k": [1, 1], "amp": [1e-3]}],
                      "u0": [{"kind": "cos", "k": [1], "amp": [1.0]},
                             {"kind": "sin", "k": [2], "amp": [0.5]}],
                      "t_max": 100.0, "n_t": 51, "s_list": [0, 1, 2], "M": 64},
    },
    "transport_free": {
        "scheme": {"N": 2, "gamma": 1e-2, "K0": 8},
        "transport": {"nu": 1, "d": 1, "omega": [1.0], "zeta": [GOLDEN], "a0": [],
                      "u0": [{"kind": "cos", "k": [1], "amp": [1.0]},
                             {"kind": "sin", "k": [2], "amp": [0.5]}],
                      "t_max": 100.0, "n_t": 11, "s_list": [0, 1, 2], "M": 64},
    },
    "forced_golden": {
        "scheme": {"N": 2, "gamma": 1e-2, "K0": 8},
        "transport": {"nu": 1, "d": 1, "omega": [GOLDEN], "zeta": [1.0],
                      "a0": [{"kind": "cos", "k": [1, 1], "amp": [1e-3]}]},
        "forced": {"f": [{"kind": "cos", "k": [1, -1], "amp": [1.0]},
                         {"kind": "sin", "k": [0, 1], "amp": [0.5]},
                         {"kind": "cos", "k": [1, 1], "amp": [0.3]}]},
    },
    "forced_single": {
        "scheme": {"N": 2, "gamma": 1e-2, "K0": 8},
        "transport": {"nu": 1, "d": 1, "omega": [GOLDEN], "zeta": [1.0], "a0": []},
        "forced": {"f": [{"kind": "cos", "k": [1, -1], "amp": [1.0]}]},
    },
    "verify_golden": {
        "scheme": {"N": 2, "gamma": 1e-2, "K0": 8},
        "problem": {"xi": [1.0, GOLDEN],
                    "f0": [{"kind": "sin", "k": [1, 1], "amp": [1.0, 0.0]},
                           {"kind": "cos", "k": [1, 0], "amp": [0.0, 1.0]}]},
        "verify": {"eps": [1e-3, 1e-4, 1e-5], "base_eps": 1e-3,
                   "perturbation": [{"kind": "cos", "k": [0, 1], "amp": [1.0, 0.0]}],
                   "ladder": [1e-6, 1e-7, 1e-8]},
    },
}


class ConfigLoadError(ValueError):
    pass


# ------------------------------------------------------------------ config
def load_config(source: str) -> dict:
    if source in BUILTINS:
        cfg = copy.deepcopy(BUILTINS[source])
        cfg["name"] = source
        return cfg
    p = Path(source)
    if not p.is_file():
        raise ConfigLoadError(f"no config file or builtin named {source!r}")
    try:
        cfg = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigLoadError(f"cannot parse {p}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigLoadError("config must be a mapping")
    base = cfg.pop("builtin", None)
    if base is not None:
        if base not in BUILTINS:
            raise ConfigLoadError(f"unknown builtin {base!r}")
        cfg = _merge(copy.deepcopy(BUILTINS[base]), cfg)
    cfg.setdefault("name", p.stem)
    return cfg


def _merge(a: dict, b: dict) -> dict:
    for k, v in b.items():
        if isinstance(v, dict) and isinstance(a.get(k), dict):
            a[k] = _merge(a[k], v)
        else:
            a[k] = v
    return a


def constants_from(cfg: dict) -> kam.SchemeConstants:
    sc = dict(cfg.get("scheme", {}))
    if "N" not in sc:
        raise ConfigLoadError("scheme.N is required")
    known = set(kam.SchemeConstants.__dataclass_fields__)
    extra = set(sc) - known
    if extra:
        raise ConfigLoadError(f"unknown scheme keys: {sorted(extra)}")
    return kam.SchemeConstants(**sc).validate()


def field_from_terms(terms, N: int, m: int, K_box: int | None = None) -> FourierField:
    """Terms are {kind: cos|sin, k, amp} or {k, re, im} (complex coefficient)."""
    terms = list(terms or [])
    kmax = max([max(abs(int(x)) for x in t["k"]) for t in terms] + [0])
    K = kmax if K_box is None else K_box
    if not terms:
        return FourierField.zeros(N, m, K)
    modes = []
    for t in terms:
        k = [int(x) for x in t["k"]]
        if len(k) != N:
            raise ConfigLoadError(f"mode {k} does not have {N} entries")
        if "kind" in t:
            amp = np.broadcast_to(np.asarray(t["amp"], float), (m,))
            if t["kind"] == "cos":
                a = amp if not any(k) else 0.5 * amp
            elif t["kind"] == "sin":
                a = -0.5j * amp if any(k) else 0 * amp
            else:
                raise ConfigLoadError(f"unknown term kind {t['kind']!r}")
        else:
            a = np.asarray(t["re"], float) + 1j * np.asarray(t.get("im", 0.0), float)
        modes.append((k, a))
    return FourierField.from_modes(N, m, K, modes)


# ------------------------------------------------------------------ output
def _num(x):
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return [_num(v) for v in x.tolist()]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, dict):
        return {str(k): _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    return x


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_num(obj), indent=2, allow_nan=False) + "\n")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _steps_csv(path: Path, steps) -> None:
    rows = [(s["n"], s["K_n"], s["K_eff"], s["delta_s0"], s["delta_s1"], *s["alpha_n"]) for s in steps]
    N = len(steps[0]["alpha_n"]) if steps else 0
    write_csv(path, ["n", "K_n", "K_eff", "delta_s0", "delta_s1"] + [f"alpha_{i}" for i in range(N)], rows)


def _status_code(status: str) -> int:
    return {"converged": EXIT_OK, "excluded": EXIT_EXCLUDED}.get(status, EXIT_DIVERGED)


# ---------------------------------------------------------------- commands
def _problem(cfg, c):
    pr = cfg.get("problem", {})
    if "xi" not in pr:
        raise ConfigLoadError("problem.xi is required")
    xi = np.asarray(pr["xi"], float)
    if xi.size != c.N:
        raise ConfigLoadError(f"xi has {xi.size} entries, scheme.N = {c.N}")
    f0 = field_from_terms(pr.get("f0", []), c.N, c.N)
    return xi, f0


def cmd_straighten(cfg: dict, out: Path, args) -> int:
    c = constants_from(cfg)
    xi, f0 = _problem(cfg, c)
    try:
        res = kam.kam_iterate(xi, f0, c)
    except kam.DivergenceError as exc:
        write_json(out / "run.json", {"xi": xi, "status": "diverged", "alpha_inf": None,
                                      "steps": exc.steps, "error": str(exc)})
        _steps_csv(out / "steps.csv", exc.steps)
        return EXIT_DIVERGED
    write_json(out / "run.json", res.to_dict())
    _steps_csv(out / "steps.csv", res.steps)
    if res.status != "converged":
        return _status_code(res.status)
    o = cfg.get("oracle", {})
    X0 = VectorFieldOnTorus(xi, f0)
    theta0 = np.asarray(o.get("theta0", [0.0] * c.N), float)
    dt = float(o.get("dt", 1e-2))
    rv = vf.rotation_vector(X0, theta0, float(o.get("rotation_T", 1e4)), dt)
    dev = vf.conjugacy_flow_check(res, X0, theta0, float(o.get("flow_T", 100.0)), dt)
    delta = fr.sobolev_norm(f0, c.s1) / c.gamma
    write_json(out / "audit.json", {
        "rotation_vector": rv,
        "rotation_error": float(np.max(np.abs(rv - res.alpha_inf))),
        "conjugacy_residual": res.residual,
        "residual_ok": res.residual < c.residual_tol,
        "flow_deviation": dev,
        "flow_form": "trajectory conjugacy Psi(theta(t)) = Psi(theta0) + alpha_inf t",
        "frequency_shift": float(np.linalg.norm(res.alpha_inf - xi)),
        "frequency_bound": c.gamma * delta,
        "final_set": res.final_set,
        "K_check": res.K_check,
    })
    return EXIT_OK


def _grid(cfg, seed):
    gs = cfg.get("grid")
    if not gs:
        raise ConfigLoadError("grid section is required for sweep")
    box = gs["box"]
    kind = gs.get("kind", "halton")
    if kind == "halton":
        return pm.ParamGrid.halton(box, int(gs["n"]), shift=gs.get("shift"))
    if kind == "uniform":
        return pm.ParamGrid.uniform(box, gs["shape"], gs.get("offsets"))
    if kind == "random":
        return pm.ParamGrid.random(box, int(gs["n"]), seed)
    raise ConfigLoadError(f"unknown grid kind {kind!r}")


def cmd_sweep(cfg: dict, out: Path, args) -> int:
    c = constants_from(cfg)
    f0 = field_from_terms(cfg.get("problem", {}).get("f0", []), c.N, c.N)
    grid = _grid(cfg, args.seed)
    gammas = cfg["grid"].get("gammas")
    builder = pm.ConstantBuilder(f0)
    if gammas:
        lad = pm.gamma_ladder(grid, builder, c, gammas, workers=args.threads)
        last = lad["grids"][-1]
        summary = {"gammas": gammas, "table": lad["rows"], "slope": lad["slope"],
                   "monotone": lad["monotone"]}
    else:
        last = pm.sweep(grid, builder, c, workers=args.threads)
        m = pm.measure_excluded(last)
        summary = {"gamma": c.gamma, "measure": m.value, "half_width": m.half_width,
                   "fraction": m.fraction, "n": m.n, "n_excluded": m.n_excluded}
    summary["grid_kind"] = cfg["grid"].get("kind", "halton")
    summary["volume"] = last.volume
    write_json(out / "run.json", summary)
    N = c.N
    rows = [(*xi, code, *alpha, step) for xi, code, alpha, step in last.rows()]
    write_csv(out / "measure.csv", [f"xi_{i}" for i in range(N)] + ["outcome"]
              + [f"alpha_{i}" for i in range(N)] + ["excluded_step"], rows)
    return EXIT_OK


def _operator(cfg):
    t = cfg.get("transport")
    if not t:
        raise ConfigLoadError("transport section is required")
    nu, d = int(t["nu"]), int(t["d"])
    a0 = field_from_terms(t.get("a0", []), nu + d, d)
    return tp.TransportOperator(nu, d, t["omega"], t["zeta"], a0)


def cmd_transport(cfg: dict, out: Path, args) -> int:
    c = constants_from(cfg)
    op = _operator(cfg)
    if c.N != op.nu + op.d:
        raise ConfigLoadError("scheme.N must equal nu + d")
    t = cfg["transport"]
    try:
        red = tp.reduce(op, c)
    except kam.DivergenceError as exc:
        write_json(out / "run.json", {"status": "diverged", "steps": exc.steps, "error": str(exc)})
        return EXIT_DIVERGED
    if not isinstance(red, tp.ReducedTransport):
        write_json(out / "run.json", red.to_dict())
        return _status_code(red.status)
    run = red.result.to_dict()
    run["m_inf"] = red.m_inf
    run["reduction_residual"] = red.reduction_residual()
    write_json(out / "run.json", run)
    _steps_csv(out / "steps.csv", red.result.steps)
    u0 = field_from_terms(t.get("u0", [{"kind": "cos", "k": [1] * op.d, "amp": [1.0]}]), op.d, 1)
    tg = np.linspace(0.0, float(t.get("t_max", 100.0)), int(t.get("n_t", 51)))
    s_list = list(t.get("s_list", [0, 1, 2]))
    hu, hv = tp.evolve_characteristics(op, u0, tg, s_list, M=int(t.get("M", 64)), reduced=red)
    write_csv(out / "norms.csv", ["t", "s", "norm"], hu.rows())
    write_csv(out / "norms_reduced.csv", ["t", "s", "norm"], hv.rows())
    write_json(out / "audit.json", {
        "slopes": {str(s): hu.slope(i) for i, s in enumerate(s_list)},
        "reduced_variation": {str(s): float(np.ptp(hv.norms[:, i])) for i, s in enumerate(s_list)},
        "m_shift": float(np.linalg.norm(red.m_inf - op.zeta)),
    })
    return EXIT_OK


def cmd_forced(cfg: dict, out: Path, args) -> int:
    c = constants_from(cfg)
    op = _operator(cfg)
    N = op.nu + op.d
    f = field_from_terms(cfg.get("forced", {}).get("f", []), N, 1)
    try:
        red = tp.reduce(op, c)
    except kam.DivergenceError as exc:
        write_json(out / "run.json", {"status": "diverged", "error": str(exc)})
        return EXIT_DIVERGED
    if not isinstance(red, tp.ReducedTransport):
        write_json(out / "run.json", red.to_dict())
        return _status_code(red.status)
    try:
        sol = tp.forced_solve(op, f, red, c)
    except kam.SmallDivisorError as exc:
        write_json(out / "run.json", {"status": "excluded", "error": str(exc), "k": exc.k})
        return EXIT_EXCLUDED
    fn = fr.sobolev_norm(f, c.s0)
    write_json(out / "run.json", {"status": "converged", "m_inf": red.m_inf, "c": sol.c,
                                  "b": sol.b.to_dict()})
    write_json(out / "audit.json", {
        "residual": sol.residual,
        "c_abs": float(np.linalg.norm(sol.c)),
        "f_norm_s0": fn,
        "C_measured": float(np.linalg.norm(sol.c)) / fn if fn > 0 else 0.0,
    })
    return EXIT_OK


def cmd_verify(cfg: dict, out: Path, args) -> int:
    c = constants_from(cfg)
    xi, shape = _problem(cfg, c)
    v = cfg.get("verify", {})
    tame = vf.tame_audit(xi, shape, c, eps_list=v.get("eps", [1e-3, 1e-4, 1e-5]))
    base = float(v.get("base_eps", 1e-3)) * shape
    pert = field_from_terms(v.get("perturbation", []), c.N, c.N)
    ladder = []
    for amp in v.get("ladder", [1e-6, 1e-7, 1e-8]):
        rep = vf.lipschitz_audit(xi, base, base + float(amp) * pert.resize(base.K_box), c)
        rep["amplitude"] = amp
        ladder.append(rep)
    Cs = [r["C"] for r in ladder if r.get("comparable")]
    report = {
        "tame": {k: tame[k] for k in ("rows", "max_ratio", "stability", "max_stability", "partial")},
        "tame_ok": tame["max_stability"] <= 10 and not tame["partial"],
        "lipschitz": ladder,
        "lipschitz_C_spread": (max(Cs) / min(Cs)) if Cs and min(Cs) > 0 else None,
        "alpha_ok": all(r.get("alpha_ok", False) for r in ladder),
    }
    write_json(out / "audit.json", report)
    return EXIT_OK


COMMANDS = {"straighten": cmd_straighten, "sweep": cmd_sweep, "transport": cmd_transport,
            "forced": cmd_forced, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tamekam", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="YAML file or builtin example name")
    p.add_argument("--out", default=None, help="output directory (env TAMEKAM_OUT otherwise)")
    p.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--seed", type=int, default=0, help="seed for random grids")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out or os.environ.get("TAMEKAM_OUT") or cfg.get("output_dir") or "out")
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except (ConfigLoadError, kam.ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
