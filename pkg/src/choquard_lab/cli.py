"""Batch front end: ``python -m choquard_lab <command> [--config run.json] [overrides]``.

Every run writes its table (CSV or JSON) and a ``manifest.json`` with the
fully resolved configuration into the output directory. Exit codes: 0 on
success, 2 for invalid input, 3 when two numerical routes disagree, 4 when
an iteration does not converge.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .bubble import (BubbleParams, annulus_tail_scan, ball_mass_radial, case1_check, case2_scan,
                     divergence_scan, gradient_energy_radial, make_u_eps)
from .constants import Family, ProblemParams, best_sobolev_constant, case_window, constants_report
from .energy import energy, nehari_project, nehari_residual
from .errors import ConvergenceError, NumericalAccuracyError, ValidationError
from .field import (ComplexField, PotentialSpec, diamagnetic_check, load_field, make_grid,
                    sample_potentials, save_field)
from .riesz import interaction, riesz_convolve, riesz_plan
from .solver import SolveConfig, compare_levels, initial_guess, save_solution, solve_ground_state

__all__ = ["COMMANDS", "default_config", "resolve_config", "run", "main"]

COMMANDS = ("constants", "convolve", "energy", "nehari", "bubble-scan", "case1", "case2",
            "asymptotics", "solve", "compare-levels", "diamagnetic")

EXIT_OK, EXIT_VALIDATION, EXIT_ACCURACY, EXIT_CONVERGENCE = 0, 2, 3, 4


def default_config() -> dict:
    """On-disk configuration schema with its defaults. ``p = None`` picks a window midpoint."""
    return {
        "problem": {"N": 3, "alpha": 1.0, "p": None, "lambda": 1.0, "family": "A"},
        "grid": {"points_per_axis": 32, "box_length": 12.0},
        "bubble": {"eps": 0.1, "delta": 1.0, "cutoff_profile": "smoothstep"},
        "solver": {k: v for k, v in SolveConfig().to_dict().items() if k != "seed"},
        "potentials": PotentialSpec(magnetic="sine", a0=0.5, v0=1.25, v1=-0.25, w0=0.2, w_sigma=1.0).to_dict(),
        "scan": {"eps_seq": "dyadic:8", "lambda_seq": "doubling:1:256", "c2": 1.0, "c3": 1.0,
                 "exponent": None, "scalar": "periodic"},
        "input": None,
        "io": {"output_dir": ".", "format": "csv"},
        "seed": 0,
    }


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ValidationError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ValidationError(f"config key {path + k!r} must be an object")
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def _default_p(n: int, alpha: float, family: str) -> float:
    """Midpoint of the any-coupling window (families A, C) or of the full range (B)."""
    if family == "B":
        return 0.5 * (1.0 + (n + 2.0) / (n - 2.0))
    top = (2.0 * n - alpha) / (n - 2.0)
    edge = (n + 2.0 - alpha) / (n - 2.0) if n in (3, 4) else (2.0 * n - 2.0 - alpha) / (n - 2.0)
    return 0.5 * (max(edge, (2.0 * n - alpha) / n) + top)


def resolve_config(cfg: dict) -> dict:
    """Validate a merged config and fill derived defaults (``p``, ``exponent``)."""
    cfg = _merge(default_config(), cfg)
    prob = cfg["problem"]
    if prob["p"] is None:
        prob["p"] = _default_p(int(prob["N"]), float(prob["alpha"]), str(prob["family"]))
    if cfg["io"]["format"] not in ("csv", "json"):
        raise ValidationError("io.format must be 'csv' or 'json'")
    return cfg


def _params(cfg) -> ProblemParams:
    p = cfg["problem"]
    return ProblemParams(int(p["N"]), float(p["alpha"]), float(p["p"]), float(p["lambda"]), Family(p["family"]))


def _grid(cfg):
    return make_grid(int(cfg["problem"]["N"]), int(cfg["grid"]["points_per_axis"]), float(cfg["grid"]["box_length"]))


def _potentials(cfg, grid):
    spec = dict(cfg["potentials"])
    return sample_potentials(grid, PotentialSpec(**spec))


def _bubble(cfg) -> BubbleParams:
    b = cfg["bubble"]
    return BubbleParams(float(b["eps"]), float(b["delta"]), int(cfg["problem"]["N"]),
                        float(cfg["problem"]["alpha"]), b["cutoff_profile"])


def _solve_config(cfg) -> SolveConfig:
    return SolveConfig(seed=int(cfg["seed"]), **cfg["solver"])


def parse_sequence(text) -> list:
    """``dyadic:k`` (2^-1..2^-k), ``dyadic:a:b`` (2^-a..2^-b), ``doubling:a:b`` (a, 2a, ..., b) or a comma list."""
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    text = str(text).strip()
    try:
        if text.startswith("dyadic:"):
            parts = [int(x) for x in text.split(":")[1:]]
            lo, hi = (1, parts[0]) if len(parts) == 1 else parts
            return [2.0**-k for k in range(lo, hi + 1)]
        if text.startswith("doubling:"):
            a, b = (float(x) for x in text.split(":")[1:])
            out = [a]
            while out[-1] * 2.0 <= b * (1 + 1e-12):
                out.append(out[-1] * 2.0)
            return out
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"cannot parse sequence {text!r}") from exc


def _input_field(cfg, grid):
    if cfg["input"] is None:
        return None
    u = load_field(cfg["input"])
    if u.grid != grid:
        raise ValidationError(f"snapshot grid {u.grid.to_dict()} does not match the configured grid {grid.to_dict()}")
    return u


# ---------------------------------------------------------------------------
# output


def _atomic_write(path: Path, data: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return x


def _jsonable(x):
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def _emit(cfg, name: str, columns, rows, stdout, extra=None):
    out_dir = Path(cfg["io"]["output_dir"])
    if cfg["io"]["format"] == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(x) for x in r])
        text = buf.getvalue()
        _atomic_write(out_dir / f"{name}.csv", text)
    else:
        doc = {"columns": list(columns), "rows": [[_jsonable(x) for x in r] for r in rows]}
        if extra:
            doc["summary"] = {k: _jsonable(v) for k, v in extra.items()}
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        _atomic_write(out_dir / f"{name}.json", text)
    stdout.write(text)


def _manifest(cfg, command):
    doc = {"command": command, "version": __version__, "config": cfg}
    _atomic_write(Path(cfg["io"]["output_dir"]) / "manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands


def _cmd_constants(cfg, out):
    params = _params(cfg)
    rep = constants_report(params)
    _emit(cfg, "constants", ("N", "alpha", "family", "hls_constant", "sobolev", "shl", "threshold", "case"),
          [(params.dim, params.alpha, params.family.value, rep.hls_constant, rep.sobolev, rep.shl,
            rep.threshold, case_window(params))], out)


def _default_field(cfg, grid):
    u = _input_field(cfg, grid)
    return u if u is not None else initial_guess(grid, _solve_config(cfg))


def _cmd_convolve(cfg, out):
    params = _params(cfg)
    grid = _grid(cfg)
    u = _default_field(cfg, grid)
    s = cfg["scan"]["exponent"]
    s = params.two_alpha_star if s is None else float(s)
    plan = riesz_plan(grid, params.alpha)
    val = interaction(u, s, plan)
    conv = riesz_convolve(plan, np.abs(u.values) ** s)
    save_field(Path(cfg["io"]["output_dir"]) / "convolution.cfd", ComplexField(grid, conv))
    _emit(cfg, "convolve", ("s", "interaction", "potential_max", "potential_min"),
          [(s, val, float(conv.max()), float(conv.min()))], out)


def _cmd_energy(cfg, out):
    params = _params(cfg)
    grid = _grid(cfg)
    pot = _potentials(cfg, grid)
    u = _default_field(cfg, grid)
    scalar = cfg["scan"]["scalar"]
    bd = energy(u, params, pot, scalar)
    res = nehari_residual(u, params, pot, scalar)
    cols = tuple(bd.to_dict().keys()) + ("nehari_residual",)
    _emit(cfg, "energy", cols, [tuple(bd.to_dict().values()) + (res,)], out)


def _cmd_nehari(cfg, out):
    params = _params(cfg)
    grid = _grid(cfg)
    pot = _potentials(cfg, grid)
    u = _default_field(cfg, grid)
    scalar = cfg["scan"]["scalar"]
    if not np.any(u.values):
        raise ValidationError("zero field: nothing to project onto the Nehari manifold")
    t, proj = nehari_project(u, params, pot, scalar)
    res = nehari_residual(proj, params, pot, scalar)
    save_field(Path(cfg["io"]["output_dir"]) / "projected.cfd", proj)
    bd = energy(proj, params, pot, scalar)
    _emit(cfg, "nehari", ("t_u", "residual", "norm_sq", "energy"), [(t, res, bd.norm_sq, bd.total)], out)


def _cmd_bubble_scan(cfg, out):
    params = _params(cfg)
    bp = _bubble(cfg)
    eps_seq = parse_sequence(cfg["scan"]["eps_seq"])
    s_half = best_sobolev_constant(params.dim) ** (params.dim / 2.0)
    tail = annulus_tail_scan(params, bp, eps_seq, c2=float(cfg["scan"]["c2"]))
    rows = []
    for eps, trow in zip(eps_seq, tail.rows):
        b = bp.with_eps(eps)
        grad = gradient_energy_radial(b)
        rows.append((eps, ball_mass_radial(params.dim, eps, bp.delta), grad, grad - s_half, trow[1], trow[3]))
    _emit(cfg, "bubble_scan", ("epsilon", "ball_mass", "gradient_energy", "gradient_excess", "annulus_tail",
                               "tail_within_bound"), rows, out)


def _cmd_case1(cfg, out):
    params = _params(cfg)
    grid = _grid(cfg)
    pot = _potentials(cfg, grid)
    rep = case1_check(params, pot, _bubble(cfg))
    _emit(cfg, "case1", ("epsilon", "sup_tJ", "threshold", "margin", "t_max", "at_endpoint",
                         "resolution_warning", "in_window"),
          [(cfg["bubble"]["eps"], rep.sup_tJ, rep.threshold, rep.margin, rep.t_max, rep.at_endpoint,
            rep.resolution_warning, rep.in_window)], out)


def _cmd_case2(cfg, out):
    params = _params(cfg)
    grid = _grid(cfg)
    pot = _potentials(cfg, grid)
    table = case2_scan(params, pot, _bubble(cfg), parse_sequence(cfg["scan"]["lambda_seq"]))
    _emit(cfg, "case2", table.columns, table.rows, out, table.summary)


def _cmd_asymptotics(cfg, out):
    params = _params(cfg)
    table = divergence_scan(params, _bubble(cfg), parse_sequence(cfg["scan"]["eps_seq"]),
                            float(cfg["scan"]["c2"]), float(cfg["scan"]["c3"]))
    _emit(cfg, "asymptotics", table.columns, table.rows, out, table.summary)


def _cmd_solve(cfg, out):
    params = _params(cfg)
    grid = _grid(cfg)
    pot = _potentials(cfg, grid)
    sol = solve_ground_state(params, pot, cfg["scan"]["scalar"], _solve_config(cfg),
                             init=_input_field(cfg, grid))
    save_solution(Path(cfg["io"]["output_dir"]) / "solution", sol, params, int(cfg["seed"]))
    _emit(cfg, "solve", ("level", "residual", "iterations", "converged", "nehari_residual"),
          [(sol.level, sol.residual, sol.iterations, sol.converged, sol.nehari_residual)], out)
    if not sol.converged:
        raise ConvergenceError(f"solver stopped at residual {sol.residual:.3e} after {sol.iterations} iterations")


def _cmd_compare_levels(cfg, out):
    params = _params(cfg)
    grid = _grid(cfg)
    pot = _potentials(cfg, grid)
    rep = compare_levels(params, pot, _solve_config(cfg))
    _emit(cfg, "compare_levels", ("c_level", "d_level", "gap", "threshold", "d_below_c", "c_below_threshold"),
          [(rep.c_level, rep.d_level, rep.gap, rep.threshold, rep.d_below_c, rep.c_below_threshold)], out)


def _cmd_diamagnetic(cfg, out):
    grid = _grid(cfg)
    pot = _potentials(cfg, grid)
    u = _input_field(cfg, grid)
    if u is None:
        base = initial_guess(grid, _solve_config(cfg))
        phase = np.exp(1j * np.real(initial_guess(grid, SolveConfig(seed=int(cfg["seed"]) + 1, noise=1.0)).values))
        u = ComplexField(grid, base.values * phase)
    rep = diamagnetic_check(u, pot)
    _emit(cfg, "diamagnetic", ("fraction_satisfied", "max_violation", "tol"),
          [(rep.fraction_satisfied, rep.max_violation, rep.tol)], out)


_HANDLERS = {
    "constants": _cmd_constants,
    "convolve": _cmd_convolve,
    "energy": _cmd_energy,
    "nehari": _cmd_nehari,
    "bubble-scan": _cmd_bubble_scan,
    "case1": _cmd_case1,
    "case2": _cmd_case2,
    "asymptotics": _cmd_asymptotics,
    "solve": _cmd_solve,
    "compare-levels": _cmd_compare_levels,
    "diamagnetic": _cmd_diamagnetic,
}


def _parser():
    ap = argparse.ArgumentParser(prog="python -m choquard_lab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--N", type=int, dest="N")
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--p", type=float)
    ap.add_argument("--lambda", type=float, dest="lam")
    ap.add_argument("--family", choices=("A", "B", "C"))
    ap.add_argument("--grid", type=int, help="points per axis")
    ap.add_argument("--box", type=float, help="box edge length")
    ap.add_argument("--eps", type=float)
    ap.add_argument("--delta", type=float)
    ap.add_argument("--eps-seq", dest="eps_seq")
    ap.add_argument("--lambda-seq", dest="lambda_seq")
    ap.add_argument("--scalar", choices=("periodic", "effective"))
    ap.add_argument("--input", help=".cfd snapshot")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output directory")
    return ap


def _overrides(ns) -> dict:
    o: dict = {}

    def put(block, key, val):
        if val is not None:
            o.setdefault(block, {})[key] = val

    put("problem", "N", ns.N)
    put("problem", "alpha", ns.alpha)
    put("problem", "p", ns.p)
    put("problem", "lambda", ns.lam)
    put("problem", "family", ns.family)
    put("grid", "points_per_axis", ns.grid)
    put("grid", "box_length", ns.box)
    put("bubble", "eps", ns.eps)
    put("bubble", "delta", ns.delta)
    put("scan", "eps_seq", ns.eps_seq)
    put("scan", "lambda_seq", ns.lambda_seq)
    put("scan", "scalar", ns.scalar)
    put("io", "output_dir", ns.out)
    put("io", "format", ns.format)
    if ns.seed is not None:
        o["seed"] = ns.seed
    if ns.input is not None:
        o["input"] = ns.input
    return o


def run(argv=None, stdout=None, stderr=None) -> int:
    """Execute one command; returns the process exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    ns = _parser().parse_args(argv)
    try:
        file_cfg = {}
        if ns.config:
            try:
                file_cfg = json.loads(Path(ns.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ValidationError(f"cannot read config {ns.config}: {exc}") from exc
        cfg = resolve_config(_merge(_merge(default_config(), file_cfg), _overrides(ns)))
        _manifest(cfg, ns.command)
        _HANDLERS[ns.command](cfg, stdout)
    except ValidationError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except NumericalAccuracyError as exc:
        stderr.write(f"accuracy error: {exc}\n")
        return EXIT_ACCURACY
    except ConvergenceError as exc:
        stderr.write(f"not converged: {exc}\n")
        return EXIT_CONVERGENCE
    except TypeError as exc:
        # bad value types inside a config block, e.g. a string where a number belongs
        stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    return EXIT_OK


def main():
    sys.exit(run())
