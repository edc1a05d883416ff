"""Command-line runner for scenario files and the built-in catalog."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import catalog
from .bundle_fields import (SubbundleField, commutator_oracle, energy, gauss_transform, harmonicity_residual,
                            holomorphicity_residual, osculating_flag)
from .grassmann_flags import SigmaSubset
from .hs_model import HS_FAMILIES, truncation_stability
from .numeric_core import DEFAULT_TOL, BiPoly, ToleranceConfig, TwistorError
from .sphere_domain import make_grid
from .splitting import HolomorphicSubbundle, birkhoff_factorize, hn_filtration, splitting_exponents
from .twistor import (PresentedBundle, check_length_zero_form, flag_distance, j2_residual, reduction_chain,
                      twistor_lift, verify_twistor_property)

SCHEMA_VERSION = 1
TASKS = ("energy", "harmonic-check", "split", "hn", "birkhoff", "twistor-verify", "lift", "reduce-length",
         "hs-demo")
# a residual this large is read as "not harmonic" when pairing the two oracles
SEPARATION = 1e-6
# a j2 residual this large counts as a violated holomorphicity pattern
VIOLATION = 0.1


class ParseError(ValueError):
    def __init__(self, msg: str, line: int | None = None, field: str | None = None):
        self.line, self.field = line, field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{msg} ({', '.join(where)})" if where else msg)


class ValidationError(ValueError):
    pass


# parsing ---------------------------------------------------------------------


def parse_scenario(text: str) -> dict:
    try:
        sc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno) from None
    if not isinstance(sc, dict):
        raise ParseError("scenario must be a JSON object", line=1)
    for key in ("task", "inputs"):
        if key not in sc:
            raise ParseError("missing required field", field=key)
    return sc


def load_scenario(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ValidationError(f"cannot read scenario: {e}") from None
    return parse_scenario(text)


def validate(sc: dict) -> dict:
    if sc["task"] not in TASKS:
        raise ValidationError(f"unknown task {sc['task']!r}; expected one of {', '.join(TASKS)}")
    if sc.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {sc.get('schema_version')}")
    if not isinstance(sc["inputs"], dict):
        raise ValidationError("inputs must be an object")
    grid = sc.get("grid", [16, 32])
    if (not isinstance(grid, list) or len(grid) != 2 or not all(isinstance(g, int) for g in grid)
            or min(grid) < 2):
        raise ValidationError("grid must be two integers >= 2")
    if not isinstance(sc.get("seed", 0), int):
        raise ValidationError("seed must be an integer")
    out = dict(sc)
    out.setdefault("schema_version", SCHEMA_VERSION)
    out.setdefault("grid", [16, 32])
    out.setdefault("seed", 0)
    out.setdefault("tolerances", {})
    out.setdefault("name", "")
    return out


def _need(d: dict, key: str):
    if key not in d:
        raise ValidationError(f"inputs.{key} is required")
    return d[key]


def _bipoly(data, key: str) -> BiPoly:
    try:
        return BiPoly.from_json(data)
    except (TwistorError, ValueError, TypeError) as e:
        raise ValidationError(f"inputs.{key}: {e}") from None


def _bundle(entry: dict):
    kind = entry.get("kind", "frame")
    if kind == "frame":
        inner = entry.get("inner")
        return SubbundleField(_bipoly(_need(entry, "frame"), "frame"),
                              None if inner is None else _bipoly(inner, "inner"),
                              bool(entry.get("complement", False)))
    if kind == "gauss":
        return gauss_transform(_bipoly(_need(entry, "curve"), "curve"))
    raise ValidationError(f"unknown bundle kind {kind!r}")


def _presented(entry: dict) -> PresentedBundle:
    F = entry.get("F")
    F1 = entry.get("F1")
    return PresentedBundle.present(None if F is None else _bipoly(F, "F"),
                                   None if F1 is None else _bipoly(F1, "F1"),
                                   complement=bool(entry.get("complement", False)),
                                   ambient=entry.get("ambient"))


# checks and reports ------------------------------------------------------------


def _check(name: str, value, op: str, threshold) -> dict:
    ok = {"<=": lambda a, b: a <= b, ">=": lambda a, b: a >= b, "==": lambda a, b: a == b}[op](value, threshold)
    return {"name": name, "value": value, "op": op, "threshold": threshold, "passed": bool(ok)}


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, tuples to lists, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        f = float(x)
        return f if math.isfinite(f) else repr(f)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _orders(R: int, A: int) -> list[tuple[int, int]]:
    out = []
    for k in (4, 2, 1):
        r = max(2, R // k)
        a = max(4, (A * r) // R)
        if (r, a) not in out:
            out.append((r, a))
    return out


def _convergence(E, R: int, A: int, tol: ToleranceConfig) -> list[dict]:
    rows = []
    for r, a in _orders(R, A):
        g = make_grid(r, a)
        rows.append({"grid_order": r, "angular_order": a, "residual": harmonicity_residual(E, g, tol),
                     "energy": energy(E, g, tol)})
    return rows


def _run_energy(inp, grid, R, A, tol):
    E = _bundle(_need(inp, "bundle"))
    exp = inp.get("expect", {})
    val = energy(E, grid, tol)
    res = {"energy": val, "harmonicity_residual": harmonicity_residual(E, grid, tol)}
    checks = []
    if "energy" in exp:
        target = float(exp["energy"])
        bound = float(exp.get("atol", 0.0)) + float(exp.get("rtol", 0.0)) * abs(target)
        checks.append(_check("energy_error", abs(val - target), "<=", bound))
    return res, checks, _convergence(E, R, A, tol)


def _run_harmonic(inp, grid, R, A, tol):
    E = _bundle(_need(inp, "bundle"))
    exp = inp.get("expect", {})
    h = harmonicity_residual(E, grid, tol)
    c = commutator_oracle(E, grid, tol) / math.sqrt(2.0)
    res = {"harmonicity_residual": h, "commutator_oracle": c, "energy": energy(E, grid, tol),
           "max_a_prime": holomorphicity_residual(E, grid, "prime", tol),
           "max_a_dblprime": holomorphicity_residual(E, grid, "dblprime", tol)}
    checks = []
    if exp.get("harmonic", True):
        checks += [_check("harmonicity_residual", h, "<=", tol.residual_tol),
                   _check("commutator_oracle", c, "<=", tol.residual_tol)]
    else:
        checks += [_check("harmonicity_residual", h, ">=", SEPARATION),
                   _check("commutator_oracle", c, ">=", SEPARATION)]
    if "min_components" in exp:
        m = float(exp["min_components"])
        checks += [_check("max_a_prime", res["max_a_prime"], ">=", m),
                   _check("max_a_dblprime", res["max_a_dblprime"], ">=", m)]
    return res, checks, _convergence(E, R, A, tol)


def _pairs(data) -> list[list[int]]:
    return [[int(b), int(m)] for b, m in data]


def _run_split(inp, grid, R, A, tol, hn=False):
    E = HolomorphicSubbundle(_bipoly(_need(inp, "frame"), "frame"))
    data = hn_filtration(E, tol) if hn else splitting_exponents(E, tol)
    res = {"exponents": _pairs(data.pairs), "length": data.length, "degree_sum": data.degree_sum,
           "section_profile": {str(k): v for k, v in sorted(data.profile.items())}}
    checks = []
    if hn:
        ranks, worst = [], 0.0
        for fr in data.filtration_frames:
            ranks.append(int(fr.shape[1]))
            if fr.shape[1] < fr.shape[0]:
                worst = max(worst, holomorphicity_residual(SubbundleField(fr), grid, "dblprime", tol))
        res["filtration_ranks"] = ranks
        res["filtration_holomorphic_residual"] = worst
        checks.append(_check("filtration_holomorphic_residual", worst, "<=", tol.residual_tol))
    exp = inp.get("expect", {})
    if "exponents" in exp:
        checks.append(_check("exponents", res["exponents"], "==", _pairs(exp["exponents"])))
    return res, checks, []


def _run_birkhoff(inp, grid, R, A, tol):
    f = catalog.laurent_from_entry(_need(inp, "loop"))
    bf = birkhoff_factorize(f, tol)
    res = {"kappa": list(bf.kappa), "error": bf.error}
    checks = [_check("factorisation_error", bf.error, "<=", 1e-6)]
    exp = inp.get("expect", {})
    if "kappa" in exp:
        checks.append(_check("kappa", list(bf.kappa), "==", [int(k) for k in exp["kappa"]]))
    return res, checks, []


def _run_twistor(inp, grid, R, A, tol):
    F = osculating_flag(_bipoly(_need(inp, "curve"), "curve"))
    try:
        sig = SigmaSubset(tuple(_need(inp, "sigma")), F.length)
    except TwistorError as e:
        raise ValidationError(f"inputs.sigma: {e}") from None
    if not inp.get("expect", {}).get("admissible", True):
        j2 = j2_residual(F, sig, grid, tol)
        res = {"sigma": list(sig.indices), "type_vector": list(F.type_vector), "j2_residual": j2}
        return res, [_check("j2_residual", j2, ">=", VIOLATION)], []
    rep = verify_twistor_property(F, sig, grid, tol)
    res = {"sigma": list(rep.sigma), "type_vector": list(F.type_vector), "j2_residual": rep.j2_residual,
           "harmonicity_residual": rep.harmonicity_residual, "energy": rep.projected_energy,
           "flag_energy": rep.flag_energy}
    checks = [_check("j2_residual", rep.j2_residual, "<=", tol.residual_tol),
              _check("harmonicity_residual", rep.harmonicity_residual, "<=", tol.residual_tol)]
    return res, checks, _convergence(F.sigma_field(sig.indices), R, A, tol)


def _run_lift(inp, grid, R, A, tol):
    E = _presented(_need(inp, "presented"))
    L = twistor_lift(E, grid, tol)
    res = {"sigma": list(L.sigma.indices), "type_vector": list(L.flag_field.type_vector),
           "delta": [list(p) for p in L.delta_list], "sources": list(L.sources),
           "j2_residual": L.j2_residual, "reconstruction_error": L.reconstruction_error}
    checks = [_check("j2_residual", L.j2_residual, "<=", tol.residual_tol),
              _check("reconstruction_error", L.reconstruction_error, "<=", 1e-10)]
    exp = inp.get("expect", {})
    if "sigma" in exp:
        checks.append(_check("sigma", res["sigma"], "==", [int(s) for s in exp["sigma"]]))
    if "osculating_curve" in exp:
        osc = osculating_flag(_bipoly(exp["osculating_curve"], "expect.osculating_curve"))
        res["flag_distance"] = flag_distance(L.flag_field, osc, grid, tol)
        checks.append(_check("flag_distance", res["flag_distance"], "<=", tol.residual_tol))
    return res, checks, []


def _run_reduce(inp, grid, R, A, tol):
    E = _presented(_need(inp, "presented"))
    start = E.length(tol)
    moves = reduction_chain(E, grid, int(inp.get("max_steps", 4)), tol)
    steps = [{"move": m.name, "host": m.host, "removed_kind": m.removed_kind, "length": m.length,
              "residual": m.residual} for m in moves]
    res = {"initial_length": start, "steps": steps}
    lengths = [start] + [m.length for m in moves]
    decreasing = all(b < a for a, b in zip(lengths, lengths[1:]))
    checks = [_check("final_length", lengths[-1], "==", 0), _check("strictly_decreasing", decreasing, "==", True),
              _check("steps", len(moves), "<=", 4)]
    if moves:
        checks.append(_check("max_step_residual", max(m.residual for m in moves), "<=", tol.residual_tol))
        fin = moves[-1].result
        try:
            if fin.complement:
                raise TwistorError("terminal bundle is presented as a complement")
            check_length_zero_form(HolomorphicSubbundle(fin.outer),
                                   None if fin.F1 is None else HolomorphicSubbundle(fin.F1), grid, tol)
            ok = True
        except TwistorError as e:
            ok = False
            res["terminal_form_error"] = str(e)
            checks.append(_check("terminal_form_accepted", ok, "==", True))
    return res, checks, []


def _run_hs(inp, grid, R, A, tol):
    name = _need(inp, "family")
    if name not in HS_FAMILIES:
        raise ValidationError(f"unknown family {name!r}")
    Ns = [int(n) for n in inp.get("N_list", [8, 16, 32, 64])]
    rep = truncation_stability(HS_FAMILIES[name], Ns, float(inp.get("cauchy_tol", 1e-6)), tol)
    res = {"N_list": list(rep.N_list), "virtual_dimensions": list(rep.dims), "minus_norms": list(rep.minus_norms),
           "differences": list(rep.differences)}
    checks = [_check("dimension_constant", rep.dimension_constant, "==", True),
              _check("max_difference", max(rep.differences, default=0.0), "<=", rep.tolerance)]
    exp = inp.get("expect", {})
    if "virtual_dimension" in exp:
        checks.append(_check("virtual_dimension", rep.dims[-1], "==", int(exp["virtual_dimension"])))
    return res, checks, []


RUNNERS = {
    "energy": _run_energy,
    "harmonic-check": _run_harmonic,
    "split": _run_split,
    "hn": lambda *a: _run_split(*a, hn=True),
    "birkhoff": _run_birkhoff,
    "twistor-verify": _run_twistor,
    "lift": _run_lift,
    "reduce-length": _run_reduce,
    "hs-demo": _run_hs,
}


def execute(sc: dict, overrides: dict | None = None) -> dict:
    """Run a parsed scenario and return the report dict."""
    sc = validate(sc)
    ov = overrides or {}
    R, A = ov.get("grid") or sc["grid"]
    seed = ov["seed"] if ov.get("seed") is not None else sc["seed"]
    tol_fields = dict(sc["tolerances"])
    if ov.get("tol_residual") is not None:
        tol_fields["residual_tol"] = ov["tol_residual"]
    try:
        tol = DEFAULT_TOL.replace(**tol_fields)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"tolerances: {e}") from None
    np.random.seed(seed)
    t0 = time.perf_counter()
    grid = make_grid(R, A)
    error = None
    try:
        results, checks, conv = RUNNERS[sc["task"]](sc["inputs"], grid, R, A, tol)
    except TwistorError as e:
        results, checks, conv = {}, [], []
        error = f"{type(e).__name__}: {e}"
    passed = error is None and all(c["passed"] for c in checks)
    report = {
        "schema_version": SCHEMA_VERSION,
        "name": sc["name"],
        "task": sc["task"],
        "grid": [R, A],
        "seed": seed,
        "tolerances": {"rank_tol": tol.rank_tol, "residual_tol": tol.residual_tol, "prune_tol": tol.prune_tol,
                       "fd_step": tol.fd_step},
        "results": results,
        "checks": checks,
        "convergence": conv,
        "error": error,
        "passed": passed,
        "wall_time": time.perf_counter() - t0,
    }
    return _clean(report)


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: dict, out: Path, stem: str):
    _atomic_write(out / f"{stem}.json", report_json(report))
    if report["convergence"]:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["grid_order", "residual", "energy"])
        for row in report["convergence"]:
            w.writerow([row["grid_order"], repr(row["residual"]), repr(row["energy"])])
        _atomic_write(out / f"{stem}.csv", buf.getvalue())


def run_scenario(path, out_dir=None, overrides: dict | None = None) -> dict:
    """Load, run and (optionally) write the report for one scenario file."""
    sc = load_scenario(path)
    report = execute(sc, overrides)
    if out_dir is not None:
        write_report(report, Path(out_dir), sc.get("name") or Path(path).stem)
    return report


def _run_catalog_entry(args):
    name, out, overrides = args
    sc = catalog.scenarios()[name][1]
    report = execute(sc, overrides)
    if out is not None:
        write_report(report, Path(out), name)
    return name, report["passed"], report["wall_time"], report["error"]


# command line -------------------------------------------------------------------


def _grid_arg(s: str) -> list[int]:
    try:
        r, a = (int(x) for x in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected R,A with two integers") from None
    return [r, a]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grassmann-twistor", description=__doc__)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", metavar="PATH", help="scenario JSON file")
    src.add_argument("--catalog", metavar="NAME", help="built-in scenario name, or 'all'")
    src.add_argument("--list", action="store_true", help="list built-in scenarios")
    p.add_argument("--out", metavar="DIR", help="directory for JSON reports and CSV tables")
    p.add_argument("--tol-residual", type=float, metavar="X")
    p.add_argument("--grid", type=_grid_arg, metavar="R,A")
    p.add_argument("--seed", type=int, metavar="N")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel catalog entries")
    p.add_argument("--dump", action="store_true", help="with --catalog NAME, print the scenario file")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    overrides = {"grid": args.grid, "seed": args.seed, "tol_residual": args.tol_residual}
    if args.list:
        for name, desc in catalog.list_catalog():
            print(f"{name}\t{desc}")
        return 0
    try:
        if args.scenario:
            report = run_scenario(args.scenario, args.out, overrides)
            print(f"{report['name'] or args.scenario}: {'PASS' if report['passed'] else 'FAIL'}"
                  f" ({report['wall_time']:.2f} s)")
            if report["error"]:
                print(f"  {report['error']}", file=sys.stderr)
            return 0 if report["passed"] else 1
        table = catalog.scenarios()
        names = list(table) if args.catalog == "all" else [args.catalog]
        unknown = [n for n in names if n not in table]
        if unknown:
            raise ValidationError(f"unknown catalog scenario {unknown[0]!r}")
        if args.dump:
            for n in names:
                print(json.dumps(table[n][1], sort_keys=True, indent=2))
            return 0
        jobs = [(n, args.out, overrides) for n in names]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_run_catalog_entry, jobs))
        else:
            results = [_run_catalog_entry(j) for j in jobs]
        for name, ok, wall, err in results:
            print(f"{name}: {'PASS' if ok else 'FAIL'} ({wall:.2f} s)" + (f" {err}" if err else ""))
        failed = sum(not ok for _, ok, _, _ in results)
        print(f"{len(results) - failed}/{len(results)} scenarios passed")
        return 0 if failed == 0 else 1
    except (ParseError, ValidationError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
