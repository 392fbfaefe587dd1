"""Command-line front end.

Subcommands write their artifacts under ``--out`` (default: the current
directory) and print a short summary. Commands with embedded numeric checks
also write a ``*_checks.json`` file; the exit code is 0 only if every check
passed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.signal

from . import closed_form
from .bspline import make_basis, riesz_bounds
from .fir_lmi import FirDesignProblem, InfeasibleDesignError, design_fir
from .lti import RationalFilter, error_system, frequency_response, hinf_norm
from .reconstruct import (SimulationConfig, butterworth_magnitude, butterworth_source,
                          run_pipeline, sample)

logger = logging.getLogger("hinfspline")

TARGETS = ("table1", "table2", "fig5", "fig6", "fig7", "fig8", "fig9")


def load_reference() -> dict:
    text = resources.files("hinfspline").joinpath("data/reference.json").read_text()
    return json.loads(text)


@dataclass
class Check:
    name: str
    value: float
    expected: object
    tol: object
    passed: bool

    def to_dict(self):
        return {"name": self.name, "value": self.value, "expected": self.expected,
                "tol": self.tol, "passed": self.passed}


def _close(name, value, expected, tol) -> Check:
    value = float(value)
    return Check(name, value, expected, tol, bool(abs(value - expected) <= tol))


def _flag(name, ok, value=None) -> Check:
    return Check(name, value, True, None, bool(ok))


@dataclass
class Manifest:
    target: str
    outputs: list = field(default_factory=list)
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {"target": self.target, "outputs": self.outputs,
                "checks": [c.to_dict() for c in self.checks], "passed": self.passed}


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _write_csv(path: Path, header, columns) -> None:
    table = np.column_stack(columns)
    np.savetxt(path, table, delimiter=",", header=",".join(header), comments="", fmt="%.17g")


def _finish(out: Path, m: Manifest) -> int:
    checks_path = out / f"{m.target}_checks.json"
    m.outputs.append(checks_path.name)
    _dump_json(checks_path, m.to_dict())
    for c in m.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {m.target}: {c.name} = {c.value}")
    return 0 if m.passed else 1


def _ref_filters(ref) -> dict:
    taps = ref["fir_taps"]
    return {
        "hinf_iir": closed_form.optimal_cubic(ref["delay"]),
        "hinf_fir": RationalFilter(taps["hinf_fir"]),
        "clsd": RationalFilter(taps["clsd"]),
        "kwa": RationalFilter(taps["kwa"]),
    }


# -- reproduce ------------------------------------------------------------------

def _table1(out: Path, ref) -> Manifest:
    m = Manifest("table1")
    tol = ref["tolerances"]
    res = design_fir(FirDesignProblem(ref["spline_order"], 5, ref["delay"]))
    _dump_json(out / "table1_design.json", res.to_dict())
    k = np.arange(5)
    t = ref["fir_taps"]
    _write_csv(out / "table1.csv", ["k", "hinf_fir", "hinf_fir_reference", "clsd", "kwa"],
               [k, res.taps, t["hinf_fir"], t["clsd"], t["kwa"]])
    m.outputs += ["table1_design.json", "table1.csv"]
    lo, hi = tol["fir_gamma_range"]
    m.checks.append(Check("gamma", res.gamma, [lo, hi], None, lo <= res.gamma <= hi))
    for i, (a, b) in enumerate(zip(res.taps, t["hinf_fir"])):
        m.checks.append(_close(f"a{i}", a, b, tol["fir_taps"]))
    return m


def _table2(out: Path, ref) -> Manifest:
    m = Manifest("table2")
    tol = ref["tolerances"]
    phi = make_basis(ref["spline_order"]).sampled_fir
    rows = []
    tols = {"hinf_iir": tol["hinf_iir_norm"], "hinf_fir": tol["hinf_fir_norm"],
            "clsd": tol["clsd_norm"], "kwa": tol["kwa_norm"]}
    for name, psi in _ref_filters(ref).items():
        J = hinf_norm(error_system(psi, phi, ref["delay"]))
        rows.append({"method": name, "norm": J, "norm_db": 20 * np.log10(J)})
        m.checks.append(_close(f"{name} norm", J, ref["error_norms"][name], tols[name]))
    kwa_db = rows[-1]["norm_db"]
    m.checks.append(_close("kwa norm dB", kwa_db, ref["error_norms_db"]["kwa"], tol["kwa_db"]))
    m.checks.append(_close("optimal_value(3)", closed_form.optimal_value(ref["delay"]),
                           ref["error_norms"]["hinf_iir"], tol["hinf_iir_norm"]))
    _dump_json(out / "table2.json", rows)
    m.outputs.append("table2.json")
    return m


def _fig5(out: Path, ref) -> Manifest:
    m = Manifest("fig5")
    d = ref["delay"]
    psi = closed_form.optimal_cubic(d)
    n = np.arange(40)
    h = scipy.signal.lfilter(psi.num, psi.den, (n == 0).astype(float))
    _write_csv(out / "fig5.csv", ["n", "h"], [n, h])
    m.outputs.append("fig5.csv")
    # same filter written in positive powers of z, as a pole-zero product
    a1, a2 = closed_form.ALPHA1, closed_form.ALPHA2
    num = -6.0 * np.array([a1 ** j for j in range(d)])
    den = a1 ** d * np.poly([0.0] + [a2])
    _, (h2,) = scipy.signal.dimpulse((num, den, 1), n=n.size)
    m.checks.append(Check("impulse response vs pole-zero form", float(np.max(np.abs(h - h2[:, 0]))),
                          0.0, 1e-12, bool(np.max(np.abs(h - h2[:, 0])) < 1e-12)))
    radius = float(np.max(np.abs(psi.poles())))
    m.checks.append(Check("pole radius", radius, "< 1", None, radius < 1))
    return m


def _fig6(out: Path, ref, grid: int = 1024) -> Manifest:
    m = Manifest("fig6")
    phi = make_basis(ref["spline_order"]).sampled_fir
    cols, names = [], []
    theta = None
    for name, psi in _ref_filters(ref).items():
        fr = frequency_response(error_system(psi, phi, ref["delay"]), grid)
        theta = fr.grid
        cols.append(fr.magnitude_db)
        names.append(f"{name}_db")
    half = theta <= np.pi
    _write_csv(out / "fig6.csv", ["theta"] + names, [theta[half]] + [c[half] for c in cols])
    m.outputs.append("fig6.csv")
    iir = 10 ** (cols[0] / 20)
    m.checks.append(Check("iir residual flatness", float(iir.max() - iir.min()), 0.0, 1e-8,
                          bool(iir.max() - iir.min() < 1e-8)))
    return m


def _fig7(out: Path, ref) -> Manifest:
    m = Manifest("fig7")
    cfg = SimulationConfig()
    x = butterworth_source(cfg)
    xs = sample(x)
    _write_csv(out / "fig7_signal.csv", ["t", "x"], [x.t, x.samples])
    _write_csv(out / "fig7_samples.csv", ["n", "x"], [np.arange(xs.size), xs])
    m.outputs += ["fig7_signal.csv", "fig7_samples.csv"]
    period = 2 * np.pi / cfg.square_wave_freq
    last = x.t >= x.t[-1] - period
    shifted = np.interp(x.t[last] - period, x.t, x.samples)
    drift = float(np.max(np.abs(x.samples[last] - shifted)))
    # square-wave edges fall between grid points, so expect jitter of order 1/R
    m.checks.append(Check("period-to-period drift", drift, 0.0, 1e-2, drift < 1e-2))
    peak = float(np.max(np.abs(x.samples[x.t >= cfg.window_start])))
    # an 8th order Butterworth overshoots a step by roughly 30 percent
    m.checks.append(Check("steady-state peak", peak, [1.0, 1.5], None, 1.0 <= peak <= 1.5))
    return m


def _fig8(out: Path, ref) -> Manifest:
    m = Manifest("fig8")
    tol = ref["tolerances"]
    cfg = SimulationConfig()
    omega = np.linspace(0.0, np.pi, 1025)
    bw = butterworth_magnitude(cfg, omega)
    w = RationalFilter(**ref["simulation"]["weight"])
    wmag = np.abs(w(np.exp(1j * omega)))
    with np.errstate(divide="ignore"):
        _write_csv(out / "fig8.csv", ["omega", "butterworth_db", "weight_db"],
                   [omega, 20 * np.log10(bw), 20 * np.log10(wmag)])
    m.outputs.append("fig8.csv")
    at_cut = 20 * np.log10(butterworth_magnitude(cfg, cfg.butterworth_cutoff)[0])
    target, t = tol["butterworth_cutoff_db"]
    m.checks.append(_close("butterworth dB at cutoff", at_cut, target, t))
    return m


def _fig9(out: Path, ref) -> Manifest:
    m = Manifest("fig9")
    cfg = SimulationConfig()
    basis = make_basis(ref["spline_order"])
    sim = ref["simulation"]
    w = RationalFilter(**sim["weight"])
    wfir = design_fir(FirDesignProblem(ref["spline_order"], 5, ref["delay"], weight=w))
    filters = {"weighted_fir": wfir.psi, "hinf_iir": closed_form.optimal_cubic(ref["delay"]),
               "clsd": RationalFilter(ref["fir_taps"]["clsd"])}
    results = {k: run_pipeline(cfg, psi, basis) for k, psi in filters.items()}
    x = results["clsd"].x
    _write_csv(out / "fig9.csv", ["t"] + [f"e_{k}" for k in results],
               [x.t] + [r.error.samples for r in results.values()])
    metrics = {k: r.metrics for k, r in results.items()}
    metrics["weighted_fir_taps"] = wfir.taps.tolist()
    metrics["config"] = cfg.to_dict()
    _dump_json(out / "fig9_metrics.json", metrics)
    m.outputs += ["fig9.csv", "fig9_metrics.json"]
    e = {k: r.metrics["l2_error"] for k, r in results.items()}
    order = [e["weighted_fir"], e["hinf_iir"], e["clsd"]]
    m.checks.append(_flag("ordering weighted_fir < hinf_iir < clsd",
                          order[0] < order[1] < order[2], order))
    rel = ref["tolerances"]["simulation_relative"]
    for k, v in e.items():
        target = sim["l2_error"][k]
        m.checks.append(Check(f"{k} L2 error", v, target, rel, bool(abs(v - target) <= rel * target)))
    return m


_REPRODUCERS = {"table1": _table1, "table2": _table2, "fig5": _fig5, "fig6": _fig6,
                "fig7": _fig7, "fig8": _fig8, "fig9": _fig9}


def reproduce(target: str, out: Path) -> Manifest:
    if target not in _REPRODUCERS:
        raise ValueError(f"unknown target {target!r}")
    out.mkdir(parents=True, exist_ok=True)
    return _REPRODUCERS[target](out, load_reference())


# -- argument handling ----------------------------------------------------------

def _parse_taps(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _weight(args) -> RationalFilter | None:
    if args.weight:
        return RationalFilter.load(args.weight)
    if args.weight_taps:
        return RationalFilter(args.weight_taps)
    return None


def cmd_basis(args, out: Path) -> int:
    b = make_basis(args.order)
    rb = riesz_bounds(b)
    info = {"order": b.order, "lag": b.lag, "sampled_fir": b.sampled_fir.num.tolist(),
            "gram": b.gram().tolist(), "riesz_a": rb.a, "riesz_b": rb.b, "lambda": rb.lam}
    _dump_json(out / f"basis_{b.order}.json", info)
    print(json.dumps(info))
    return 0


def cmd_design(args, out: Path) -> int:
    phi = make_basis(args.order).sampled_fir
    w = _weight(args)
    if args.kind == "cubic":
        if args.order != 3 or w is not None or args.zero:
            raise SystemExit("design cubic: only the unweighted cubic case has a closed form")
        psi = closed_form.optimal_cubic(args.delay)
        gamma = closed_form.optimal_value(args.delay)
        report = {"kind": "cubic", "delay": args.delay, "gamma": gamma}
    else:
        p = FirDesignProblem(args.order, args.taps, args.delay,
                             weight=w if w is not None else RationalFilter([1.0]),
                             zero_constraints=tuple(args.zero or ()))
        try:
            res = design_fir(p)
        except InfeasibleDesignError as exc:
            print(f"infeasible: {exc}", file=sys.stderr)
            return 3
        psi = res.psi
        gamma = res.gamma
        report = {"kind": "fir", "order": args.order, "taps": args.taps, "delay": args.delay,
                  **res.to_dict()}
    check = hinf_norm(error_system(psi, phi, args.delay, w))
    report["hinf_check"] = check
    ok = bool(abs(check - gamma) <= 1e-6 * max(1.0, gamma) + 1e-7)
    report["check_passed"] = ok
    name = args.name or f"psi_{args.kind}_d{args.delay}"
    psi.dump(out / f"{name}.json")
    _dump_json(out / f"{name}_report.json", report)
    print(json.dumps(report))
    return 0 if ok else 1


def cmd_analyze(args, out: Path) -> int:
    phi = make_basis(args.order).sampled_fir
    w = _weight(args)
    cols, names, norms = [], [], []
    theta = None
    for path in args.filters:
        psi = RationalFilter.load(path)
        E = error_system(psi, phi, args.delay, w)
        fr = frequency_response(E, args.grid)
        theta = fr.grid
        cols.append(fr.magnitude_db)
        name = Path(path).stem
        names.append(f"{name}_db")
        J = hinf_norm(E)
        norms.append({"filter": name, "norm": J, "norm_db": 20 * np.log10(J),
                      "stable": bool(np.all(np.abs(psi.poles()) < 1))})
    half = theta <= np.pi
    _write_csv(out / "error_magnitude.csv", ["theta"] + names, [theta[half]] + [c[half] for c in cols])
    _dump_json(out / "error_norms.json", norms)
    for r in norms:
        print(f"{r['filter']}: {r['norm']:.9g} ({r['norm_db']:.4f} dB)")
    return 0


def cmd_simulate(args, out: Path) -> int:
    cfg = SimulationConfig.load(args.config) if args.config else SimulationConfig()
    path = args.filter or cfg.filter
    if path is None:
        raise SystemExit("simulate: no filter given (use --filter or the config's 'filter' key)")
    psi = RationalFilter.load(path)
    res = run_pipeline(cfg, psi, make_basis(args.order))
    res.to_csv(out / "simulation.csv")
    _dump_json(out / "simulation_metrics.json", res.metrics)
    print(json.dumps(res.metrics))
    return 0


def cmd_reproduce(args, out: Path) -> int:
    return _finish(out, reproduce(args.target, out))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hinfspline", description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basis", help="sampled B-spline filter and Riesz bounds")
    p.add_argument("--order", type=int, default=3)
    p.set_defaults(func=cmd_basis)

    def weight_opts(q):
        g = q.add_mutually_exclusive_group()
        g.add_argument("--weight", help="weight filter JSON file")
        g.add_argument("--weight-taps", type=_parse_taps, help="FIR weight, e.g. 0.5,0.5")

    p = sub.add_parser("design", help="design a causal interpolation filter")
    p.add_argument("kind", choices=("cubic", "fir"))
    p.add_argument("--order", type=int, default=3, help="spline order")
    p.add_argument("--taps", type=int, default=5)
    p.add_argument("--delay", type=int, required=True)
    p.add_argument("--zero", type=complex, action="append",
                   help="point where the weighted error must vanish (repeatable)")
    p.add_argument("--name", help="output file stem")
    weight_opts(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("analyze", help="frequency response and norm of the error system")
    p.add_argument("filters", nargs="+")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--delay", type=int, required=True)
    p.add_argument("--grid", type=int, default=1024)
    weight_opts(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="run the reconstruction pipeline")
    p.add_argument("--config")
    p.add_argument("--filter")
    p.add_argument("--order", type=int, default=3)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce", help="regenerate a reference table or figure")
    p.add_argument("target", choices=TARGETS)
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "design" and args.kind == "fir" and args.taps < 1:
        ap.error("--taps must be at least 1")
    if getattr(args, "delay", 0) < 0:
        ap.error("--delay must be non-negative")
    if getattr(args, "grid", 2) < 2:
        ap.error("--grid must be at least 2")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return args.func(args, out)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
