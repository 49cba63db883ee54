"""Batch entry point: scenario runs, verification suites, offline
classification, and propagator reports.

Exit codes: 0 ok, 2 config error, 3 pinch, 4 verification failure,
5 numerical abort.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import analysis, dynamics, propagator
from .field import load_field, zero_field, get_basis
from .geometry import AxisPolynomial, verify_level_set
from .dynamics import GraphState

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PINCH = 3
EXIT_VERIFY = 4
EXIT_ABORT = 5


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "truncation": {"n_y": 24, "k_omega": 4},
    "stepper": {"scheme": "etdrk2", "h": 1e-3, "tau0": 0.0,
                "tau_end": 16.0, "stride": 1.0},
    "decomposition": {"n_max": None, "k_max": None, "cutoff_scale": None},
    "seed": 0,
}

_RANGES = {
    ("truncation", "n_y"): (4, 64),
    ("truncation", "k_omega"): (0, 8),
    ("stepper", "h"): (1e-6, 0.1),
    ("stepper", "tau_end"): (0.0, 200.0),
    ("stepper", "stride"): (1e-3, 100.0),
}


def load_config(path):
    """Parse and validate a JSON run configuration, filling defaults."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc))
    if "scenario" not in raw:
        raise ConfigError("missing field: scenario")
    cfg = {"scenario": raw["scenario"], "seed": raw.get("seed", 0)}
    for section in ("truncation", "stepper", "decomposition"):
        merged = dict(_DEFAULTS[section])
        extra = raw.get(section, {})
        if not isinstance(extra, dict):
            raise ConfigError("field %s must be an object" % section)
        for key in extra:
            if key not in merged:
                raise ConfigError("unknown field: %s.%s" % (section, key))
        merged.update(extra)
        cfg[section] = merged
    for (section, key), (lo, hi) in _RANGES.items():
        val = cfg[section][key]
        if not (lo <= val <= hi):
            raise ConfigError("field %s.%s = %r outside [%g, %g]"
                              % (section, key, val, lo, hi))
    if not isinstance(cfg["seed"], int):
        raise ConfigError("field seed must be an integer")
    return cfg


def build_initial_state(cfg):
    """Initial GraphState and gauge list for a scenario config."""
    sc = cfg["scenario"]
    if isinstance(sc, str):
        sc = {"name": sc}
    name = sc.get("name")
    n_y = cfg["truncation"]["n_y"]
    k_omega = cfg["truncation"]["k_omega"]
    xi = zero_field(n_y, k_omega)
    axis = AxisPolynomial({}, T=1.0)
    gauge = [(0, 0, 1), (1, 0, 1)]
    if name == "cylinder":
        pass
    elif name == "nondegenerate":
        if "b0" not in sc:
            raise ConfigError("scenario nondegenerate requires field b0")
        xi.coeffs[2, 0] = float(sc["b0"])
    elif name == "degenerate":
        if "m" not in sc or "amplitude" not in sc:
            raise ConfigError("scenario degenerate requires fields "
                              "m and amplitude")
        m = int(sc["m"])
        if not 3 <= m <= n_y:
            raise ConfigError("scenario field m = %r outside [3, %d]"
                              % (sc["m"], n_y))
        xi.coeffs[m, 0] = float(sc["amplitude"])
        # The pure mode-m regime needs the slower radial directions held
        # at zero; release them and the neutral quadratic mode takes over.
        gauge = [(n, 0, 1) for n in range(m)]
    elif name == "curved_axis":
        spec = sc.get("axis")
        if not isinstance(spec, dict) or not spec:
            raise ConfigError("scenario curved_axis requires field axis "
                              "{degree: [4 reals]}")
        try:
            axis = AxisPolynomial({int(n): np.asarray(v, dtype=float)
                                   for n, v in spec.items()}, T=1.0)
        except (TypeError, ValueError) as exc:
            raise ConfigError("scenario field axis: %s" % exc)
    elif name == "custom":
        if "field" not in sc:
            raise ConfigError("scenario custom requires field 'field'")
        loaded, tau0 = load_field(sc["field"])
        if loaded.n_y > n_y or loaded.k_omega > k_omega:
            raise ConfigError("custom field exceeds the configured "
                              "truncation")
        xi.coeffs[:loaded.coeffs.shape[0], :loaded.coeffs.shape[1]] = \
            loaded.coeffs
    else:
        raise ConfigError("unknown scenario name: %r" % name)
    tau0 = cfg["stepper"]["tau0"]
    return GraphState(tau0, axis, xi), gauge


def cmd_run(args):
    try:
        cfg = load_config(args.config)
        state, gauge = build_initial_state(cfg)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    st = cfg["stepper"]
    schedule = {
        "tau_end": st["tau_end"],
        "h": st["h"],
        "scheme": st["scheme"],
        "snapshot_stride": st["stride"],
        "cutoff_scale": cfg["decomposition"]["cutoff_scale"],
        "gauge": cfg["scenario"].get("gauge", gauge)
        if isinstance(cfg["scenario"], dict) else gauge,
        "seed": cfg["seed"],
    }
    record = dynamics.evolve(state, schedule, run_dir=args.out)
    with open(os.path.join(args.out, "config.json"), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)

    traj = analysis.ModeTrajectory.from_record(record)
    report = _classify_or_plateau(traj)
    with open(os.path.join(args.out, "classification.json"), "w") as fh:
        json.dump(report, fh, indent=2)

    if record["status"] == "pinch":
        print("pinch: %s" % record["error"], file=sys.stderr)
        return EXIT_PINCH
    if record["status"] == "abort":
        print("abort: %s" % record["error"], file=sys.stderr)
        return EXIT_ABORT
    print("run complete: %s (verdict: %s)" % (args.out, report["verdict"]))
    return EXIT_OK


def _classify_or_plateau(traj):
    """Full classification when the horizon allows it, else a plateau
    report for the tracked radial modes."""
    try:
        return analysis.classify(traj).to_dict()
    except ValueError as exc:
        taus = traj.taus
        plateaus = {}
        for (n, k, l), a in sorted(traj.alpha.items()):
            if k == 0 and l == 1 and n >= 3:
                rate = (n - 2) / 2.0
                plateaus["alpha_%d_%d_%d" % (n, k, l)] = \
                    list(a * np.exp(rate * taus))
        return {"verdict": "Unavailable", "reason": str(exc),
                "plateau_report": plateaus}


def cmd_classify(args):
    try:
        with open(args.trajectory) as fh:
            lines = fh.readlines()
    except OSError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    if len(lines) < 2:
        print("config error: %s: empty trajectory" % args.trajectory,
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        traj = analysis.ModeTrajectory.from_csv(args.trajectory)
    except ValueError as exc:
        # locate the offending line for the parse report
        lineno = 0
        for i, line in enumerate(lines[1:], start=2):
            try:
                [float(x) for x in line.split(",")]
            except ValueError:
                lineno = i
                break
        print("config error: %s line %d: %s"
              % (args.trajectory, lineno, exc), file=sys.stderr)
        return EXIT_CONFIG
    report = _classify_or_plateau(traj)
    out = args.out or os.path.join(os.path.dirname(args.trajectory) or ".",
                                   "classification.json")
    with open(out, "w") as fh:
        json.dump(report, fh, indent=2)
    print("verdict: %s -> %s" % (report["verdict"], out))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Verification suites
# ---------------------------------------------------------------------------

def _verify_basis(seed):
    checks = []
    basis = get_basis(10, 4)
    spec = dynamics.linear_operator_spec(10, 4)
    worst = 0.0
    for n in range(11):
        for f in range(basis.n_harm()):
            fld = zero_field(10, 4)
            fld.coeffs[n, f] = 1.0
            vals = basis.synthesize(fld)
            lap = basis.laplace_s3(fld)
            dy = basis.diff_y(basis.diff_y(fld))
            ydy = basis.analyze(basis.grid.y_nodes[:, None]
                                * basis.synthesize(basis.diff_y(fld)))
            Lc = (-dy.coeffs - lap.coeffs / 6.0 + 0.5 * ydy.coeffs
                  - fld.coeffs)
            expect = spec.rates[n, f] * fld.coeffs
            worst = max(worst, np.abs(Lc - expect).max())
            del vals
    checks.append(("eigenvalue residual", worst, 1e-8))
    G = np.einsum("fq,q,gq->fg", basis.Hs, basis.grid.s3_weights, basis.Hs)
    checks.append(("harmonic orthonormality",
                   np.abs(G / G[0, 0] * basis.harm_norms[0]
                          - np.diag(basis.harm_norms)).max()
                   / basis.harm_norms.max(), 1e-10))
    return checks


def _verify_appendix_a(seed):
    rng = np.random.default_rng(seed)
    kf = klf = tf = 0.0
    for _ in range(100):
        amp = rng.uniform(0.01, 0.05)
        freq = rng.uniform(0.3, 1.0, size=3)
        phase = rng.uniform(0, 2 * np.pi, size=3)
        vec = rng.normal(size=(2, 4))
        vec *= 0.02 / max(np.abs(vec).sum(), 1e-12)
        T = 1.0
        t = rng.uniform(0.1, 0.5)
        axis = AxisPolynomial({2: vec[0], 3: vec[1]}, T=T)

        def u_fn(z, omega, t, amp=amp, freq=freq, phase=phase, T=T):
            z = np.asarray(z, dtype=float)
            om = np.asarray(omega, dtype=float)
            base = np.sqrt(6.0 * (T - t))
            return (base + amp * np.sin(freq[0] * z + phase[0])
                    + 0.5 * amp * np.cos(freq[1] * z + phase[1]) * om[..., 0]
                    + 0.3 * amp * np.sin(freq[2] * z + phase[2])
                    * om[..., 1] * om[..., 2])

        om = rng.normal(size=(2, 4))
        om /= np.linalg.norm(om, axis=1, keepdims=True)
        z = rng.uniform(-0.5, 0.5, size=(2, 1))
        pts = np.concatenate([z, om], axis=1)
        res = verify_level_set(u_fn, axis, pts, t)
        kf = max(kf, res["kf"])
        klf = max(klf, res["klf"])
        tf = max(tf, res["tf"])
    return [("second-form trace identity", kf, 1e-6),
            ("second-form component identity", klf, 1e-4),
            ("time-derivative identity", tf, 1e-5)]


def _verify_propagator(seed):
    grid = propagator.build_grid()
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(10):
        c = rng.normal(size=12) / np.arange(1, 13)
        g = propagator.synthesize(
            grid, np.concatenate([c, np.zeros(grid.k_max - 11)]))
        m = propagator.mehler_apply(g, 1.2, grid)
        e = propagator.eigensum_apply(g, 1.2, grid)
        err = max(err, float(np.abs(m - e).max()))
    checks = [("mehler vs eigensum", err, 1e-8)]
    rows = propagator.decay_battery(grid=grid)
    margin = min(row["margin"] for row in rows)
    checks.append(("projected decay margin", -margin, 0.1))
    return checks


def _verify_normal_form(seed):
    from . import normal_form
    checks = []
    xi = zero_field(16, 4)
    basis = get_basis(16, 4)
    xi.coeffs[2, basis.flat_index(1, 1)] = 1e-2
    state = GraphState(0.0, AxisPolynomial({}, 1.0), xi)
    ident = normal_form.reparametrize(state, AxisPolynomial({}, 1.0))
    checks.append(("identity reparametrization",
                   float(np.abs(ident.xi.coeffs - xi.coeffs).max()), 1e-12))
    fit = normal_form.fit_axis(state, 2)
    reduction = np.abs(fit.pre).max() / max(np.abs(fit.post).max(), 1e-300)
    checks.append(("fit residual reduction shortfall",
                   max(0.0, 1e3 - reduction), 0.5))
    back = normal_form.reparametrize(fit.state, state.axis)
    checks.append(("round-trip residual",
                   float(np.abs(back.xi.coeffs - xi.coeffs).max()), 1e-8))
    return checks


_SUITES = {
    "basis": _verify_basis,
    "appendix-a": _verify_appendix_a,
    "propagator": _verify_propagator,
    "normal-form": _verify_normal_form,
}


def cmd_verify(args):
    if args.suite not in _SUITES:
        print("config error: unknown suite %r (choices: %s)"
              % (args.suite, ", ".join(sorted(_SUITES))), file=sys.stderr)
        return EXIT_CONFIG
    checks = _SUITES[args.suite](args.seed)
    failed = False
    for name, measured, threshold in checks:
        ok = measured < threshold
        failed = failed or not ok
        print("%-40s %-4s measured %.6g threshold %.6g"
              % (name, "ok" if ok else "FAIL", measured, threshold))
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_propagator(args):
    if args.potential not in propagator.POTENTIALS:
        print("config error: unknown potential %r (choices: %s)"
              % (args.potential, ", ".join(propagator.POTENTIALS)),
              file=sys.stderr)
        return EXIT_CONFIG
    grid = propagator.build_grid()
    name = args.potential
    rows = [row for row in
            propagator.decay_battery(n_values=(args.n,), grid=grid)
            if row["potential"] == name]
    out = args.out or "decay_report.csv"
    propagator.write_decay_report(rows, out)
    for row in rows:
        print("%-12s rate %.6f bound %.3f margin %+.6f"
              % (row["test"], row["rate"], row["bound"], row["margin"]))
    if min(row["margin"] for row in rows) < -0.1:
        return EXIT_VERIFY
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="mcflab",
        description="Rescaled graph-flow runs, verification suites, and "
                    "propagator reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario run")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default="run")

    p_ver = sub.add_parser("verify", help="run a verification suite")
    p_ver.add_argument("suite")
    p_ver.add_argument("--seed", type=int, default=0)

    p_cls = sub.add_parser("classify", help="classify a trajectory file")
    p_cls.add_argument("trajectory")
    p_cls.add_argument("--out", default=None)

    p_pr = sub.add_parser("propagator", help="write a decay report")
    p_pr.add_argument("--n", type=int, required=True)
    p_pr.add_argument("--potential", required=True)
    p_pr.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "verify": cmd_verify,
                "classify": cmd_classify, "propagator": cmd_propagator}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
