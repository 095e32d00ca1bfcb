"""Experiment driver.

Subcommands map onto the library modules: lyapunov, phase-diagram,
green-decay, dynamics, eigen, diagnostics, validate-disorder.  Every output
file embeds a header with the config hash, base seed and package version;
reruns with identical config and seed are byte-identical.

Exit codes: 0 ok, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__, dynamics, greens, lyapunov, svgplot
from .disorder import DistributionSpec, sample_path, validate_assumptions
from .errors import ConfigError, DiracChainError, ExcludedK, NumericalFailure
from .model import BoxDescriptor, ModelParams, assemble_operator, energy_context
from .prufer import martingale_diagnostics

DEFAULT_CONFIG = {
    "model": {"m": 0.0, "lambda": 0.3, "alpha": 0.5},
    "distribution": {"family": "gaussian"},
    "energies": {"start": 0.2, "stop": 1.8, "count": 20},
    "sizes": {"N": 100000, "L": 400, "M": 100},
    "seeds": {"base": 1, "replicas": 20},
    "probes": {
        "s": 0.1,
        "u": 1,
        "p": 2,
        "kappas": [0.2, 0.4, 0.6],
        "window": [0.8, 1.2],
        "n_grid": [40, 80, 120, 160, 200, 240, 280, 320],
        "lambda_grid": {"start": 0.05, "stop": 1.2, "count": 24},
        "horizon": 200.0,
    },
    "output": {"dir": "out", "format": "csv"},
}


def _merge(base, override):
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


class ExperimentConfig:
    """Validated view over the config dict; canonical form is sorted JSON."""

    def __init__(self, data):
        self.data = _merge(DEFAULT_CONFIG, data)
        self._validate()

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError("cannot read config: %s" % exc) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(
                "config parse error at line %d column %d: %s"
                % (exc.lineno, exc.colno, exc.msg)
            ) from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        return cls(data)

    def _req(self, section, key, types, check=None, msg=""):
        try:
            val = self.data[section][key]
        except KeyError:
            raise ConfigError("missing config entry %s.%s" % (section, key))
        if not isinstance(val, types) or isinstance(val, bool):
            raise ConfigError("%s.%s has wrong type" % (section, key))
        if check is not None and not check(val):
            raise ConfigError("%s.%s %s (got %r)" % (section, key, msg, val))
        return val

    def _validate(self):
        num = (int, float)
        self._req("model", "m", num, lambda v: v >= 0, "must be >= 0")
        self._req("model", "lambda", num, lambda v: v >= 0, "must be >= 0")
        self._req("model", "alpha", num, lambda v: v > 0, "must be > 0")
        fam = self._req("distribution", "family", str)
        if fam not in ("gaussian", "uniform", "rademacher", "student_like"):
            raise ConfigError("distribution.family %r unknown" % fam)
        for key in ("N", "L", "M"):
            self._req("sizes", key, int, lambda v: v >= 1, "must be >= 1")
        self._req("seeds", "base", int, lambda v: v >= 0, "must be >= 0")
        self._req("seeds", "replicas", int, lambda v: v >= 1, "must be >= 1")
        fmt = self.data["output"].get("format", "csv")
        if fmt not in ("csv", "svg", "both"):
            raise ConfigError("output.format must be csv, svg or both")
        if len(self.energies()) == 0:
            raise ConfigError("energies grid is empty")

    # -- accessors ---------------------------------------------------------
    def params(self):
        md = self.data["model"]
        return ModelParams(m=md["m"], lam=md["lambda"], alpha=md["alpha"])

    def spec(self):
        return DistributionSpec(self.data["distribution"]["family"])

    def energies(self):
        eg = self.data["energies"]
        if "values" in eg:
            return [float(v) for v in eg["values"]]
        count = int(eg.get("count", 0))
        if count <= 0:
            return []
        return list(np.linspace(float(eg["start"]), float(eg["stop"]), count))

    def lambda_grid(self):
        lg = self.data["probes"].get("lambda_grid", {})
        if "values" in lg:
            return [float(v) for v in lg["values"]]
        return list(
            np.linspace(float(lg["start"]), float(lg["stop"]), int(lg["count"]))
        )

    def canonical(self):
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]


def _csv_quote(field):
    text = str(field)
    if any(ch in text for ch in ',"\n\r'):
        return '"' + text.replace('"', '""') + '"'
    return text


def _cell(v):
    # repr of the Python float is the shortest round-trip form
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


class OutputWriter:
    def __init__(self, config, seed, out_dir, fmt):
        self.config = config
        self.seed = seed
        self.dir = out_dir
        self.fmt = fmt
        os.makedirs(out_dir, exist_ok=True)
        self.written = []

    def header(self):
        return "config=%s seed=%d version=diracdecay-%s" % (
            self.config.hash(),
            self.seed,
            __version__,
        )

    def want_csv(self):
        return self.fmt in ("csv", "both")

    def want_svg(self):
        return self.fmt in ("svg", "both")

    def csv(self, name, columns, rows):
        path = os.path.join(self.dir, name)
        with open(path, "w", newline="") as fh:
            fh.write("# %s\n" % self.header())
            fh.write(",".join(_csv_quote(c) for c in columns) + "\n")
            for row in rows:
                fh.write(",".join(_csv_quote(_cell(v)) for v in row) + "\n")
        self.written.append(path)
        return path

    def json(self, name, payload):
        path = os.path.join(self.dir, name)
        with open(path, "w", newline="") as fh:
            json.dump(
                {"provenance": self.header(), **payload},
                fh,
                sort_keys=True,
                indent=1,
                default=_jsonify,
            )
            fh.write("\n")
        self.written.append(path)
        return path

    def svg(self, name, series, **kwargs):
        path = os.path.join(self.dir, name)
        svgplot.svg_plot(path, series, comment=self.header(), **kwargs)
        self.written.append(path)
        return path


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError("cannot serialize %r" % type(obj))


# -- subcommands -----------------------------------------------------------


def cmd_lyapunov(config, writer, threads):
    params = config.params()
    if params.alpha > 0.5:
        raise ConfigError("lyapunov estimation needs alpha <= 1/2")
    spec = config.spec()
    N = config.data["sizes"]["N"]
    M = config.data["sizes"]["M"]
    rows = []
    closed_E, closed_val = [], []
    est_E, est_val = [], []
    for E in config.energies():
        ctx = energy_context(E, params.m)
        beta_c = lyapunov.beta_closed_form(ctx, params.lam)
        try:
            est = lyapunov.estimate_beta(
                ctx, params, spec, N, M, writer.seed, threads=threads
            )
            beta_hat, err = est.beta_hat, est.stderr
        except ExcludedK:
            beta_hat, err = float("nan"), float("nan")
        rows.append((E, params.lam, beta_c, beta_hat, err, N, M))
        closed_E.append(E)
        closed_val.append(beta_c)
        if not math.isnan(beta_hat):
            est_E.append(E)
            est_val.append(beta_hat)
    if writer.want_csv():
        writer.csv(
            "lyapunov.csv",
            ("E", "lambda", "beta_closed", "beta_hat", "stderr", "N", "M"),
            rows,
        )
    if writer.want_svg():
        writer.svg(
            "lyapunov.svg",
            [
                {"kind": "line", "x": closed_E, "y": closed_val, "label": "closed form"},
                {"kind": "points", "x": est_E, "y": est_val, "label": "estimate"},
            ],
            title="Lyapunov exponent",
            xlabel="E",
            ylabel="beta",
        )


PHASE_COLORS = {"ac": "#4c9edb", "pp": "#d98032", "sc": "#3fae6a", "outside_band": "#dddddd"}


def cmd_phase_diagram(config, writer, threads):
    params = config.params()
    rows = []
    cx, cy, cc = [], [], []
    for lam in config.lambda_grid():
        p = ModelParams(m=params.m, lam=float(lam), alpha=params.alpha)
        for E in config.energies():
            rep = lyapunov.classify(p, E)
            rows.append((params.m, lam, E, rep.alpha_class, rep.spectral_type))
            cx.append(E)
            cy.append(lam)
            cc.append(PHASE_COLORS[rep.spectral_type])
    if writer.want_csv():
        writer.csv(
            "phase_diagram.csv",
            ("m", "lambda", "E", "alpha_class", "spectral_type"),
            rows,
        )
    if writer.want_svg():
        series = [
            {
                "kind": "cells",
                "x": cx,
                "y": cy,
                "colors": cc,
                "cell_w": 9.0,
                "cell_h": 9.0,
            }
        ]
        if params.m > 0:
            lam_star, _ = lyapunov.lambda_critical(params.m)
            es = [E for E in config.energies() if lyapunov.in_band_interior(E, params.m)]
            series.append(
                {
                    "kind": "line",
                    "x": es,
                    "y": [lyapunov.lambda_coupling_curve(abs(E), params.m) for E in es],
                    "color": "#111111",
                    "label": "lambda_m(E)",
                }
            )
            series.append(
                {
                    "kind": "line",
                    "x": [min(es), max(es)],
                    "y": [lam_star, lam_star],
                    "color": "#999999",
                    "label": "lambda*",
                }
            )
        writer.svg(
            "phase_diagram.svg",
            series,
            title="Spectral phase diagram (alpha = %g)" % params.alpha,
            xlabel="E",
            ylabel="lambda",
        )


def cmd_green_decay(config, writer, threads):
    params = config.params()
    if params.alpha >= 0.5:
        raise ConfigError("green-decay scan needs alpha < 1/2")
    spec = config.spec()
    pr = config.data["probes"]
    L = config.data["sizes"]["L"]
    M = config.data["sizes"]["M"]
    E = pr.get("E", config.energies()[0])
    n_grid = [int(n) for n in pr["n_grid"]]
    fm = greens.fractional_moment_scan(
        params, spec, E, int(pr["u"]), float(pr["s"]), n_grid, L, M,
        writer.seed, threads=threads, require_decay=False,
    )
    neg = greens.negative_moment_scan(
        params, spec, E, int(pr["u"]), 0.05, n_grid, M, writer.seed, threads=threads
    )
    if writer.want_csv():
        writer.csv(
            "green_decay.csv",
            ("n", "mean_abs_G_pow_s", "stderr", "s", "alpha", "lambda", "E", "L", "M"),
            [
                (int(n), v, sev, fm.s, params.alpha, params.lam, E, L, M)
                for n, v, sev in zip(fm.n_grid, fm.values, fm.stderr)
            ],
        )
        writer.csv(
            "negative_moments.csv",
            ("n", "mean_negative_moment", "stderr", "s", "alpha", "lambda", "E", "M"),
            [
                (int(n), v, sev, neg.s, params.alpha, params.lam, E, M)
                for n, v, sev in zip(neg.n_grid, neg.values, neg.stderr)
            ],
        )
    writer.json(
        "green_decay_fit.json",
        {
            "fractional_moments": {
                "slope": fm.slope,
                "c_hat": fm.c_hat,
                "r2": fm.r2,
                "slope_ci": fm.slope_ci,
                "resamples": fm.resamples,
            },
            "negative_moments": {
                "slope": neg.slope,
                "r2": neg.r2,
                "slope_ci": neg.slope_ci,
            },
            "regressor": "n^(1-2*alpha)",
        },
    )
    if writer.want_svg():
        x = [float(n) ** (1.0 - 2.0 * params.alpha) for n in fm.n_grid]
        writer.svg(
            "green_decay.svg",
            [
                {
                    "kind": "points",
                    "x": x,
                    "y": list(np.log(fm.values)),
                    "label": "log E|G|^s",
                },
                {
                    "kind": "line",
                    "x": x,
                    "y": [fm.intercept + fm.slope * xi for xi in x],
                    "label": "fit",
                },
            ],
            title="Fractional-moment decay",
            xlabel="n^(1-2a)",
            ylabel="log E|G|^s",
        )


def cmd_dynamics(config, writer, threads):
    params = config.params()
    spec = config.spec()
    pr = config.data["probes"]
    L = config.data["sizes"]["L"]
    window = tuple(pr["window"])
    horizon = float(pr["horizon"])
    p = int(pr["p"])
    kappas = tuple(float(kp) for kp in pr["kappas"])
    path = sample_path(params, spec, L, writer.seed)
    box = BoxDescriptor("LambdaPrime", L)
    dec = dynamics.diagonalize(assemble_operator(params, path, box))
    psi0 = dynamics.delta_state(box, 1, "-")
    psi0 = dynamics.project_to_window(dec, psi0, window)
    times = np.linspace(0.0, horizon, 200)
    radii = (L // 4, L // 2)
    trace = dynamics.evolve(
        dec, psi0, times, dynamics.Probes(moments=(p,), radii=radii, kappas=kappas)
    )
    if writer.want_csv():
        cols = (
            ["t", "norm", "moment_p%d" % p]
            + ["tail_R%d" % R for R in radii]
            + ["log_stretched_k%g" % kp for kp in kappas]
        )
        rows = []
        for i, t in enumerate(times):
            row = [t, float(trace.norms[i]), float(trace.moments[p][i])]
            row += [float(trace.survival[R][i]) for R in radii]
            row += [float(trace.log_stretched[kp][i]) for kp in kappas]
            rows.append(tuple(row))
        writer.csv("dynamics_trace.csv", cols, rows)
    half = trace.moments[p][: len(times) // 2]
    full = trace.moments[p]
    writer.json(
        "dynamics_fit.json",
        {
            "p": p,
            "window": window,
            "sup_half_horizon": float(np.max(half)),
            "sup_full_horizon": float(np.max(full)),
            "horizon_growth": float(np.max(full) / max(np.max(half), 1e-300) - 1.0),
        },
    )
    if writer.want_svg():
        writer.svg(
            "dynamics.svg",
            [
                {
                    "kind": "line",
                    "x": list(times),
                    "y": [float(v) for v in trace.moments[p]],
                    "label": "moment p=%d" % p,
                }
            ],
            title="Position moment",
            xlabel="t",
            ylabel="<|X|^p>",
        )


def cmd_eigen(config, writer, threads):
    params = config.params()
    if params.alpha >= 0.5:
        raise ConfigError("eigenfunction decay fits need alpha < 1/2")
    spec = config.spec()
    pr = config.data["probes"]
    L = config.data["sizes"]["L"]
    window = tuple(pr["window"])
    seeds = [writer.seed + i for i in range(config.data["seeds"]["replicas"])]
    path = sample_path(params, spec, L, writer.seed)
    box = BoxDescriptor("LambdaPrime", L)
    dec = dynamics.diagonalize_window(
        assemble_operator(params, path, box), window[0], window[1]
    )
    if writer.want_csv():
        writer.csv(
            "spectra.csv",
            ("index", "eigenvalue"),
            [(i, float(E)) for i, E in enumerate(dec.eigenvalues)],
        )
        if dec.count:
            j = int(np.argmin(np.abs(dec.eigenvalues - 0.5 * (window[0] + window[1]))))
            vec = dec.eigenvectors[:, j]
            norms = np.sqrt(vec[0::2] ** 2 + vec[1::2] ** 2)
            sn = np.cumsum(np.arange(1, L + 1, dtype=float) ** (-2.0 * params.alpha))
            writer.csv(
                "profile.csv",
                ("n", "log_norm", "s_n"),
                [
                    (n + 1, float(np.log(max(norms[n], 1e-300))), float(sn[n]))
                    for n in range(L)
                ],
            )
    report = dynamics.eigenfunction_profile(
        params, spec, window, L, seeds, threads=threads
    )
    writer.json(
        "eigen_fit.json",
        {
            "median_ratio_err": report.median_ratio_err,
            "pairs": len(report.rows),
            "window": window,
            "L": L,
            "slopes": [
                {"E": r.E, "slope": r.slope, "beta": r.beta, "r2": r.r2,
                 "center": r.center}
                for r in report.rows
            ],
        },
    )
    if writer.want_svg() and dec.count:
        j = int(np.argmin(np.abs(dec.eigenvalues - 0.5 * (window[0] + window[1]))))
        vec = dec.eigenvectors[:, j]
        norms = np.log(np.maximum(np.sqrt(vec[0::2] ** 2 + vec[1::2] ** 2), 1e-300))
        writer.svg(
            "eigen_profile.svg",
            [{"kind": "line", "x": list(range(1, L + 1)), "y": list(norms)}],
            title="Eigenfunction profile (E=%.4f)" % dec.eigenvalues[j],
            xlabel="n",
            ylabel="log ||Phi_n||",
        )


def cmd_diagnostics(config, writer, threads):
    params = config.params()
    if params.alpha > 0.5:
        raise ConfigError("martingale diagnostics need alpha <= 1/2")
    spec = config.spec()
    N = config.data["sizes"]["N"]
    replicas = config.data["seeds"]["replicas"]
    E = config.data["probes"].get("E", config.energies()[0])
    ctx = energy_context(E, params.m)
    rows = []
    refusals = []
    for r in range(replicas):
        path = sample_path(params, spec, N, writer.seed, replica=r)
        try:
            rep = martingale_diagnostics(ctx, path, N)
        except ExcludedK as exc:
            refusals.append({"replica": r, "reason": str(exc)})
            break
        rows.append(
            (r, rep.log_r2, rep.drift)
            + tuple(float(m) for m in rep.martingales)
            + (rep.Q1, rep.Q2, rep.residual, rep.s_n)
        )
    if writer.want_csv() and rows:
        writer.csv(
            "diagnostics.csv",
            ("replica", "log_r2", "drift", "M1", "M2", "M3", "M4", "M5", "M6",
             "Q1", "Q2", "residual", "s_n"),
            rows,
        )
    payload = {"E": E, "N": N, "replicas": len(rows), "refusals": refusals}
    if rows:
        arr = np.asarray([list(r)[1:] for r in rows], dtype=float)
        s_n = arr[0, -1]
        maxM = np.max(np.abs(arr[:, 2:8]), axis=1) / s_n
        maxQ = np.max(np.abs(arr[:, 8:10]), axis=1) / s_n
        payload["fraction_mart_below_0.05"] = float(np.mean(maxM < 0.05))
        payload["fraction_phase_below_0.1"] = float(np.mean(maxQ < 0.1))
    writer.json("diagnostics.json", payload)


def cmd_validate_disorder(config, writer, threads):
    report = validate_assumptions(
        config.spec(), config.params(), M=max(config.data["sizes"]["M"], 10_000),
        seed=writer.seed,
    )
    writer.json("disorder_validation.json", report)


COMMANDS = {
    "lyapunov": cmd_lyapunov,
    "phase-diagram": cmd_phase_diagram,
    "green-decay": cmd_green_decay,
    "dynamics": cmd_dynamics,
    "eigen": cmd_eigen,
    "diagnostics": cmd_diagnostics,
    "validate-disorder": cmd_validate_disorder,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="diracdecay",
        description="Spectral / dynamical experiments for the disordered Dirac chain",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="override seeds.base")
    parser.add_argument("--out", help="override output.dir")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--format", choices=("csv", "svg", "both"))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = (
            ExperimentConfig.from_file(args.config)
            if args.config
            else ExperimentConfig({})
        )
        seed = args.seed if args.seed is not None else config.data["seeds"]["base"]
        out_dir = args.out or config.data["output"]["dir"]
        fmt = args.format or config.data["output"]["format"]
        writer = OutputWriter(config, seed, out_dir, fmt)
        COMMANDS[args.command](config, writer, args.threads)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except (NumericalFailure, DiracChainError) as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return 3
    for path in writer.written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
