"""Monte-Carlo sweeps over random channels, written out as CSV.

One work unit is (trial, sweep point); it runs every scheme of the experiment
on the same channel draw.  Rows are always emitted in (trial, sweep, scheme)
order, whatever the completion order of the workers.

Metric columns: for robust designs ``rate`` and ``min_energy`` hold the
worst-case guaranteed values returned by the solver; the ``mismatch`` schemes
hold the value of a non-robust design on a perturbed "true" channel; every
other scheme reports the value achieved on the channel it was designed for.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from . import an, noan
from .channel import (
    BeamformerSolution,
    ChannelSet,
    Kind,
    SystemParams,
    UncertaintyModel,
    db_to_linear,
    generate_channels,
    harvested_energy,
    sample_uncertainty_ball,
    secrecy_rate,
)
from .conic import Status
from .verify import sdr_solution

EXPERIMENTS = (
    "fig1-rate-vs-power",
    "fig2-energy-vs-power",
    "fig3-energy-vs-eps",
    "fig4-an-rate-vs-power",
    "fig5-sca-convergence",
    "fig5b-rate-vs-eta",
    "fig6-an-power-fraction",
    "custom",
)

_AN_SCHEMES = (
    "ls-an", "ls-noan", "sca-an", "sca-noan",
    "robust-ls-an", "robust-ls-noan", "robust-sca-an", "robust-sca-noan",
)

DEFAULT_SCHEMES = {
    "fig1-rate-vs-power": ("bisection", "sdr", "robust-bisection", "mismatch-bisection"),
    "fig2-energy-vs-power": ("energy-max", "robust-energy-max", "mismatch-energy-max"),
    "fig3-energy-vs-eps": ("energy-max", "robust-energy-max", "mismatch-energy-max"),
    "fig4-an-rate-vs-power": _AN_SCHEMES,
    "fig5-sca-convergence": ("sca-an", "ls-an", "two-dim"),
    "fig5b-rate-vs-eta": _AN_SCHEMES,
    "fig6-an-power-fraction": ("ls-an-eh", "ls-an-no-eh"),
}

SWEEP = {
    "fig1-rate-vs-power": "power_dB",
    "fig2-energy-vs-power": "power_dB",
    "fig3-energy-vs-eps": "eps",
    "fig4-an-rate-vs-power": "power_dB",
    "fig5-sca-convergence": "power_dB",
    "fig5b-rate-vs-eta": "eta",
    "fig6-an-power-fraction": "power_dB",
    "custom": "power_dB",
}

ROW_FIELDS = (
    "experiment", "trial_seed", "sweep_value", "scheme", "rate", "min_energy",
    "an_fraction", "iterations", "solve_time", "status", "trace",
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    n_t: int = 4
    K: int = 3
    L: int = 2
    power_grid_dB: list = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0])
    eps_grid: list = field(default_factory=lambda: [0.0, 0.02, 0.05, 0.1])
    eta_grid: list = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.3])
    trials: int = 50
    seed: int = 0
    P_dB: float = 20.0  # fixed power for sweeps over eps or eta
    eps: float = 0.05  # fixed radius for sweeps over power or eta
    eta: float = 0.1  # E_l = eta P
    R_target: float = 0.5  # rate target of the energy experiments, bits
    per_antenna: bool = True
    schemes: list = field(default_factory=list)  # empty: the experiment's default set
    # solver options passed through
    linesearch_points: int = 100
    refine: str = "grid"
    refine_points: int = 20
    sca_tol: float = 1e-4
    sca_max_iter: int = 50
    two_dim_points: int = 30
    bisection_tol: float = 1e-3
    tau_points: int = 200

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: unknown experiment {self.experiment!r}")
        for name in ("n_t", "K", "L", "trials", "linesearch_points", "sca_max_iter", "two_dim_points", "tau_points"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name}: must be an integer >= 1, got {v!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed: must be a nonnegative integer, got {self.seed!r}")
        if isinstance(self.refine_points, bool) or not isinstance(self.refine_points, int) or self.refine_points < 0:
            raise ConfigError(f"refine_points: must be a nonnegative integer, got {self.refine_points!r}")
        for name in ("power_grid_dB", "eps_grid", "eta_grid"):
            v = getattr(self, name)
            if not isinstance(v, list) or not v:
                raise ConfigError(f"{name}: must be a nonempty list")
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in v):
                raise ConfigError(f"{name}: entries must be finite numbers")
            setattr(self, name, [float(x) for x in v])
        if any(x < 0 for x in self.eps_grid) or any(x < 0 for x in self.eta_grid):
            raise ConfigError("eps_grid/eta_grid: entries must be nonnegative")
        for name in ("P_dB", "eps", "eta", "R_target", "sca_tol", "bisection_tol"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{name}: must be a finite number, got {v!r}")
            setattr(self, name, float(v))
        for name in ("eps", "eta", "R_target"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}: must be nonnegative")
        for name in ("sca_tol", "bisection_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive")
        if self.refine not in ("grid", "brent"):
            raise ConfigError(f"refine: must be 'grid' or 'brent', got {self.refine!r}")
        if not isinstance(self.per_antenna, bool):
            raise ConfigError("per_antenna: must be a boolean")
        if not isinstance(self.schemes, list) or not all(isinstance(s, str) for s in self.schemes):
            raise ConfigError("schemes: must be a list of scheme names")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"schemes: unknown scheme(s) {bad}")
        if self.experiment == "custom" and not self.schemes:
            raise ConfigError("schemes: a custom experiment needs an explicit scheme list")

    # -- derived --------------------------------------------------------------
    @property
    def scheme_list(self):
        return list(self.schemes) if self.schemes else list(DEFAULT_SCHEMES[self.experiment])

    @property
    def sweep_name(self):
        return SWEEP[self.experiment]

    @property
    def sweep_values(self):
        return {"power_dB": self.power_grid_dB, "eps": self.eps_grid, "eta": self.eta_grid}[self.sweep_name]

    def an_options(self):
        return an.AnOptions(
            linesearch_points=self.linesearch_points, refine_points=self.refine_points, refine=self.refine,
            sca_tol=self.sca_tol, sca_max_iter=self.sca_max_iter, two_dim_points=self.two_dim_points,
        )

    def noan_options(self):
        return noan.NoAnOptions(bisection_tol=self.bisection_tol, tau_points=self.tau_points)

    def to_dict(self):
        return dataclasses.asdict(self)


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    base = {}
    if experiment == "fig5-sca-convergence":
        base["power_grid_dB"] = [0.0, 10.0, 20.0, 30.0]
    base.update(overrides)
    return ExperimentConfig(experiment=experiment, **base)


# -- config files -------------------------------------------------------------------

def _parse(text):
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        # the message ends with "(at line L, column C)"
        raise ConfigError(f"parse error: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key" + (f" (also {unknown[1:]})" if len(unknown) > 1 else ""))
    if "experiment" not in data:
        raise ConfigError("experiment: missing required key")
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{nested[0]}: tables are not allowed, the format is flat")
    base = default_config(data["experiment"]) if data["experiment"] in EXPERIMENTS else None
    merged = {} if base is None else base.to_dict()
    merged.update(data)
    return ExperimentConfig(**merged)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    return config_from_dict(_parse(text))


def loads_config(text: str) -> ExperimentConfig:
    return config_from_dict(_parse(text))


def dumps_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


# -- schemes ------------------------------------------------------------------------

@dataclass
class Outcome:
    status: Status
    rate: float = float("nan")
    min_energy: float = float("nan")
    an_fraction: float = float("nan")
    iterations: int = 0
    solve_time: float = 0.0
    trace: list = field(default_factory=list)


def _params(cfg, ch, P, eta):
    return an.default_an_params(ch.n_t, P, eta, ch.L, per_antenna=cfg.per_antenna)


def _from_solution(sol: BeamformerSolution, ch, P, eval_ch=None) -> Outcome:
    if not sol.ok:
        return Outcome(sol.solver_status, iterations=sol.iterations, solve_time=sol.solve_time)
    target = eval_ch if eval_ch is not None else ch
    rate = secrecy_rate(sol, target)
    energy = float(np.min(harvested_energy(sol, target)))
    frac = sol.an_power / P if (sol.kind == Kind.COVARIANCE and P > 0) else 0.0
    return Outcome(sol.solver_status, rate, energy, frac, sol.iterations, sol.solve_time, list(sol.trace))


def _robust_rate(sol):
    """Guaranteed secrecy rate of a robust design (its worst-case objective), clamped at 0."""
    return max(float(sol.objective), 0.0)


def _scheme_outcome(name, cfg, ch, um, P, eta, true_ch):
    params = _params(cfg, ch, P, eta)
    ao, no = cfg.an_options(), cfg.noan_options()
    if name == "bisection":
        return _from_solution(noan.max_secrecy_rate_bisection(ch, params, no), ch, P)
    if name == "sdr":
        return _from_solution(sdr_solution(ch, params, tol=cfg.bisection_tol), ch, P)
    if name == "robust-bisection":
        sol = noan.robust_max_secrecy_bisection(um, params, no)
        out = _from_solution(sol, ch, P)
        if sol.ok:
            out.rate = _robust_rate(sol)
        return out
    if name == "mismatch-bisection":
        return _from_solution(noan.max_secrecy_rate_bisection(ch, params, no), ch, P, eval_ch=true_ch)
    if name in ("energy-max", "mismatch-energy-max"):
        sol = noan.max_harvested_energy(cfg.R_target, ch, params, no)
        return _from_solution(sol, ch, P, eval_ch=true_ch if name.startswith("mismatch") else None)
    if name == "robust-energy-max":
        sol = noan.robust_max_energy(cfg.R_target, um, params, no)
        out = _from_solution(sol, ch, P)
        if sol.ok:
            out.min_energy = float(sol.info.get("worst_energy", sol.objective))
            out.rate = cfg.R_target
        return out
    if name in ("ls-an-eh", "ls-an-no-eh"):
        p = params if name == "ls-an-eh" else params.with_(E_targets=np.zeros(ch.L))
        return _from_solution(an.max_secrecy_linesearch(ch, p, ao), ch, P)
    if name == "two-dim":
        return _from_solution(an.two_dim_search(ch, params, ao), ch, P)
    if name in _AN_SCHEMES:
        base = name.removeprefix("robust-")
        method, mode = base.split("-")
        use_an = mode == "an"
        if name.startswith("robust-"):
            fn = an.robust_max_secrecy_linesearch if method == "ls" else an.robust_max_secrecy_sca
            sol = fn(um, params, ao, use_an=use_an)
            out = _from_solution(sol, ch, P)
            if sol.ok:
                out.rate = _robust_rate(sol)
            return out
        fn = an.max_secrecy_linesearch if method == "ls" else an.max_secrecy_sca
        return _from_solution(fn(ch, params, ao, use_an=use_an), ch, P)
    raise ValueError(f"unknown scheme {name!r}")


SCHEMES = (
    "bisection", "sdr", "robust-bisection", "mismatch-bisection",
    "energy-max", "robust-energy-max", "mismatch-energy-max",
    *_AN_SCHEMES, "two-dim", "ls-an-eh", "ls-an-no-eh",
)


def derive_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


def _point(cfg, sweep_value):
    """(P linear, eps, eta) at one sweep point."""
    P_dB, eps, eta = cfg.P_dB, cfg.eps, cfg.eta
    if cfg.sweep_name == "power_dB":
        P_dB = sweep_value
    elif cfg.sweep_name == "eps":
        eps = sweep_value
    else:
        eta = sweep_value
    return float(db_to_linear(P_dB)), eps, eta


def _run_unit(args):
    cfg, trial, j = args
    tseed = derive_seed(cfg.seed, trial)
    sweep_value = cfg.sweep_values[j]
    P, eps, eta = _point(cfg, sweep_value)
    ch = generate_channels(cfg.n_t, cfg.K, cfg.L, tseed)
    um = UncertaintyModel.uniform(ch, eps)
    true_ch = sample_uncertainty_ball(um, derive_seed(tseed, 1))
    rows = []
    for name in cfg.scheme_list:
        try:
            out = _scheme_outcome(name, cfg, ch, um, P, eta, true_ch)
        except Exception as exc:  # recorded, the sweep goes on
            out = Outcome(Status.NUMERICAL_FAILURE, trace=[repr(exc)])
        rows.append(_row(cfg, tseed, sweep_value, name, out))
    return trial, j, rows


def _row(cfg, tseed, sweep_value, name, out: Outcome):
    trace = ";".join(repr(float(v)) if isinstance(v, (int, float, np.floating)) else str(v) for v in out.trace) if cfg.experiment == "fig5-sca-convergence" else ""
    return {
        "experiment": cfg.experiment,
        "trial_seed": tseed,
        "sweep_value": float(sweep_value),
        "scheme": name,
        "rate": float(out.rate),
        "min_energy": float(out.min_energy),
        "an_fraction": float(out.an_fraction),
        "iterations": int(out.iterations),
        "solve_time": float(out.solve_time),
        "status": str(out.status),
        "trace": trace,
    }


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: int = 1) -> list:
    units = [(cfg, trial, j) for trial in range(cfg.trials) for j in range(len(cfg.sweep_values))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_unit, units, chunksize=1))
    else:
        done = [_run_unit(u) for u in units]
    done.sort(key=lambda r: (r[0], r[1]))  # canonical order
    rows = [row for _, _, rs in done for row in rs]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{cfg.experiment}.csv").write_text(rows_to_csv(rows), encoding="utf-8", newline="")
        (out / f"{cfg.experiment}_summary.csv").write_text(summary_to_csv(summarize(rows, cfg)), encoding="utf-8", newline="")
        (out / f"{cfg.experiment}.toml").write_text(dumps_config(cfg), encoding="utf-8")
    return rows


# -- CSV and summaries -----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(ROW_FIELDS)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in ROW_FIELDS])
    return buf.getvalue()


def read_csv(text: str) -> list:
    return list(csv.DictReader(io.StringIO(text, newline="")))


_OK = {str(Status.OPTIMAL), str(Status.MAX_ITER)}


def summarize(rows, cfg: ExperimentConfig | None = None) -> list:
    """Mean and standard error per (scheme, sweep point) over rows with a usable status."""
    groups = {}
    for r in rows:
        groups.setdefault((r["scheme"], float(r["sweep_value"])), []).append(r)
    out = []
    for (scheme, sv), rs in groups.items():
        ok = [r for r in rs if r["status"] in _OK]
        entry = {"scheme": scheme, "sweep_value": sv, "n": len(rs), "n_ok": len(ok)}
        for key in ("rate", "min_energy", "an_fraction", "iterations"):
            vals = np.array([float(r[key]) for r in ok], dtype=float)
            vals = vals[np.isfinite(vals)]
            entry[f"{key}_mean"] = float(vals.mean()) if vals.size else float("nan")
            entry[f"{key}_se"] = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
        out.append(entry)
    order = {s: i for i, s in enumerate(cfg.scheme_list)} if cfg is not None else {}
    out.sort(key=lambda e: (order.get(e["scheme"], len(order)), e["scheme"], e["sweep_value"]))
    return out


def summary_to_csv(summary) -> str:
    if not summary:
        return ""
    keys = list(summary[0])
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for e in summary:
        w.writerow([_fmt(e[k]) for k in keys])
    return buf.getvalue()


def failure_fraction(rows) -> float:
    if not rows:
        return 0.0
    return sum(r["status"] not in _OK for r in rows) / len(rows)


# -- solution files (certify subcommand) ---------------------------------------------------

def _cvec(a):
    a = np.asarray(a, dtype=complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def _uncvec(d):
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)


def save_solution(path, sol: BeamformerSolution, ch: ChannelSet, R: float = 0.0, E=None):
    data = {
        "kind": str(sol.kind),
        "channel": {"h_s": _cvec(ch.h_s), "h_e": _cvec(ch.h_e), "h_p": _cvec(ch.h_p),
                    "sigma_s2": ch.sigma_s2, "sigma_e2": ch.sigma_e2},
        "R": float(R),
        "E": np.zeros(ch.L).tolist() if E is None else np.broadcast_to(np.asarray(E, float), (ch.L,)).tolist(),
    }
    if sol.kind == Kind.VECTOR:
        data["w"] = _cvec(sol.w)
    else:
        data["Q_s"] = _cvec(sol.Q_s)
        data["W"] = _cvec(sol.W)
    Path(path).write_text(json.dumps(data, indent=1), encoding="utf-8")


def load_solution(path):
    """Returns (design, channel, R, E); design is a vector or a (Q_s, W) pair."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    c = data["channel"]
    ch = ChannelSet(_uncvec(c["h_s"]), _uncvec(c["h_e"]), _uncvec(c["h_p"]), c["sigma_s2"], c["sigma_e2"])
    if data["kind"] == str(Kind.VECTOR):
        design = _uncvec(data["w"])
    else:
        design = (_uncvec(data["Q_s"]), _uncvec(data["W"]))
    return design, ch, float(data["R"]), np.asarray(data["E"], dtype=float)


def cpu_workers(requested: int | None) -> int:
    if requested is None or requested < 1:
        return 1
    return min(requested, os.cpu_count() or 1)
