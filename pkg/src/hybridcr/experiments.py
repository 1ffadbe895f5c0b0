"""Config-driven experiment runner emitting CSV result tables.

Each experiment sweeps one axis, optimizes the three CR systems per channel
draw, and writes one CSV row per sweep point plus a run manifest. Channel
draws are shared across sweep points (common random numbers), so curves are
smooth in the sweep parameter.
"""

from __future__ import annotations

import configparser
import csv
import datetime
import io
import multiprocessing
from dataclasses import dataclass, fields as dataclass_fields, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .channel import CorrelationSet, complex_normal, matrix_sqrt, seeded_rng, uniform_correlation_set
from .config import SystemConfig, from_db
from .design import (DesignSolution, InfeasibleConstraintError,
                     alternating_optimize, optimize_interweave, optimize_underlay)
from .montecarlo import McSpec, mc_conditional_rate, mc_outage
from .outage import build_outage_model, outage_F
from .rates import make_rate_context

CSV_COLUMNS = (
    "sweep_value",
    "hybrid_rate", "interweave_rate", "underlay_rate",
    "hybrid_rate_se", "interweave_rate_se", "underlay_rate_se",
    "P1_star", "P_und", "tau_star",
    "closed_form_outage", "mc_outage", "mc_outage_se",
    "seed",
)

_SYSTEM_FIELDS = {f.name for f in dataclass_fields(SystemConfig)}


@dataclass(frozen=True)
class ExperimentDefinition:
    kind: str                      # "rates" | "powers" | "outage_approx"
    sweep_axis: str
    sweep_values: Tuple[float, ...]
    overrides: Dict[str, float]


EXPERIMENTS: Dict[str, ExperimentDefinition] = {
    "fig2_outage_approx": ExperimentDefinition(
        kind="outage_approx", sweep_axis="gamma0_db",
        sweep_values=tuple(float(v) for v in range(0, 11)), overrides={}),
    "fig3_rate_vs_pout_lowact": ExperimentDefinition(
        kind="rates", sweep_axis="Pout_target",
        sweep_values=(0.01, 0.02, 0.05, 0.1, 0.18, 0.25),
        overrides={"P1_prior": 0.3}),
    "fig4_rate_vs_pout_highact": ExperimentDefinition(
        kind="rates", sweep_axis="Pout_target",
        sweep_values=(0.01, 0.02, 0.05, 0.1, 0.18, 0.25),
        overrides={"P1_prior": 0.7}),
    "fig5_rate_vs_activity": ExperimentDefinition(
        kind="rates", sweep_axis="P1_prior",
        sweep_values=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
        overrides={"Pout_target": 2e-2}),
    "fig6_power_vs_pout": ExperimentDefinition(
        kind="powers", sweep_axis="Pout_target",
        sweep_values=(5e-3, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35),
        overrides={"P1_prior": 0.3}),
    "custom_sweep": ExperimentDefinition(
        kind="rates", sweep_axis="", sweep_values=(), overrides={}),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved description of one experiment run."""

    experiment: str
    system: SystemConfig
    rho: float
    mc: McSpec
    sweep_axis: str
    sweep_values: Tuple[float, ...]
    out: Optional[str] = None
    seed: int = 0
    workers: int = 1
    plot: bool = False

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(
                f"unknown experiment id {self.experiment!r}; valid ids: "
                + ", ".join(sorted(EXPERIMENTS)))
        if len(self.sweep_values) == 0:
            raise ValueError("sweep grid must be nonempty")
        values = np.asarray(self.sweep_values, dtype=float)
        if not np.all(np.diff(values) > 0):
            raise ValueError("sweep grid must be strictly increasing")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def experiment_config(experiment: str, system: SystemConfig | None = None,
                      rho: float = 0.5, mc: McSpec | None = None,
                      sweep_axis: str | None = None,
                      sweep_values: Sequence[float] | None = None,
                      **kwargs) -> ExperimentConfig:
    """Resolve an ExperimentConfig from the experiment's defaults."""
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment id {experiment!r}; valid ids: "
                         + ", ".join(sorted(EXPERIMENTS)))
    definition = EXPERIMENTS[experiment]
    base = system or SystemConfig()
    if definition.overrides:
        base = replace(base, **definition.overrides)
    axis = sweep_axis or definition.sweep_axis
    values = tuple(float(v) for v in (sweep_values if sweep_values is not None
                                      else definition.sweep_values))
    if not axis:
        raise ValueError("custom_sweep requires an explicit sweep axis")
    return ExperimentConfig(experiment=experiment, system=base, rho=rho,
                            mc=mc or McSpec(), sweep_axis=axis,
                            sweep_values=values, **kwargs)


# ---------------------------------------------------------------------------
# config file handling

def _parse_values(text: str) -> Tuple[float, ...]:
    parts = [p.strip() for p in text.replace("\n", " ").split(",")]
    return tuple(float(p) for p in parts if p)


def load_config(path: str) -> ExperimentConfig:
    """Parse a UTF-8 key-value experiment config file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str          # keys are case-sensitive field names
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section("experiment") or not parser.has_option("experiment", "id"):
        raise ValueError("config must contain an [experiment] section with an 'id' key")
    exp_id = parser.get("experiment", "id")
    seed = parser.getint("experiment", "seed", fallback=0)
    out = parser.get("experiment", "out", fallback=None)
    plot = parser.getboolean("experiment", "plot", fallback=False)

    sys_kwargs: Dict[str, float] = {}
    rho = 0.5
    if parser.has_section("system"):
        for key, raw in parser.items("system"):
            if key == "rho":
                rho = float(raw)
            elif key in _SYSTEM_FIELDS:
                value = int(raw) if key == "M" else float(raw)
                sys_kwargs[key] = value
            elif key.endswith("_db") and key[:-3] in _SYSTEM_FIELDS:
                sys_kwargs[key[:-3]] = from_db(float(raw))
            else:
                raise ValueError(f"unknown [system] key {key!r}")
    system = SystemConfig(**sys_kwargs)

    mc_kwargs: Dict[str, int] = {}
    workers = 1
    if parser.has_section("mc"):
        for key, raw in parser.items("mc"):
            if key in ("n_realizations", "n_inner", "seed"):
                mc_kwargs[key] = int(raw)
            elif key == "report_se":
                mc_kwargs[key] = parser.getboolean("mc", key)
            elif key == "workers":
                workers = int(raw)
            else:
                raise ValueError(f"unknown [mc] key {key!r}")
    mc = McSpec(**mc_kwargs)

    sweep_axis = None
    sweep_values = None
    if parser.has_section("sweep"):
        sweep_axis = parser.get("sweep", "axis", fallback=None)
        raw_values = parser.get("sweep", "values", fallback=None)
        if raw_values is not None:
            sweep_values = _parse_values(raw_values)
    for section in parser.sections():
        if section not in ("experiment", "system", "mc", "sweep"):
            raise ValueError(f"unknown config section [{section}]")
    return experiment_config(exp_id, system=system, rho=rho, mc=mc,
                             sweep_axis=sweep_axis, sweep_values=sweep_values,
                             out=out, seed=seed, workers=workers, plot=plot)


def write_manifest(config: ExperimentConfig, path: str) -> None:
    """Write the fully resolved run configuration next to the results."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser["experiment"] = {
        "id": config.experiment,
        "seed": str(config.seed),
        "out": config.out or "",
        "plot": str(config.plot).lower(),
    }
    parser["system"] = {f.name: repr(getattr(config.system, f.name))
                        for f in dataclass_fields(SystemConfig)}
    parser["system"]["rho"] = repr(config.rho)
    parser["mc"] = {
        "n_realizations": str(config.mc.n_realizations),
        "n_inner": str(config.mc.n_inner),
        "seed": str(config.mc.seed),
        "report_se": str(config.mc.report_se).lower(),
        "workers": str(config.workers),
    }
    parser["sweep"] = {
        "axis": config.sweep_axis,
        "values": ", ".join(repr(v) for v in config.sweep_values),
    }
    parser["provenance"] = {
        "package_version": __version__,
        "numpy_version": np.__version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


# ---------------------------------------------------------------------------
# sweep execution

def _apply_sweep(cfg: SystemConfig, axis: str, value: float) -> SystemConfig:
    if axis == "gamma0_db":
        return replace(cfg, gamma0=from_db(value))
    if axis in _SYSTEM_FIELDS:
        return replace(cfg, **{axis: int(value) if axis == "M" else value})
    raise ValueError(f"unknown sweep axis {axis!r}")


def _rate_draw(task) -> Dict[str, float]:
    """One channel draw: optimize the three systems, estimate their rates."""
    (seed, index, cfg, corr, model, n_inner) = task
    rng = seeded_rng(seed, index)
    h_ss = matrix_sqrt(corr.R_ss) @ complex_normal(rng, corr.M)
    ctx = make_rate_context(h_ss, corr, cfg)
    out: Dict[str, float] = {}
    rate_rng_tag = 8
    try:
        hybrid = alternating_optimize(ctx, cfg, model, rng=seeded_rng(seed, index, 7))
        out["hybrid_rate"], _ = mc_conditional_rate(
            hybrid, h_ss, cfg, corr, n_inner, seeded_rng(seed, index, rate_rng_tag))
        out["tau_star"] = hybrid.tau_star
    except InfeasibleConstraintError:
        out["hybrid_rate"] = np.nan
        out["tau_star"] = np.nan
    try:
        inter = optimize_interweave(ctx, cfg, model)
        out["interweave_rate"], _ = mc_conditional_rate(
            inter, h_ss, cfg, corr, n_inner, seeded_rng(seed, index, rate_rng_tag))
    except InfeasibleConstraintError:
        out["interweave_rate"] = np.nan
    try:
        under = optimize_underlay(ctx, cfg, model, rng=seeded_rng(seed, index, 9))
        out["underlay_rate"], _ = mc_conditional_rate(
            under, h_ss, cfg, corr, n_inner, seeded_rng(seed, index, rate_rng_tag))
    except InfeasibleConstraintError:
        out["underlay_rate"] = np.nan
    return out


def _nanmean_se(values: np.ndarray) -> Tuple[float, float]:
    good = values[~np.isnan(values)]
    if good.size == 0:
        return float("nan"), float("nan")
    se = float(good.std(ddof=1) / np.sqrt(good.size)) if good.size > 1 else 0.0
    return float(good.mean()), se


def _shared_point_quantities(cfg: SystemConfig, corr: CorrelationSet, model):
    """Draw-independent design quantities at one sweep point."""
    from .design import solve_power
    quantities = {"P1_star": np.nan, "P_und": np.nan, "closed_form_outage": np.nan,
                  "hybrid_feasible": False}
    try:
        p1 = solve_power(model, cfg)
        quantities["P1_star"] = p1
        pd = cfg.Pd_target
        quantities["closed_form_outage"] = (
            (1.0 - pd) * outage_F(model, cfg.P_peak) + pd * outage_F(model, p1))
        quantities["hybrid_feasible"] = True
    except InfeasibleConstraintError:
        pass
    try:
        if cfg.Pout_target > model.f_floor:
            if cfg.Pout_target >= outage_F(model, cfg.P_peak):
                quantities["P_und"] = cfg.P_peak
            else:
                from .numerics import bisect_root
                quantities["P_und"] = bisect_root(
                    lambda p: outage_F(model, p) - cfg.Pout_target,
                    model.p_min_mono, cfg.P_peak, tol=1e-12)
    except (InfeasibleConstraintError, ValueError):
        pass
    return quantities


def _hybrid_outage_design(cfg: SystemConfig, p1_star: float, model) -> DesignSolution:
    """Minimal hybrid design carrier for the outage oracle."""
    from .design import ConstraintReport
    m = model.R_pp.shape[0]
    w = np.zeros(m, dtype=complex)
    w[0] = 1.0
    pd = cfg.Pd_target
    outage = (1.0 - pd) * outage_F(model, cfg.P_peak) + pd * outage_F(model, p1_star)
    return DesignSolution(mode="hybrid", P1_star=p1_star, tau_star=cfg.T / 100,
                          eps_star=0.0, w1_star=w, objective=0.0,
                          objective_exact=0.0, trace=(0.0,),
                          constraint_report=ConstraintReport(outage=outage, p_d=pd))


def run_experiment(config: ExperimentConfig) -> List[Dict[str, float]]:
    """Execute the sweep and return one result row per sweep point."""
    definition = EXPERIMENTS[config.experiment]
    rows: List[Dict[str, float]] = []
    pool = None
    try:
        if config.workers > 1:
            pool = multiprocessing.Pool(config.workers)
        for value in config.sweep_values:
            cfg = _apply_sweep(config.system, config.sweep_axis, value)
            corr = uniform_correlation_set(config.rho, cfg.M)
            model = build_outage_model(corr, cfg)
            row: Dict[str, float] = {c: float("nan") for c in CSV_COLUMNS}
            row["sweep_value"] = float(value)
            row["seed"] = config.seed
            shared = _shared_point_quantities(cfg, corr, model)
            row["P1_star"] = shared["P1_star"]
            row["P_und"] = shared["P_und"]
            row["closed_form_outage"] = shared["closed_form_outage"]

            # the outage oracle is vectorized and cheap, so it keeps a sample
            # floor even when the rate loop runs at desk scale
            outage_mc = replace(config.mc, seed=config.seed,
                                n_realizations=max(config.mc.n_realizations, 10_000))
            if definition.kind == "outage_approx":
                row["closed_form_outage"] = outage_F(model, cfg.P_peak)
                row["P_und"] = cfg.P_peak
                from .design import ConstraintReport
                probe = DesignSolution(
                    mode="underlay", P1_star=cfg.P_peak, tau_star=0.0,
                    eps_star=None, w1_star=np.zeros(cfg.M, dtype=complex),
                    objective=0.0, objective_exact=0.0, trace=(0.0,),
                    constraint_report=ConstraintReport(
                        outage=row["closed_form_outage"], p_d=1.0))
                hat, se = mc_outage(probe, cfg, corr, outage_mc)
                row["mc_outage"], row["mc_outage_se"] = hat, se
            else:
                if shared["hybrid_feasible"]:
                    probe = _hybrid_outage_design(cfg, shared["P1_star"], model)
                    hat, se = mc_outage(probe, cfg, corr, outage_mc)
                    row["mc_outage"], row["mc_outage_se"] = hat, se
                if definition.kind == "rates":
                    tasks = [(config.seed, i, cfg, corr, model, config.mc.n_inner)
                             for i in range(config.mc.n_realizations)]
                    if pool is not None:
                        results = pool.map(_rate_draw, tasks)
                    else:
                        results = [_rate_draw(t) for t in tasks]
                    for name in ("hybrid", "interweave", "underlay"):
                        values = np.array([r.get(f"{name}_rate", np.nan) for r in results])
                        row[f"{name}_rate"], row[f"{name}_rate_se"] = _nanmean_se(values)
                    taus = np.array([r.get("tau_star", np.nan) for r in results])
                    row["tau_star"], _ = _nanmean_se(taus)
            rows.append(row)
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    return rows


def format_float(x: float) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def rows_to_csv(rows: List[Dict[str, float]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([format_float(row[c]) for c in CSV_COLUMNS])
    return buffer.getvalue()


def write_results(config: ExperimentConfig, rows: List[Dict[str, float]],
                  out_path: str) -> None:
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))
    write_manifest(config, out_path + ".manifest")
    if config.plot:
        from .plotting import render_figure
        render_figure(config.experiment, rows, out_path + ".png")
