"""Línea de comandos: simulate | estimate | reallocate | report"""

import argparse
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.core.calculator import DiagnosticsCalculator
from src.core.counterfactuals import (
    BEHAVIORAL,
    MECHANICAL,
    allocation_frame,
    build_wedge_rows,
    counterfactual_summary,
    field_output_decomposition,
    funding_growth_equivalence,
    mean_absolute_wedge,
    wedge_frame,
)
from src.core.data_loader import DataLoader, write_dataset
from src.core.errors import EstimationError, ModeloError, NumericalError, ValidacionError
from src.core.estimator import EstimationConfig, estimate
from src.core.identification import fit_models_for, identify_population
from src.core.model import Attributes, Calibration
from src.core.planner import (
    LEVERS,
    OBJECTIVES,
    PlannerResearcher,
    build_field_problems,
    frozen_allocation,
    optimize_allocation,
)
from src.core.synth import PopulationConfig, calibrated_defaults, generate_population
from src.core.type_index import DeepParams, fit_type_index, preference_params_from_type
from src.core.wtp import standard_offers, wtp_report
from src.reports import write_tables
from src.utils import load_config_file, load_results_json, save_results_json, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

COMMANDS = ("simulate", "estimate", "reallocate", "report")
PRESETS = ("calibrated", "smooth")
CONSERVATION_RTOL = 1e-8

_BOOL = {"grid_only", "across_fields", "unconstrained_budget", "freeze", "excel", "no_log_files"}
_INT = {"seed", "n", "threads", "max_evaluations", "bins"}
_FLOAT = {"noise", "kappa", "top_fraction", "min_funding", "max_hours"}


@dataclass
class RunConfig:
    """Configuración de una corrida: valores por defecto < archivo < flags"""

    command: str = ""
    input: Optional[str] = None
    output: Optional[str] = None
    results: Optional[str] = None
    truth: Optional[str] = None
    seed: int = 0
    n: int = 500
    preset: str = "calibrated"
    noise: float = 0.0
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    grid_only: bool = False
    max_evaluations: int = 2000
    objective: str = "output"
    levers: Tuple[str, ...] = ("G", "D")
    kappa: float = 10.0
    across_fields: bool = False
    unconstrained_budget: bool = False
    freeze: bool = False
    top_fraction: float = 0.2
    bins: int = 20
    excel: bool = False
    min_funding: float = 5000.0
    max_hours: float = 62.0
    no_log_files: bool = False

    @property
    def cal(self) -> Calibration:
        return Calibration(min_funding=self.min_funding, max_hours=self.max_hours, kappa=self.kappa)

    def set_value(self, key: str, value) -> None:
        if not hasattr(self, key):
            raise ValidacionError(f"Clave de configuración desconocida: '{key}'")
        if isinstance(value, str):
            value = _coerce(key, value)
        setattr(self, key, value)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ValidacionError(f"Comando desconocido: {self.command}")
        if not self.output:
            raise ValidacionError("Se requiere --output")
        if self.command != "simulate":
            if not self.input:
                raise ValidacionError("Se requiere --input")
            if not Path(self.input).exists():
                raise ValidacionError(f"Archivo no encontrado: {self.input}")
        if self.command == "simulate":
            if self.n < 1:
                raise ValidacionError(f"N debe ser ≥ 1: {self.n}")
            if self.preset not in PRESETS:
                raise ValidacionError(f"Preset desconocido: {self.preset}")
            if self.noise < 0:
                raise ValidacionError(f"El ruido debe ser ≥ 0: {self.noise}")
        if self.command == "reallocate":
            if bool(self.results) == bool(self.truth):
                raise ValidacionError("reallocate requiere exactamente uno de --results o --truth")
            if self.objective not in OBJECTIVES:
                raise ValidacionError(f"Objetivo desconocido: {self.objective}")
            unknown = set(self.levers) - set(LEVERS)
            if unknown or not self.levers:
                raise ValidacionError(f"Palancas inválidas: {self.levers}")
            if self.unconstrained_budget and tuple(self.levers) != ("D",):
                raise ValidacionError("--unconstrained-budget requiere --levers D")
        if self.command == "report" and not self.results:
            raise ValidacionError("report requiere --results")
        if not 0 < self.top_fraction <= 1:
            raise ValidacionError(f"--top-fraction fuera de (0,1]: {self.top_fraction}")
        if self.bins < 1 or self.threads < 1:
            raise ValidacionError("--bins y --threads deben ser ≥ 1")


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key in _BOOL:
        return raw.lower() in ("1", "true", "yes", "si", "sí", "on")
    if key in _INT:
        return int(raw)
    if key in _FLOAT:
        return float(raw)
    if key == "levers":
        return tuple(v.strip().upper() for v in raw.split(",") if v.strip())
    return raw


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="archivo clave = valor")
    common.add_argument("--input")
    common.add_argument("--output")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--min-funding", type=float)
    common.add_argument("--max-hours", type=float)
    common.add_argument("--kappa", type=float)
    common.add_argument("--excel", action="store_true", default=None)
    common.add_argument("--no-log-files", action="store_true", default=None)

    parser = argparse.ArgumentParser(
        prog="productividad",
        description="Productividad de investigadores a partir de disposición a pagar",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="genera un dataset sintético")
    sim.add_argument("--n", type=int)
    sim.add_argument("--preset", choices=PRESETS)
    sim.add_argument("--noise", type=float)

    est = sub.add_parser("estimate", parents=[common], help="estima μ y θ por GMM")
    est.add_argument("--grid-only", action="store_true", default=None)
    est.add_argument("--max-evaluations", type=int)

    rea = sub.add_parser("reallocate", parents=[common], help="contrafactuales del planificador")
    rea.add_argument("--results")
    rea.add_argument("--truth")
    rea.add_argument("--objective", choices=OBJECTIVES)
    rea.add_argument("--levers", type=lambda s: _coerce("levers", s))
    rea.add_argument("--across-fields", action="store_true", default=None)
    rea.add_argument("--unconstrained-budget", action="store_true", default=None)
    rea.add_argument("--freeze", action="store_true", default=None)

    rep = sub.add_parser("report", parents=[common], help="tablas de diagnóstico")
    rep.add_argument("--results")
    rep.add_argument("--top-fraction", type=float)
    rep.add_argument("--bins", type=int)
    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            cfg.set_value(key, value)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        cfg.set_value(key, value)
    cfg.validate()
    return cfg


def _output_path(cfg: RunConfig, suffix: str) -> Path:
    out = Path(cfg.output)
    return out.with_name(f"{out.stem}{suffix}")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig) -> Path:
    if cfg.preset == "calibrated":
        base = calibrated_defaults(n=cfg.n, seed=cfg.seed)
    else:
        base = PopulationConfig(n=cfg.n, seed=cfg.seed)
    pop = generate_population(replace(base, answer_noise_sd=cfg.noise, cal=cfg.cal))

    path = write_dataset(pop.records, cfg.output)
    truth = pop.truth_dict()
    truth["config"] = {"n": cfg.n, "seed": cfg.seed, "preset": cfg.preset, "noise": cfg.noise}
    truth["calibration"] = asdict(cfg.cal)
    save_results_json(truth, str(_output_path(cfg, "_truth.json")))
    logger.info(f"✓ simulate: {path}")
    return path


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

def _load_typed_records(cfg: RunConfig):
    loader = DataLoader(cfg.input, cfg.cal)
    loader.load_all()
    features = loader.get_features()
    type_model = None
    if features.shape[1] >= 1 and features.shape[0] >= 2:
        type_model, T = fit_type_index(features, seed=cfg.seed)
    else:
        T = np.zeros(len(loader.records))
    return loader, loader.with_type_index(T), type_model


def cmd_estimate(cfg: RunConfig) -> Path:
    cal = cfg.cal
    loader, records, type_model = _load_typed_records(cfg)
    models = fit_models_for(records, cal)
    est_cfg = EstimationConfig(
        threads=cfg.threads, grid_only=cfg.grid_only, max_evaluations=cfg.max_evaluations
    )
    try:
        result = estimate(records, est_cfg, cal, models)
    except EstimationError as e:
        save_results_json({"status": "failed", "error": str(e), "trace": e.trace}, cfg.output)
        raise

    ident = identify_population(records, result.mu_hat, cal, models)
    residuals = result.residuals
    researchers = []
    for r in records:
        a = ident.attributes.get(r.id)
        researchers.append(
            {
                "id": r.id,
                "field": r.field_label,
                "T": r.type_index,
                "alpha": a.tfp if a else None,
                "gamma": a.funding_intensity if a else None,
                "phi": a.fundraising_ability if a else None,
                "hours_corner": ident.hours_corner.get(r.id),
                "rescaled": ident.rescaled.get(r.id),
            }
        )
    payload = {
        "status": "ok",
        "deep": result.mu_hat.to_dict(),
        "loss": result.loss,
        "n_penalized": result.n_penalized,
        "grid_only": result.grid_only,
        "max_abs_residual": float(residuals["residual"].abs().max()) if len(residuals) else None,
        "researchers": researchers,
        "failures": ident.failures,
        "residuals": residuals.to_dict(orient="records"),
        "trace": result.trace,
        "type_model": type_model.to_dict() if type_model else None,
        "zero_fundraiser_models": models.to_dict() if models else None,
        "calibration": asdict(cal),
    }
    save_results_json(payload, cfg.output)
    logger.info(f"✓ estimate: pérdida {result.loss:.6g}, resultados en {cfg.output}")
    return Path(cfg.output)


# ---------------------------------------------------------------------------
# reallocate
# ---------------------------------------------------------------------------

def _planner_researchers(cfg: RunConfig, loader: DataLoader) -> List[PlannerResearcher]:
    data = load_results_json(cfg.results or cfg.truth)
    deep = DeepParams(**data["deep"])
    by_id = {str(row["id"]): row for row in data["researchers"]}
    out, skipped = [], 0
    for rec in loader.records:
        row = by_id.get(rec.id)
        if row is None or row.get("alpha") is None:
            skipped += 1
            continue
        out.append(
            PlannerResearcher(
                id=rec.id,
                field_label=rec.field_label,
                contract=rec.contract,
                attributes=Attributes(row["alpha"], row["gamma"], row["phi"]),
                prefs=preference_params_from_type(row.get("T") or 0.0, deep),
                expected_extra_funding=rec.expected_extra_funding,
            )
        )
    if skipped:
        logger.warning(f"⚠ {skipped} investigadores sin θ se excluyen del planificador")
    if not out:
        raise ValidacionError("Ningún investigador tiene atributos para el planificador")
    return out


def _check_conservation(problem, allocation, dump_path: Path) -> None:
    targets = {"G": (problem.g_total, allocation.G_tilde), "D": (problem.d_total, allocation.D_tilde)}
    for lever in problem.levers:
        total, values = targets[lever]
        gap = abs(float(np.sum(values)) - total) / max(abs(total), 1.0)
        if gap > CONSERVATION_RTOL:
            save_results_json(
                {
                    "field": problem.field_label,
                    "lever": lever,
                    "relative_gap": gap,
                    "kkt_residuals": allocation.kkt_residuals,
                    "multipliers": allocation.multipliers,
                },
                str(dump_path),
            )
            raise NumericalError(
                f"[{problem.field_label}] total de {lever} no conservado (error relativo {gap:.2e})",
                {"dump": str(dump_path)},
            )


def _equivalence(researchers, target: float, mode: str, cal: Calibration) -> dict:
    try:
        eq = funding_growth_equivalence(researchers, target, mode, cal)
    except (ValidacionError, NumericalError) as e:
        logger.warning(f"⚠ Equivalencia {mode} no disponible: {e}")
        return {"mode": mode, "error": str(e)}
    return asdict(eq)


def _lorenz_tables(frames: Dict[str, pd.DataFrame], columns: Sequence[str]) -> Tuple[pd.DataFrame, List[dict]]:
    curves, ginis = [], []
    for scenario, df in frames.items():
        for col in columns:
            try:
                curve, gini = DiagnosticsCalculator.lorenz_gini(df[col])
            except ValidacionError as e:
                logger.info(f"ℹ Lorenz {col}/{scenario} omitida: {e}")
                continue
            curves.append(curve.assign(variable=col, scenario=scenario))
            ginis.append({"variable": col, "scenario": scenario, "gini": gini})
    curve_df = pd.concat(curves, ignore_index=True) if curves else pd.DataFrame(
        columns=["population_share", "input_share", "variable", "scenario"]
    )
    return curve_df, ginis


def cmd_reallocate(cfg: RunConfig) -> Path:
    cal = cfg.cal
    loader = DataLoader(cfg.input, cal)
    loader.load_all()
    researchers = _planner_researchers(cfg, loader)
    problems = build_field_problems(
        researchers,
        across_fields=cfg.across_fields,
        objective=cfg.objective,
        levers=tuple(cfg.levers),
        kappa=cfg.kappa,
        unconstrained_budget=cfg.unconstrained_budget,
        cal=cal,
    )

    actual_frames, cf_frames, fields_info = [], [], []
    for problem in problems:
        actual = frozen_allocation(problem)
        cf = actual if cfg.freeze else optimize_allocation(problem)
        _check_conservation(problem, cf, _output_path(cfg, "_kkt_dump.json"))
        actual_frames.append(allocation_frame(problem, actual))
        cf_frames.append(allocation_frame(problem, cf))
        fields_info.append(
            {
                "field": problem.field_label,
                "n": len(problem.researchers),
                "pi": cf.pi,
                "actual_pi": actual.pi,
                "multipliers": cf.multipliers,
                "kkt_residuals": cf.kkt_residuals,
                "multiplier_dispersion": cf.multiplier_dispersion,
                "objective_actual": actual.objective_value,
                "objective_counterfactual": cf.objective_value,
                "converged": cf.converged,
                "improved": cf.improved,
            }
        )

    actual_df = pd.concat(actual_frames, ignore_index=True)
    cf_df = pd.concat(cf_frames, ignore_index=True)
    summary = counterfactual_summary(actual_df, cf_df)

    ids = list(actual_df["id"])
    inputs = ["G", "D", "B", "R"]
    rows = build_wedge_rows(ids, {c: actual_df[c] for c in inputs}, {c: cf_df[c] for c in inputs})
    feature_cols = [c for c in loader.feature_columns]
    covariates = None
    if feature_cols:
        feats = loader.data.set_index("id").loc[ids, feature_cols]
        covariates = feats.to_numpy(dtype=float)
    regressions = {}
    for col in inputs:
        try:
            reg = DiagnosticsCalculator.wedge_regression(actual_df[col], cf_df[col], covariates, feature_cols or None)
            regressions[col] = asdict(reg)
        except (ValidacionError, np.linalg.LinAlgError) as e:
            logger.warning(f"⚠ Regresión de cuñas para {col} omitida: {e}")

    lorenz_df, ginis = _lorenz_tables({"actual": actual_df, "counterfactual": cf_df}, ["B", "D"])

    decomposition_input = actual_df.assign(Y_optimized=cf_df["Y"].to_numpy())
    decomposition = field_output_decomposition(decomposition_input)

    target = float(cf_df["Y"].sum())
    equivalence = {
        MECHANICAL: _equivalence(researchers, target, MECHANICAL, cal),
        BEHAVIORAL: _equivalence(researchers, target, BEHAVIORAL, cal),
    }

    allocations = actual_df.merge(cf_df, on=["id", "field"], suffixes=("", "_opt"))
    out = Path(cfg.output)
    write_tables(
        {
            "allocations": allocations,
            "summary": summary,
            "wedges": wedge_frame(rows),
            "lorenz": lorenz_df,
            "field_decomposition": decomposition.reset_index(),
        },
        str(out.parent),
        out.stem,
        excel=cfg.excel,
    )
    save_results_json(
        {
            "objective": cfg.objective,
            "levers": list(cfg.levers),
            "kappa": cfg.kappa,
            "across_fields": cfg.across_fields,
            "unconstrained_budget": cfg.unconstrained_budget,
            "freeze": cfg.freeze,
            "summary": summary.to_dict(orient="records"),
            "fields": fields_info,
            "funding_equivalence": equivalence,
            "wedge_regressions": regressions,
            "mean_absolute_wedge": mean_absolute_wedge(rows),
            "gini": ginis,
            "field_decomposition": {
                "benchmark": decomposition.attrs.get("benchmark"),
                "table": decomposition.reset_index().to_dict(orient="records"),
            },
        },
        str(_output_path(cfg, "_summary.json")),
    )
    logger.info(f"✓ reallocate: {len(problems)} problemas, resultados con prefijo {out}")
    return _output_path(cfg, "_summary.json")


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def _estimates_frame(cfg: RunConfig, loader: DataLoader) -> pd.DataFrame:
    data = load_results_json(cfg.results)
    if "researchers" not in data:
        raise ValidacionError(f"{cfg.results} no contiene atributos por investigador (status={data.get('status')})")
    theta = pd.DataFrame(data["researchers"])[["id", "alpha", "gamma", "phi"]].dropna()
    theta["id"] = theta["id"].astype(str)
    frame = loader.data[["id", "field", "M", "G", "D", "F", "R", "EG"]].merge(theta, on="id", how="inner")
    if frame.empty:
        raise ValidacionError("Los resultados no comparten ids con el dataset")
    frame["B"] = cfg.cal.min_funding + frame["G"] + frame["phi"] * frame["F"]
    frame["Y"] = frame["alpha"] * frame["B"] ** frame["gamma"] * frame["R"] ** (1.0 - frame["gamma"])
    return frame


def _wtp_frame(loader: DataLoader) -> pd.DataFrame:
    rows = []
    for r in loader.records:
        offers = {o.label: o for o in standard_offers(r.contract)}
        for j, answer in enumerate(r.wtp_answers, start=1):
            offer = offers.get(str(j))
            if answer is None or offer is None:
                continue
            rep = wtp_report(r.contract, offer, answer)
            value = rep.per_dollar if rep.per_dollar is not None else rep.per_hour
            rows.append({"id": r.id, "experiment": j, "wtp": rep.wtp, "value": value})
    return pd.DataFrame(rows, columns=["id", "experiment", "wtp", "value"])


def cmd_report(cfg: RunConfig) -> Path:
    calc = DiagnosticsCalculator
    loader = DataLoader(cfg.input, cfg.cal)
    loader.load_all()
    frame = _estimates_frame(cfg, loader)

    dispersion = []
    try:
        dispersion.append({"metric": "tfp_ratio_90_10", "value": calc.tfp_ratio_90_10(frame["alpha"])})
        if frame["field"].nunique() > 1:
            dummies = pd.get_dummies(frame["field"], drop_first=True, dtype=float)
            dispersion.append(
                {"metric": "tfp_ratio_90_10_field_residual", "value": calc.tfp_ratio_90_10(frame["alpha"], dummies)}
            )
    except ValidacionError as e:
        logger.warning(f"⚠ Razón 90-10 omitida: {e}")

    power = []
    for variable in ("alpha", "Y"):
        try:
            fit = calc.power_law_fit(frame[variable], cfg.top_fraction)
        except ValidacionError as e:
            logger.warning(f"⚠ Ley de potencia de {variable} omitida: {e}")
            continue
        power.append({"variable": variable, **asdict(fit)})

    decomposition = calc.variance_decomposition(frame["alpha"], frame["gamma"], frame["B"], frame["R"])
    variance_rows = [
        {"metric": "share", "value": decomposition.share},
        {"metric": "raw_share", "value": decomposition.raw_share},
        {"metric": "var_log_output", "value": decomposition.var_log_output},
        *({"metric": k, "value": v} for k, v in decomposition.components.items()),
        {"metric": "residual", "value": decomposition.residual},
    ]

    gamma_by_field = (
        frame.groupby("field")["gamma"].agg(["mean", "std", "count"]).reset_index()
        .rename(columns={"mean": "gamma_mean", "std": "gamma_sd", "count": "n"})
    )

    wtp = _wtp_frame(loader)
    histograms = [
        calc.histogram_table(wtp.loc[wtp["experiment"] == j, "value"], cfg.bins).assign(variable=f"wtp_{j}")
        for j in range(1, 5)
    ]
    histograms.append(calc.histogram_table(np.log(frame["alpha"]), cfg.bins).assign(variable="log_alpha"))
    histograms.append(calc.histogram_table(frame["gamma"], cfg.bins).assign(variable="gamma"))

    lorenz_df, ginis = _lorenz_tables({"actual": frame}, ["B", "D"])

    out = Path(cfg.output)
    paths = write_tables(
        {
            "tfp_dispersion": pd.DataFrame(dispersion, columns=["metric", "value"]),
            "power_law": pd.DataFrame(power, columns=["variable", "exponent", "std_error", "n", "top_fraction"]),
            "variance_decomposition": pd.DataFrame(variance_rows),
            "gamma_by_field": gamma_by_field,
            "histograms": pd.concat(histograms, ignore_index=True),
            "lorenz": lorenz_df,
            "gini": pd.DataFrame(ginis, columns=["variable", "scenario", "gini"]),
        },
        str(out.parent),
        out.stem,
        excel=cfg.excel,
    )
    logger.info(f"✓ report: {len(paths)} archivos")
    return out


HANDLERS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "reallocate": cmd_reallocate,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Punto de entrada; retorna 0, 2 (validación) o 3 (falla numérica)"""
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if cfg.no_log_files:
            setup_logging(None, None)
        else:
            setup_logging("logs", "debug_logs")
        HANDLERS[cfg.command](cfg)
        return EXIT_OK
    except ValidacionError as e:
        logger.error(f"Error de validación: {e}")
        return EXIT_VALIDATION
    except NumericalError as e:
        logger.error(f"Falla numérica: {e}")
        return EXIT_NUMERICAL
    except ModeloError as e:
        logger.error(f"Error del modelo: {e}")
        return EXIT_NUMERICAL
    except ValueError as e:
        logger.error(f"Error de validación: {e}")
        return EXIT_VALIDATION
