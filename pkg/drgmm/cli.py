# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

"""Command line front end

    drgmm test DATA --model factor --n-assets 26 --n-factors 1 --theta0 0 --statistics drlm,klm,ar,lr
    drgmm confset DATA --model factor --n-assets 26 --n-factors 1 --statistic drlm_enhanced --output set.json
    drgmm simulate size --n 25 --m 1 --reps 10000 --seed 7 --output surface.csv
    drgmm ingest DATA --model iv --n-instruments 4

Datasets are UTF-8 CSV files with a header row, columns are read by position:
    factor: [date], R_1..R_n (returns), F_1..F_m (factors)
    iv:     y, X_1..X_m, Z_1..Z_k, W_1..W_p
    crra:   C, R_1..R_N, the returns of the first row are not used (returns are aligned with C_t / C_{t-1})
"""

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd

from drgmm import confsets, montecarlo
from drgmm.errors import DrgmmError, InputError
from drgmm.models import (
    FactorData,
    FactorModel,
    IvData,
    IvModel,
    crra_model,
    factor_model,
    first_stage_f,
    iv_model,
)
from drgmm.moments import MomentModel, evaluate
from drgmm.pipeline import AnalysisGraph, AnalysisStep
from drgmm.solver import SolverConfig, power_enhanced_test
from drgmm.stats import (
    CONDITIONAL_CALIBRATED,
    FIXED_CHI2,
    CriticalValuePolicy,
    j_statistic,
    TestResult,
    rank_is_statistic,
    run_statistics,
)
from drgmm.streams import default_seed
from drgmm.visitor import StepRunner, log_steps

logger = logging.getLogger(__name__)

FACTOR, IV, CRRA = "factor", "iv", "crra"
MODEL_KINDS = (FACTOR, IV, CRRA)
POLICIES = (FIXED_CHI2, CONDITIONAL_CALIBRATED)
DEFAULT_STATISTICS = "drlm,klm,ar,lr"
DEFAULT_DELTA0 = 0.95


class CrraInputs(NamedTuple):
    consumption: np.ndarray
    returns: np.ndarray


Dataset = Union[FactorData, IvData, CrraInputs]


# ---------------------------------------------------------------------------------------------------------------------
# Ingestion


def _read_csv(path: str) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"no such file {path}") from None
    except pd.errors.EmptyDataError:
        raise InputError(f"{path} is empty") from None
    except pd.errors.ParserError as e:
        raise InputError(f"{path} is not a well formed CSV file: {e}") from None
    except (OSError, UnicodeDecodeError) as e:
        raise InputError(f"cannot read {path}: {e}") from None
    if frame.empty:
        raise InputError(f"{path} has a header but no data rows")
    return frame


def _numeric(frame: pd.DataFrame, skip_first_row_of: Sequence[str] = ()) -> np.ndarray:
    """numeric values of the frame, InputError naming the first bad cell (data rows numbered from 1)"""
    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    for name in skip_first_row_of:
        bad[0, frame.columns.get_loc(name)] = False
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise InputError(
            f"missing or non-numeric value {frame.iat[row, col]!r}", row=int(row) + 1, column=str(frame.columns[col])
        )
    return values


def _expect_columns(frame: pd.DataFrame, expected: int, schema: str):
    if frame.shape[1] != expected:
        raise InputError(f"{schema} schema expects {expected} columns, the file has {frame.shape[1]}")


def ingest(
    path: str,
    kind: str,
    *,
    n_assets: Optional[int] = None,
    n_factors: int = 1,
    excess: bool = False,
    n_endogenous: int = 1,
    n_instruments: Optional[int] = None,
    n_controls: int = 0,
) -> Dataset:
    """Read and validate a dataset

    :param n_assets: return columns (factor and CRRA schemas), all columns but the others when None
    :param excess: factor returns are excess returns, otherwise the last return column is subtracted from the others
    :exception InputError: unreadable file, wrong column count, missing or non-numeric cell
    """
    assert kind in MODEL_KINDS, f"unknown model kind {kind!r}, choose from {MODEL_KINDS}"
    frame = _read_csv(path)
    if kind == FACTOR:
        if str(frame.columns[0]).strip().lower() == "date":
            frame = frame.iloc[:, 1:]
        n = frame.shape[1] - n_factors if n_assets is None else n_assets
        _expect_columns(frame, n + n_factors, "factor")
        values = _numeric(frame)
        data = FactorData(values[:, :n], values[:, n:], excess=excess)
    elif kind == IV:
        k = frame.shape[1] - 1 - n_endogenous - n_controls if n_instruments is None else n_instruments
        _expect_columns(frame, 1 + n_endogenous + k + n_controls, "iv")
        values = _numeric(frame)
        m = n_endogenous
        W = values[:, 1 + m + k :] if n_controls else None
        data = IvData(values[:, 0], values[:, 1 : 1 + m], values[:, 1 + m : 1 + m + k], W)
    else:
        n = frame.shape[1] - 1 if n_assets is None else n_assets
        _expect_columns(frame, 1 + n, "crra")
        values = _numeric(frame, skip_first_row_of=list(frame.columns[1:]))
        data = CrraInputs(values[:, 0], values[1:, 1:])
    logger.info("read %s: %d rows, %d columns, %s schema", path, frame.shape[0], frame.shape[1], kind)
    return data


def build_model(data: Dataset, *, robust: bool = False, delta0: float = DEFAULT_DELTA0) -> MomentModel:
    """closed form iid covariances unless robust, Eicker-White otherwise"""
    if isinstance(data, FactorData):
        return factor_model(data, iid=not robust)
    if isinstance(data, IvData):
        return iv_model(data, iid=not robust)
    return crra_model(data.consumption, data.returns, delta0)


def describe(data: Dataset) -> Dict[str, int]:
    if isinstance(data, FactorData):
        return {"T": data.T, "N": data.N, "m": data.m}
    if isinstance(data, IvData):
        return {"T": data.T, "k": data.k, "m": data.m, "p": data.W.shape[1]}
    return {"T": data.returns.shape[0], "N": data.returns.shape[1], "m": 1}


# ---------------------------------------------------------------------------------------------------------------------
# Manifests


def file_digest(path: str) -> str:
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 16), b""):
                digest.update(chunk)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from None
    return digest.hexdigest()


@dataclass
class RunManifest:
    """What produced an output: command, configuration, seed, version, input digests and wall time"""

    command: str
    config: Dict[str, Any]
    seed: Optional[int]
    version: str
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    wall_time: float = 0.0

    @classmethod
    def start(cls, command: str, config: Dict[str, Any], seed: Optional[int], inputs: Sequence[str] = ()):
        from drgmm import version

        return cls(command, config, seed, version(), {p: file_digest(p) for p in inputs})

    def dump(self, path: str):
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True, default=str)


def manifest_path(output: str) -> str:
    return f"{output}.manifest.json"


def _config_snapshot(args: argparse.Namespace) -> Dict[str, Any]:
    return {k: v for k, v in vars(args).items() if k != "handler"}


# ---------------------------------------------------------------------------------------------------------------------
# Commands


def _policy(args, m: int = 1) -> CriticalValuePolicy:
    """--policy, or the conditional DRLM critical values for one parameter and chi2 otherwise"""
    kind = args.policy or (CONDITIONAL_CALIBRATED if m == 1 else FIXED_CHI2)
    return CriticalValuePolicy(kind, args.alpha)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(ridge=args.ridge, with_progress_bar=args.progress)


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise InputError(f"cannot parse parameter value {text!r}") from None


def _ingest_args(args) -> Dict[str, Any]:
    return dict(
        n_assets=args.n_assets,
        n_factors=args.n_factors,
        excess=args.excess,
        n_endogenous=args.n_endogenous,
        n_instruments=args.n_instruments,
        n_controls=args.n_controls,
    )


def _diagnostics(model: MomentModel, j: TestResult) -> Dict[str, Any]:
    """J statistic and CUE, identification strength, Fama-MacBeth or first stage F where they apply"""
    out: Dict[str, Any] = {}
    out["cue"] = [float(x) for x in j.extras["cue"]]
    out["j"] = j.to_dict()
    try:
        out["rank"] = rank_is_statistic(model).to_dict()
    except DrgmmError as e:
        logger.info("identification strength not available: %s", e)
    if isinstance(model, FactorModel):
        fm = confsets.fm_two_pass(model.data)
        out["fama_macbeth"] = {"estimate": fm.lambda_hat.tolist(), "t": fm.fm_t.tolist(), "se": fm.se.tolist()}
    if isinstance(model, IvModel) and model.m == 1:
        out["first_stage_f"] = first_stage_f(model)
    return out


def _analysis_graph(args, final: AnalysisStep) -> AnalysisGraph:
    """ingest -> model -> cue -> final step"""
    graph = AnalysisGraph()
    graph.add_steps(
        [
            AnalysisStep("ingest", lambda _: ingest(args.data, args.model, **_ingest_args(args))),
            AnalysisStep(
                "model",
                lambda r: build_model(r["ingest"], robust=args.robust, delta0=args.delta0),
                parents={"ingest"},
            ),
            AnalysisStep("cue", lambda r: j_statistic(r["model"], _solver_config(args)), parents={"model"}),
            final,
        ]
    )
    return graph


def _run_graph(graph: AnalysisGraph, args) -> StepRunner:
    runner = StepRunner(with_progress_bar=args.progress)
    log_steps(runner)
    runner.visit(graph)
    return runner


def _test_report(model: MomentModel, cue: np.ndarray, args) -> List[Dict[str, Any]]:
    policy = _policy(args)
    names = [s.strip() for s in args.statistics.split(",") if s.strip()]
    rows = []
    for text in args.theta0 or [",".join(["0"] * model.m)]:
        theta0 = _parse_vector(text)
        if theta0.shape[0] != model.m:
            raise InputError(f"theta0 {text!r} has {theta0.shape[0]} entries, the model has {model.m} parameters")
        evaluation = evaluate(model, theta0, ridge=args.ridge)
        results = run_statistics(evaluation, [n for n in names if n != confsets.ENHANCED], policy)
        if confsets.ENHANCED in names:
            results.append(power_enhanced_test(model, theta0, policy, cue=cue, config=_solver_config(args)))
        rows.extend({"theta0": text, **r.to_dict()} for r in results)
    return rows


def cmd_test(args) -> int:
    manifest = RunManifest.start("test", _config_snapshot(args), None, [args.data])
    started = time.perf_counter()
    statistics = AnalysisStep(
        "statistics", lambda r: _test_report(r["model"], r["cue"].extras["cue"], args), parents={"model", "cue"}
    )
    graph = _analysis_graph(args, statistics)
    diagnostics = AnalysisStep(
        "diagnostics", lambda r: _diagnostics(r["model"], r["cue"]), parents={"model", "cue"}, optional=True
    )
    graph.add_step(diagnostics)
    runner = _run_graph(graph, args)

    table = pd.DataFrame(runner.results["statistics"])
    print(table.to_string(index=False))
    summary = runner.results.get("diagnostics", {})
    for key, value in summary.items():
        print(f"{key}: {value.get('value', value) if isinstance(value, dict) else value}")
    manifest.wall_time = time.perf_counter() - started
    if args.output:
        manifest.outputs.append(args.output)
        with open(args.output, "w") as f:
            report = {
                "results": runner.results["statistics"],
                "diagnostics": summary,
                "manifest": manifest_path(args.output),
            }
            json.dump(report, f, indent=2, default=str)
        manifest.dump(manifest_path(args.output))
    return 0


def _confidence_set(model: MomentModel, cue: np.ndarray, args):
    policy = _policy(args, model.m)
    config = _solver_config(args)
    if model.m == 1:
        return confsets.invert_1d(
            model,
            args.statistic,
            policy,
            grid_size=args.grid_size or confsets.GRID_SIZE_1D,
            tolerance=args.tolerance,
            config=config,
            cue=cue[0],
            workers=args.threads,
        )
    return confsets.invert_2d(
        model,
        args.statistic,
        policy,
        grid_size=args.grid_size or confsets.GRID_SIZE_2D,
        config=config,
        cue=cue,
        workers=args.threads,
    )


def cmd_confset(args) -> int:
    manifest = RunManifest.start("confset", _config_snapshot(args), None, [args.data])
    started = time.perf_counter()
    final = AnalysisStep(
        "confset", lambda r: _confidence_set(r["model"], r["cue"].extras["cue"], args), parents={"model", "cue"}
    )
    graph = _analysis_graph(args, final)
    result = _run_graph(graph, args).results["confset"]
    payload = result.to_dict()
    print(json.dumps(payload["intervals"] if "intervals" in payload else payload["projections"]))
    manifest.wall_time = time.perf_counter() - started
    if args.output:
        manifest.outputs.append(args.output)
        payload["manifest"] = manifest_path(args.output)
        with open(args.output, "w") as f:
            json.dump(payload, f, indent=2)
    if args.curve:
        manifest.outputs.append(args.curve)
        if isinstance(result, confsets.ConfidenceSet1D):
            with open(args.curve, "w", newline="") as f:
                f.write(f"# manifest: {manifest_path(args.curve)}\n")
                result.curve.to_csv(f, index=False)
        else:
            result.to_csv(args.curve, manifest_path(args.curve))
    for output in manifest.outputs:
        manifest.dump(manifest_path(output))
    return 0


def _float_list(text: Optional[str]):
    if text is None:
        return None
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise InputError(f"cannot parse list of numbers {text!r}") from None


def _sim_spec(args) -> montecarlo.SimSpec:
    overrides = {
        "kind": args.kind,
        "N": args.n,
        "m": args.m,
        "reps": args.reps,
        "alpha": args.alpha,
        "seed": args.seed,
        "policy": args.policy,
        "mu_sq_grid": _float_list(args.mu_sq),
        "d_sq_grid": _float_list(args.d_sq),
        "misspec": args.misspec,
        "id_strengths": _float_list(args.id_strengths),
        "lambda_grid": _float_list(args.lambda_grid),
        "c_grid": _float_list(args.c),
        "c_tilde_grid": _float_list(args.c_tilde),
        "gamma_offsets": _float_list(args.gamma_offsets),
        "T": args.T,
        "calibration": args.calibration,
        "workers": args.threads,
        "with_progress_bar": args.progress,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.spec_file:
        base = montecarlo.SimSpec.load(args.spec_file).to_dict()
        return montecarlo.SimSpec.from_dict({**base, **overrides})
    if args.preset:
        return montecarlo.SimSpec.preset(args.preset, **overrides)
    return montecarlo.SimSpec(**overrides)


def cmd_simulate(args) -> int:
    spec = _sim_spec(args)
    inputs = [spec.calibration] if spec.calibration else []
    manifest = RunManifest.start("simulate", spec.to_dict(), spec.seed, inputs)
    started = time.perf_counter()
    result = montecarlo.run(spec)
    manifest.wall_time = time.perf_counter() - started
    print(result.frame.to_string(index=False))
    if args.output:
        manifest.outputs.append(args.output)
        result.to_csv(args.output, manifest_path(args.output))
        if isinstance(result, montecarlo.JstatCdf):
            cdf_path = args.output.replace(".csv", "") + "_cdf.csv"
            manifest.outputs.append(cdf_path)
            with open(cdf_path, "w", newline="") as f:
                f.write(f"# manifest: {manifest_path(args.output)}\n")
                result.cdf.to_csv(f, index=False)
        manifest.dump(manifest_path(args.output))
    return 0


def cmd_ingest(args) -> int:
    data = ingest(args.data, args.model, **_ingest_args(args))
    print(json.dumps({"schema": args.model, **describe(data)}))
    return 0


# ---------------------------------------------------------------------------------------------------------------------
# Parser


def _add_data_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("data", help="CSV dataset")
    parser.add_argument("--model", choices=MODEL_KINDS, required=True, help="dataset schema and moment model")
    parser.add_argument("--n-assets", type=int, default=None, help="return columns (factor, crra)")
    parser.add_argument("--n-factors", type=int, default=1, help="factor columns (factor)")
    parser.add_argument("--excess", action="store_true", help="returns are excess returns (factor)")
    parser.add_argument("--n-endogenous", type=int, default=1, help="endogenous regressors (iv)")
    parser.add_argument("--n-instruments", type=int, default=None, help="instrument columns (iv)")
    parser.add_argument("--n-controls", type=int, default=0, help="included exogenous columns (iv)")
    parser.add_argument("--delta0", type=float, default=DEFAULT_DELTA0, help="discount factor (crra)")
    parser.add_argument("--robust", action="store_true", help="Eicker-White covariances instead of the iid forms")
    parser.add_argument("--ridge", action="store_true", help="regularize singular covariance estimates")


def _add_policy_arguments(parser: argparse.ArgumentParser, default: Optional[str]):
    help_text = "DRLM critical value policy" + ("" if default else " (default: conditional for one parameter)")
    parser.add_argument("--policy", choices=POLICIES, default=default, help=help_text)
    parser.add_argument("--alpha", type=float, default=0.05, help="significance level")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drgmm", description="Double robust inference for continuous updating GMM")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    parser.add_argument("--progress", action="store_true", help="show progress bars")
    parser.add_argument("--threads", type=int, default=1, help="worker threads, outputs do not depend on it")
    sub = parser.add_subparsers(dest="command", required=True)

    test = sub.add_parser("test", help="test hypothesized parameter values")
    _add_data_arguments(test)
    _add_policy_arguments(test, FIXED_CHI2)
    test.add_argument("--theta0", action="append", help="comma separated value, repeat for several")
    test.add_argument("--statistics", default=DEFAULT_STATISTICS, help="drlm, klm, ar, lr and drlm_enhanced")
    test.add_argument("--output", help="JSON report")
    test.set_defaults(handler=cmd_test)

    confset = sub.add_parser("confset", help="confidence set by test inversion")
    _add_data_arguments(confset)
    _add_policy_arguments(confset, None)
    confset.add_argument("--statistic", choices=confsets.CONFSET_STATISTICS, default="drlm")
    confset.add_argument("--grid-size", type=int, default=None, help="grid points (per axis for two parameters)")
    confset.add_argument("--tolerance", type=float, default=confsets.BISECTION_TOLERANCE, help="bisection tolerance")
    confset.add_argument("--output", help="JSON set")
    confset.add_argument("--curve", help="CSV of the statistic on the grid")
    confset.set_defaults(handler=cmd_confset)

    simulate = sub.add_parser("simulate", help="Monte Carlo experiments")
    simulate.add_argument("kind", choices=montecarlo.KINDS)
    simulate.add_argument("--preset", choices=sorted(montecarlo.PRESETS))
    simulate.add_argument("--spec-file", help="JSON simulation settings, flags override it")
    simulate.add_argument("--n", type=int, default=None, help="number of moments")
    simulate.add_argument("--m", type=int, default=None, help="number of parameters")
    simulate.add_argument("--reps", type=int, default=None)
    simulate.add_argument("--seed", type=int, default=None, help="master seed, DRGMM_SEED or a fixed default")
    _add_policy_arguments(simulate, FIXED_CHI2)
    simulate.add_argument("--mu-sq", help="misspecification grid |mu|^2, comma separated")
    simulate.add_argument("--d-sq", help="identification grid |D|^2, comma separated")
    simulate.add_argument("--misspec", type=float, default=None, help="|mu|^2 of power curves and J distributions")
    simulate.add_argument("--id-strengths", help="|D|^2 of power curves and J distributions, comma separated")
    simulate.add_argument("--lambda-grid", help="drift of the pseudo-true value, comma separated")
    simulate.add_argument("--c", help="CRRA misspecification c, comma separated")
    simulate.add_argument("--c-tilde", help="CRRA covariance scaling, comma separated")
    simulate.add_argument("--gamma-offsets", help="hypothesized gamma minus gamma*, comma separated")
    simulate.add_argument("--T", type=int, default=None, help="CRRA sample size")
    simulate.add_argument("--calibration", help="CRRA calibration JSON")
    simulate.add_argument("--output", help="CSV result")
    simulate.set_defaults(handler=cmd_simulate)

    ingest_cmd = sub.add_parser("ingest", help="validate a dataset and echo its dimensions")
    _add_data_arguments(ingest_cmd)
    ingest_cmd.set_defaults(handler=cmd_ingest)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """:return: 0 on success, the exit code of the error class otherwise"""
    parser = make_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        if args.command == "simulate" and args.seed is None and args.spec_file is None:
            args.seed = default_seed()
        return args.handler(args)
    except DrgmmError as e:
        logger.error("%s", e)
        return e.exit_code
    except AssertionError as e:
        logger.error("invalid input: %s", e)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
