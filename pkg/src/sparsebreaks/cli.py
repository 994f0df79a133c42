"""Command-line front end.

Subcommands
-----------
fit           breaks in a regression panel CSV
lambda-path   the same, reporting every penalty on the path
vecm          time-varying long-run matrix and comovement degree of a series CSV
synth         write a seeded synthetic panel CSV and its ground truth

Exit codes: 0 success, 1 unexpected error, 2 usage error, 3 I/O error,
4 malformed or invalid input, 5 numerical failure. On failure a single JSON
object ``{"error", "message", "exit_code"}`` is written to standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from sparsebreaks.errors import (
    DegenerateDesign,
    IoError,
    NoMatchingLambda,
    SingularBetaGram,
    SparseBreaksError,
    UnstableSystem,
    ZeroResidual,
)
from sparsebreaks.io import SeriesData, emit_report, ingest_csv, write_panel_csv
from sparsebreaks.panel import RegressionPanel
from sparsebreaks.pipeline import detect_breaks
from sparsebreaks.solver import SolverConfig
from sparsebreaks.synth import SyntheticScenario, generate_panel
from sparsebreaks.vecm import VecmSpec, comovement_pipeline

__all__ = ["RunConfig", "UsageError", "run", "main", "EXIT_CODES"]

logger = logging.getLogger("sparsebreaks")

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INPUT = 4
EXIT_NUMERICAL = 5
EXIT_CODES = {
    "ok": EXIT_OK,
    "other": EXIT_OTHER,
    "usage": EXIT_USAGE,
    "io": EXIT_IO,
    "input": EXIT_INPUT,
    "numerical": EXIT_NUMERICAL,
}

_NUMERICAL = (DegenerateDesign, ZeroResidual, NoMatchingLambda, SingularBetaGram, UnstableSystem)


class UsageError(SparseBreaksError, ValueError):
    """Inconsistent command-line options."""


@dataclass
class RunConfig:
    """Everything one CLI invocation needs.

    ``lam`` is ``"auto"`` (BIC over the path) or a positive penalty in scaled
    units; ``fixed_k`` asks for exactly that many breaks instead.
    """

    subcommand: str
    output: Path
    input: Path | None = None
    lags: int | None = None
    rank: int | None = None
    lam: str | float = "auto"
    fixed_k: int | None = None
    num_lambdas: int = 50
    min_ratio: float = 0.01
    degree_norm: str = "spectral"
    kkt_tol: float = 1e-6
    max_sweeps: int = 10000
    seed: int | None = None
    periods: int = 60
    obs_dim: int = 2
    coef_dim: int = 3
    break_at: list[int] = field(default_factory=list)
    jump_size: float = 10.0
    noise_scale: float = 1.0

    def validate(self) -> None:
        sub = self.subcommand
        if sub not in ("fit", "vecm", "synth", "lambda-path"):
            raise UsageError(f"unknown subcommand {sub!r}")
        if sub != "synth" and self.input is None:
            raise UsageError(f"{sub} requires --input")
        if sub == "vecm":
            if self.lags is None or self.rank is None:
                raise UsageError("vecm requires --lags and --rank")
        elif self.lags is not None or self.rank is not None:
            raise UsageError("--lags and --rank only apply to vecm")
        if sub == "synth":
            if self.seed is None:
                raise UsageError("synth requires --seed")
        elif self.seed is not None:
            raise UsageError("--seed only applies to synth")
        if self.lam != "auto" and self.fixed_k is not None:
            raise UsageError("--lambda VALUE and --fixed-k are mutually exclusive")
        if sub == "lambda-path" and (self.lam != "auto" or self.fixed_k is not None):
            raise UsageError("lambda-path solves the whole path; drop --lambda/--fixed-k")
        if self.lam != "auto" and not float(self.lam) > 0:
            raise UsageError("--lambda must be 'auto' or a positive number")
        if self.fixed_k is not None and self.fixed_k < 0:
            raise UsageError("--fixed-k must be nonnegative")
        if self.num_lambdas < 1 or not 0 < self.min_ratio < 1:
            raise UsageError("need --num-lambdas >= 1 and 0 < --min-ratio < 1")
        if self.kkt_tol <= 0 or self.max_sweeps < 1:
            raise UsageError("need --kkt-tol > 0 and --max-sweeps >= 1")

    def to_json(self) -> dict[str, Any]:
        """The options that apply to this subcommand, JSON-ready."""
        out = asdict(self)
        out["output"] = str(self.output)
        out["input"] = None if self.input is None else str(self.input)
        out["lambda"] = out.pop("lam")
        if self.subcommand != "synth":
            for key in _SYNTH_ONLY:
                out.pop(key)
        else:
            for key in _LASSO_ONLY:
                out.pop(key)
        if self.subcommand != "vecm":
            for key in _VECM_ONLY:
                out.pop(key)
        return out


_SYNTH_ONLY = ("seed", "periods", "obs_dim", "coef_dim", "break_at", "jump_size", "noise_scale")
_VECM_ONLY = ("lags", "rank", "degree_norm")
_LASSO_ONLY = ("input", "lambda", "fixed_k", "num_lambdas", "min_ratio", "kkt_tol", "max_sweeps")


def _lasso_kwargs(cfg: RunConfig) -> dict[str, Any]:
    solver = SolverConfig(lam=1.0, kkt_tol=cfg.kkt_tol, max_sweeps=cfg.max_sweeps)
    kwargs: dict[str, Any] = {"config": solver, "num_lambdas": cfg.num_lambdas, "min_ratio": cfg.min_ratio}
    if cfg.lam != "auto":
        kwargs["lam"] = float(cfg.lam)
    elif cfg.fixed_k is not None:
        kwargs["criterion"] = cfg.fixed_k
    return kwargs


def _read(path: Path, kind: str):
    data = ingest_csv(path, kind=kind)
    if kind == "panel" and not isinstance(data, RegressionPanel):
        raise UsageError("expected a panel CSV")
    return data


def _run_fit(cfg: RunConfig) -> None:
    panel = _read(cfg.input, "panel")
    report = detect_breaks(panel, **_lasso_kwargs(cfg))
    kind = "lambda-path" if cfg.subcommand == "lambda-path" else "fit"
    labels = [panel.label(t) for t in range(1, panel.periods + 1)]
    emit_report(report, cfg.output, kind=kind, config=cfg.to_json(), labels=labels)
    logger.info("%s: %d break(s) at lambda=%r", cfg.subcommand, len(report.breaks), report.lambda_used)


def _run_vecm(cfg: RunConfig) -> None:
    series = _read(cfg.input, "series")
    assert isinstance(series, SeriesData)
    spec = VecmSpec(cfg.lags, cfg.rank, degree_norm=cfg.degree_norm)
    fit, report, comovement = comovement_pipeline(
        series.values, spec, labels=series.labels, **_lasso_kwargs(cfg)
    )
    emit_report(report, cfg.output, kind="vecm", config=cfg.to_json(), comovement=comovement, fit=fit)
    logger.info("vecm: %d break(s) at lambda=%r", len(report.breaks), report.lambda_used)


def _synth_jumps(cfg: RunConfig) -> list[tuple[int, np.ndarray]]:
    """Jumps of norm ``jump_size`` along ``(1, ..., 1)``, alternating in sign."""
    direction = np.ones(cfg.coef_dim) / np.sqrt(cfg.coef_dim)
    return [(p, (-1) ** i * cfg.jump_size * direction) for i, p in enumerate(sorted(cfg.break_at))]


def _run_synth(cfg: RunConfig) -> None:
    logger.info("synth seed=%d", cfg.seed)
    scenario = SyntheticScenario(
        seed=cfg.seed,
        periods=cfg.periods,
        obs_dim=cfg.obs_dim,
        coef_dim=cfg.coef_dim,
        jump_schedule=_synth_jumps(cfg),
        noise_scale=cfg.noise_scale,
    )
    panel, truth = generate_panel(scenario)
    panel = RegressionPanel(panel.design_blocks, panel.responses, tuple(range(1, cfg.periods + 1)))
    out = Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from exc
    write_panel_csv(out / "panel.csv", panel)
    doc = {
        "seed": cfg.seed,
        "rng": "numpy Philox",
        "periods": cfg.periods,
        "obs_dim": cfg.obs_dim,
        "coef_dim": cfg.coef_dim,
        "noise_scale": cfg.noise_scale,
        "break_periods": sorted(cfg.break_at),
        "beta0": truth.beta0.tolist(),
        "jumps": [{"period": p, "jump": j.tolist()} for p, j in _synth_jumps(cfg)],
    }
    try:
        (out / "truth.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {out / 'truth.json'}: {exc}") from exc


def run(cfg: RunConfig) -> int:
    """Execute one run and return its exit status.

    Errors are caught, reported as JSON on standard error and mapped to the
    exit codes in the module docstring.
    """
    try:
        cfg.validate()
        if cfg.subcommand in ("fit", "lambda-path"):
            _run_fit(cfg)
        elif cfg.subcommand == "vecm":
            _run_vecm(cfg)
        else:
            _run_synth(cfg)
    except Exception as exc:  # noqa: BLE001 - every failure becomes an exit code
        code = _exit_code(exc)
        payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        print(json.dumps(payload), file=sys.stderr)
        if code == EXIT_OTHER:
            logger.debug("unexpected failure", exc_info=True)
        return code
    return EXIT_OK


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, (IoError, OSError)):
        return EXIT_IO
    if isinstance(exc, _NUMERICAL):
        return EXIT_NUMERICAL
    if isinstance(exc, (SparseBreaksError, ValueError, IndexError)):
        return EXIT_INPUT
    return EXIT_OTHER


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _lambda_arg(text: str) -> str | float:
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsebreaks", description="Sparse structural-break detection.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    def lasso_opts(p: argparse.ArgumentParser, path_only: bool = False) -> None:
        if not path_only:
            p.add_argument("--lambda", dest="lam", type=_lambda_arg, default="auto",
                           help="'auto' (BIC over the path) or a fixed penalty")
            p.add_argument("--fixed-k", type=int, default=None, help="report exactly this many breaks")
        p.add_argument("--num-lambdas", type=_positive_int, default=50)
        p.add_argument("--min-ratio", type=float, default=0.01)
        p.add_argument("--kkt-tol", type=float, default=1e-6)
        p.add_argument("--max-sweeps", type=_positive_int, default=10000)

    for name, help_text in (("fit", "detect breaks in a panel CSV"),
                            ("lambda-path", "solve and report the whole penalty path")):
        p = subs.add_parser(name, help=help_text)
        p.add_argument("--input", type=Path, required=True)
        p.add_argument("--output", type=Path, required=True)
        lasso_opts(p, path_only=name == "lambda-path")

    p = subs.add_parser("vecm", help="time-varying VEC comovement from a series CSV")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--lags", type=_positive_int, required=True)
    p.add_argument("--rank", type=_positive_int, required=True)
    p.add_argument("--degree-norm", choices=("spectral", "frobenius"), default="spectral")
    lasso_opts(p)

    p = subs.add_parser("synth", help="write a synthetic panel with planted breaks")
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--periods", type=_positive_int, default=60)
    p.add_argument("--obs-dim", type=_positive_int, default=2)
    p.add_argument("--coef-dim", type=_positive_int, default=3)
    p.add_argument("--break-at", type=int, action="append", default=[], help="repeatable")
    p.add_argument("--jump-size", type=float, default=10.0)
    p.add_argument("--noise-scale", type=float, default=1.0)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    logging.basicConfig(
        level=logging.INFO if args.pop("verbose") else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    return run(RunConfig(**args))


if __name__ == "__main__":
    sys.exit(main())
