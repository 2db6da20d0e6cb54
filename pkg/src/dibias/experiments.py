"""Seeded bias experiments over random models of a given structure.

Each trial samples a model, computes the exact TDI/PDI rates for every k, a
high-order squeeze used as the DI reference, simulates a sequence and
estimates both rates from it.  Reports aggregate the estimated gaps to the DI
reference as boxplot quartiles.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DibiasError, ValidationError
from .estimators import KINDS, estimate_pdi, estimate_tdi
from .exact_info import CONVERGENCE_GAP, exact_pdi_rate, exact_tdi_rate
from .process_model import (
    STRUCTURE_DEFAULTS,
    AlphabetSpec,
    get_structure,
    sample_sequence,
    sample_structured_model,
    stationary_distribution,
)

log = logging.getLogger(__name__)

GAP_MEASURES = ("tdi_gap", "pdi_gap")


@dataclass
class ExperimentConfig:
    structure: str = "S1"
    trials: int = 20
    n: int = 100_000
    x_size: int = 4
    y_size: int = 4
    z_size: int = 1
    d: int = 1
    k_list: list[int] | None = None
    kind: str = "ctw"
    master_seed: int = 0
    output: str | None = None
    k_max: int | None = None
    workers: int = 1

    def __post_init__(self):
        self.structure = self.structure.upper()
        get_structure(self.structure)
        if self.k_list is None:
            self.k_list = [self.d, self.d + 1, self.d + 2]
        self.k_list = [int(k) for k in self.k_list]
        if self.k_max is None:
            self.k_max = self.d + 4
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.trials < 0 or self.n < 1:
            raise ValidationError("trials must be >= 0 and n >= 1")
        if min(self.k_list, default=self.d) < 1 or self.k_max < max(self.k_list, default=1):
            raise ValidationError("k values must be >= 1 and not exceed k_max")

    @property
    def alphabet(self) -> AlphabetSpec:
        return AlphabetSpec(self.x_size, self.y_size, self.z_size)

    @classmethod
    def for_structure(cls, structure: str, full_scale: bool = False, **overrides) -> "ExperimentConfig":
        """Paper alphabet sizes and order for ``structure``; desk-scale by default."""
        alphabet, d = STRUCTURE_DEFAULTS[structure.upper()]
        base = dict(
            structure=structure,
            x_size=alphabet.x_size,
            y_size=alphabet.y_size,
            z_size=alphabet.z_size,
            d=d,
        )
        if full_scale:
            base.update(trials=100, n=300_000)
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)

    @classmethod
    def from_dict(cls, data: dict, full_scale: bool = False) -> "ExperimentConfig":
        """Config from field names; unspecified fields take the structure defaults."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        structure = data.get("structure", "S1")
        rest = {k: v for k, v in data.items() if k != "structure"}
        return cls.for_structure(structure, full_scale=full_scale, **rest)

    @classmethod
    def from_json(cls, path: str | Path, full_scale: bool = False) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()), full_scale)


@dataclass
class TrialRecord:
    trial: int
    model_seed: int
    sequence_seed: int
    exact_tdi: dict[int, float] = field(default_factory=dict)
    exact_pdi: dict[int, float] = field(default_factory=dict)
    tdi_hat: dict[int, float] = field(default_factory=dict)
    pdi_hat: dict[int, float] = field(default_factory=dict)
    tdi_kmax: float | None = None
    pdi_kmax: float | None = None
    di_proxy: float | None = None
    converged: bool = False
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def gaps(self, k: int) -> dict[str, float]:
        return {
            "tdi_gap": self.tdi_hat[k] - self.di_proxy,
            "pdi_gap": self.pdi_hat[k] - self.di_proxy,
            "exact_tdi_gap": self.exact_tdi[k] - self.di_proxy,
            "exact_pdi_gap": self.exact_pdi[k] - self.di_proxy,
        }


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list[TrialRecord]

    @property
    def completed(self) -> list[TrialRecord]:
        return [r for r in self.records if r.ok]

    @property
    def n_failed(self) -> int:
        return sum(not r.ok for r in self.records)

    @property
    def mean_di_proxy(self) -> float | None:
        vals = [r.di_proxy for r in self.completed]
        return float(np.mean(vals)) if vals else None

    def gap_values(self, k: int, measure: str) -> np.ndarray:
        return np.array([r.gaps(k)[measure] for r in self.completed])

    def quartiles(self) -> list[dict]:
        """Boxplot statistics per (k, measure) over completed trials."""
        rows = []
        if not self.completed:
            return rows
        for k in self.config.k_list:
            for measure in GAP_MEASURES:
                v = self.gap_values(k, measure)
                q = np.percentile(v, [0, 25, 50, 75, 100])
                rows.append(
                    {
                        "structure": self.config.structure,
                        "k": k,
                        "measure": measure,
                        "count": int(v.size),
                        "min": float(q[0]),
                        "q1": float(q[1]),
                        "median": float(q[2]),
                        "q3": float(q[3]),
                        "max": float(q[4]),
                        "mean": float(v.mean()),
                        "mean_di_proxy": self.mean_di_proxy,
                    }
                )
        return rows

    def detail_rows(self) -> list[dict]:
        rows = []
        for r in self.completed:
            for k in self.config.k_list:
                rows.append(
                    {
                        "structure": self.config.structure,
                        "trial": r.trial,
                        "model_seed": r.model_seed,
                        "sequence_seed": r.sequence_seed,
                        "n": self.config.n,
                        "kind": self.config.kind,
                        "k": k,
                        "exact_tdi": r.exact_tdi[k],
                        "exact_pdi": r.exact_pdi[k],
                        "tdi_hat": r.tdi_hat[k],
                        "pdi_hat": r.pdi_hat[k],
                        "di_proxy": r.di_proxy,
                        "converged": r.converged,
                        **r.gaps(k),
                    }
                )
        return rows

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "n_failed": self.n_failed,
            "mean_di_proxy": self.mean_di_proxy,
            "records": [
                {
                    **asdict(r),
                    **{
                        key: {str(k): v for k, v in getattr(r, key).items()}
                        for key in ("exact_tdi", "exact_pdi", "tdi_hat", "pdi_hat")
                    },
                }
                for r in self.records
            ],
            "summary": self.quartiles(),
        }


def trial_seeds(master_seed: int, trial: int) -> tuple[int, int]:
    """(model seed, sequence seed) derived from the master seed and trial index."""
    state = np.random.SeedSequence([master_seed, trial]).generate_state(2)
    return int(state[0]), int(state[1])


def run_trial(cfg: ExperimentConfig, trial: int) -> TrialRecord:
    model_seed, seq_seed = trial_seeds(cfg.master_seed, trial)
    rec = TrialRecord(trial, model_seed, seq_seed)
    try:
        model = sample_structured_model(get_structure(cfg.structure), cfg.alphabet, cfg.d, model_seed)
        st = stationary_distribution(model)
        rec.tdi_kmax = exact_tdi_rate(model, cfg.k_max, st)
        rec.pdi_kmax = exact_pdi_rate(model, cfg.k_max, st)
        rec.di_proxy = 0.5 * (rec.tdi_kmax + rec.pdi_kmax)
        rec.converged = rec.tdi_kmax - rec.pdi_kmax <= CONVERGENCE_GAP
        seq = sample_sequence(model, cfg.n, seq_seed, st)
        for k in cfg.k_list:
            rec.exact_tdi[k] = exact_tdi_rate(model, k, st)
            rec.exact_pdi[k] = exact_pdi_rate(model, k, st)
            rec.tdi_hat[k] = estimate_tdi(seq, k, cfg.kind)
            rec.pdi_hat[k] = estimate_pdi(seq, k, cfg.d, cfg.kind)
    except DibiasError as exc:
        log.warning("trial %d failed: %s", trial, exc)
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def _run_trial_args(args):
    return run_trial(*args)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    jobs = [(cfg, t) for t in range(cfg.trials)]
    if cfg.workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_trial_args, jobs))
    else:
        records = [run_trial(*job) for job in jobs]
    records.sort(key=lambda r: r.trial)
    report = ExperimentReport(cfg, records)
    if report.n_failed:
        log.warning("%d of %d trials failed and are excluded from aggregates", report.n_failed, cfg.trials)
    return report


DETAIL_HEADER = [
    "structure", "trial", "model_seed", "sequence_seed", "n", "kind", "k",
    "exact_tdi", "exact_pdi", "tdi_hat", "pdi_hat", "di_proxy", "converged",
    "tdi_gap", "pdi_gap", "exact_tdi_gap", "exact_pdi_gap",
]  # fmt: skip
SUMMARY_HEADER = [
    "structure", "k", "measure", "count", "min", "q1", "median", "q3", "max", "mean", "mean_di_proxy",
]  # fmt: skip


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return v


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in header})


def emit_report(report: ExperimentReport, out: str | Path, fmt: str = "csv") -> list[Path]:
    """Write the report next to ``out`` (a path prefix); returns files written.

    csv: ``<out>_trials.csv`` (one row per trial and k) and
    ``<out>_summary.csv`` (quartiles per k and gap measure).
    json: ``<out>.json`` with full records and the summary.
    """
    out = Path(out)
    if out.suffix in (".csv", ".json"):
        out = out.with_suffix("")
    out.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        detail = out.with_name(out.name + "_trials.csv")
        summary = out.with_name(out.name + "_summary.csv")
        _write_csv(detail, DETAIL_HEADER, report.detail_rows())
        _write_csv(summary, SUMMARY_HEADER, report.quartiles())
        return [detail, summary]
    if fmt == "json":
        path = out.with_name(out.name + ".json")
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        return [path]
    raise ValidationError(f"unknown report format {fmt!r}")
