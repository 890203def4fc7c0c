"""Seeded experiment runner: train the three methods across shifts and record everything.

A run is a grid of (method, fairness weight, seed) cells.  ``MLP`` trains the
plain classifier, ``REG`` adds the parity regularizer, and ``RFR`` adds the
robustness penalty on top; the latter two share one code path (``REG`` is the
zero-radius special case) so collapse identities hold by construction.

Every cell writes one JSON record embedding the full resolved configuration
(radius and norm exponent included, since nothing may default silently), the
source/target metrics, the parity transfer bound, and a content hash over the
timestamp-free payload so reruns are byte-checkable.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import losses, metrics, shiftgen
from .data import Dataset, SchemaConfig, ToySpec, load_csv, make_toy, split_by_column
from .errors import TrainingDiverged, UsageError
from .losses import PerturbationConfig, TrainConfig
from .shiftgen import ShiftConfig

RECORD_SCHEMA_VERSION = 1
METHODS = ("MLP", "REG", "RFR")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description.

    ``rho`` and ``p_norm`` are mandatory: the robustness radius and norm
    exponent must be chosen explicitly for every experiment and are embedded
    in each record.
    """

    methods: tuple[str, ...]
    lambda_grid: tuple[float, ...]
    seeds: tuple[int, ...]
    dataset: dict
    shift: dict
    rho: float
    p_norm: float
    epochs: int = 200
    lr: float = 1e-5
    weight_decay: float = 0.01
    batch_size: int | None = None
    loss_variant: str = "linear"
    hidden: tuple[int, ...] = (50, 50)
    unscaled_robust_update: bool = False
    threshold: float = 0.5
    out: str | None = None

    def __post_init__(self):
        for f in ("methods", "lambda_grid", "seeds", "hidden"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise UsageError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if not self.methods or not self.seeds:
            raise UsageError("methods and seeds must be non-empty")
        if not self.lambda_grid and set(self.methods) != {"MLP"}:
            raise UsageError("lambda_grid must be non-empty for REG/RFR")
        if self.rho < 0:
            raise UsageError("rho must be nonnegative")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        train = dict(raw.get("train", {}))
        if "rho" not in train or "p" not in train:
            raise UsageError("train.rho and train.p are required; pick them explicitly")
        try:
            dataset = dict(raw["dataset"])
            shift = dict(raw["shift"])
        except KeyError as exc:
            raise UsageError(f"config is missing required key {exc.args[0]!r}") from exc
        p = train["p"]
        return cls(
            methods=tuple(raw.get("methods", METHODS)),
            lambda_grid=tuple(raw.get("lambda_grid", (1.0,))),
            seeds=tuple(raw.get("seeds", (0, 1, 2, 3, 4))),
            dataset=dataset,
            shift=shift,
            rho=float(train["rho"]),
            p_norm=float("inf") if p in ("inf", "Infinity") else float(p),
            epochs=int(train.get("epochs", 200)),
            lr=float(train.get("lr", 1e-5)),
            weight_decay=float(train.get("weight_decay", 0.01)),
            batch_size=train.get("batch_size"),
            loss_variant=train.get("loss_variant", "linear"),
            hidden=tuple(train.get("hidden", (50, 50))),
            unscaled_robust_update=bool(train.get("unscaled_robust_update", False)),
            threshold=float(raw.get("threshold", 0.5)),
            out=raw.get("out"),
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _load_pool(cfg: ExperimentConfig) -> Dataset:
    kind = cfg.dataset.get("kind")
    if kind == "toy":
        spec_fields = {k: v for k, v in cfg.dataset.items()
                       if k not in ("kind", "n", "seed")}
        spec_fields = {k: tuple(map(tuple, v)) if k in ("cov0", "cov1") else
                       (tuple(v) if isinstance(v, list) else v)
                       for k, v in spec_fields.items()}
        spec = ToySpec(**spec_fields)
        return make_toy(spec, int(cfg.dataset["n"]), int(cfg.dataset["seed"]))
    if kind == "csv":
        schema = cfg.dataset["schema"]
        schema = SchemaConfig.from_dict(schema) if isinstance(schema, dict) \
            else SchemaConfig.from_json(schema)
        return load_csv(cfg.dataset["path"], schema)
    raise UsageError(f"dataset.kind must be 'toy' or 'csv', got {kind!r}")


def make_source_target(cfg: ExperimentConfig, run_seed: int) -> tuple[Dataset, Dataset, dict]:
    """Build the (source, target) pair for one run seed.

    Synthetic shifts resample the biased split per run seed (unless
    ``resample_per_seed`` is false); split-column partitions are fixed.
    """
    kind = cfg.shift.get("kind")
    if kind == "split-column":
        if cfg.dataset.get("kind") != "csv":
            raise UsageError("split-column shift requires a csv dataset")
        schema = cfg.dataset["schema"]
        schema = SchemaConfig.from_dict(schema) if isinstance(schema, dict) \
            else SchemaConfig.from_json(schema)
        source, target = split_by_column(cfg.dataset["path"], schema)
        return source, target, {"kind": "split-column", "column": schema.split_column}
    if kind == "synthetic":
        pool = _load_pool(cfg)
        base_seed = int(cfg.shift.get("seed", 0))
        resample = bool(cfg.shift.get("resample_per_seed", True))
        shift_seed = base_seed + run_seed if resample else base_seed
        n_source = cfg.shift.get("n_source")
        n_target = cfg.shift.get("n_target")
        if n_source is None or n_target is None:
            n_source, n_target = shiftgen.default_counts(pool.n)
        shift_cfg = ShiftConfig(
            alpha=float(cfg.shift["alpha"]), beta=float(cfg.shift["beta"]),
            n_source=int(n_source), n_target=int(n_target), seed=shift_seed,
            swap_orientation=bool(cfg.shift.get("swap_orientation", False)),
        )
        proj = shiftgen.first_pc(pool.X)
        source, target = shiftgen.biased_sample(pool, proj, shift_cfg)
        note = {"kind": "synthetic", "alpha": shift_cfg.alpha, "beta": shift_cfg.beta,
                "n_source": shift_cfg.n_source, "n_target": shift_cfg.n_target,
                "shift_seed": shift_seed, "swap_orientation": shift_cfg.swap_orientation}
        return source, target, note
    raise UsageError(f"shift.kind must be 'synthetic' or 'split-column', got {kind!r}")


def _effective(method: str, lam: float, rho: float) -> tuple[float, float]:
    if method == "MLP":
        return 0.0, 0.0
    if method == "REG":
        return lam, 0.0
    return lam, rho


def canonical_hash(record: dict) -> str:
    payload = {k: v for k, v in record.items() if k not in ("created_at", "record_hash")}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _report_dict(report) -> dict:
    return {k: (None if v is None else (bool(v) if isinstance(v, (bool, np.bool_)) else float(v)))
            for k, v in report.to_dict().items()}


def run_cell(cfg: ExperimentConfig, method: str, lam: float, seed: int) -> dict:
    """Train and evaluate one (method, lambda, seed) cell; never raises on divergence."""
    source, target, shift_note = make_source_target(cfg, seed)
    lam_eff, rho_eff = _effective(method, lam, cfg.rho)
    train_cfg = TrainConfig(
        lam=lam_eff, epochs=cfg.epochs, batch_size=cfg.batch_size, seed=seed,
        loss_variant=cfg.loss_variant,
        perturbation=PerturbationConfig(rho_eff, cfg.p_norm),
        lr=cfg.lr, weight_decay=cfg.weight_decay,
        unscaled_robust_update=cfg.unscaled_robust_update,
    )
    record = {
        "schema_version": RECORD_SCHEMA_VERSION,
        "method": method,
        "lambda": float(lam_eff),
        "seed": int(seed),
        "config": {
            "rho": float(rho_eff), "p": ("inf" if np.isinf(cfg.p_norm) else float(cfg.p_norm)),
            "epochs": cfg.epochs, "lr": cfg.lr, "weight_decay": cfg.weight_decay,
            "batch_size": cfg.batch_size, "loss_variant": cfg.loss_variant,
            "hidden": list(cfg.hidden), "threshold": cfg.threshold,
            "unscaled_robust_update": cfg.unscaled_robust_update,
        },
        "dataset": {k: v for k, v in cfg.dataset.items() if k != "schema"},
        "shift": shift_note,
        "status": "ok",
        "diverged_epoch": None,
    }
    try:
        result = losses.train(source, hidden=cfg.hidden, cfg=train_cfg)
    except TrainingDiverged as exc:
        record["status"] = "diverged"
        record["diverged_epoch"] = exc.epoch
        record["source"] = record["target"] = record["bound"] = None
        record["final_loss"] = None
    else:
        record["source"] = _report_dict(metrics.evaluate(result.params, source, cfg.threshold))
        record["target"] = _report_dict(metrics.evaluate(result.params, target, cfg.threshold))
        record["bound"] = _report_dict(metrics.check_bound(result.params, source, target))
        record["final_loss"] = {k: float(v) for k, v in result.trace[-1].to_dict().items()}
    record["record_hash"] = canonical_hash(record)
    record["created_at"] = datetime.now(timezone.utc).isoformat()
    return record


def iter_cells(cfg: ExperimentConfig):
    """Grid cells: REG/RFR sweep the lambda grid; MLP has no lambda knob."""
    for method in cfg.methods:
        lams = cfg.lambda_grid if method != "MLP" else (0.0,)
        for lam in lams:
            for seed in cfg.seeds:
                yield method, lam, seed


def run_experiment(cfg: ExperimentConfig, out: str | None = None) -> list[dict]:
    """Run every grid cell, optionally writing records and tables to a directory."""
    records = [run_cell(cfg, method, lam, seed) for method, lam, seed in iter_cells(cfg)]
    out_dir = out or cfg.out
    if out_dir:
        write_outputs(records, out_dir)
    return records


_CSV_FIELDS = (
    "method", "lambda", "seed", "status", "rho", "p",
    "source_accuracy", "source_delta_dp", "source_delta_eo",
    "target_accuracy", "target_delta_dp", "target_delta_eo",
    "bound_dp_source", "bound_dp_target", "bound_delta0", "bound_delta1",
    "bound_value", "bound_satisfied", "record_hash",
)


def _flat_row(record: dict) -> dict:
    row = {
        "method": record["method"], "lambda": record["lambda"], "seed": record["seed"],
        "status": record["status"], "rho": record["config"]["rho"], "p": record["config"]["p"],
        "record_hash": record["record_hash"],
    }
    for side in ("source", "target"):
        rep = record.get(side) or {}
        for metric in ("accuracy", "delta_dp", "delta_eo"):
            row[f"{side}_{metric}"] = rep.get(metric)
    bound = record.get("bound") or {}
    row.update(bound_dp_source=bound.get("dp_source"), bound_dp_target=bound.get("dp_target"),
               bound_delta0=bound.get("delta0"), bound_delta1=bound.get("delta1"),
               bound_value=bound.get("bound"), bound_satisfied=bound.get("satisfied"))
    return row


def write_outputs(records: list[dict], out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "records.jsonl", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    with open(out / "records.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        writer.writeheader()
        for record in records:
            writer.writerow(_flat_row(record))
    with open(out / "tradeoff.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "lambda", "n_seeds",
                         "target_accuracy_mean", "target_delta_dp_mean",
                         "target_accuracy_std", "target_delta_dp_std"])
        for row in tradeoff_table(records):
            writer.writerow(row)


def tradeoff_table(records: list[dict]) -> list[list]:
    """Accuracy-vs-parity points per (method, lambda), ready for plotting."""
    rows = []
    for (method, lam), cell in sorted(_group_cells(records).items()):
        acc = [r["target"]["accuracy"] for r in cell if r["status"] == "ok"]
        dp = [r["target"]["delta_dp"] for r in cell if r["status"] == "ok"]
        if not acc:
            continue
        rows.append([method, lam, len(acc),
                     float(np.mean(acc)), float(np.mean(dp)),
                     float(np.std(acc)), float(np.std(dp))])
    return rows


def _group_cells(records: list[dict]) -> dict:
    cells: dict[tuple, list] = {}
    for record in records:
        cells.setdefault((record["method"], record["lambda"]), []).append(record)
    return cells


def format_mean_std(values) -> str:
    """Two-decimal percentage cell, mean +/- std over seeds."""
    values = [v for v in values if v is not None]
    if not values:
        return "undefined"
    mean = float(np.mean(values)) * 100.0
    std = float(np.std(values)) * 100.0
    return f"{mean:.2f}±{std:.2f}"


def summarize(records: list[dict]) -> list[dict]:
    """Mean +/- std table rows (percentages, std over seeds) per cell."""
    rows = []
    for (method, lam), cell in sorted(_group_cells(records).items()):
        ok = [r for r in cell if r["status"] == "ok"]
        row = {"method": method, "lambda": lam, "n_seeds": len(ok),
               "diverged": len(cell) - len(ok)}
        for side in ("source", "target"):
            for metric in ("accuracy", "delta_dp", "delta_eo"):
                row[f"{side}_{metric}"] = format_mean_std(
                    [r[side][metric] for r in ok])
        rows.append(row)
    return rows


def render_summary(rows: list[dict]) -> str:
    """Plain-text table of the summary rows (cells are percent, mean+-std)."""
    header = ["method", "lambda", "seeds", "acc(src)", "dp(src)", "eo(src)",
              "acc(tgt)", "dp(tgt)", "eo(tgt)"]
    lines = ["  ".join(f"{h:>12s}" for h in header)]
    for row in rows:
        cells = [row["method"], f"{row['lambda']:g}", str(row["n_seeds"]),
                 row["source_accuracy"], row["source_delta_dp"], row["source_delta_eo"],
                 row["target_accuracy"], row["target_delta_dp"], row["target_delta_eo"]]
        lines.append("  ".join(f"{c:>12s}" for c in cells))
    return "\n".join(lines)


def write_summary(rows: list[dict], out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "summary.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()) if rows else
                                ["method", "lambda", "n_seeds", "diverged"])
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def load_records(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
