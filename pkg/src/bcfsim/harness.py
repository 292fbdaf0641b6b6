"""Replication harness for the factorial simulation study.

Runs the full grid of (selection strength x effect scale x model variant x
replicate), with a paired design: within one cell, every model variant is
fit to the identical synthetic draw, and each draw's seed is derived by
hashing (master seed, cell, replicate), so any sub-grid of a run reproduces
the exact datasets and fits of the full run.

Artifacts written per run directory:

    run_config.json                     resolved configuration
    replicates.csv                      one row per (cell, replicate, model)
    digests.csv                         dataset digest per row (paired-design audit)
    summary_<dgp>_<alpha>.csv / .md     per-cell metric means and sds by model
    pvalues_<dgp>_<alpha>_<pair>.csv    dispersion-gated rank tests per metric
    boxplot_<dgp>_<alpha>.csv           long-format per-replicate metric values
    scatter_pi_vs_b_<dgp>.csv           propensity vs prognostic level sample
    timing.json                         wall-clock times and probit overhead
    cells/                              per-cell scratch enabling --resume

Every CSV and markdown artifact is byte-identical across reruns of the same
configuration; wall-clock measurements are confined to the files with
"timing" in their name.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bcf import (
    BcfConfig, PropensityMode, ate_posterior, cate_intervals, fit_bcf,
    _default_mu_config, _default_tau_config,
)
from .bart import BartConfig
from .dgp import Dataset, DgpSpec, Selection, baseline, generate, propensity
from .metrics import (
    METRIC_FIELDS, RECORD_FIELDS, ReplicateRecord, interval_metrics,
    pointwise_errors,
)
from .ranktests import TestReport, select_and_run

__all__ = [
    "ExperimentConfig", "SummaryTable", "PValueTable", "derive_seed",
    "dataset_digest", "evaluate_fit", "run_experiment", "summarize",
    "compare_models", "timing_report", "report_from", "apply_profile",
    "load_config_file", "read_replicates_csv",
]

MODEL_IDS = tuple(m.value for m in PropensityMode)

_CSV_FIELDS = tuple(f for f in RECORD_FIELDS if f != "fit_seconds")
_INT_FIELDS = {"replicate_index", "seed"}
_STR_FIELDS = {"dgp_id", "model"}

# samples per selection strength in the propensity-vs-baseline scatter file
_SCATTER_POINTS = 2000


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from the stringified parts.

    Hash-based (BLAKE2b) so it is reproducible across runs, platforms and
    process boundaries, unlike Python's builtin ``hash``. Floats should be
    passed pre-normalized (e.g. ``float(alpha)``) so 4 and 4.0 agree.
    """
    key = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def dataset_digest(dataset: Dataset) -> str:
    """Content hash of one synthetic draw (covariates, truth, outcomes)."""
    h = hashlib.blake2b(digest_size=8)
    for arr in (dataset.X, dataset.pi_true, dataset.D, dataset.Y,
                dataset.cate_true):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class ExperimentConfig:
    """The study grid plus chain controls shared by every fit.

    ``iterations``/``burn_in``/``thin`` apply to all three forests (the two
    outcome forests and the internal propensity probit). ``output_dir`` is a
    default destination that an explicit ``run_experiment`` argument or the
    CLI ``--out`` flag overrides.
    """

    selections: tuple = (Selection.EXTREME, Selection.MODERATE, Selection.SLIGHT)
    alphas: tuple = (1.0, 2.0, 4.0)
    models: tuple = MODEL_IDS
    n: int = 250
    replicates: int = 100
    master_seed: int = 1729
    interval_level: float = 0.95
    iterations: int = 2000
    burn_in: int = 1000
    thin: int = 1
    output_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "selections",
            tuple(Selection(s) for s in self.selections))
        object.__setattr__(
            self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(
            self, "models",
            tuple(PropensityMode(m).value for m in self.models))

    def validate(self) -> None:
        for name in ("selections", "alphas", "models"):
            vals = getattr(self, name)
            if not vals:
                raise ValueError(f"{name} must be nonempty")
            if len(set(vals)) != len(vals):
                raise ValueError(f"{name} contains duplicates")
        if any(a <= 0 for a in self.alphas):
            raise ValueError("alphas must be positive")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not 0.0 < self.interval_level < 1.0:
            raise ValueError("interval_level must be in (0, 1)")
        self.bcf_config().validate()

    def bcf_config(self) -> BcfConfig:
        chain = dict(iterations=self.iterations, burn_in=self.burn_in,
                     thin=self.thin)
        return BcfConfig(
            mu_config=dataclasses.replace(_default_mu_config(), **chain),
            tau_config=dataclasses.replace(_default_tau_config(), **chain),
            propensity_config=dataclasses.replace(BartConfig(), **chain),
            interval_level=self.interval_level,
        )

    def to_json_dict(self) -> dict:
        return {
            "selections": [s.value for s in self.selections],
            "alphas": list(self.alphas),
            "models": list(self.models),
            "n": self.n,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "interval_level": self.interval_level,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "output_dir": self.output_dir,
        }


def apply_profile(config: ExperimentConfig, profile: str) -> ExperimentConfig:
    """Resolve a named run profile.

    ``quick`` drops to 20 replicates and 500 retained draws per chain
    (1000 iterations, 500 burn-in) for smoke runs; ``full`` leaves the
    configuration untouched.
    """
    if profile == "quick":
        return dataclasses.replace(
            config, replicates=20, iterations=1000, burn_in=500, thin=1)
    if profile == "full":
        return config
    raise ValueError(f"unknown profile {profile!r}; expected 'quick' or 'full'")


_CONFIG_KEYS = {
    "selections": ("tuple", str),
    "alphas": ("tuple", float),
    "models": ("tuple", str),
    "n": ("scalar", int),
    "replicates": ("scalar", int),
    "master_seed": ("scalar", int),
    "interval_level": ("scalar", float),
    "iterations": ("scalar", int),
    "burn_in": ("scalar", int),
    "thin": ("scalar", int),
    "output_dir": ("scalar", str),
}


def load_config_file(path) -> ExperimentConfig:
    """Parse a flat ``key = value`` config file.

    Lines starting with ``#`` (or blank) are skipped and ``#`` starts a
    trailing comment; list-valued keys take comma-separated entries. Unknown
    keys are an error, not a warning, so typos cannot silently fall back to
    defaults.
    """
    kwargs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            shape, cast = _CONFIG_KEYS[key]
            try:
                if shape == "tuple":
                    kwargs[key] = tuple(
                        cast(v.strip()) for v in value.split(",") if v.strip())
                else:
                    kwargs[key] = cast(value)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value for {key}: {exc}")
    return ExperimentConfig(**kwargs)


def evaluate_fit(fit, dataset: Dataset, replicate_index: int, seed: int,
                 interval_level: float = 0.95) -> ReplicateRecord:
    """Score one fitted variant against the draw's ground truth."""
    ci = cate_intervals(fit, interval_level)
    pw_cate = pointwise_errors(ci["mean"], dataset.cate_true)
    iv_cate = interval_metrics(ci["lower"], ci["upper"], dataset.cate_true,
                               interval_level)
    ate = ate_posterior(fit, interval_level)
    truth_ate = np.array([dataset.ate_true])
    pw_ate = pointwise_errors(np.array([ate["mean"]]), truth_ate)
    iv_ate = interval_metrics(np.array([ate["lower"]]),
                              np.array([ate["upper"]]), truth_ate,
                              interval_level)
    pw_pi = pointwise_errors(fit.pi_used, dataset.pi_true)
    return ReplicateRecord(
        dgp_id=dataset.spec.selection.value,
        alpha=float(dataset.spec.alpha),
        model=fit.mode.value,
        replicate_index=replicate_index,
        seed=seed,
        rmse_cate=pw_cate["rmse"],
        mae_cate=pw_cate["mae"],
        mape_cate=pw_cate["mape"],
        cover_cate=iv_cate["cover"],
        len_cate=iv_cate["len"],
        rmse_ate=pw_ate["rmse"],
        mae_ate=pw_ate["mae"],
        mape_ate=pw_ate["mape"],
        cover_ate=iv_ate["cover"],
        len_ate=iv_ate["len"],
        rmse_pi=pw_pi["rmse"],
        mae_pi=pw_pi["mae"],
        se_cover_cate=iv_cate["se_cover"],
        ae_cover_cate=iv_cate["ae_cover"],
        se_cover_ate=iv_ate["se_cover"],
        ae_cover_ate=iv_ate["ae_cover"],
        fit_seconds=fit.fit_seconds,
    )


def _fmt(alpha: float) -> str:
    return f"{alpha:g}"


def _cell_key(selection: Selection, alpha: float) -> str:
    return f"{selection.value}_{_fmt(alpha)}"


def _field_str(record: ReplicateRecord, name: str) -> str:
    v = getattr(record, name)
    if name in _STR_FIELDS:
        return v
    if name in _INT_FIELDS:
        return str(v)
    return repr(float(v))


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _records_csv_text(records, fields) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for rec in records:
        writer.writerow([_field_str(rec, f) for f in fields])
    return buf.getvalue()


def read_replicates_csv(path) -> list[ReplicateRecord]:
    """Load harness records back from ``replicates.csv``.

    The CSV intentionally carries no wall-clock column, so ``fit_seconds``
    comes back as 0.0; timing lives in timing.json.
    """
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != _CSV_FIELDS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            kwargs = {}
            for name in _CSV_FIELDS:
                raw = row[name]
                if name in _STR_FIELDS:
                    kwargs[name] = raw
                elif name in _INT_FIELDS:
                    kwargs[name] = int(raw)
                else:
                    kwargs[name] = float(raw)
            records.append(ReplicateRecord(fit_seconds=0.0, **kwargs))
    return records


def _run_cell(config: ExperimentConfig, selection: Selection, alpha: float,
              progress=None):
    """Fit every model variant on every replicate of one grid cell."""
    bcf_config = config.bcf_config()
    rows = []
    for rep in range(config.replicates):
        data_seed = derive_seed(config.master_seed, selection.value,
                                float(alpha), rep)
        dataset = generate(DgpSpec(selection, alpha, config.n), data_seed)
        for model in config.models:
            fit_seed = derive_seed(data_seed, model)
            fit = fit_bcf(
                dataset.X, dataset.D, dataset.Y, model,
                pi_true=(dataset.pi_true
                         if model == PropensityMode.TRUE_PROPENSITY.value
                         else None),
                config=bcf_config, seed=fit_seed,
            )
            # hashed after the fit, so a fit that mutated its inputs would
            # break the within-replicate digest equality audit
            digest = dataset_digest(dataset)
            record = evaluate_fit(fit, dataset, rep, data_seed,
                                  config.interval_level)
            rows.append((record, digest))
            if progress is not None:
                progress(f"{_cell_key(selection, alpha)} "
                         f"rep {rep + 1}/{config.replicates} {model} "
                         f"({fit.fit_seconds:.1f}s)")
    return rows


def _write_cell(cell_csv: Path, cell_timing: Path, rows) -> None:
    fields = _CSV_FIELDS + ("dataset_digest",)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for rec, digest in rows:
        writer.writerow([_field_str(rec, f) for f in _CSV_FIELDS] + [digest])
    _write_text(cell_csv, buf.getvalue())
    timing = {
        f"{rec.replicate_index}:{rec.model}": rec.fit_seconds
        for rec, _ in rows
    }
    _write_text(cell_timing, json.dumps(timing, sort_keys=True, indent=1))


def _read_cell(cell_csv: Path, cell_timing: Path):
    timing = json.loads(cell_timing.read_text(encoding="utf-8"))
    rows = []
    with open(cell_csv, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            kwargs = {}
            for name in _CSV_FIELDS:
                raw = row[name]
                if name in _STR_FIELDS:
                    kwargs[name] = raw
                elif name in _INT_FIELDS:
                    kwargs[name] = int(raw)
                else:
                    kwargs[name] = float(raw)
            key = f"{kwargs['replicate_index']}:{kwargs['model']}"
            rec = ReplicateRecord(fit_seconds=float(timing[key]), **kwargs)
            rows.append((rec, row["dataset_digest"]))
    return rows


def run_experiment(config: ExperimentConfig, out_dir=None, resume: bool = False,
                   progress=None) -> list[ReplicateRecord]:
    """Run the whole grid and write every artifact to the run directory.

    Completed cells are checkpointed under ``cells/``; ``resume=True`` loads
    them instead of refitting, while a fresh run into a directory holding
    cell artifacts is refused so two configurations cannot get mixed
    together silently. Returns the full record list.
    """
    config.validate()
    target = out_dir if out_dir is not None else config.output_dir
    if target is None:
        raise ValueError("no output directory: pass out_dir or set output_dir")
    out = Path(target)
    out.mkdir(parents=True, exist_ok=True)
    cells_dir = out / "cells"
    cells_dir.mkdir(exist_ok=True)

    leftovers = sorted(p.name for p in cells_dir.iterdir())
    if leftovers and not resume:
        raise RuntimeError(
            f"{cells_dir} already holds cell artifacts ({leftovers[0]}, ...); "
            "pass resume=True to reuse them or choose a fresh directory")

    _write_text(out / "run_config.json",
                json.dumps(config.to_json_dict(), sort_keys=True, indent=2))

    all_rows = []
    for selection in config.selections:
        for alpha in config.alphas:
            key = _cell_key(selection, alpha)
            cell_csv = cells_dir / f"cell_{key}.csv"
            cell_timing = cells_dir / f"cell_{key}_timing.json"
            if cell_csv.exists() and cell_timing.exists():
                rows = _read_cell(cell_csv, cell_timing)
                expected = config.replicates * len(config.models)
                if len(rows) != expected:
                    raise RuntimeError(
                        f"{cell_csv} holds {len(rows)} rows, expected "
                        f"{expected}; it came from a different configuration")
            else:
                rows = _run_cell(config, selection, alpha, progress)
                _write_cell(cell_csv, cell_timing, rows)
            all_rows.extend(rows)

    records = [rec for rec, _ in all_rows]
    _write_run_outputs(config, out, records, digests=all_rows)
    return records


def _write_run_outputs(config, out: Path, records, digests=None,
                       write_timing: bool = True) -> None:
    _write_text(out / "replicates.csv", _records_csv_text(records, _CSV_FIELDS))

    if digests is not None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["dgp_id", "alpha", "replicate_index", "model",
                         "seed", "dataset_digest"])
        for rec, digest in digests:
            writer.writerow([rec.dgp_id, repr(rec.alpha),
                             str(rec.replicate_index), rec.model,
                             str(rec.seed), digest])
        _write_text(out / "digests.csv", buf.getvalue())

    table = summarize(records)
    by_cell = {}
    for rec in records:
        by_cell.setdefault((rec.dgp_id, rec.alpha), []).append(rec)

    for (dgp_id, alpha), cell_records in by_cell.items():
        stem = f"{dgp_id}_{_fmt(alpha)}"
        _write_text(out / f"summary_{stem}.csv",
                    _summary_csv_text(table, dgp_id, alpha))
        _write_text(out / f"summary_{stem}.md",
                    _summary_md_text(table, dgp_id, alpha))
        _write_text(out / f"boxplot_{stem}.csv",
                    _boxplot_csv_text(cell_records))
        present = [m for m in config.models
                   if any(r.model == m for r in cell_records)]
        for i, model_a in enumerate(present):
            for model_b in present[i + 1:]:
                pair = compare_models(cell_records, model_a, model_b)
                _write_text(out / f"pvalues_{stem}_{model_a}_vs_{model_b}.csv",
                            _pvalues_csv_text(pair))

    for selection in config.selections:
        _write_text(out / f"scatter_pi_vs_b_{selection.value}.csv",
                    _scatter_csv_text(config.master_seed, selection))

    if not write_timing:
        return
    timing = {"rows": [
        {"dgp_id": r.dgp_id, "alpha": r.alpha, "model": r.model,
         "replicate_index": r.replicate_index, "seconds": r.fit_seconds}
        for r in records
    ]}
    means = {}
    for model in config.models:
        times = [r.fit_seconds for r in records if r.model == model]
        if times:
            means[model] = float(np.mean(times))
    timing["mean_seconds_by_model"] = means
    both = (PropensityMode.NO_PROPENSITY.value in means
            and PropensityMode.ESTIMATED_PROPENSITY.value in means)
    if both:
        timing.update(timing_report(records))
    _write_text(out / "timing.json", json.dumps(timing, sort_keys=True, indent=1))


@dataclass
class SummaryTable:
    """Per-cell metric means (and sds) by model.

    ``cells`` maps (dgp_id, alpha) to {metric: {model: (mean, sd, count)}};
    ``sd`` is the ddof-1 sample standard deviation, or None for a single
    replicate.
    """

    models: tuple
    cells: dict = field(default_factory=dict)

    def cell(self, dgp_id: str, alpha: float, metric: str, model: str):
        return self.cells[(dgp_id, float(alpha))][metric][model]


def summarize(records) -> SummaryTable:
    """Aggregate replicate records into per-cell mean/sd tables."""
    if not records:
        raise ValueError("no records to summarize")
    models = tuple(dict.fromkeys(r.model for r in records))
    table = SummaryTable(models=models)
    grouped = {}
    for rec in records:
        grouped.setdefault((rec.dgp_id, rec.alpha, rec.model), []).append(rec)
    for (dgp_id, alpha, model), recs in grouped.items():
        cell = table.cells.setdefault((dgp_id, alpha), {})
        for metric in METRIC_FIELDS:
            vals = np.array([getattr(r, metric) for r in recs])
            sd = float(vals.std(ddof=1)) if len(vals) > 1 else None
            cell.setdefault(metric, {})[model] = (float(vals.mean()), sd,
                                                  len(vals))
    return table


def _summary_csv_text(table: SummaryTable, dgp_id: str, alpha: float) -> str:
    cell = table.cells[(dgp_id, float(alpha))]
    models = [m for m in table.models if m in next(iter(cell.values()))]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["metric"]
    for m in models:
        header += [f"mean_{m}", f"sd_{m}"]
    writer.writerow(header)
    for metric in METRIC_FIELDS:
        row = [metric]
        for m in models:
            mean, sd, _ = cell[metric][m]
            row += [repr(mean), "" if sd is None else repr(sd)]
        writer.writerow(row)
    return buf.getvalue()


def _summary_md_text(table: SummaryTable, dgp_id: str, alpha: float) -> str:
    cell = table.cells[(dgp_id, float(alpha))]
    models = [m for m in table.models if m in next(iter(cell.values()))]
    lines = [
        f"# Summary: {dgp_id} selection, alpha={_fmt(alpha)}",
        "",
        "Mean over replicates, sample sd in parentheses.",
        "",
        "| metric | " + " | ".join(models) + " |",
        "|" + "---|" * (len(models) + 1),
    ]
    for metric in METRIC_FIELDS:
        entries = []
        for m in models:
            mean, sd, _ = cell[metric][m]
            entries.append(f"{mean:.4g}" if sd is None
                           else f"{mean:.4g} ({sd:.3g})")
        lines.append(f"| {metric} | " + " | ".join(entries) + " |")
    lines.append("")
    return "\n".join(lines)


def _boxplot_csv_text(cell_records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "model", "replicate_index", "value"])
    for metric in METRIC_FIELDS:
        for rec in cell_records:
            writer.writerow([metric, rec.model, str(rec.replicate_index),
                             repr(float(getattr(rec, metric)))])
    return buf.getvalue()


def _scatter_csv_text(master_seed: int, selection: Selection) -> str:
    rng = np.random.default_rng(
        derive_seed(master_seed, "scatter", selection.value))
    X = rng.random((_SCATTER_POINTS, 5))
    b = baseline(X)
    pi = propensity(X, selection)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["b", "pi"])
    for i in range(_SCATTER_POINTS):
        writer.writerow([repr(float(b[i])), repr(float(pi[i]))])
    return buf.getvalue()


@dataclass
class PValueTable:
    """Rank-test reports for every metric of one model pair in one cell."""

    dgp_id: str
    alpha: float
    model_a: str
    model_b: str
    reports: dict  # metric name -> TestReport


def compare_models(records, model_a: str, model_b: str) -> PValueTable:
    """Dispersion-gated rank tests between two variants, metric by metric.

    The records must all belong to one (dgp, alpha) cell, and thanks to the
    paired design both variants must cover the identical replicate set.
    """
    cells = {(r.dgp_id, r.alpha) for r in records}
    if len(cells) != 1:
        raise ValueError(f"records span {len(cells)} cells; pass exactly one")
    a_recs = sorted((r for r in records if r.model == model_a),
                    key=lambda r: r.replicate_index)
    b_recs = sorted((r for r in records if r.model == model_b),
                    key=lambda r: r.replicate_index)
    if not a_recs or not b_recs:
        raise ValueError(f"both models need records: {model_a}, {model_b}")
    if [r.replicate_index for r in a_recs] != [r.replicate_index for r in b_recs]:
        raise ValueError("models cover different replicate sets")
    (dgp_id, alpha), = cells
    reports = {}
    for metric in METRIC_FIELDS:
        x = np.array([getattr(r, metric) for r in a_recs])
        y = np.array([getattr(r, metric) for r in b_recs])
        reports[metric] = select_and_run(x, y, metric)
    return PValueTable(dgp_id=dgp_id, alpha=alpha, model_a=model_a,
                       model_b=model_b, reports=reports)


_PVALUE_COLUMNS = ("levene", "brown_forsythe", "fligner_policello",
                   "mann_whitney", "kruskal_wallis")


def _pvalues_csv_text(table: PValueTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["metric"]
    for name in _PVALUE_COLUMNS:
        header += [f"{name}_stat", f"{name}_p"]
    header.append("selected")
    writer.writerow(header)
    for metric in METRIC_FIELDS:
        report: TestReport = table.reports[metric]
        row = [metric]
        for name in _PVALUE_COLUMNS:
            result = getattr(report, name)
            if result is None:
                row += ["", ""]
            else:
                row += [repr(float(result.stat)), repr(float(result.p))]
        row.append("+".join(report.selected))
        writer.writerow(row)
    return buf.getvalue()


def timing_report(records) -> dict:
    """Mean fit seconds per model and the propensity-estimation overhead.

    Overhead is mean(estimated_propensity) / mean(no_propensity) - 1,
    pooled and per cell. Raises if either variant is absent.
    """
    no = PropensityMode.NO_PROPENSITY.value
    est = PropensityMode.ESTIMATED_PROPENSITY.value
    by_model = {}
    by_cell = {}
    for rec in records:
        by_model.setdefault(rec.model, []).append(rec.fit_seconds)
        by_cell.setdefault((rec.dgp_id, rec.alpha), {}).setdefault(
            rec.model, []).append(rec.fit_seconds)
    if no not in by_model or est not in by_model:
        raise ValueError(
            f"timing overhead needs both {no!r} and {est!r} records")
    means = {m: float(np.mean(v)) for m, v in by_model.items()}
    cell_overhead = {}
    for (dgp_id, alpha), times in sorted(by_cell.items()):
        if no in times and est in times:
            cell_overhead[f"{dgp_id}_{_fmt(alpha)}"] = (
                float(np.mean(times[est])) / float(np.mean(times[no])) - 1.0)
    return {
        "mean_seconds_by_model": means,
        "pooled_overhead_estimated_vs_no_propensity":
            means[est] / means[no] - 1.0,
        "cell_overhead_estimated_vs_no_propensity": cell_overhead,
    }


def report_from(run_dir) -> list[ReplicateRecord]:
    """Regenerate every derived artifact from a run directory's raw records.

    Reads replicates.csv and run_config.json, rewrites the summary, p-value,
    boxplot and scatter files (byte-identical to what the original run
    produced), and leaves timing.json untouched since the raw CSV carries no
    wall-clock data. Returns the records.
    """
    run = Path(run_dir)
    config_path = run / "run_config.json"
    csv_path = run / "replicates.csv"
    if not csv_path.exists():
        raise FileNotFoundError(f"{csv_path} not found; is this a run directory?")
    if not config_path.exists():
        raise FileNotFoundError(f"{config_path} not found; cannot rebuild reports")
    raw = json.loads(config_path.read_text(encoding="utf-8"))
    config = ExperimentConfig(**raw)
    records = read_replicates_csv(csv_path)
    if not records:
        raise ValueError(f"{csv_path} holds no records")
    _write_run_outputs(config, run, records, digests=None, write_timing=False)
    return records
