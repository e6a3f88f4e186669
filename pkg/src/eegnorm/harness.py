"""Grid runner: plans x seeds, aggregation, and table rendering.

One grid invocation generates (or reloads) a dataset, preprocesses it, and
for every normalization plan builds the window sets once, then trains one
model per seed.  Per-run seeds are hash(master seed, plan, seed), so cells
are statistically independent and results do not depend on scheduling; seed
runs of a plan may fan out over a thread pool and are reduced in a fixed
order, which keeps the emitted TSV byte-identical for any worker count.

Cell statistics are the mean and sample standard deviation (n-1 denominator)
over the seeds whose final metric was finite; a cell with no finite seed
reports NaN, mirroring collapsed training instead of crashing.
"""

from __future__ import annotations

import concurrent.futures
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .cpc import CpcConfig, DistractorMode, train_cpc
from .data import LabeledDataset, Recording, drop_channels, split_by_group
from .dsp import preprocess
from .normalize import (
    ALL_PLANS,
    DegeneracyPolicy,
    NormalizationPlan,
    ProbeReport,
    WindowTensor,
    apply_plan,
    degeneracy_probe,
)
from .supervised import SupervisedConfig, balance_classes, train_supervised
from .synth import PlantedRule, SynthSpec, gen_dataset
from .util import rng_for, sha256_hex, stable_seed

TASKS = ("cpc_same", "cpc_cross", "age", "gender")


@dataclass(frozen=True)
class GridConfig:
    task: str = "gender"
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    plans: tuple[NormalizationPlan, ...] = ALL_PLANS
    policy: DegeneracyPolicy = DegeneracyPolicy.FLAG_IDENTITY
    synth: SynthSpec = SynthSpec()
    rule: PlantedRule = PlantedRule()
    sup: SupervisedConfig = SupervisedConfig()
    cpc: CpcConfig = CpcConfig()
    n_subjects: int = 50
    n_groups: int = 5
    test_group: str = "g3"
    drop: tuple[str, ...] = ("Cz",)
    preprocess: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}: valid values are {'|'.join(TASKS)}")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be non-empty and distinct")
        if not self.plans:
            raise ValueError("need at least one plan")

    @property
    def window_len_s(self) -> float:
        if self.task in ("age", "gender"):
            return self.sup.window_len_s
        return self.cpc.window_len_s

    @property
    def higher_is_better(self) -> bool:
        return self.task == "gender"

    @property
    def metric_name(self) -> str:
        return {
            "age": "mae",
            "gender": "balanced_accuracy",
            "cpc_same": "cpc_loss",
            "cpc_cross": "cpc_loss",
        }[self.task]


@dataclass
class RunRow:
    plan: NormalizationPlan
    seed: int
    metric: float
    collapsed: bool
    history: list[tuple[int, str, str, float]] = field(default_factory=list)
    # history rows: (epoch, split, metric name, value)


@dataclass
class CellStats:
    mean: float
    std: float
    n_finite: int
    collapsed: bool
    probe: ProbeReport | None = None


@dataclass
class GridReport:
    task: str
    metric_name: str
    higher_is_better: bool
    plans: tuple[NormalizationPlan, ...]
    rows: list[RunRow]
    cells: dict[NormalizationPlan, CellStats]
    config_hash: str
    version: str = __version__


def aggregate_rows(
    plans: tuple[NormalizationPlan, ...], rows: list[RunRow]
) -> dict[NormalizationPlan, CellStats]:
    cells: dict[NormalizationPlan, CellStats] = {}
    for plan in plans:
        metrics = [r.metric for r in rows if r.plan == plan]
        finite = [m for m in metrics if math.isfinite(m)]
        if finite:
            mean = float(np.mean(finite))
            std = float(np.std(finite, ddof=1)) if len(finite) > 1 else 0.0
        else:
            mean = std = float("nan")
        cells[plan] = CellStats(
            mean=mean,
            std=std,
            n_finite=len(finite),
            collapsed=len(finite) < len(metrics),
        )
    return cells


def labeled_windows(
    ds: LabeledDataset,
    plan: NormalizationPlan,
    window_len_s: float,
    policy: DegeneracyPolicy,
    task: str,
) -> list[tuple[WindowTensor, float]]:
    """Plan-normalized windows paired with the task's label per window."""
    pairs = []
    for rec in ds:
        label = rec.meta.age if task == "age" else float(rec.meta.gender)
        for win in apply_plan(rec, plan, window_len_s, policy):
            pairs.append((win, label))
    return pairs


def _run_one(
    cfg: GridConfig,
    plan: NormalizationPlan,
    seed_index: int,
    train_pairs: list[tuple[WindowTensor, float]],
    test_pairs: list[tuple[WindowTensor, float]],
) -> RunRow:
    seed = cfg.seeds[seed_index]
    run_seed = stable_seed(cfg.synth.master_seed, str(plan), seed)
    if cfg.task in ("age", "gender"):
        train, test = train_pairs, test_pairs
        if cfg.task == "gender":
            train = balance_classes(train, rng_for(run_seed, "balance-train"))
            test = balance_classes(test, rng_for(run_seed, "balance-test"))
        sup_cfg = replace(cfg.sup, task=cfg.task, seed=run_seed)
        result = train_supervised(train, test, sup_cfg, plan)
        history = [
            (epoch, "train", "loss", loss) for epoch, loss, _ in result.history
        ] + [
            (epoch, "test", cfg.metric_name, m) for epoch, _, m in result.history
        ]
        return RunRow(plan, seed, result.metric, result.collapsed, history)

    mode = DistractorMode.SAME_RECORDING if cfg.task == "cpc_same" else DistractorMode.CROSS_RECORDING
    cpc_cfg = replace(cfg.cpc, mode=mode)
    result = train_cpc(
        [w for w, _ in train_pairs], [w for w, _ in test_pairs], cpc_cfg, run_seed
    )
    history = [
        (epoch, "train", "cpc_loss", tr) for epoch, tr, _ in result.history
    ] + [
        (epoch, "test", "cpc_loss", te) for epoch, _, te in result.history
    ]
    return RunRow(plan, seed, result.metric, result.collapsed, history)


def prepare_recordings(cfg: GridConfig, ds: LabeledDataset | None = None) -> LabeledDataset:
    """Generate (or take) the dataset and run the fixed preprocessing front end."""
    if ds is None:
        ds = gen_dataset(cfg.synth, cfg.n_subjects, cfg.n_groups, rule=cfg.rule)
    recs: list[Recording] = list(ds.recordings)
    if cfg.preprocess:
        recs = [preprocess(r) for r in recs]
    if cfg.drop:
        recs = [drop_channels(r, list(cfg.drop)) for r in recs]
    return LabeledDataset(tuple(recs), ds.provenance)


def run_grid(cfg: GridConfig, ds: LabeledDataset | None = None) -> GridReport:
    """Execute |plans| x |seeds| runs and aggregate them into cells."""
    prepared = prepare_recordings(cfg, ds)
    train_ds, test_ds = split_by_group(prepared, cfg.test_group)

    rows: list[RunRow] = []
    cells: dict[NormalizationPlan, CellStats] = {}
    for plan in cfg.plans:
        train_pairs = labeled_windows(train_ds, plan, cfg.window_len_s, cfg.policy, cfg.task)
        test_pairs = labeled_windows(test_ds, plan, cfg.window_len_s, cfg.policy, cfg.task)
        probe = degeneracy_probe([w for w, _ in train_pairs] + [w for w, _ in test_pairs])

        plan_rows: list[RunRow]
        if cfg.workers > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                plan_rows = list(
                    pool.map(
                        lambda i: _run_one(cfg, plan, i, train_pairs, test_pairs),
                        range(len(cfg.seeds)),
                    )
                )
        else:
            plan_rows = [
                _run_one(cfg, plan, i, train_pairs, test_pairs)
                for i in range(len(cfg.seeds))
            ]
        rows.extend(plan_rows)
        stats = aggregate_rows((plan,), plan_rows)[plan]
        stats.probe = probe
        cells[plan] = stats

    return GridReport(
        task=cfg.task,
        metric_name=cfg.metric_name,
        higher_is_better=cfg.higher_is_better,
        plans=cfg.plans,
        rows=rows,
        cells=cells,
        config_hash=config_hash(cfg),
        version=__version__,
    )


def config_hash(cfg: GridConfig) -> str:
    """Hash of the result-determining configuration.

    Execution knobs (worker count) are excluded: they must not change any
    output byte, and the hash asserts that.
    """
    canonical = replace(cfg, workers=1)
    return sha256_hex(repr(canonical).encode())[:16]


def best_plan(report: GridReport) -> NormalizationPlan | None:
    """Best finite cell; ties resolve to the lowest row index, then column."""
    best = None
    best_val = None
    for plan in report.plans:  # plans are ordered row-major
        cell = report.cells[plan]
        if not math.isfinite(cell.mean):
            continue
        better = (
            best_val is None
            or (report.higher_is_better and cell.mean > best_val)
            or (not report.higher_is_better and cell.mean < best_val)
        )
        if better:
            best, best_val = plan, cell.mean
    return best


_SCHEME_ORDER = ("none", "all", "channel")


def render_table(report: GridReport) -> str:
    """Text table: recording schemes as rows, window schemes as columns.

    Cells are ``mean +/- std`` at two decimals, ``NaN`` for fully-collapsed
    cells; the best cell is marked with ``*`` (ties break to the lowest row,
    then column index).
    """
    direction = "higher is better" if report.higher_is_better else "lower is better"
    lines = [
        f"# task: {report.task} | metric: {report.metric_name} ({direction})",
        "# cells: mean +/- sample std (ddof=1) over finite seeds; NaN = all seeds collapsed; * = best",
        f"# config: {report.config_hash} | version: {report.version}",
    ]
    star = best_plan(report)
    by_key = {(str(p.recording), str(p.window)): p for p in report.plans}

    header = ["recording\\window"] + list(_SCHEME_ORDER)
    rows = [header]
    for rec_scheme in _SCHEME_ORDER:
        row = [rec_scheme]
        for win_scheme in _SCHEME_ORDER:
            plan = by_key.get((rec_scheme, win_scheme))
            if plan is None:
                row.append("-")
                continue
            cell = report.cells[plan]
            if math.isfinite(cell.mean):
                text = f"{cell.mean:.2f} +/- {cell.std:.2f}"
            else:
                text = "NaN"
            if plan == star:
                text = "*" + text
            row.append(text)
        rows.append(row)

    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    for r in rows:
        lines.append("  ".join(cell.rjust(widths[i]) for i, cell in enumerate(r)))

    lines.append("#")
    for plan in report.plans:
        probe = report.cells[plan].probe
        if probe is not None:
            lines.append(f"# probe {plan}: {probe.summary()}")
    return "\n".join(lines) + "\n"


_CELL_RE = re.compile(r"^(\*)?(NaN|-?\d+\.\d{2} \+/- -?\d+\.\d{2})$")


def parse_table(text: str) -> dict[tuple[str, str], tuple[float, float] | None]:
    """Invert `render_table` for the numeric cells (two-decimal precision)."""
    cells: dict[tuple[str, str], tuple[float, float] | None] = {}
    data_lines = [
        line for line in text.splitlines() if line and not line.startswith("#")
    ]
    if not data_lines:
        raise ValueError("no table found")
    header = data_lines[0].split()
    for line in data_lines[1:]:
        parts = line.split("  ")
        parts = [p.strip() for p in parts if p.strip()]
        rec_scheme = parts[0]
        for col, raw in enumerate(parts[1:]):
            if raw == "-":  # plan not present in this report
                continue
            m = _CELL_RE.match(raw)
            if m is None:
                raise ValueError(f"unparseable cell {raw!r}")
            body = m.group(2)
            key = (rec_scheme, header[col + 1])
            if body == "NaN":
                cells[key] = None
            else:
                mean_text, std_text = body.split(" +/- ")
                cells[key] = (float(mean_text), float(std_text))
    return cells


def report_tsv(report: GridReport) -> str:
    """Machine layout: one row per run, deterministic order and formatting."""
    lines = [
        f"# task={report.task}\tmetric={report.metric_name}\t"
        f"higher_is_better={str(report.higher_is_better).lower()}\t"
        f"config={report.config_hash}",
        "plan_recording\tplan_window\tseed\tmetric\tcollapsed",
    ]
    plan_index = {plan: i for i, plan in enumerate(report.plans)}
    for row in sorted(report.rows, key=lambda r: (plan_index[r.plan], r.seed)):
        lines.append(
            f"{row.plan.recording}\t{row.plan.window}\t{row.seed}\t"
            f"{row.metric!r}\t{str(row.collapsed).lower()}"
        )
    return "\n".join(lines) + "\n"


def parse_report_tsv(text: str) -> tuple[dict[str, str], list[RunRow]]:
    """Read back a report TSV; returns (header metadata, rows)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing TSV metadata header")
    meta = {}
    for part in lines[0][1:].strip().split("\t"):
        key, value = part.split("=", 1)
        meta[key] = value
    rows = []
    for line in lines[2:]:
        if not line:
            continue
        rec, win, seed, metric, collapsed = line.split("\t")
        plan = NormalizationPlan.parse(f"{rec},{win}")
        rows.append(RunRow(plan, int(seed), float(metric), collapsed == "true"))
    return meta, rows


def run_log_text(row: RunRow) -> str:
    """Per-run training log: one `epoch<TAB>split<TAB>metric<TAB>value` line."""
    lines = [
        f"{epoch}\t{split}\t{name}\t{value!r}"
        for epoch, split, name, value in sorted(row.history, key=lambda h: (h[0], h[1]))
    ]
    return "\n".join(lines) + ("\n" if lines else "")
