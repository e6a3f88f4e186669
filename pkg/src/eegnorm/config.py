"""Line-oriented config files: `[section]` headers and `key = value` lines.

Sections: [synth] (generator and planted-rule parameters), [cpc],
[supervised], [grid].  Unknown sections or keys are validation errors, so a
typo fails loudly instead of silently using a default.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from .cpc import CpcConfig, DistractorMode
from .harness import GridConfig
from .normalize import ALL_PLANS, DegeneracyPolicy, NormalizationPlan
from .supervised import SupervisedConfig
from .synth import PlantedRule, SynthSpec


class ConfigError(ValueError):
    pass


def parse_sections(text: str) -> dict[str, dict[str, str]]:
    sections: dict[str, dict[str, str]] = {}
    current: dict[str, str] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if not name:
                raise ConfigError(f"line {lineno}: empty section name")
            current = sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside of any [section]")
        key, value = line.split("=", 1)
        current[key.strip()] = value.strip()
    return sections


def _take(section: dict[str, str], key: str, convert, default):
    if key not in section:
        return default
    raw = section.pop(key)
    try:
        return convert(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError("expected true/false")


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(p) for p in raw.replace(",", " ").split())


def _str_list(raw: str) -> tuple[str, ...]:
    return tuple(p for p in raw.replace(",", " ").split())


def _float_pair(raw: str) -> tuple[float, float]:
    parts = raw.replace(",", " ").split()
    if len(parts) != 2:
        raise ValueError("expected two numbers")
    return float(parts[0]), float(parts[1])


def _plans(raw: str) -> tuple[NormalizationPlan, ...]:
    if raw.strip().lower() in ("all", "all9", "grid"):
        return ALL_PLANS
    return tuple(NormalizationPlan.parse(p) for p in raw.split(";") if p.strip())


def _reject_unknown(name: str, section: dict[str, str]) -> None:
    if section:
        raise ConfigError(f"unknown key(s) in [{name}]: {sorted(section)}")


def load_grid_config(text: str) -> GridConfig:
    sections = parse_sections(text)
    known = {"synth", "cpc", "supervised", "grid"}
    unknown = set(sections) - known
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")

    synth_raw = dict(sections.get("synth", {}))
    rule = PlantedRule(
        base_freq=_take(synth_raw, "rule_base_freq", float, PlantedRule.base_freq),
        age_slope=_take(synth_raw, "rule_age_slope", float, PlantedRule.age_slope),
        gender_delta=_take(synth_raw, "rule_gender_delta", float, PlantedRule.gender_delta),
        gender_channel_frac=_take(
            synth_raw, "rule_gender_channel_frac", float, PlantedRule.gender_channel_frac
        ),
    )
    defaults = SynthSpec()
    synth = SynthSpec(
        n_channels=_take(synth_raw, "n_channels", int, defaults.n_channels),
        duration_s=_take(synth_raw, "duration_s", float, defaults.duration_s),
        fs=_take(synth_raw, "fs", float, defaults.fs),
        age_range=_take(synth_raw, "age_range", _float_pair, defaults.age_range),
        osc_amp=_take(synth_raw, "osc_amp", float, defaults.osc_amp),
        pink_alpha=_take(synth_raw, "pink_alpha", float, defaults.pink_alpha),
        pink_amp=_take(synth_raw, "pink_amp", float, defaults.pink_amp),
        line_amp=_take(synth_raw, "line_amp", float, defaults.line_amp),
        gain_spread=_take(synth_raw, "gain_spread", float, defaults.gain_spread),
        burst_rate=_take(synth_raw, "burst_rate", float, defaults.burst_rate),
        burst_amp=_take(synth_raw, "burst_amp", float, defaults.burst_amp),
        master_seed=_take(synth_raw, "master_seed", int, defaults.master_seed),
    )
    _reject_unknown("synth", synth_raw)

    cpc_raw = dict(sections.get("cpc", {}))
    cpc_defaults = CpcConfig()
    cpc = CpcConfig(
        window_len_s=_take(cpc_raw, "window_len_s", float, cpc_defaults.window_len_s),
        seg_len_s=_take(cpc_raw, "seg_len_s", float, cpc_defaults.seg_len_s),
        embed_dim=_take(cpc_raw, "embed_dim", int, cpc_defaults.embed_dim),
        mask_rate=_take(cpc_raw, "mask_rate", float, cpc_defaults.mask_rate),
        mask_span=_take(cpc_raw, "mask_span", int, cpc_defaults.mask_span),
        n_distractors=_take(cpc_raw, "n_distractors", int, cpc_defaults.n_distractors),
        mode=_take(cpc_raw, "mode", DistractorMode.parse, cpc_defaults.mode),
        batch_size=_take(cpc_raw, "batch_size", int, cpc_defaults.batch_size),
        epochs=_take(cpc_raw, "epochs", int, cpc_defaults.epochs),
        lr=_take(cpc_raw, "lr", float, cpc_defaults.lr),
    )
    _reject_unknown("cpc", cpc_raw)

    sup_raw = dict(sections.get("supervised", {}))
    sup_defaults = SupervisedConfig()
    sup = SupervisedConfig(
        task=_take(sup_raw, "task", str, sup_defaults.task),
        window_len_s=_take(sup_raw, "window_len_s", float, sup_defaults.window_len_s),
        batch_size=_take(sup_raw, "batch_size", int, sup_defaults.batch_size),
        epochs=_take(sup_raw, "epochs", int, sup_defaults.epochs),
        hidden_dim=_take(sup_raw, "hidden_dim", int, sup_defaults.hidden_dim),
        downsample_stride=_take(sup_raw, "downsample_stride", int, sup_defaults.downsample_stride),
        lr=_take(sup_raw, "lr", float, sup_defaults.lr),
    )
    _reject_unknown("supervised", sup_raw)

    grid_raw = dict(sections.get("grid", {}))
    grid_defaults = GridConfig()
    cfg = GridConfig(
        task=_take(grid_raw, "task", str, grid_defaults.task),
        seeds=_take(grid_raw, "seeds", _int_list, grid_defaults.seeds),
        plans=_take(grid_raw, "plans", _plans, grid_defaults.plans),
        policy=_take(grid_raw, "policy", DegeneracyPolicy.parse, grid_defaults.policy),
        synth=synth,
        rule=rule,
        sup=sup,
        cpc=cpc,
        n_subjects=_take(grid_raw, "n_subjects", int, grid_defaults.n_subjects),
        n_groups=_take(grid_raw, "n_groups", int, grid_defaults.n_groups),
        test_group=_take(grid_raw, "test_group", str, grid_defaults.test_group),
        drop=_take(grid_raw, "drop_channels", _str_list, grid_defaults.drop),
        preprocess=_take(grid_raw, "preprocess", _bool, grid_defaults.preprocess),
        workers=_take(grid_raw, "workers", int, grid_defaults.workers),
    )
    _reject_unknown("grid", grid_raw)
    return cfg


def load_grid_config_file(path: str | Path) -> GridConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        return load_grid_config(path.read_text(encoding="utf-8"))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def apply_overrides(cfg: GridConfig, *, task: str | None = None,
                    n_seeds: int | None = None, workers: int | None = None) -> GridConfig:
    if task is not None:
        cfg = replace(cfg, task=task)
    if n_seeds is not None:
        cfg = replace(cfg, seeds=tuple(range(n_seeds)))
    if workers is not None:
        cfg = replace(cfg, workers=workers)
    return cfg
