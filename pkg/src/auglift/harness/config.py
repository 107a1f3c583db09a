"""Versioned JSON experiment configuration with field-path error reporting."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..lifter import InputMode, LifterConfig, TrainConfig
from ..pipeline import AugLiftConfig
from ..ordinal import ODConfig
from ..synth import SceneConfig

CONFIG_VERSION = 1

RESCALING_ARMS = {"on": ("on",), "off": ("off",), "both": ("on", "off")}


class SchemaError(ValueError):
    """Configuration does not match the schema; message names the field."""


@dataclass(frozen=True)
class SplitSpec:
    name: str
    n_samples: int
    scene: SceneConfig

    @property
    def seed(self) -> int:
        return self.scene.seed


@dataclass(frozen=True)
class ExperimentConfig:
    seeds: tuple[int, ...]
    variants: tuple[InputMode, ...]
    rescaling: str
    splits: dict[str, SplitSpec]
    auglift: AugLiftConfig
    lifter: LifterConfig
    train: TrainConfig
    od: ODConfig
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def rescaling_arms(self) -> tuple[str, ...]:
        return RESCALING_ARMS[self.rescaling]

    @property
    def eval_splits(self) -> list[str]:
        return list(self.splits.keys())

    @property
    def resolution(self) -> int:
        return self.splits["train"].scene.resolution


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"missing field '{path}{key}'")
    return obj[key]


def _expect_type(value, types, path: str):
    if not isinstance(value, types):
        names = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
        raise SchemaError(f"field '{path}' must be {names}, got {type(value).__name__}")
    return value


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate and materialize an experiment configuration document."""
    _expect_type(doc, dict, "<root>")
    version = _require(doc, "version", "")
    if version != CONFIG_VERSION:
        raise SchemaError(f"field 'version' must be {CONFIG_VERSION}, got {version!r}")

    seeds = _expect_type(_require(doc, "seeds", ""), list, "seeds")
    if not seeds:
        raise SchemaError("field 'seeds' must contain at least one seed")
    if len(set(seeds)) != len(seeds):
        raise SchemaError("field 'seeds' contains duplicates")
    for i, s in enumerate(seeds):
        _expect_type(s, int, f"seeds[{i}]")

    raw_variants = _expect_type(_require(doc, "variants", ""), list, "variants")
    if not raw_variants:
        raise SchemaError("field 'variants' must be non-empty")
    try:
        variants = tuple(InputMode.parse(v) for v in raw_variants)
    except ValueError as exc:
        raise SchemaError(f"field 'variants': {exc}") from exc
    if len(set(variants)) != len(variants):
        raise SchemaError("field 'variants' contains duplicates")

    rescaling = doc.get("rescaling", "on")
    if rescaling not in RESCALING_ARMS:
        raise SchemaError("field 'rescaling' must be one of on/off/both")

    splits_doc = _expect_type(_require(doc, "splits", ""), dict, "splits")
    if "train" not in splits_doc:
        raise SchemaError("missing field 'splits.train'")
    splits: dict[str, SplitSpec] = {}
    for name, spec in splits_doc.items():
        path = f"splits.{name}."
        _expect_type(spec, dict, f"splits.{name}")
        n = _expect_type(_require(spec, "n_samples", path), int, path + "n_samples")
        if n < 1:
            raise SchemaError(f"field '{path}n_samples' must be >= 1")
        seed = _expect_type(_require(spec, "seed", path), int, path + "seed")
        scene_kwargs = {k: v for k, v in spec.items() if k not in ("n_samples", "seed")}
        scene_kwargs["seed"] = seed
        try:
            scene = SceneConfig.from_dict(scene_kwargs)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"field 'splits.{name}': {exc}") from exc
        splits[name] = SplitSpec(name=name, n_samples=n, scene=scene)

    split_seeds = [s.seed for s in splits.values()]
    if len(set(split_seeds)) != len(split_seeds):
        raise SchemaError("field 'splits': split seeds must be pairwise disjoint")

    resolutions = {s.scene.resolution for s in splits.values()}
    if len(resolutions) != 1:
        raise SchemaError("field 'splits': all splits must share the same resolution")

    try:
        auglift = AugLiftConfig(**doc.get("auglift", {}))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field 'auglift': {exc}") from exc

    lifter_doc = dict(doc.get("lifter", {}))
    lifter_doc.pop("input_mode", None)  # fixed per variant at run time
    try:
        lifter = LifterConfig(**lifter_doc)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field 'lifter': {exc}") from exc

    train_doc = dict(doc.get("train", {}))
    train_doc.pop("seed", None)  # fixed per cell at run time
    try:
        train = TrainConfig(**train_doc)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field 'train': {exc}") from exc

    try:
        od = ODConfig(**doc.get("od", {}))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field 'od': {exc}") from exc

    return ExperimentConfig(
        seeds=tuple(int(s) for s in seeds),
        variants=variants,
        rescaling=rescaling,
        splits=splits,
        auglift=auglift,
        lifter=lifter,
        train=train,
        od=od,
        raw=doc,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(doc)
