"""Run configuration: a JSON document validated against a fixed schema."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import ConfigError, InputError
from .ingest import SchemaProfile, builtin_profile, load_profile
from .kproto import KProtoParams
from .selection import SelectionParams
from .supervised.crossval import KINDS, DEFAULT_KINDS, ClassifierSpec

FORMATS = ("json", "csv", "markdown")

_POS_INT = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["data", "seed", "output_dir"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string", "minLength": 1},
        "formats": {
            "type": "array",
            "items": {"enum": list(FORMATS)},
            "uniqueItems": True,
        },
        "data": {
            "type": "object",
            "additionalProperties": False,
            "required": ["csv_path"],
            "properties": {
                "csv_path": {"type": "string", "minLength": 1},
                "profile": {"type": "string"},
                "profile_path": {"type": "string"},
                "schema": {"type": "object"},
                "reference_levels": {"type": "object", "additionalProperties": {"type": "string"}},
                "ignore_extra_columns": {"type": "boolean"},
            },
            "oneOf": [
                {"required": ["profile"]},
                {"required": ["profile_path"]},
                {"required": ["schema"]},
            ],
        },
        "selection": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k_min": {"type": "integer", "minimum": 2},
                "k_max": {"type": "integer", "minimum": 2},
                "n_samples": {"type": "integer", "minimum": 5, "maximum": 10},
                "sample_size": _POS_INT,
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "clustering": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma": {"oneOf": [{"const": "auto"}, {"type": "number", "minimum": 0}]},
                "max_iter": _POS_INT,
                "n_restarts": _POS_INT,
                "fixed_k": {"type": "integer", "minimum": 2},
            },
        },
        "comparison": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "n_reps": _POS_INT,
                "specs": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["kind"],
                        "properties": {
                            "kind": {"enum": list(KINDS)},
                            "n_trees": _POS_INT,
                            "mtry": _POS_INT,
                            "min_split": _POS_INT,
                            "max_depth": _POS_INT,
                            "C": {"type": "number", "exclusiveMinimum": 0},
                            "epochs": _POS_INT,
                        },
                    },
                },
            },
        },
    },
}


@dataclass
class RunConfig:
    csv_path: Path
    profile: SchemaProfile
    output_dir: Path
    seed: int
    reference_levels: dict[str, str] = field(default_factory=dict)
    ignore_extra: bool = False
    selection: SelectionParams = field(default_factory=SelectionParams)
    kproto: KProtoParams = field(default_factory=KProtoParams)
    fixed_k: int | None = None
    comparison_enabled: bool = False
    n_reps: int = 5
    specs: list[ClassifierSpec] = field(default_factory=list)
    formats: tuple[str, ...] = FORMATS
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, obj, base_dir=".") -> "RunConfig":
        """Validate ``obj`` and build a config; relative paths resolve against ``base_dir``."""
        try:
            jsonschema.validate(obj, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{where}: {exc.message}") from None
        base = Path(base_dir)
        d = obj["data"]
        try:
            if "profile" in d:
                profile = builtin_profile(d["profile"])
            elif "profile_path" in d:
                profile = load_profile(_resolve(base, d["profile_path"]))
            else:
                profile = SchemaProfile.from_json(d["schema"])
        except OSError as exc:
            raise ConfigError(f"cannot read profile: {exc}") from None
        refs = dict(profile.reference_levels)
        refs.update(d.get("reference_levels", {}))
        # re-validate merged reference levels against the schema
        profile = SchemaProfile(profile.name, profile.schema, profile.encoding_notes, refs)

        seed = obj["seed"]
        sel = obj.get("selection", {})
        clu = obj.get("clustering", {})
        cmp_ = obj.get("comparison", {})
        try:
            selection = SelectionParams(seed=seed, **sel)
            kproto = KProtoParams(seed=seed, **{k: v for k, v in clu.items() if k != "fixed_k"})
            specs = [ClassifierSpec(seed=seed, **s) for s in cmp_.get("specs", [{"kind": k} for k in DEFAULT_KINDS])]
        except InputError as exc:
            raise ConfigError(str(exc)) from None
        formats = tuple(obj.get("formats", FORMATS))
        return cls(
            csv_path=_resolve(base, d["csv_path"]),
            profile=profile,
            output_dir=_resolve(base, obj["output_dir"]),
            seed=seed,
            reference_levels=refs,
            ignore_extra=d.get("ignore_extra_columns", False),
            selection=selection,
            kproto=kproto,
            fixed_k=clu.get("fixed_k"),
            comparison_enabled=cmp_.get("enabled", False),
            n_reps=cmp_.get("n_reps", 5),
            specs=specs,
            formats=formats,
            raw=obj,
        )


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return RunConfig.from_json(obj, path.parent)
