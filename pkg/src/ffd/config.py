"""Run configuration: one INI file of flat sections, validated before any compute."""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .pipeline import PipelineConfig

# INI section -> PipelineConfig attribute
SECTIONS = {
    "split": "split",
    "autoencoder": "autoencoder",
    "kbr": "kbr",
    "discovery": "discovery",
    "feedback": "feedback",
    "baselines": "baselines",
    "eval": "eval",
    "sweep": "sweep",
}

PATH_KEYS = ("data", "split_dir", "models", "outputs")
ENV_OVERRIDES = {
    "data": "FFD_DATA",
    "split_dir": "FFD_SPLIT_DIR",
    "models": "FFD_MODELS",
    "outputs": "FFD_OUTPUTS",
}
# component seeds are derived from [run] seed, never set per section
DERIVED = {("autoencoder", "seed"), ("kbr", "seed")}
_TRUE = {"1", "yes", "true", "on"}
_FALSE = {"0", "no", "false", "off"}


@dataclass(frozen=True)
class Paths:
    data: tuple = ()
    split_dir: Path = Path("run/split")
    models: Path = Path("run/models")
    outputs: Path = Path("run/outputs")


@dataclass(frozen=True)
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)


def _coerce(raw, default, where):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            v = float(raw)
            if math.isnan(v):
                raise ValueError(raw)
            return v
        if isinstance(default, tuple):
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if default is None:
            return None if raw.lower() in ("", "none", "auto") else raw
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None


def _build(obj, values, section):
    known = {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
    changes = {}
    for key, raw in values.items():
        if key not in known or dataclasses.is_dataclass(known[key]):
            raise ConfigError(f"[{section}] unknown key {key!r}")
        if (section, key) in DERIVED:
            raise ConfigError(f"[{section}] {key} is derived from [run] seed")
        changes[key] = _coerce(raw, known[key], f"[{section}] {key}")
    try:
        return dataclasses.replace(obj, **changes)
    except ConfigError as exc:
        raise ConfigError(f"[{section}] {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def _split_override(item):
    key, sep, value = item.partition("=")
    section, dot, name = key.strip().partition(".")
    if not sep or not dot or not name:
        raise ConfigError(f"override {item!r} is not of the form section.key=value")
    return section.strip(), name.strip(), value


def load_config(path=None, overrides=(), env=None):
    """Parse an INI file (optional), apply ``section.key=value`` overrides and
    path environment variables, and validate every section."""
    env = os.environ if env is None else env
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    base = Path(".")
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser.read(path, encoding="utf-8")
        base = path.parent
    for item in overrides:
        section, name, value = _split_override(item)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, name, value)

    allowed = set(SECTIONS) | {"paths", "run"}
    for section in parser.sections():
        if section not in allowed:
            raise ConfigError(f"unknown section [{section}]")

    run_vals = dict(parser["run"]) if parser.has_section("run") else {}
    pipe = _build(PipelineConfig(), run_vals, "run")
    for section, attr in SECTIONS.items():
        if parser.has_section(section):
            sub = _build(getattr(pipe, attr), dict(parser[section]), section)
            pipe = dataclasses.replace(pipe, **{attr: sub})

    raw_paths = dict(parser["paths"]) if parser.has_section("paths") else {}
    for key in raw_paths:
        if key not in PATH_KEYS:
            raise ConfigError(f"[paths] unknown key {key!r}")
    for key, var in ENV_OVERRIDES.items():
        if env.get(var):
            raw_paths[key] = env[var]

    def resolve(p):
        p = Path(p.strip()).expanduser()
        return p if p.is_absolute() else base / p

    defaults = Paths()
    paths = Paths(
        data=tuple(resolve(p) for p in raw_paths.get("data", "").split(",") if p.strip()),
        split_dir=resolve(raw_paths["split_dir"]) if "split_dir" in raw_paths else defaults.split_dir,
        models=resolve(raw_paths["models"]) if "models" in raw_paths else defaults.models,
        outputs=resolve(raw_paths["outputs"]) if "outputs" in raw_paths else defaults.outputs,
    )
    return RunConfig(paths=paths, pipeline=pipe)


def dump_config(cfg):
    """The effective configuration as INI text (paths included)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    p = cfg.paths
    parser["paths"] = {"data": ",".join(str(x) for x in p.data), "split_dir": str(p.split_dir),
                       "models": str(p.models), "outputs": str(p.outputs)}
    pipe = cfg.pipeline
    parser["run"] = {"seed": str(pipe.seed), "workers": str(pipe.workers)}
    for section, attr in SECTIONS.items():
        sub = getattr(pipe, attr)
        vals = {}
        for f in dataclasses.fields(sub):
            if (section, f.name) in DERIVED:
                continue
            v = getattr(sub, f.name)
            if isinstance(v, tuple):
                v = ",".join(f"{x:g}" for x in v)
            vals[f.name] = "auto" if v is None else str(v)
        parser[section] = vals
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
