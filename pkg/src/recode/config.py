"""YAML experiment configs.

A config file is one YAML mapping::

    experiment: toy-density
    seeds: [0, 1, 2, 3, 4]
    out: runs/toy-density
    recode: {capacity: 200, k: 3}
    env: {...}
    agent: {...}
    params: {...}

``recode`` and ``agent`` map onto :class:`RecodeConfig` and
:class:`AgentConfig`; ``env`` and ``params`` are checked against the keys each
experiment declares. Unknown keys anywhere are errors, reported with the file
name and line.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from recode.agent import AgentConfig
from recode.memory import RecodeConfig

EXPERIMENTS = (
    "toy-density",
    "removal-ablation",
    "disco-maze",
    "cluster-ages",
    "tabular-oracle",
    "grad-check",
    "concurrency-check",
)
TOP_KEYS = ("experiment", "seeds", "out", "recode", "env", "agent", "params")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    recode: RecodeConfig = field(default_factory=RecodeConfig)
    env: dict = field(default_factory=dict)
    agent: AgentConfig = field(default_factory=AgentConfig)
    params: dict = field(default_factory=dict)
    seeds: list[int] = field(default_factory=lambda: [0])
    out: str = "runs"
    source: str = "<memory>"

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seeds": list(self.seeds),
            "out": self.out,
            "recode": self.recode.to_dict(),
            "env": dict(self.env),
            "agent": dataclasses.asdict(self.agent),
            "params": dict(self.params),
        }

    def digest(self) -> str:
        """sha256 over a canonical JSON dump of the resolved config."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_seeds(self, seeds: list[int]) -> "ExperimentConfig":
        return dataclasses.replace(self, seeds=list(seeds))


def _build(node, lines: dict, path: tuple):
    """Turn a composed YAML node into python values, recording key lines."""
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = yaml.safe_load(yaml.serialize(k))
            if key in out:
                raise ConfigError(f"line {k.start_mark.line + 1}: duplicate key {key!r}")
            lines[path + (key,)] = k.start_mark.line + 1
            out[key] = _build(v, lines, path + (key,))
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_build(v, lines, path + (i,)) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def _fields(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def parse_config(text: str, source: str = "<string>",
                 schemas: dict[str, dict[str, set]] | None = None) -> ExperimentConfig:
    """Parse and validate. ``schemas`` maps experiment -> {"env": keys, "params": keys}."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "?"
        raise ConfigError(f"{source}:{where}: malformed YAML ({getattr(exc, 'problem', exc)})") from exc
    if node is None:
        raise ConfigError(f"{source}: empty config")
    lines: dict = {}
    raw = _build(node, lines, ())
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}:line 1: top level must be a mapping")

    def err(path, msg):
        line = lines.get(path, lines.get(path[:1], 1))
        return ConfigError(f"{source}:line {line}: {msg}")

    for key in raw:
        if key not in TOP_KEYS:
            raise err((key,), f"unknown key {key!r} (allowed: {', '.join(TOP_KEYS)})")
    if "experiment" not in raw:
        raise ConfigError(f"{source}: missing required key 'experiment'")
    exp = raw["experiment"]
    if exp not in EXPERIMENTS:
        raise err(("experiment",), f"unknown experiment {exp!r}")

    def section(name, cls):
        body = raw.get(name) or {}
        if not isinstance(body, dict):
            raise err((name,), f"{name!r} must be a mapping")
        allowed = _fields(cls)
        for k in body:
            if k not in allowed:
                raise err((name, k), f"unknown key {name}.{k}")
        try:
            return cls(**body)
        except (TypeError, ValueError) as exc:
            raise err((name,), f"invalid {name}: {exc}") from exc

    recode = section("recode", RecodeConfig)
    agent = section("agent", AgentConfig)

    schema = (schemas or {}).get(exp, {})
    free = {}
    for name in ("env", "params"):
        body = raw.get(name) or {}
        if not isinstance(body, dict):
            raise err((name,), f"{name!r} must be a mapping")
        allowed = schema.get(name)
        if allowed is not None:
            for k in body:
                if k not in allowed:
                    raise err((name, k), f"unknown key {name}.{k} for {exp}")
        free[name] = body

    seeds = raw.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = [seeds]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise err(("seeds",), "seeds must be a non-empty list of non-negative integers")
    out = raw.get("out", f"runs/{exp}")
    if not isinstance(out, str):
        raise err(("out",), "out must be a string")
    return ExperimentConfig(exp, recode, free["env"], agent, free["params"], seeds, out, source)


def load_config(path, schemas=None) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read config ({exc.strerror})") from exc
    return parse_config(text, str(p), schemas)
