"""Experiment configuration loaded from JSON with command-line overrides."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..eas import EasConfig
from ..policy import PolicyParams, load_checkpoint, parse_checkpoint
from ..pretrain import PretrainConfig
from ..problems import InstanceGenerator, make_env, parse_batch
from ..search import METHODS, MctsConfig, SgbsConfig

BUILTIN_PREFIX = "builtin:"
REFERENCES = ("auto", "oracle", "run-best")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MethodSpec:
    name: str
    params: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.name not in METHODS:
            raise ConfigError(f"unknown method {self.name!r}; expected one of {METHODS}")
        if not self.label:
            object.__setattr__(self, "label", default_label(self.name, self.params))
        try:
            self.run_kwargs(1, 0)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"method {self.label}: {exc}") from None

    def run_kwargs(self, budget: int, seed: int) -> dict:
        """Keyword arguments for ``run_with_budget``."""
        p = dict(self.params)
        if self.name == "sampling":
            return {"seed": seed, "chunk": int(p.pop("chunk", 512)), **_empty(p)}
        if self.name == "beam":
            return {"width": int(p.pop("width", budget)), **_empty(p)}
        if self.name == "mcts":
            return {"config": MctsConfig(**p)}
        if self.name == "sgbs":
            return {"config": SgbsConfig(**p)}
        if self.name in ("eas", "sgbs+eas", "active-search"):
            sg = {k: p.pop(k) for k in ("beta", "gamma") if k in p}
            return {"config": EasConfig(sgbs=SgbsConfig(**sg), seed=seed, **p)}
        return _empty(p)


def _empty(p: dict) -> dict:
    if p:
        raise ValueError(f"unexpected parameters {sorted(p)}")
    return {}


def default_label(name: str, params: dict) -> str:
    if name == "sgbs" or (name == "sgbs+eas" and ("beta" in params or "gamma" in params)):
        return f"{name}({params.get('beta', 4)},{params.get('gamma', 4)})"
    if name == "beam" and "width" in params:
        return f"beam({params['width']})"
    return name


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "TSP"
    size: int = 20
    count: int = 50
    instance_seed: int = 0
    instance_file: str | None = None
    generator: dict = field(default_factory=dict)
    methods: tuple = ()
    budget: int = 1200
    augment: bool = False
    reference: str = "auto"
    checkpoint: str | None = None
    out: str = "runs/out"
    seed: int = 0
    pretrain: dict = field(default_factory=dict)
    probe_count: int = 8
    probe_budget: int = 400
    grid_beta: tuple = (1, 2, 4, 8)
    grid_gamma: tuple = (4,)
    sweep_method: str = "sgbs"

    def __post_init__(self):
        if self.budget <= 0:
            raise ConfigError("budget must be positive")
        if self.count <= 0:
            raise ConfigError("count must be positive")
        if self.reference not in REFERENCES:
            raise ConfigError(f"reference must be one of {REFERENCES}")
        if self.sweep_method not in ("sgbs", "sgbs+eas"):
            raise ConfigError("sweep_method must be 'sgbs' or 'sgbs+eas'")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate method labels {labels}; set 'label' to tell them apart")
        if self.probe_count <= 0 or self.probe_budget <= 0:
            raise ConfigError("probe_count and probe_budget must be positive")
        if not self.grid_beta or not self.grid_gamma or min(self.grid_beta + self.grid_gamma) < 1:
            raise ConfigError("grid values must be positive")
        try:
            self.instance_generator()
            self.pretrain_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if self.instance_file is not None and not Path(self.instance_file).is_file():
            raise ConfigError(f"instance file not found: {self.instance_file}")
        if self.checkpoint is not None:
            self.policy_params()

    def instance_generator(self, seed: int | None = None) -> InstanceGenerator:
        seed = self.instance_seed if seed is None else seed
        return InstanceGenerator(self.kind, self.size, seed, **self.generator)

    def instances(self) -> list:
        if self.instance_file is not None:
            try:
                return parse_batch(self.instance_file)
            except ValueError as exc:
                raise ConfigError(f"{self.instance_file}: {exc}") from None
        gen = self.instance_generator()
        return [gen(i) for i in range(self.count)]

    def pretrain_config(self) -> PretrainConfig:
        return PretrainConfig(**{"seed": self.seed, **self.pretrain})

    def n_features(self) -> int:
        return make_env(self.instance_generator()(0), 1).n_features

    def policy_params(self) -> PolicyParams:
        """Base weights from ``checkpoint``, or the untrained initial weights."""
        if self.checkpoint is None:
            return PolicyParams.initial(self.n_features())
        try:
            if self.checkpoint.startswith(BUILTIN_PREFIX):
                name = self.checkpoint[len(BUILTIN_PREFIX) :]
                text = resources.files("sgbs.data").joinpath(f"{name}.txt").read_text()
                params, _ = parse_checkpoint(text)
            else:
                params, _ = load_checkpoint(self.checkpoint)
        except FileNotFoundError:
            raise ConfigError(f"checkpoint not found: {self.checkpoint}") from None
        except ValueError as exc:
            raise ConfigError(f"bad checkpoint {self.checkpoint}: {exc}") from None
        if params.theta.shape != (self.n_features(),):
            raise ConfigError(f"checkpoint has {params.theta.size} weights, {self.kind} needs {self.n_features()}")
        return params

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["methods"] = [{"name": m.name, "label": m.label, **m.params} for m in self.methods]
        d["grid_beta"] = list(self.grid_beta)
        d["grid_gamma"] = list(self.grid_gamma)
        return d


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def _method(entry) -> MethodSpec:
    if isinstance(entry, str):
        return MethodSpec(entry)
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"method entry needs a name: {entry!r}")
    entry = dict(entry)
    name = entry.pop("name")
    label = entry.pop("label", "")
    return MethodSpec(name, entry, label)


def from_dict(data: dict) -> ExperimentConfig:
    unknown = set(data) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data = dict(data)
    data["methods"] = tuple(_method(m) for m in data.get("methods", ()))
    for key in ("grid_beta", "grid_gamma"):
        if key in data:
            data[key] = tuple(int(v) for v in data[key])
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load(path=None, overrides: dict | None = None) -> ExperimentConfig:
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return from_dict(data)
