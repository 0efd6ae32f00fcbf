"""TOML run configuration shared by every CLI subcommand.

A config file has four tables::

    [engine]      # EngineConfig fields, plus temperature and max_output_tokens
    [backend]     # kind = "scripted" (behavior = path) or "http" (endpoint, models)
    [retriever]   # index = path to a saved PassageIndex
    [prompts]     # optional template overrides, one key per prompt site

Relative paths resolve against the directory holding the config file. The
only environment lookup is ``backend.api_key_env``, which names the variable
holding the API key so the secret never sits in the file.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import tomli_w

from .backends.base import ModelBackend, ModelRole
from .backends.http import HttpBackend
from .backends.prompts import DEFAULT_CATALOG, PromptCatalog
from .backends.scripted import ScriptedBackend, ScriptedBehavior
from .core import Ablation, DecodingSettings, EngineConfig, RelevanceMode
from .engine import Engine
from .errors import ConfigError, InvalidParams
from .retrieval import PassageIndex

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

BACKEND_KINDS = ("scripted", "http")
_ENGINE_KEYS = {
    "d_th", "k_passages", "retrieval_length", "ablation", "relevance_mode", "answer_with_all_retrieved",
    "max_fanout", "seed", "temperature", "max_output_tokens",
}


@dataclass(frozen=True)
class BackendSettings:
    kind: str = "scripted"
    behavior: str | None = None
    endpoint: str | None = None
    models: Mapping[str, str] = field(default_factory=dict)
    api_key_env: str | None = None
    max_in_flight: int = 4
    timeout: float = 60.0
    retries: int = 3
    backoff: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"backend.kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.kind == "scripted" and not self.behavior:
            raise ConfigError("a scripted backend needs backend.behavior")
        if self.kind == "http":
            if not self.endpoint:
                raise ConfigError("an http backend needs backend.endpoint")
            missing = sorted({r.value for r in ModelRole} - set(self.models))
            if missing:
                raise ConfigError(f"backend.models lacks roles {missing}")
        unknown = set(self.models) - {r.value for r in ModelRole}
        if unknown:
            raise ConfigError(f"backend.models has unknown roles {sorted(unknown)}")
        if self.max_in_flight < 1:
            raise ConfigError("backend.max_in_flight must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    backend: BackendSettings
    engine: EngineConfig = field(default_factory=EngineConfig)
    index: str | None = None
    prompts: Mapping[str, str] = field(default_factory=dict)

    def catalog(self) -> PromptCatalog:
        return DEFAULT_CATALOG.with_overrides(self.prompts) if self.prompts else DEFAULT_CATALOG

    def to_dict(self) -> dict[str, Any]:
        e = self.engine
        engine = {
            "d_th": e.d_th,
            "k_passages": e.k_passages,
            "retrieval_length": e.retrieval_length,
            "ablation": sorted(a.value for a in e.ablation),
            "relevance_mode": e.relevance_mode.value,
            "answer_with_all_retrieved": e.answer_with_all_retrieved,
            "max_fanout": e.max_fanout,
            "seed": e.seed,
            "temperature": e.decoding.temperature,
            "max_output_tokens": e.decoding.max_output_tokens,
        }
        b = self.backend
        backend = {f.name: getattr(b, f.name) for f in fields(b) if getattr(b, f.name) is not None}
        backend["models"] = dict(sorted(b.models.items()))
        if not backend["models"]:
            del backend["models"]
        out: dict[str, Any] = {"engine": engine, "backend": backend}
        if self.index is not None:
            out["retriever"] = {"index": self.index}
        if self.prompts:
            out["prompts"] = dict(sorted(self.prompts.items()))
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())


def _table(data: Mapping[str, Any], name: str, allowed: set[str]) -> dict[str, Any]:
    table = data.get(name, {})
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return dict(table)


def _resolve(path: str | None, base: Path) -> str | None:
    if path is None:
        return None
    p = Path(path).expanduser()
    return str(p if p.is_absolute() else (base / p).resolve())


def parse_run_config(data: Mapping[str, Any], base_dir: str | Path = ".") -> RunConfig:
    base = Path(base_dir)
    unknown = set(data) - {"engine", "backend", "retriever", "prompts"}
    if unknown:
        raise ConfigError(f"unknown config tables {sorted(unknown)}")
    eng = _table(data, "engine", _ENGINE_KEYS)
    backend = _table(data, "backend", {f.name for f in fields(BackendSettings)})
    retriever = _table(data, "retriever", {"index"})
    prompts = _table(data, "prompts", {f.name for f in fields(PromptCatalog)} - {"exemplars"})
    try:
        decoding = DecodingSettings(
            temperature=float(eng.pop("temperature", 0.0)),
            max_output_tokens=int(eng.pop("max_output_tokens", 512)),
        )
        eng["ablation"] = frozenset(Ablation(a) for a in eng.get("ablation", ()))
        eng["relevance_mode"] = RelevanceMode(eng.get("relevance_mode", RelevanceMode.BATCH))
        engine = EngineConfig(decoding=decoding, **eng)
    except (InvalidParams, ValueError, TypeError) as exc:
        raise ConfigError(f"[engine]: {exc}") from exc
    backend["behavior"] = _resolve(backend.get("behavior"), base)
    backend["models"] = dict(backend.get("models", {}))
    run = RunConfig(
        engine=engine,
        backend=BackendSettings(**backend),
        index=_resolve(retriever.get("index"), base),
        prompts=dict(prompts),
    )
    run.catalog()  # validates the overrides
    return run


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_run_config(data, path.resolve().parent)


def build_backend(run: RunConfig) -> ModelBackend:
    b = run.backend
    if b.kind == "scripted":
        try:
            behavior = ScriptedBehavior.load(b.behavior)
        except OSError as exc:
            raise ConfigError(f"cannot read behavior file {b.behavior}: {exc.strerror}") from exc
        return ScriptedBackend(behavior, run.catalog())
    api_key = None
    if b.api_key_env:
        api_key = os.environ.get(b.api_key_env)
        if api_key is None:
            raise ConfigError(f"environment variable {b.api_key_env} is not set")
    return HttpBackend(
        b.endpoint, b.models, api_key,
        max_in_flight=b.max_in_flight, timeout=b.timeout, retries=b.retries, backoff=b.backoff,
    )


def load_index(run: RunConfig) -> PassageIndex | None:
    if run.index is None:
        return None
    try:
        return PassageIndex.load(run.index)
    except OSError as exc:
        raise ConfigError(f"cannot read index {run.index}: {exc.strerror}") from exc


def build_engine(run: RunConfig, **overrides: Any) -> Engine:
    config = replace(run.engine, prompts=run.catalog(), **overrides)
    return Engine(config, build_backend(run), load_index(run))
