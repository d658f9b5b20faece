"""Runtime configuration for the CLI and the HTTP service.

A config is a JSON file (all keys optional except where noted by the
caller); validation happens at startup and fails fast naming the missing
fields.  Environment variables carry only secrets (EMBED_API_KEY,
CHAT_API_KEY).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .embedding import OfflineEmbedder, RemoteEmbedder
from .errors import ConfigError
from .explain import BackendConfig, make_backend
from .prompts import builtin_template_set, load_template_set
from .shellparse import Dialect


@dataclass
class EmbedSettings:
    provider: str = "offline"  # "offline" | "remote"
    endpoint: str = ""
    model: str = ""
    dim: int = 1024
    seed: int = 0
    batch_size: int = 64
    max_concurrency: int = 4


@dataclass
class Config:
    embed: EmbedSettings = field(default_factory=EmbedSettings)
    backend: BackendConfig = field(default_factory=BackendConfig)
    index_path: str = ""
    catalog_path: str = ""
    template_path: str = ""  # empty -> bundled English set
    template_language: str = "english"
    intent_k: int = 3
    k_per_unit: int = 3
    seed: int = 0
    prompt_char_budget: int = 6000
    dialect: str = Dialect.UNIX_SHELL.value
    bind_host: str = "127.0.0.1"
    bind_port: int = 8177
    session_store_path: str = "sessions"
    auth_token: str = ""
    static_dir: str = ""

    def validate_for_serving(self) -> None:
        missing = [name for name, value in (
            ("catalog_path", self.catalog_path),
            ("session_store_path", self.session_store_path),
        ) if not value]
        if self.embed.provider == "remote" and not self.embed.endpoint:
            missing.append("embed.endpoint")
        if self.backend.kind == "remote" and not self.backend.endpoint:
            missing.append("backend.endpoint")
        if missing:
            raise ConfigError(missing)

    def make_provider(self):
        if self.embed.provider == "offline":
            return OfflineEmbedder(dim=self.embed.dim, seed=self.embed.seed)
        if self.embed.provider == "remote":
            return RemoteEmbedder(endpoint=self.embed.endpoint, model=self.embed.model,
                                  dim=self.embed.dim, batch_size=self.embed.batch_size,
                                  max_concurrency=self.embed.max_concurrency)
        raise ConfigError([f"embed.provider={self.embed.provider!r}"])

    def make_template_set(self):
        if self.template_path:
            return load_template_set(self.template_path)
        return builtin_template_set(self.template_language)

    def make_backend(self):
        return make_backend(self.backend, template_set=self.make_template_set())


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    cfg = Config()
    embed_data = data.pop("embed", {})
    backend_data = data.pop("backend", {})
    for key, value in embed_data.items():
        if not hasattr(cfg.embed, key):
            raise ConfigError([f"embed.{key}"])
        setattr(cfg.embed, key, value)
    for key, value in backend_data.items():
        if not hasattr(cfg.backend, key):
            raise ConfigError([f"backend.{key}"])
        setattr(cfg.backend, key, value)
    for key, value in data.items():
        if not hasattr(cfg, key):
            raise ConfigError([key])
        setattr(cfg, key, value)
    return cfg
