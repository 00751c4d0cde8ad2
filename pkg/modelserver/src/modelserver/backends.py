"""Backend selection: which model implementation serves each endpoint.

Each of the four roles (captioner, annotator, question generator,
question answerer) is resolved from a registry by the id named in
``ModelConfig``, so swapping a heuristic for a checkpoint-backed model is
a configuration change, not a code change. Only the deterministic
heuristic backends ship here; deployments with model weights register
their own factories via :func:`register_backend` before calling
``create_app``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Protocol

from . import nlp

ROLES = ("captioner", "annotator", "question_generator", "question_answerer")


class BackendLoadError(Exception):
    """A configured backend cannot be constructed (startup-time error)."""


class Backend(Protocol):
    version: str

    def __call__(self, *args): ...


@dataclass(frozen=True)
class _FnBackend:
    fn: Callable
    version: str

    def __call__(self, *args):
        return self.fn(*args)


_REGISTRY: dict[str, dict[str, Callable[[], Backend]]] = {role: {} for role in ROLES}


def register_backend(role: str, backend_id: str, factory: Callable[[], Backend]) -> None:
    if role not in _REGISTRY:
        raise ValueError(f"unknown role {role!r}; expected one of {ROLES}")
    _REGISTRY[role][backend_id] = factory


def available_backends(role: str) -> list[str]:
    return sorted(_REGISTRY[role])


register_backend(
    "captioner", "heuristic", lambda: _FnBackend(nlp.caption_for, nlp.CAPTIONER_VERSION)
)
register_backend(
    "annotator", "heuristic", lambda: _FnBackend(nlp.noun_phrases, nlp.ANNOTATOR_VERSION)
)
register_backend(
    "question_generator", "heuristic", lambda: _FnBackend(nlp.make_question, nlp.QG_VERSION)
)
register_backend(
    "question_answerer", "heuristic", lambda: _FnBackend(nlp.answer_question, nlp.QA_VERSION)
)


@dataclass(frozen=True)
class ModelConfig:
    """Backend id per endpoint role; defaults are the bundled heuristics."""

    captioner: str = "heuristic"
    annotator: str = "heuristic"
    question_generator: str = "heuristic"
    question_answerer: str = "heuristic"

    @classmethod
    def from_file(cls, path: str | Path) -> "ModelConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise BackendLoadError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise BackendLoadError(f"{path}: config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise BackendLoadError(f"{path}: unknown config keys: {', '.join(unknown)}")
        return cls(**raw)


@dataclass(frozen=True)
class Backends:
    captioner: Backend
    annotator: Backend
    question_generator: Backend
    question_answerer: Backend

    def versions(self) -> dict[str, str]:
        return {role: getattr(self, role).version for role in ROLES}


def load_backends(config: ModelConfig) -> Backends:
    """Construct every configured backend, failing fast on unknown ids."""
    resolved = {}
    for role in ROLES:
        backend_id = getattr(config, role)
        factory = _REGISTRY[role].get(backend_id)
        if factory is None:
            raise BackendLoadError(
                f"no {role} backend {backend_id!r}; available: {', '.join(available_backends(role)) or 'none'}"
            )
        resolved[role] = factory()
    return Backends(**resolved)
