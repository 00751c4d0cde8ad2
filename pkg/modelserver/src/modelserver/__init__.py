"""HTTP model server speaking the mmret adapter wire protocol."""

__version__ = "0.1.0"

from .backends import (
    BackendLoadError,
    Backends,
    ModelConfig,
    available_backends,
    load_backends,
    register_backend,
)

__all__ = [
    "__version__",
    "BackendLoadError",
    "Backends",
    "ModelConfig",
    "available_backends",
    "create_app",
    "load_backends",
    "register_backend",
    "serve",
]


def __getattr__(name):
    # app imports fastapi; keep `import modelserver` light for config-only use
    if name in ("create_app", "serve"):
        from . import app

        return getattr(app, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
