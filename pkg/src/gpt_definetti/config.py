"""Process-wide tolerances and size caps.

Values can be overridden by environment variables ``GPTDF_<NAME>`` (uppercased
field name) or temporarily with :func:`override`.
"""
import contextlib
import dataclasses
import os


@dataclasses.dataclass
class Settings:
    tol: float = 1e-7
    interior_tol: float = 1e-9
    bisect_tol: float = 1e-8
    rank_tol: float = 1e-10
    solver_tol: float = 1e-9
    gap_tol: float = 1e-6
    p_floor: float = 1e-10
    cap_dim: int = 64
    cap_enum: int = 4096
    cap_sym: int = 8
    cap_vertices: int = 20000
    backend: str = "highs"
    cache_dir: str | None = None

    @classmethod
    def from_env(cls, environ=None):
        environ = os.environ if environ is None else environ
        kwargs = {}
        for field in dataclasses.fields(cls):
            raw = environ.get("GPTDF_" + field.name.upper())
            if raw is None:
                continue
            if field.name in ("backend", "cache_dir"):
                kwargs[field.name] = raw
            elif field.type in ("int", int):
                kwargs[field.name] = int(raw)
            else:
                kwargs[field.name] = float(raw)
        return cls(**kwargs)


settings = Settings.from_env()


@contextlib.contextmanager
def override(**kwargs):
    """Temporarily replace fields of the global settings."""
    old = {k: getattr(settings, k) for k in kwargs}
    for k, v in kwargs.items():
        if not hasattr(settings, k):
            raise AttributeError(k)
        setattr(settings, k, v)
    try:
        yield settings
    finally:
        for k, v in old.items():
            setattr(settings, k, v)
