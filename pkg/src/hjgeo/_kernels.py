"""Fixed-step RK4 kernel with an optional numba backend.

The same loop body runs as plain Python/numpy or compiled by ``numba.njit``.
Numba is used when it is importable, not disabled through the environment,
and the run is long enough to amortize compilation:

    HJGEO_DISABLE_NUMBA=1        force the numpy path
    HJGEO_NUMBA_MIN_STEPS=N      step count from which numba is used (default 20000)
    HJGEO_CACHE_DIR=path         where generated numba modules are cached

For numba, each generated field is written together with an inlined copy of
the loop to a module file so that ``njit(cache=True)`` persists the machine
code across processes.
"""
from __future__ import annotations

import hashlib
import importlib.util
import inspect
import math
import os
import sys
import tempfile
from functools import lru_cache
from pathlib import Path

import numpy as np

_FALSE = ("", "0", "false", "no", "off")


def numba_disabled() -> bool:
    return os.environ.get("HJGEO_DISABLE_NUMBA", "").strip().lower() not in _FALSE


def numba_min_steps() -> int:
    return int(os.environ.get("HJGEO_NUMBA_MIN_STEPS", "20000"))


@lru_cache(maxsize=1)
def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def choose_backend(steps: int, requested: str | None = None) -> str:
    if requested is not None:
        if requested not in ("numpy", "numba"):
            raise ValueError(f"unknown backend {requested!r}")
        if requested == "numba" and (numba_disabled() or not numba_available()):
            return "numpy"
        return requested
    if numba_disabled() or not numba_available() or steps < numba_min_steps():
        return "numpy"
    return "numba"


def rk4_loop(f, x0, t0, h, steps):
    """Integrate x' = f(t, x) with classical RK4.

    Returns (states, bad) where ``bad`` is the first step index whose state
    is non-finite, or -1.
    """
    n = x0.shape[0]
    states = np.empty((steps + 1, n))
    states[0, :] = x0
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    x = x0.copy()
    half = 0.5 * h
    sixth = h / 6.0
    for i in range(steps):
        t = t0 + i * h
        f(t, x, k1)
        f(t + half, x + half * k1, k2)
        f(t + half, x + half * k2, k3)
        f(t + h, x + h * k3, k4)
        x = x + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[i + 1, :] = x
        for j in range(n):
            if not math.isfinite(x[j]):
                return states, i + 1
    return states, -1


def cache_dir() -> Path:
    default = Path(tempfile.gettempdir()) / "hjgeo-numba-cache"
    return Path(os.environ.get("HJGEO_CACHE_DIR", default))


def _numba_source(field_source: str) -> str:
    loop = inspect.getsource(rk4_loop)
    loop = loop.replace("def rk4_loop(f, ", "def run(").replace("        f(t", "        field(t")
    return (
        "import math\nimport numpy as np\nfrom numba import njit\n\n\n"
        "@njit(cache=True)\n" + field_source + "\n\n@njit(cache=True)\n" + loop
    )


@lru_cache(maxsize=64)
def _numba_module(field_source: str):
    src = _numba_source(field_source)
    digest = hashlib.sha256(src.encode()).hexdigest()[:20]
    name = f"hjgeo_field_{digest}"
    folder = cache_dir()
    folder.mkdir(parents=True, exist_ok=True)
    path = folder / f"{name}.py"
    if not path.exists():
        tmp = path.with_suffix(f".{os.getpid()}.tmp")
        tmp.write_text(src)
        os.replace(tmp, path)
    if name in sys.modules:
        return sys.modules[name]
    spec = importlib.util.spec_from_file_location(name, path)
    module = importlib.util.module_from_spec(spec)
    # numba's cache re-imports the defining module by name
    sys.modules[name] = module
    spec.loader.exec_module(module)
    return module


@lru_cache(maxsize=64)
def _compile(source: str, backend: str):
    if backend == "numba":
        return _numba_module(source).field
    ns = {"math": math, "np": np}
    exec(compile(source, "<field>", "exec"), ns)
    return ns["field"]


def compile_field(source: str, backend: str = "numpy"):
    """Compile generated ``def field(t, x, out)`` source for the backend."""
    return _compile(source, backend)


def run_rk4(source: str, x0: np.ndarray, t0: float, h: float, steps: int, backend: str):
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    if backend == "numba":
        return _numba_module(source).run(x0, float(t0), float(h), int(steps))
    # overflow surfaces as a non-finite state, reported by the caller
    with np.errstate(over="ignore", invalid="ignore"):
        return rk4_loop(_compile(source, "numpy"), x0, float(t0), float(h), int(steps))
