"""Backend selection and worker orchestration.

The compiled kernel is preferred; the numpy fallback implements the same
substream/accumulation contract, so results are identical either way.  Units
(excursions or trials) are split into contiguous index ranges per worker;
because every unit owns its own counter-addressed substream, the random
numbers do not depend on the split.  Partial accumulators are merged in
worker order, so a fixed (seed, workers) pair is fully deterministic.
"""

import multiprocessing as mp
import os

import numpy as np

from . import _kernel_py

try:
    from . import _kernel as _compiled
except ImportError:            # extension not built: fall back
    _compiled = None

_FORCED = os.environ.get("KRICK_BACKEND", "").strip().lower() or None


def get_backend(name=None):
    name = name or _FORCED or ("cython" if _compiled is not None else "python")
    if name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel not available; "
                               "install with the Cython extension or use "
                               "backend='python'")
        return _compiled
    if name == "python":
        return _kernel_py
    raise ValueError(f"unknown backend {name!r}")


def backend_name(name=None):
    try:
        be = get_backend(name)
    except RuntimeError:
        return "python"
    return "cython" if be is _compiled else "python"


def _merge(parts):
    out = {}
    for key in parts[0]:
        v0 = parts[0][key]
        if key == "store":
            stores = [p[key] for p in parts if p[key]]
            if not stores:
                out[key] = {}
            else:
                out[key] = {k: np.concatenate([s[k] for s in stores])
                            for k in stores[0]}
        elif isinstance(v0, np.ndarray):
            acc = v0.copy()
            for p in parts[1:]:
                acc += p[key]
            out[key] = acc
        else:
            out[key] = sum(p[key] for p in parts)
    return out


def _chunks(n_units, workers):
    base = n_units // workers
    rem = n_units % workers
    lo = 0
    for w in range(workers):
        hi = lo + base + (1 if w < rem else 0)
        if hi > lo:
            yield lo, hi
        lo = hi


def _call(args):
    backend, kname, kwargs = args
    return getattr(get_backend(backend), kname)(**kwargs)


def run_kernel(kname, n_units, workers=1, backend=None, **kwargs):
    """Run a kernel over unit range [0, n_units) split across workers."""
    backend = backend or backend_name()
    jobs = [(backend, kname, {**kwargs, "unit_lo": lo, "unit_hi": hi})
            for lo, hi in _chunks(n_units, workers)]
    if len(jobs) == 1 or workers <= 1:
        parts = [_call(j) for j in jobs]
    else:
        ctx = mp.get_context("fork")
        with ctx.Pool(processes=min(workers, len(jobs))) as pool:
            parts = pool.map(_call, jobs)
    return _merge(parts)
