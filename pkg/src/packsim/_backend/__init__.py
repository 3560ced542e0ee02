"""Simulation backend selection.

The compiled core is used when its extension module imports cleanly;
otherwise the pure-Python twin takes over.  Set PACKSIM_BACKEND=pure or
PACKSIM_BACKEND=compiled to force a choice (the latter raises if the
extension is unavailable).  Both implement the same event loops over the
same random streams and produce identical output for identical input.
"""

import os

from . import pure

_forced = os.environ.get("PACKSIM_BACKEND", "").strip().lower()

_compiled = None
if _forced != "pure":
    try:
        from . import _core as _compiled  # type: ignore[attr-defined]
    except ImportError:
        _compiled = None
        if _forced == "compiled":
            raise

_impl = _compiled if _compiled is not None else pure

HAVE_COMPILED = _compiled is not None
BACKEND_NAME = _impl.BACKEND_NAME

run_single = _impl.run_single
run_fleet = _impl.run_fleet
run_baseline = _impl.run_baseline

TRACE_NAMES = pure.TRACE_NAMES


def available_backends():
    names = ["pure"]
    if _compiled is not None:
        names.append("compiled")
    return names


def get_backend(name: str):
    if name == "pure":
        return pure
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled backend not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
