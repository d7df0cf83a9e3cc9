"""Machine-readable reports with a stable, diffable serialization.

The report body is canonical JSON (sorted keys, fixed float rendering via
the platform repr, no timestamps), so identical inputs and seeds reproduce
byte-identical files.
"""

from __future__ import annotations

import json

from . import __version__

__all__ = ["build_report", "canonical_json", "EXIT_OK", "EXIT_ERROR", "EXIT_NEGATIVE"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NEGATIVE = 2


def _clean(value):
    import numpy as np

    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        f = float(value)
        return None if f != f else f
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def build_report(command, config, seed, body):
    """Assemble the report document around a command-specific body."""
    return _clean(
        {
            "artifact": {"name": "berwald", "version": __version__},
            "command": command,
            "scenario": config.raw,
            "seed": seed,
            **body,
        }
    )


def canonical_json(doc):
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=True) + "\n"
