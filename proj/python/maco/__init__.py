"""Python interface to the maco-sim simulator.

Configs are plain dicts with the same schema as the JSON files accepted by
the ``maco-sim`` CLI (see docs/config.md). Missing keys take their defaults.
"""

import json

from . import _maco
from ._maco import ConfigError, IsaError, LockCapacity, ProtocolError
from ._maco import assemble, disassemble, predict_page_heads, route_xy, tile_candidates

__all__ = [
    "ConfigError",
    "IsaError",
    "LockCapacity",
    "ProtocolError",
    "assemble",
    "default_config",
    "disassemble",
    "list_experiments",
    "predict_page_heads",
    "route_xy",
    "run",
    "sweep",
    "tile_candidates",
    "validate_config",
]


def default_config():
    """Full configuration with every default filled in."""
    return json.loads(_maco.default_config())


def validate_config(config=None):
    """Merge ``config`` over the defaults; raises ConfigError on bad input."""
    return json.loads(_maco.validate_config(json.dumps(config or {})))


def run(config=None):
    """Run one experiment.

    Returns a dict with ``nodes`` (per-node counters), ``all``, ``wall_ns``,
    the functional check outcome (``checked``, ``gemms_checked``,
    ``mismatches``), the effective ``config`` and the ``csv`` text.
    """
    return json.loads(_maco.run(json.dumps(config or {})))


def list_experiments():
    """(name, description) pairs of the canned experiments."""
    return _maco.list_experiments()


def sweep(out_dir, experiment="", base=None, axes=(), jobs=1):
    """Run a sweep and write one CSV per point plus manifest.json.

    ``axes`` holds strings of the form ``"dotted.key=v1,v2"``.
    """
    return json.loads(_maco.sweep(json.dumps(base or {}), experiment, list(axes), str(out_dir), jobs))
