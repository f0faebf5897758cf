"""Event-driven zero-temperature spin dynamics with a percolation Lyapunov audit."""

import json as _json

try:
    from ._quench import *  # noqa: F401,F403  (installed wheel layout)
    from ._quench import run_experiment as _run_experiment_json
except ImportError:  # build-tree layout
    from _quench import *  # noqa: F401,F403
    from _quench import run_experiment as _run_experiment_json


def run_experiment(config_text, mode="simulate"):
    """Run an experiment from config text and return the report as a dict."""
    return _json.loads(_run_experiment_json(config_text, mode))
