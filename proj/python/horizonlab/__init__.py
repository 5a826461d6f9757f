"""Python access to the horizonlab solvers and experiment runner."""

import json

from ._horizonlab import (
    ArgumentError,
    BlowUpError,
    ControlProblem,
    GridSpec,
    LatticeOverflowError,
    LookupError,
    SolverError,
    ValueGrid,
    __version__,
    builtin_problem_names,
    emit_plot_data,
    fnv1a64_file,
    frechet_super_test,
    read_value_csv,
    solve_finite_horizon,
    unit_speed_min_time,
)
from . import _horizonlab as _core

DEFAULT_HORIZONS = (2.0, 4.0, 8.0, 16.0)


def problem(descriptor="linear-l1"):
    """Built-in problem by name, or a JSON descriptor dict."""
    return ControlProblem(json.dumps(descriptor))


def constant_control(value):
    values = list(value) if isinstance(value, (list, tuple)) else [value]
    return {"breakpoints": [0.0], "values": [values]}


def estimate_v_all(prob, spec, b, horizons=DEFAULT_HORIZONS, tol=2e-2):
    return json.loads(_core.estimate_v_all(prob, spec, list(horizons), _state(b), tol))


def estimate_v_inf(prob, b, horizons=DEFAULT_HORIZONS, tol=2e-2):
    return json.loads(_core.estimate_v_inf(prob, list(horizons), _state(b), tol))


def pmp_certificate(prob, value, control, horizons, spec):
    """`value` is a ValueGrid; `control` a ControlSignal dict (see constant_control)."""
    return json.loads(_core.pmp_certificate(prob, value, json.dumps(control), list(horizons), spec))


def run(config):
    """Runs an experiment config dict; returns (exit_code, message, outputs, summary)."""
    code, message, outputs, summary = _core.run(json.dumps(config))
    return code, message, outputs, json.loads(summary) if summary != "null" else None


def _state(b):
    return list(b) if isinstance(b, (list, tuple)) else [float(b)]
