"""Refinery planning: instance bundles, model building, relaxations, solvers
and an independent plan checker."""

from ._refplan import (
    BoundError,
    Instance,
    MissingVariableError,
    Model,
    ModelError,
    ParseError,
    Plan,
    RefplanError,
    branch_and_bound,
    build_model,
    calibrate,
    check_solution,
    export_model,
    load_instance,
    read_solution,
    relax,
    solve,
    solve_lp,
    write_instance,
)

__all__ = [
    "BoundError",
    "Instance",
    "MissingVariableError",
    "Model",
    "ModelError",
    "ParseError",
    "Plan",
    "RefplanError",
    "branch_and_bound",
    "build_model",
    "calibrate",
    "check_solution",
    "export_model",
    "load_instance",
    "read_solution",
    "relax",
    "solve",
    "solve_lp",
    "write_instance",
]
