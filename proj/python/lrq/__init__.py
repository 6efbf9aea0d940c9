"""Probabilistic queries on discrete sequence models, marked temporal point
processes and jump processes."""

from __future__ import annotations

import csv
import io
import json
import os
from typing import Any, Mapping

from . import _core
from ._core import (
    ConfigError,
    Estimate,
    HittingTime as _HittingTime,
    JumpProcess,
    MarkovModel,
    MtppModel,
    NumericError,
    Query,
    a_before_b,
    cdf_estimate,
    censored_likelihood,
    commands,
    coverage_beam_bounds,
    exact_enumerate,
    hitting_cdf,
    hybrid_estimate,
    importance_estimate,
    joint_estimate,
    log_likelihood,
    markov_a_before_b_analytic,
    markov_hit_analytic,
    markov_query_exact,
    naive_estimate,
    nth_mark,
    relative_efficiency,
    sample_sequence,
    steady_state,
)

__all__ = [
    "ConfigError",
    "Estimate",
    "HarnessError",
    "JumpProcess",
    "MarkovModel",
    "MtppModel",
    "NumericError",
    "Query",
    "a_before_b",
    "cdf_estimate",
    "censored_likelihood",
    "commands",
    "coverage_beam_bounds",
    "exact_enumerate",
    "hitting_cdf",
    "hitting_time",
    "hybrid_estimate",
    "importance_estimate",
    "jump_process",
    "joint_estimate",
    "log_likelihood",
    "markov_a_before_b_analytic",
    "markov_hit_analytic",
    "markov_query_exact",
    "mtpp_model",
    "naive_estimate",
    "nth_mark",
    "relative_efficiency",
    "run",
    "sample_sequence",
    "steady_state",
]


def _text(descriptor: str | Mapping[str, Any]) -> str:
    return descriptor if isinstance(descriptor, str) else json.dumps(descriptor)


def mtpp_model(descriptor: str | Mapping[str, Any]) -> MtppModel:
    """Point-process model from a model descriptor (dict or JSON text)."""
    return MtppModel.from_json(_text(descriptor))


def jump_process(descriptor: str | Mapping[str, Any]) -> JumpProcess:
    """Jump process from a process descriptor (dict or JSON text)."""
    return JumpProcess.from_json(_text(descriptor))


def hitting_time(process: JumpProcess, descriptor: str | Mapping[str, Any]) -> _HittingTime:
    """Generalized hitting time of `process` from a descriptor such as
    ``{"hit": {"at_least": 2}}``."""
    return _HittingTime(process, _text(descriptor))


class HarnessError(RuntimeError):
    """A harness subcommand exited with a nonzero status."""

    def __init__(self, exit_code: int, record: dict):
        super().__init__(record.get("message", f"exit code {exit_code}"))
        self.exit_code = exit_code
        self.record = record


_NUMBER_COLUMNS = ("t_or_K", "mean", "var", "se", "n", "wall_ms")


def _number(text: str) -> float | None:
    return None if text == "na" else float(text)


def run(
    command: str,
    config: str | os.PathLike,
    *,
    output: str | os.PathLike | None = None,
    seed: int | None = None,
    workers: int | None = None,
) -> list[dict]:
    """Runs a harness subcommand and returns its CSV rows as dicts.

    Numeric columns are floats, with ``None`` for "na". When `output` is set
    the CSV is also written there.
    """
    code, text, status = _core.run_command(
        command, os.fspath(config), None if output is None else os.fspath(output), seed, workers
    )
    if code != 0:
        raise HarnessError(code, json.loads(status.strip().splitlines()[-1]))
    if output is not None and command != "gen-model":
        with open(output, newline="") as f:
            text = f.read()
    rows = list(csv.DictReader(io.StringIO(text)))
    for row in rows:
        for key in _NUMBER_COLUMNS:
            row[key] = _number(row[key])
    return rows
