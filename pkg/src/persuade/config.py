"""Instance configuration: parsing, validation, and model construction.

Configs are JSON objects with named fields.  The exact field names are
part of the command-line interface:

    states      optional list of state names (defaults to w0, w1, ...)
    r           per-state payoff vector
    chain       {"kind": "renewal", "m": [...], "lambda": x}
                or {"kind": "matrix", "transition": [[...]]}
    delta       discount factor in [0, 1)
    p1          initial belief
    grid        optional {"h": 1/n}
    tol         optional evaluation tolerance (default 1e-6)
    seed        integer seed
    experiment  experiment name (see persuade.experiments)
    params      optional experiment-specific parameters
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .exceptions import ConfigError, PersuadeError
from .model import Belief, MarkovModel, PayoffStructure, renewal_chain

EXPERIMENTS = (
    "theorem1", "theorem2", "theorem3", "theorem4",
    "counterexample", "breakpoints", "explore-delta-lambda",
)


@dataclass
class InstanceConfig:
    states: list
    r: list
    chain_kind: str
    delta: float
    p1: list
    seed: int
    experiment: str
    chain_m: Optional[list] = None
    chain_lambda: Optional[float] = None
    chain_matrix: Optional[list] = None
    grid_n: Optional[int] = None
    tol: float = 1e-6
    params: dict = field(default_factory=dict)

    def payoffs(self) -> PayoffStructure:
        return PayoffStructure(self.r)

    def chain(self) -> MarkovModel:
        if self.chain_kind == "renewal":
            return renewal_chain(Belief(self.chain_m), self.chain_lambda)
        return MarkovModel(self.chain_matrix)

    def initial(self) -> Belief:
        return Belief(self.p1)

    def to_dict(self) -> dict:
        chain = ({"kind": "renewal", "m": list(self.chain_m), "lambda": self.chain_lambda}
                 if self.chain_kind == "renewal"
                 else {"kind": "matrix", "transition": [list(row) for row in self.chain_matrix]})
        out = {
            "states": list(self.states),
            "r": list(self.r),
            "chain": chain,
            "delta": self.delta,
            "p1": list(self.p1),
            "tol": self.tol,
            "seed": self.seed,
            "experiment": self.experiment,
        }
        if self.grid_n is not None:
            out["grid"] = {"h": 1.0 / self.grid_n}
        if self.params:
            out["params"] = self.params
        return out


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _float_list(raw, name: str) -> list:
    _require(isinstance(raw, (list, tuple)) and len(raw) > 0,
             f"{name}: expected a nonempty list of numbers")
    try:
        return [float(x) for x in raw]
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: entries must be numbers") from None


def parse_config(source) -> InstanceConfig:
    """Build a validated InstanceConfig from a dict, JSON text, or file path."""
    if isinstance(source, dict):
        data = source
    else:
        text = source
        if "\n" not in str(source) and not str(source).lstrip().startswith("{"):
            try:
                with open(source, "r", encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config file {source}: {exc}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: line {exc.lineno}: {exc.msg}") from None
    _require(isinstance(data, dict), "config must be a JSON object")

    r = _float_list(data.get("r"), "r")
    dim = len(r)

    states = data.get("states", [f"w{i}" for i in range(dim)])
    _require(isinstance(states, list) and len(states) == dim,
             f"states: expected {dim} names to match r")

    chain = data.get("chain")
    _require(isinstance(chain, dict), "chain: expected an object with a 'kind' field")
    kind = chain.get("kind")
    _require(kind in ("renewal", "matrix"), "chain.kind: must be 'renewal' or 'matrix'")
    chain_m = chain_lambda = chain_matrix = None
    if kind == "renewal":
        chain_m = _float_list(chain.get("m"), "chain.m")
        _require(len(chain_m) == dim, f"chain.m: expected {dim} entries")
        try:
            chain_lambda = float(chain.get("lambda"))
        except (TypeError, ValueError):
            raise ConfigError("chain.lambda: expected a number") from None
        _require(0.0 <= chain_lambda < 1.0, "chain.lambda: must lie in [0, 1)")
    else:
        raw = chain.get("transition")
        _require(isinstance(raw, list) and len(raw) == dim,
                 f"chain.transition: expected a {dim}x{dim} matrix")
        chain_matrix = [_float_list(row, f"chain.transition[{i}]") for i, row in enumerate(raw)]
        for i, row in enumerate(chain_matrix):
            _require(len(row) == dim, f"chain.transition[{i}]: expected {dim} entries")

    try:
        delta = float(data.get("delta"))
    except (TypeError, ValueError):
        raise ConfigError("delta: expected a number") from None
    _require(0.0 <= delta < 1.0, "delta: must lie in [0, 1)")

    p1 = _float_list(data.get("p1"), "p1")
    _require(len(p1) == dim, f"p1: expected {dim} entries")

    grid_n = None
    if "grid" in data:
        grid = data["grid"]
        _require(isinstance(grid, dict) and "h" in grid, "grid: expected an object with field 'h'")
        try:
            h = float(grid["h"])
        except (TypeError, ValueError):
            raise ConfigError("grid.h: expected a number") from None
        _require(0.0 < h <= 1.0, "grid.h: must lie in (0, 1]")
        grid_n = int(round(1.0 / h))
        _require(abs(grid_n * h - 1.0) < 1e-6, "grid.h: must be 1/n for an integer n")

    tol = data.get("tol", 1e-6)
    try:
        tol = float(tol)
    except (TypeError, ValueError):
        raise ConfigError("tol: expected a number") from None
    _require(0.0 < tol < 1.0, "tol: must lie in (0, 1)")

    seed = data.get("seed", 0)
    _require(isinstance(seed, int), "seed: expected an integer")

    experiment = data.get("experiment")
    _require(experiment in EXPERIMENTS,
             f"experiment: must be one of {', '.join(EXPERIMENTS)}")

    params = data.get("params", {})
    _require(isinstance(params, dict), "params: expected an object")

    cfg = InstanceConfig(states=states, r=r, chain_kind=kind, delta=delta, p1=p1,
                         seed=seed, experiment=experiment, chain_m=chain_m,
                         chain_lambda=chain_lambda, chain_matrix=chain_matrix,
                         grid_n=grid_n, tol=tol, params=dict(params))
    # surface model-level validation problems as config errors with context
    try:
        cfg.payoffs()
        cfg.chain()
        cfg.initial()
    except PersuadeError as exc:
        raise ConfigError(f"instance validation failed: {exc}") from None
    return cfg
