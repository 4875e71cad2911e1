"""Experiment configuration: JSON schema, loading and object construction.

An experiment is one JSON file with ``env``, ``agent``, ``layers`` and
``sim`` sections. ``layers`` lists wrappers outermost first; the base
agent sits innermost.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import jsonschema

from .agents import AGENTS, Agent, GreedyAgent
from .envs import ENVIRONMENTS, Environment, config_digest, make_env
from .layers import LAYERS, HierarchicalAgent

AGENT_KINDS = sorted(AGENTS) + [HierarchicalAgent.kind]

SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["env", "agent"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "strategy": {"type": "string"},
        "environment_label": {"type": "string"},
        "env": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": sorted(ENVIRONMENTS)}},
        },
        "agent": {"$ref": "#/$defs/agent"},
        "layers": {"$ref": "#/$defs/layers"},
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed": {"type": "integer", "minimum": 0},
                "num_train_iterations": {"type": "integer", "minimum": 0},
                "turns_per_iteration": {"type": "integer", "minimum": 1},
                "num_eval_episodes": {"type": "integer", "minimum": 0},
                "eval_override": {"type": "object"},
                "parallel_eval_workers": {"type": "integer", "minimum": 1},
                "log_episodes": {"type": "boolean"},
            },
        },
    },
    "$defs": {
        "agent": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": AGENT_KINDS},
                "children": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["agent"],
                        "additionalProperties": False,
                        "properties": {"agent": {"$ref": "#/$defs/agent"}, "layers": {"$ref": "#/$defs/layers"}},
                    },
                },
            },
        },
        "layers": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {"kind": {"enum": sorted(LAYERS)}},
            },
        },
    },
}

SIM_DEFAULTS = {
    "seed": 0,
    "num_train_iterations": 0,
    "turns_per_iteration": 1000,
    "num_eval_episodes": 0,
    "eval_override": {},
    "parallel_eval_workers": 1,
    "log_episodes": True,
}

STRATEGY_NAMES = {
    "random": "Random",
    "greedy": "Greedy",
    "tabular_q": "TabularQ",
    "full_slate_q": "FullSlateQ",
    "ucb1": "UCB1",
    "hierarchical": "Hierarchical",
}


class ConfigError(ValueError):
    """An experiment config failed validation; ``path`` is a JSON path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def validate(config: Mapping[str, Any]) -> None:
    """Raise :class:`ConfigError` naming the offending JSON path."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(err.json_path, err.message)
    try:
        env = make_env(config["env"], seed=0)
    except (TypeError, ValueError) as exc:
        raise ConfigError("$.env", str(exc)) from None
    try:
        build_agent(config, env)
    except (TypeError, ValueError) as exc:
        raise ConfigError("$.agent", str(exc)) from None


def load_config(path, seed: Optional[int] = None) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("$", f"config file not found: {path}")
    try:
        config = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"{path} is not valid JSON: {exc}") from None
    if seed is not None:
        config.setdefault("sim", {})["seed"] = seed
    validate(config)
    return config


def sim_settings(config: Mapping[str, Any]) -> dict:
    return {**SIM_DEFAULTS, **config.get("sim", {})}


def digest(config: Mapping[str, Any]) -> str:
    return config_digest(config)


def build_env(config: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> Environment:
    env = make_env(config["env"], seed=sim_settings(config)["seed"])
    return env.with_overrides(overrides)


def build_agent(config: Mapping[str, Any], env: Environment) -> Agent:
    seed = sim_settings(config)["seed"]
    return _build_stack(config["agent"], config.get("layers", []), env, seed, index=0)


def _build_stack(agent_cfg, layer_cfgs, env, seed, index) -> Agent:
    agent = _build_base(agent_cfg, env, seed, index)
    for entry in reversed(list(layer_cfgs)):
        params = dict(entry)
        kind = params.pop("kind")
        if kind == "cluster_click_stats":
            params.setdefault("num_topics", env.num_topics)
        agent = LAYERS[kind](agent, **params)
    return agent


def _build_base(entry, env, seed, index) -> Agent:
    params = copy.deepcopy(dict(entry))
    kind = params.pop("kind")
    if kind == HierarchicalAgent.kind:
        children = [
            _build_stack(child["agent"], child.get("layers", []), env, seed, index=i + 1)
            for i, child in enumerate(params.pop("children", []))
        ]
        agent = HierarchicalAgent(children, seed=seed, **params)
    else:
        params.setdefault("slate_size", env.slate_size)
        if kind == GreedyAgent.kind:
            agent = GreedyAgent(env, seed=seed, **params)
        else:
            agent = AGENTS[kind](seed=seed, **params)
    if index:
        agent.reseed(seed, "agent", index)
    return agent


def strategy_name(config: Mapping[str, Any]) -> str:
    return config.get("strategy") or STRATEGY_NAMES.get(config["agent"]["kind"], config["agent"]["kind"])


def environment_label(config: Mapping[str, Any]) -> str:
    return config.get("environment_label") or config["env"]["kind"]


def packaged_config_dir() -> Path:
    return Path(__file__).parent / "configs"


def packaged_configs() -> List[Path]:
    return sorted(packaged_config_dir().glob("*.json"))
