"""Command-line experiment runner.

    slatesim run --config exp.json [--seed N] [--out DIR] [--eval-override o.json] [--workers N]
    slatesim eval --config exp.json [--out DIR] [--checkpoint PATH] ...
    slatesim replay LOG.jsonl [--config exp.json]
    slatesim summarize DIR

Exit codes: 0 on success, 1 for invalid input (config, log schema, missing
baseline), 2 for errors raised while simulating.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import jsonschema

from . import __version__
from .config import (
    ConfigError,
    build_agent,
    build_env,
    digest,
    environment_label,
    load_config,
    sim_settings,
    strategy_name,
)
from .core import SimulationError
from .sim import (
    CorruptCheckpoint,
    Simulation,
    VersionMismatch,
    append_episodes,
    evaluate,
    load_checkpoint,
    write_metrics,
)
from .studies import MissingBaseline, ctr_table, format_table, pooled_ctr, write_table_csv

OUT_DIR_ENV = "SLATESIM_OUT_DIR"

RUN_FILES = ("metrics.csv", "train_episodes.jsonl", "eval_metrics.csv", "eval_episodes.jsonl",
             "checkpoint.json", "summary.json")


class SchemaViolation(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


# ---------------------------------------------------------------------------
# episode log schema

_NUM = {"type": "number"}
_LINE_SCHEMAS = {
    "header": {
        "type": "object",
        "required": ["episode", "seed", "config_digest"],
        "additionalProperties": False,
        "properties": {
            "episode": {"type": "integer", "minimum": 0},
            "seed": {"type": ["integer", "null"]},
            "config_digest": {"type": "string"},
        },
    },
    "turn": {
        "type": "object",
        "required": ["t", "obs", "slate", "response", "reward"],
        "additionalProperties": False,
        "properties": {
            "t": {"type": "integer", "minimum": 0},
            "obs": {
                "type": "object",
                "required": ["user", "docs", "last_response"],
                "properties": {"user": {"type": "object"}, "docs": {"type": "array"}},
            },
            "slate": {"type": "array", "items": {"type": "integer"}, "uniqueItems": True},
            "response": {
                "type": "object",
                "required": ["chosen_index", "engagement", "revealed_quality"],
                "properties": {
                    "chosen_index": {"type": ["integer", "null"], "minimum": 0},
                    "engagement": _NUM,
                    "revealed_quality": {"type": ["number", "string", "null"]},
                },
            },
            "reward": _NUM,
        },
    },
    "final": {
        "type": "object",
        "required": ["terminal", "turns"],
        "additionalProperties": False,
        "properties": {"terminal": {"type": "boolean"}, "turns": {"type": "integer", "minimum": 1}},
    },
}
_VALIDATORS = {k: jsonschema.Draft202012Validator(v) for k, v in _LINE_SCHEMAS.items()}


@dataclass
class EpisodeSummary:
    episode: int
    config_digest: str
    turns: int
    cumulative_reward: float


@dataclass
class ReplayReport:
    path: str
    episodes: List[EpisodeSummary] = field(default_factory=list)
    digest_mismatches: List[int] = field(default_factory=list)


def _check(kind: str, record, line: int) -> None:
    err = next(iter(sorted(_VALIDATORS[kind].iter_errors(record), key=lambda e: list(e.absolute_path))), None)
    if err is not None:
        raise SchemaViolation(line, f"{kind} record, {err.json_path}: {err.message}")


def replay_log(path, expected_digest: Optional[str] = None) -> ReplayReport:
    """Re-validate a JSON Lines episode log and recompute episode returns.

    Raises :class:`SchemaViolation` at the first malformed line. Episodes
    whose header digest differs from ``expected_digest`` (or, without one,
    from the first episode's) are listed in ``digest_mismatches``.
    """
    report = ReplayReport(str(path))
    current: Optional[EpisodeSummary] = None
    line_no = 0
    with Path(path).open() as fh:
        for line_no, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                record = json.loads(text)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(line_no, f"not JSON: {exc.msg}") from None
            if not isinstance(record, dict):
                raise SchemaViolation(line_no, "expected a JSON object")
            if current is None:
                _check("header", record, line_no)
                current = EpisodeSummary(record["episode"], record["config_digest"], 0, 0.0)
                reference = expected_digest or (report.episodes[0].config_digest if report.episodes else current.config_digest)
                if current.config_digest != reference:
                    report.digest_mismatches.append(current.episode)
            elif "terminal" in record:
                _check("final", record, line_no)
                if record["turns"] != current.turns:
                    raise SchemaViolation(line_no, f"footer says {record['turns']} turns, episode has {current.turns}")
                report.episodes.append(current)
                current = None
            else:
                _check("turn", record, line_no)
                if record["t"] != current.turns:
                    raise SchemaViolation(line_no, f"turn index {record['t']}, expected {current.turns}")
                current.turns += 1
                current.cumulative_reward += float(record["reward"])
    if current is not None:
        raise SchemaViolation(line_no + 1, f"episode {current.episode} has no footer line")
    return report


# ---------------------------------------------------------------------------
# commands


def _out_dir(args, config) -> Path:
    if args.out:
        return Path(args.out)
    base = os.environ.get(OUT_DIR_ENV)
    name = config.get("name") or Path(args.config).stem
    return Path(base) / name if base else Path("runs") / name


def _eval_overrides(args, config) -> dict:
    overrides = dict(sim_settings(config)["eval_override"])
    if args.eval_override:
        path = Path(args.eval_override)
        if not path.is_file():
            raise ConfigError("$", f"eval override file not found: {path}")
        try:
            extra = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"{path} is not valid JSON: {exc}") from None
        if not isinstance(extra, dict):
            raise ConfigError("$", f"{path} must hold a JSON object")
        overrides.update(extra)
    return overrides


def _run_eval(config, agent, out: Path, args, iteration: int):
    settings = sim_settings(config)
    n = settings["num_eval_episodes"]
    if n <= 0:
        return None
    overrides = _eval_overrides(args, config)
    try:
        env = build_env(config, overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError("$.sim.eval_override", str(exc)) from None
    workers = args.workers or settings["parallel_eval_workers"]
    row, logs = evaluate(env, agent, n, seed=settings["seed"], workers=workers,
                         config_digest=digest(config), record=settings["log_episodes"], iteration=iteration)
    write_metrics(out / "eval_metrics.csv", [row], append=False)
    if settings["log_episodes"]:
        path = out / "eval_episodes.jsonl"
        path.unlink(missing_ok=True)
        append_episodes(path, logs)
    return row


def _write_summary(config, out: Path, train_rows, eval_row) -> dict:
    summary = {
        "name": config.get("name", ""),
        "strategy": strategy_name(config),
        "environment": environment_label(config),
        "seed": sim_settings(config)["seed"],
        "config_digest": digest(config),
        "train": [asdict(r) for r in train_rows],
        "eval": None if eval_row is None else asdict(eval_row),
    }
    # evaluation CTR when there is an evaluation phase, else the online CTR
    if eval_row is not None:
        summary["ctr"], summary["ctr_source"] = eval_row.ctr, "eval"
    else:
        summary["ctr"], summary["ctr_source"] = pooled_ctr(train_rows), "train"
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def cmd_run(args) -> int:
    config = load_config(args.config, seed=args.seed)
    settings = sim_settings(config)
    out = _out_dir(args, config)
    out.mkdir(parents=True, exist_ok=True)
    for name in RUN_FILES:
        (out / name).unlink(missing_ok=True)
    env = build_env(config)
    agent = build_agent(config, env)
    sim = Simulation(env, agent, seed=settings["seed"], turns_per_iteration=settings["turns_per_iteration"],
                     out_dir=out, config_digest=digest(config), log_episodes=settings["log_episodes"])
    rows = sim.train(settings["num_train_iterations"])
    if not rows:
        write_metrics(out / "metrics.csv", [], append=False)
    sim.checkpoint(out / "checkpoint.json")
    eval_row = _run_eval(config, agent, out, args, sim.iteration)
    summary = _write_summary(config, out, rows, eval_row)
    print(f"{summary['strategy']} on {summary['environment']}: CTR {100 * summary['ctr']:.2f}% "
          f"({summary['ctr_source']}), output in {out}")
    return 0


def cmd_eval(args) -> int:
    config = load_config(args.config, seed=args.seed)
    out = _out_dir(args, config)
    out.mkdir(parents=True, exist_ok=True)
    env = build_env(config)
    agent = build_agent(config, env)
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "checkpoint.json"
    iteration = 0
    if ckpt.exists():
        iteration = int(load_checkpoint(agent, ckpt).get("iteration", 0))
    elif args.checkpoint:
        raise ConfigError("$", f"checkpoint not found: {ckpt}")
    row = _run_eval(config, agent, out, args, iteration)
    if row is None:
        raise ConfigError("$.sim.num_eval_episodes", "nothing to evaluate: num_eval_episodes is 0")
    _write_summary(config, out, [], row)
    print(",".join(f"{k}={v}" for k, v in asdict(row).items()))
    return 0


def cmd_replay(args) -> int:
    expected = None
    if args.config:
        expected = digest(load_config(args.config, seed=args.seed))
    if not Path(args.log).is_file():
        raise ConfigError("$", f"log file not found: {args.log}")
    report = replay_log(args.log, expected)
    print(f"{report.path}: {len(report.episodes)} episodes, 0 schema violations")
    for ep in report.episodes:
        flag = "  DIGEST MISMATCH" if ep.episode in report.digest_mismatches else ""
        print(f"episode {ep.episode}: turns={ep.turns} cumulative_reward={ep.cumulative_reward:.6g}{flag}")
    if report.digest_mismatches:
        print(f"{len(report.digest_mismatches)} episode(s) with a mismatched config digest")
        return 1
    return 0


def cmd_summarize(args) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        raise ConfigError("$", f"directory not found: {root}")
    results = [json.loads(p.read_text()) for p in sorted(root.rglob("summary.json"))]
    rows = ctr_table(results)
    print(format_table(rows))
    csv_path = root / "summary_table.csv"
    write_table_csv(csv_path, rows)
    print(f"\nwritten {csv_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slatesim", description="Run slate recommendation simulations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-iteration metrics")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment JSON file")
        p.add_argument("--seed", type=int, help="override sim.seed")
        p.add_argument("--out", help=f"output directory (default: ${OUT_DIR_ENV}/<name> or runs/<name>)")
        p.add_argument("--eval-override", help="JSON file of env entries replaced for evaluation")
        p.add_argument("--workers", type=int, help="parallel evaluation workers")

    p = sub.add_parser("run", help="train, checkpoint and evaluate")
    experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="evaluate a (checkpointed) agent")
    experiment_flags(p)
    p.add_argument("--checkpoint", help="checkpoint to load (default: <out>/checkpoint.json if present)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("replay", help="validate an episode log and recompute returns")
    p.add_argument("log")
    p.add_argument("--config", help="config whose digest the log should carry")
    p.add_argument("--seed", type=int, help="seed override used for that config")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("summarize", help="CTR table over the summary.json files under DIR")
    p.add_argument("dir")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 1
    except (SchemaViolation, MissingBaseline, CorruptCheckpoint, VersionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SimulationError, ValueError, TypeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
