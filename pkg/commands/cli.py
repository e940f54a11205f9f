"""Command-line surface. Every params-model field doubles as a --flag."""
import argparse
import json
import logging
import sys
import typing
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

import config
from core.errors import ConfigError, LabError
from core.orchestrator import EXIT_USAGE, ExperimentOrchestrator
from models.experiment import ExperimentConfig, Params

logger = logging.getLogger("CLI")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _scalar(kind):
    if kind is bool:
        return lambda v: v.lower() in ("1", "true", "yes", "on")
    return kind


def _literal_type(choices):
    def parse(v: str):
        v = v.replace("-", "_")
        for c in choices:
            if str(c) == v:
                return c
        raise argparse.ArgumentTypeError(f"choose from {', '.join(str(c) for c in choices)}")
    return parse


def _add_field(parser: argparse.ArgumentParser, name: str, annotation, description: Optional[str]):
    # flags default to None so only what the user typed overrides the config file
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is typing.Union:
        inner = [a for a in args if a is not type(None)]
        return _add_field(parser, name, inner[0], description)
    if origin is typing.Literal:
        parser.add_argument(_flag(name), type=_literal_type(args), default=None, help=description,
                            metavar="{" + ",".join(str(a) for a in args) + "}")
    elif origin in (list, List):
        parser.add_argument(_flag(name), type=_scalar(args[0]), nargs="+", default=None, help=description)
    else:
        parser.add_argument(_flag(name), type=_scalar(annotation), default=None, help=description)


def build_parser(orchestrator: ExperimentOrchestrator) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdg", description="High-dimensional geometry laboratory")
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    for name, model in orchestrator.subcommands.items():
        p = sub.add_parser(name, help=(model.__doc__ or "").strip() or None)
        p.add_argument("--config", type=Path, default=None, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--output", type=str, default=None, help="output directory")
        p.add_argument("--log-level", default=None)
        if name == "report":
            p.add_argument("dirs", nargs="*", help="run directories")
        for field, info in model.model_fields.items():
            _add_field(p, field, info.annotation, info.description)
    return parser


def _load_file(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return doc


def resolve_config(ns: argparse.Namespace, model: typing.Type[Params]) -> ExperimentConfig:
    """File values first, then flags on top."""
    doc = _load_file(ns.config)
    if doc.get("subcommand", ns.subcommand) != ns.subcommand:
        raise ConfigError(f"config is for {doc['subcommand']!r}, not {ns.subcommand!r}")
    params = dict(doc.get("params") or {})
    for field in model.model_fields:
        value = getattr(ns, field, None)
        if value is not None:
            params[field] = value
    if ns.subcommand == "report" and ns.dirs:
        params["runs"] = list(params.get("runs") or []) + ns.dirs
    body = {k: v for k, v in doc.items() if k not in ("params",)}
    body.update(subcommand=ns.subcommand, params=params)
    if ns.seed is not None:
        body["seed"] = ns.seed
    if ns.output is not None:
        body["output"] = ns.output
    body.setdefault("output", str(Path(config.OUTPUT_DIR) / ns.subcommand))
    try:
        return ExperimentConfig(**body)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {e}")


def main(argv: List[str] = None) -> int:
    orchestrator = ExperimentOrchestrator()
    parser = build_parser(orchestrator)
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if ns.log_level:
        logging.getLogger().setLevel(ns.log_level.upper())
    try:
        cfg = resolve_config(ns, orchestrator.subcommands[ns.subcommand])
        record = orchestrator.run(cfg)
    except LabError as e:
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return record.exit_code
