"""Flat ``key = value`` configuration files and their mapping onto FuzzConfig.

Blank lines and ``#`` comments are ignored. Keys are the long CLI flag names
with dashes or underscores (``max-iters`` and ``max_iters`` are the same key).
Command-line flags override file values.
"""

from __future__ import annotations

import shlex
from pathlib import Path

from .corpus import FitnessParams
from .errors import ConfigError
from .executor import FuzzConfig
from .grammar import load_templates
from .mutation import HavocParams, MutationParams


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text):
    return None if str(text).strip().lower() in ("none", "off", "") else int(text)


def _opt_float(text):
    return None if str(text).strip().lower() in ("none", "off", "") else float(text)


# key -> parser; the same names back the run subcommand's flags
KEYS = {
    "dut": str,
    "dut_cmd": str,
    "templates": str,
    "backend": str,
    "seeds": str,
    "out": str,
    "mode": str,
    "threads": int,
    "batch_size": int,
    "max_iters": _opt_int,
    "stagnation": _opt_int,
    "master_seed": int,
    "favor": float,
    "epsilon_fitness": float,
    "p_splice": float,
    "max_stack_exp": int,
    "max_chromosome_bytes": int,
    "max_corpus_size": int,
    "generator": str,
    "coverage_path": str,
    "stop_on_finding": _bool,
    "stop_at_coverage": _opt_float,
    "time_budget": _opt_float,
    "delay_us": float,
    "delay_mode": str,
    "coverpoints": int,
    "verbosity": int,
}


def normalize_key(key: str) -> str:
    return key.strip().replace("-", "_")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = normalize_key(key)
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return values


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_config_text(text, str(path))


def dump_config(values: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in values.items() if v is not None)


def build_fuzz_config(values: dict) -> FuzzConfig:
    """Turn a merged key/value dict into a validated FuzzConfig."""
    v = dict(values)
    dut_options = {}
    for key in ("delay_us", "delay_mode", "coverpoints"):
        if v.get(key) is not None:
            dut_options[key] = v[key]
    dut = v.get("dut") or "toy-cpu"
    if dut_options and dut != "synth-delay":
        raise ConfigError("delay_us, delay_mode and coverpoints apply to synth-delay only")
    grammar = load_templates(v["templates"]) if v.get("templates") else None
    try:
        mutation = MutationParams(
            havoc=HavocParams(max_stack_exp=v.get("max_stack_exp", 6)),
            p_splice=v.get("p_splice", 0.25),
            max_chromosome_bytes=v.get("max_chromosome_bytes", 512),
        )
        fitness = FitnessParams(favor=v.get("favor", 4.0), epsilon_fitness=v.get("epsilon_fitness", 1e-6))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    mode = v.get("mode", "serial")
    threads = v.get("threads", 1)
    return FuzzConfig(
        dut=dut,
        dut_cmd=shlex.split(v["dut_cmd"]) if v.get("dut_cmd") else None,
        dut_options=dut_options,
        backend=v.get("backend"),
        grammar=grammar,
        mutation=mutation,
        fitness=fitness,
        master_seed=v.get("master_seed", 0),
        mode=mode,
        threads=threads,
        batch_size=v.get("batch_size"),
        max_iterations=v.get("max_iters", 100_000),
        stagnation_window=v.get("stagnation", 10_000),
        seeds=v.get("seeds"),
        out_dir=v.get("out"),
        max_corpus_size=v.get("max_corpus_size", 100_000),
        generator=v.get("generator", "mutation"),
        coverage_path=v.get("coverage_path", "sketched"),
        stop_on_finding=v.get("stop_on_finding", False),
        stop_at_coverage=v.get("stop_at_coverage"),
        time_budget=v.get("time_budget"),
    )
