"""Command-line front end.

Three subcommands:

* ``testbench`` runs the simulated benchmark grid and writes a report.
* ``generate`` runs a single generation episode and prints the result.
* ``ideal`` prints the exact error-conditioned sequence distribution.

Options may come from an INI-style config file (``--config``, sections
``[run]`` and ``[transforms]``) with command-line flags taking precedence.
Exit codes: 0 success; 2 configuration error; 3 impossible evaluation
(infinite divergence or fully excluded domain); 4 generation did not
complete within its budget.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import math
import sys
from dataclasses import dataclass, fields

import numpy as np

from .core import (
    GenerationLimits,
    InvalidDistError,
    Model,
    TableModel,
    TransformedModel,
    UniformModel,
    Vocab,
    check_distribution,
)
from .evaluation import (
    DEFAULT_ERROR_SETS,
    AllExcludedError,
    ideal_distribution,
    run_testbench,
)
from .oracles import BannedSymbolSet, ErrorOracle, PatternParseError, parse_pattern_spec
from .samplers import METHODS, generate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IMPOSSIBLE = 3
EXIT_INCOMPLETE = 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    vocab: str = "ABC"
    model: str = "uniform"  # "uniform" or "table:<path>"
    error_set: str = ""
    specs: tuple[str, ...] = DEFAULT_ERROR_SETS
    method: str = "aprad"
    methods: tuple[str, ...] = ("asap", "constrained", "aprad")
    length: int = 3
    samples: int = 10_000
    seeds: tuple[int, ...] = (1, 2, 3)
    invocation_budget: int = 2000
    temperature: float | None = None
    top_k: int | None = None
    top_p: float | None = None
    output: str = "table"  # table | csv | json
    output_path: str | None = None

    def validate(self) -> None:
        if not self.vocab:
            raise ConfigError("vocab must not be empty")
        if len(set(self.vocab)) != len(self.vocab):
            raise ConfigError("vocab labels must be unique")
        if not (self.model == "uniform" or self.model.startswith("table:")):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        if self.length < 1:
            raise ConfigError("length must be at least 1")
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")
        if not self.seeds:
            raise ConfigError("at least one seed required")
        if self.invocation_budget < 1:
            raise ConfigError("invocation budget must be at least 1")
        if self.temperature is not None and self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if self.top_k is not None and self.top_k < 1:
            raise ConfigError("top_k must be at least 1")
        if self.top_p is not None and not 0 < self.top_p <= 1:
            raise ConfigError("top_p must be in (0, 1]")
        if self.output not in ("table", "csv", "json"):
            raise ConfigError(f"unknown output format {self.output!r}")

    def to_ini(self) -> str:
        """Canonical INI rendering; parsing it back yields an equal config."""
        cp = configparser.ConfigParser()
        cp["run"] = {
            "vocab": self.vocab,
            "model": self.model,
            "error_set": self.error_set,
            "specs": "; ".join(self.specs),
            "method": self.method,
            "methods": ",".join(self.methods),
            "length": str(self.length),
            "samples": str(self.samples),
            "seeds": ",".join(str(s) for s in self.seeds),
            "invocation_budget": str(self.invocation_budget),
            "output": self.output,
        }
        if self.output_path is not None:
            cp["run"]["output_path"] = self.output_path
        transforms = {}
        if self.temperature is not None:
            transforms["temperature"] = str(self.temperature)
        if self.top_k is not None:
            transforms["top_k"] = str(self.top_k)
        if self.top_p is not None:
            transforms["top_p"] = str(self.top_p)
        if transforms:
            cp["transforms"] = transforms
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:12]


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"invalid seed list {text!r}") from None


def _parse_specs(text: str) -> tuple[str, ...]:
    # Specs contain commas ("AAA, AAC" is one spec), so lists are
    # semicolon-separated.
    return tuple(chunk.strip() for chunk in text.split(";"))


def load_config_file(path: str) -> RunConfig:
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as e:
        raise ConfigError(f"cannot read config {path!r}: {e}") from e
    cfg = RunConfig()
    run = cp["run"] if cp.has_section("run") else {}
    tr = cp["transforms"] if cp.has_section("transforms") else {}
    known = {f.name for f in fields(RunConfig)}
    for key in list(run) + list(tr):
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        if "vocab" in run:
            cfg.vocab = run["vocab"]
        if "model" in run:
            cfg.model = run["model"]
        if "error_set" in run:
            cfg.error_set = run["error_set"]
        if "specs" in run:
            cfg.specs = _parse_specs(run["specs"])
        if "method" in run:
            cfg.method = run["method"]
        if "methods" in run:
            cfg.methods = tuple(m.strip() for m in run["methods"].split(","))
        if "length" in run:
            cfg.length = int(run["length"])
        if "samples" in run:
            cfg.samples = int(run["samples"])
        if "seeds" in run:
            cfg.seeds = _parse_seeds(run["seeds"])
        if "invocation_budget" in run:
            cfg.invocation_budget = int(run["invocation_budget"])
        if "output" in run:
            cfg.output = run["output"]
        if "output_path" in run:
            cfg.output_path = run["output_path"]
        if "temperature" in tr:
            cfg.temperature = float(tr["temperature"])
        if "top_k" in tr:
            cfg.top_k = int(tr["top_k"])
        if "top_p" in tr:
            cfg.top_p = float(tr["top_p"])
    except ValueError as e:
        raise ConfigError(f"bad config value: {e}") from e
    return cfg


def load_table_model_file(path: str) -> TableModel:
    """Read a table model: header of vocab labels, then prefix rows.

    Each row is ``prefix,p1,...,pV`` where the prefix is a run of
    single-character labels, ``-`` denotes the empty prefix, and a
    ``default`` row (required) supplies the fallback conditional.
    """
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    except OSError as e:
        raise ConfigError(f"cannot read table model {path!r}: {e}") from e
    if not lines:
        raise ConfigError(f"table model file {path!r} is empty")
    vocab = Vocab.from_string("".join(lbl.strip() for lbl in lines[0].split(",")))
    default = None
    table = {}
    for ln in lines[1:]:
        parts = [p.strip() for p in ln.split(",")]
        if len(parts) != vocab.size + 1:
            raise ConfigError(f"row {ln!r} needs {vocab.size} probabilities")
        try:
            dist = check_distribution([float(x) for x in parts[1:]], vocab.size)
        except (ValueError, InvalidDistError) as e:
            raise ConfigError(f"row {ln!r}: {e}") from e
        if parts[0] == "default":
            default = dist
        else:
            text = "" if parts[0] == "-" else parts[0]
            try:
                table[vocab.parse(text)] = dist
            except KeyError as e:
                raise ConfigError(f"row {ln!r}: {e}") from e
    if default is None:
        raise ConfigError(f"table model {path!r} has no 'default' row")
    return TableModel(vocab, table, default)


def build_model(cfg: RunConfig) -> Model:
    if cfg.model == "uniform":
        model: Model = UniformModel(Vocab.from_string(cfg.vocab))
    else:
        model = load_table_model_file(cfg.model[len("table:"):])
        cfg.vocab = "".join(model.vocab.tokens)
    if cfg.temperature is not None or cfg.top_k is not None or cfg.top_p is not None:
        model = TransformedModel(
            model, temperature=cfg.temperature, top_k=cfg.top_k, top_p=cfg.top_p
        )
    return model


def build_oracle(cfg: RunConfig, vocab: Vocab) -> ErrorOracle:
    spec = cfg.error_set
    if spec.startswith("banned:"):
        symbols = spec[len("banned:"):].replace(",", "").replace(" ", "")
        try:
            banned = frozenset(vocab.id_of(ch) for ch in symbols)
            return BannedSymbolSet(vocab, banned)
        except (KeyError, ValueError) as e:
            raise ConfigError(str(e)) from e
    try:
        return parse_pattern_spec(spec, vocab)
    except PatternParseError as e:
        raise ConfigError(f"bad error set {spec!r}: {e}") from e


def _resolve_seed(cfg: RunConfig, args) -> None:
    if getattr(args, "seed", None) is not None:
        cfg.seeds = (args.seed,)
    elif getattr(args, "seeds", None) is not None:
        cfg.seeds = _parse_seeds(args.seeds)
    elif getattr(args, "entropy_seed", False):
        seed = int(np.random.SeedSequence().entropy) % (2**31)
        print(f"seed drawn from entropy: {seed} (pass --seed {seed} to replay)")
        cfg.seeds = (seed,)


def _apply_common_overrides(cfg: RunConfig, args) -> None:
    for name in ("vocab", "model", "method", "length", "samples", "output",
                 "output_path", "temperature", "top_k", "top_p"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "error_set", None) is not None:
        cfg.error_set = args.error_set
    if getattr(args, "budget", None) is not None:
        cfg.invocation_budget = args.budget
    if getattr(args, "specs", None) is not None:
        cfg.specs = _parse_specs(args.specs)
    if getattr(args, "methods", None) is not None:
        cfg.methods = tuple(m.strip() for m in args.methods.split(","))


def _provenance(cfg: RunConfig) -> str:
    seeds = ",".join(str(s) for s in cfg.seeds)
    return f"# config_hash={cfg.config_hash()} seeds={seeds}"


def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.output_path:
        with open(cfg.output_path, "w") as fh:
            fh.write(text)
        print(f"report written to {cfg.output_path}")
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def cmd_testbench(cfg: RunConfig) -> int:
    model = build_model(cfg)
    if cfg.error_set.startswith("banned:"):
        raise ConfigError("testbench uses pattern error sets, not banned symbols")
    try:
        report = run_testbench(
            specs=cfg.specs,
            methods=cfg.methods,
            samples_per_cell=cfg.samples,
            length=cfg.length,
            seeds=cfg.seeds,
            vocab=model.vocab,
            model=model,
            invocation_budget=cfg.invocation_budget,
        )
    except AllExcludedError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    except RuntimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    except PatternParseError as e:
        raise ConfigError(str(e)) from e
    if cfg.output == "csv":
        text = report.to_csv() + _provenance(cfg) + "\n"
    elif cfg.output == "json":
        text = report.to_json() + "\n" + _provenance(cfg) + "\n"
    else:
        text = report.format_table() + _provenance(cfg) + "\n"
    _emit(text, cfg)
    return EXIT_IMPOSSIBLE if any(r.failed for r in report.rows) else EXIT_OK


def cmd_generate(cfg: RunConfig) -> int:
    model = build_model(cfg)
    oracle = build_oracle(cfg, model.vocab)
    limits = GenerationLimits(
        max_tokens=cfg.length, invocation_budget=cfg.invocation_budget
    )
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seeds[0], 0]))
    out = generate(cfg.method, model, oracle, (), limits, rng)
    stats = out.stats
    print(f"sequence: {model.vocab.render(out.sequence)}")
    print(f"tokens: {stats.output_tokens}")
    print(f"invocations: {stats.invocations}")
    ratio = stats.generation_ratio
    print(f"generation_ratio: {ratio:.3f}" if not math.isnan(ratio) else "generation_ratio: n/a")
    print(f"errors_discovered: {stats.errors_discovered}")
    print(f"backtracks: {stats.backtracks}")
    print(f"completed: {out.completed}")
    print(_provenance(cfg))
    return EXIT_OK if out.completed else EXIT_INCOMPLETE


def cmd_ideal(cfg: RunConfig) -> int:
    model = build_model(cfg)
    oracle = build_oracle(cfg, model.vocab)
    try:
        dist = ideal_distribution(model, oracle, cfg.length)
    except AllExcludedError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    lines = ["sequence,probability"]
    lines += [f"{model.vocab.render(seq)},{p:.10g}" for seq, p in dist.items()]
    lines.append(_provenance(cfg))
    _emit("\n".join(lines) + "\n", cfg)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aprad",
        description="Error-free sampling from autoregressive models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="INI config file; flags override it")
        p.add_argument("--vocab", help="single-character token labels, e.g. ABC")
        p.add_argument("--model", help="'uniform' or 'table:<path>'")
        p.add_argument("--error-set", dest="error_set",
                       help="pattern spec (e.g. 'A** except AAC') or 'banned:<symbols>'")
        p.add_argument("--length", type=int, help="tokens to generate")
        p.add_argument("--budget", type=int, help="model invocation budget")
        p.add_argument("--temperature", type=float)
        p.add_argument("--top-k", dest="top_k", type=int)
        p.add_argument("--top-p", dest="top_p", type=float)
        p.add_argument("--output", choices=["table", "csv", "json"])
        p.add_argument("--output-path", dest="output_path")

    tb = sub.add_parser("testbench", help="run the simulated benchmark grid")
    add_common(tb)
    tb.add_argument("--specs", help="semicolon-separated error-set specs")
    tb.add_argument("--methods", help="comma-separated methods")
    tb.add_argument("--samples", type=int, help="episodes per cell")
    tb.add_argument("--seeds", help="comma-separated seeds")

    gen = sub.add_parser("generate", help="run one generation episode")
    add_common(gen)
    gen.add_argument("--method", choices=list(METHODS))
    gen.add_argument("--seed", type=int)
    gen.set_defaults(entropy_seed=True)

    ideal = sub.add_parser("ideal", help="print the exact ideal distribution")
    add_common(ideal)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse exits 2 on usage errors, 0 on --help
        return int(e.code or 0)
    try:
        cfg = load_config_file(args.config) if args.config else RunConfig()
        _apply_common_overrides(cfg, args)
        _resolve_seed(cfg, args)
        cfg.validate()
        if args.command == "testbench":
            return cmd_testbench(cfg)
        if args.command == "generate":
            return cmd_generate(cfg)
        return cmd_ideal(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
