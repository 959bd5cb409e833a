"""Exact ideal distributions, KL divergence, and the simulated benchmark.

The benchmark runs each sampling method on a small uniform model against a
grid of pattern error sets, measuring how far the empirical output
distribution is from the exact error-conditioned distribution (KL
divergence, natural log) and how many model evaluations each emitted token
cost (generation ratio). Cells are averaged over several seeds.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass

import numpy as np

from .core import GenerationLimits, Model, Sequence, UniformModel, Vocab
from .oracles import ErrorOracle, parse_pattern_spec
from .samplers import generate

SeqDist = dict[Sequence, float]

#: Error-set specifications of the standard simulated benchmark.
DEFAULT_ERROR_SETS = (
    "",
    "AAA",
    "AAA, AAC",
    "AAA, ACC",
    "AAA, CCC",
    "AAA, AAB, ABA, BAA",
    "A** except AAC",
    "*** except AAA, AAB, ABA, BAA",
    "*** except AAA, BAA",
)

DEFAULT_METHODS = ("asap", "constrained", "aprad")

CSV_HEADER = "error_set,method,kl_div,kl_sd,gen_ratio,ratio_sd,samples,seeds"


class AllExcludedError(ValueError):
    """The error set leaves no sequence of the requested length."""


class InfiniteDivergenceError(ValueError):
    """Observed distribution has support where the ideal assigns zero."""


def ideal_distribution(
    model: Model, oracle: ErrorOracle, length: int, max_states: int = 10_000_000
) -> SeqDist:
    """Exact model distribution over length-``length`` sequences, conditioned
    on avoiding the error set.

    Enumerates the full sequence space (guarded by ``max_states``), zeroes
    oracle members, and renormalizes by the surviving mass.
    """
    if model.vocab.size ** length > max_states:
        raise ValueError("sequence space too large to enumerate")
    probs: SeqDist = {}

    def walk(prefix: Sequence, p: float):
        if len(prefix) == length:
            if not oracle.contains(prefix):
                probs[prefix] = p
            return
        dist = model.conditional(prefix)
        for t in range(model.vocab.size):
            q = p * float(dist[t])
            if q > 0.0:
                walk(prefix + (t,), q)

    walk((), 1.0)
    total = sum(probs.values())
    if total <= 0.0:
        raise AllExcludedError(
            "no error-free sequence of this length has positive probability"
        )
    return {s: p / total for s, p in sorted(probs.items())}


def empirical_distribution(samples: list[Sequence]) -> SeqDist:
    """Relative frequencies of the sampled sequences."""
    if not samples:
        raise ValueError("need at least one sample")
    counts: dict[Sequence, int] = {}
    for s in samples:
        s = tuple(s)
        counts[s] = counts.get(s, 0) + 1
    n = len(samples)
    return {s: c / n for s, c in sorted(counts.items())}


def kl_divergence(observed: SeqDist, ideal: SeqDist) -> float:
    """KL(observed || ideal) in nats, with 0 log 0 taken as 0.

    Raises InfiniteDivergenceError when the observed distribution puts mass
    on a sequence the ideal excludes (i.e. the sampler emitted an error).
    """
    total = 0.0
    for seq, p in observed.items():
        if p <= 0.0:
            continue
        q = ideal.get(seq, 0.0)
        if q <= 0.0:
            raise InfiniteDivergenceError(
                f"observed mass {p} on excluded sequence {seq!r}"
            )
        total += p * math.log(p / q)
    return total


@dataclass(frozen=True)
class TestbenchRow:
    """One (error set, method) cell, averaged across seeds.

    ``kl_div`` is infinite when any seed produced an error sequence
    (possible for the unconstrained method on non-empty error sets).
    """

    error_set: str
    method: str
    kl_div: float
    kl_sd: float
    gen_ratio: float
    ratio_sd: float
    samples: int
    seeds: tuple[int, ...]

    @property
    def failed(self) -> bool:
        return math.isinf(self.kl_div)


@dataclass(frozen=True)
class TestbenchReport:
    rows: tuple[TestbenchRow, ...]

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            seeds = " ".join(str(s) for s in r.seeds)
            lines.append(
                f"{_csv_field(r.error_set)},{r.method},{r.kl_div:.4f},{r.kl_sd:.4f},"
                f"{r.gen_ratio:.3f},{r.ratio_sd:.3f},{r.samples},{seeds}"
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        rows = [
            {
                "error_set": r.error_set,
                "method": r.method,
                "kl_div": round(r.kl_div, 4) if math.isfinite(r.kl_div) else r.kl_div,
                "kl_sd": round(r.kl_sd, 4),
                "gen_ratio": round(r.gen_ratio, 3),
                "ratio_sd": round(r.ratio_sd, 3),
                "samples": r.samples,
                "seeds": list(r.seeds),
            }
            for r in self.rows
        ]
        return json.dumps({"rows": rows}, indent=2)

    def format_table(self) -> str:
        """Aligned text table: one line per error set, method column groups."""
        methods = []
        for r in self.rows:
            if r.method not in methods:
                methods.append(r.method)
        specs = []
        for r in self.rows:
            if r.error_set not in specs:
                specs.append(r.error_set)
        cells = {(r.error_set, r.method): r for r in self.rows}
        width = max([len("Error Set")] + [len(s if s else "(empty)") for s in specs])
        header1 = " " * width + " |" + "".join(f" {m:^17s} |" for m in methods)
        header2 = ("Error Set".ljust(width) + " |"
                   + "".join(f" {'KL-div':>8s} {'Ratio':>8s} |" for _ in methods))
        lines = [header1, header2, "-" * len(header2)]
        for spec in specs:
            parts = [(spec if spec else "(empty)").ljust(width) + " |"]
            for m in methods:
                r = cells.get((spec, m))
                if r is None:
                    parts.append(" " * 19 + "|")
                else:
                    kl = f"{r.kl_div:.4f}" if math.isfinite(r.kl_div) else "inf"
                    parts.append(f" {kl:>8s} {r.gen_ratio:>8.3f} |")
            lines.append("".join(parts))
        return "\n".join(lines) + "\n"


def _csv_field(text: str) -> str:
    if "," in text or '"' in text:
        return '"' + text.replace('"', '""') + '"'
    return text


def run_testbench(
    specs=DEFAULT_ERROR_SETS,
    methods=DEFAULT_METHODS,
    samples_per_cell: int = 10_000,
    length: int = 3,
    seeds=(1, 2, 3),
    vocab: Vocab | None = None,
    model: Model | None = None,
    invocation_budget: int | None = 2000,
) -> TestbenchReport:
    """Run the simulated benchmark grid and collect per-cell statistics.

    For each (spec, method, seed) cell, ``samples_per_cell`` independent
    episodes run on the benchmark model (uniform over {A, B, C} unless
    supplied); the KL divergence of the empirical output distribution
    against the exact ideal is averaged across seeds, as is the generation
    ratio (total invocations over total output tokens). Reproducible:
    identical arguments produce an identical report.
    """
    vocab = vocab or Vocab.from_string("ABC")
    model = model or UniformModel(vocab)
    limits = GenerationLimits(max_tokens=length, invocation_budget=invocation_budget)
    rows = []
    for spec in specs:
        oracle = parse_pattern_spec(spec, vocab)
        ideal = ideal_distribution(model, oracle, length)
        for method in methods:
            kls, ratios = [], []
            infinite = False
            for seed in seeds:
                sequences = []
                invocations = 0
                tokens = 0
                for j in range(samples_per_cell):
                    rng = np.random.default_rng(np.random.SeedSequence([seed, j]))
                    out = generate(method, model, oracle, (), limits, rng)
                    if not out.completed:
                        raise RuntimeError(
                            f"episode did not complete (spec={spec!r}, method={method},"
                            f" seed={seed}, sample={j}); raise the invocation budget"
                        )
                    sequences.append(out.sequence)
                    invocations += out.stats.invocations
                    tokens += out.stats.output_tokens
                try:
                    kls.append(kl_divergence(empirical_distribution(sequences), ideal))
                except InfiniteDivergenceError:
                    infinite = True
                ratios.append(invocations / tokens)
            kl_mean = math.inf if infinite else statistics.fmean(kls)
            kl_sd = statistics.stdev(kls) if len(kls) > 1 and not infinite else 0.0
            rows.append(
                TestbenchRow(
                    error_set=spec,
                    method=method,
                    kl_div=kl_mean,
                    kl_sd=kl_sd,
                    gen_ratio=statistics.fmean(ratios),
                    ratio_sd=statistics.stdev(ratios) if len(ratios) > 1 else 0.0,
                    samples=samples_per_cell,
                    seeds=tuple(seeds),
                )
            )
    return TestbenchReport(rows=tuple(rows))
