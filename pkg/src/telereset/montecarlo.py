"""Seeded sampling of protocol runs and comparison with the exact analysis.

Randomness: trial ``i`` of a run seeded with ``seed`` reads its uniform draws
from a fixed block of a Philox counter-based stream keyed by ``seed``: draws
``[i*w, (i+1)*w)`` where ``w`` is a per-config width (a multiple of 4, the
Philox block size). A trial's draws therefore do not depend on how trials are
split across workers, and the ordered reduction makes results identical for
any worker count.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from . import analysis as an
from .protocol import (
    CLASSICAL_BIT_SENT,
    COPY_CONSUMED,
    RESET_ATTEMPT,
    STAGE1,
    STAGE2,
    X_CORRECTION,
    ProtocolConfig,
    ResourceExhaustedError,
    Strategy,
    Transcript,
    UnknownQubit,
    max_draws,
    run_bias_round,
    run_teleport,
)

MAX_TRIALS = 10**9
Z_THRESHOLD = 4.0
CHUNK = 4096
NEED_K_ROWS = 3


@dataclass(frozen=True)
class TrialConfig:
    n_trials: int
    seed: int
    phi: UnknownQubit
    protocol_config: ProtocolConfig = field(default_factory=ProtocolConfig)

    def __post_init__(self):
        if not 1 <= self.n_trials <= MAX_TRIALS:
            raise ValueError(f"n_trials must be in [1, {MAX_TRIALS}], got {self.n_trials}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def draw_width(config: ProtocolConfig) -> int:
    w = max_draws(config)
    return -(-w // 4) * 4


def trial_draws(seed: int, start: int, stop: int, width: int) -> np.ndarray:
    """Uniform draws for trials ``start..stop-1``, one row per trial."""
    if width % 4:
        raise ValueError("width must be a multiple of 4")
    bitgen = np.random.Philox(key=seed)
    bitgen.advance(start * width // 4)
    return np.random.Generator(bitgen).random((stop - start) * width).reshape(stop - start, width)


class TrialOutcome(NamedTuple):
    bits: int
    copies: int
    leaf: str
    completed: bool
    first_desired: bool
    first_reset: int  # -1: no reset attempted, 0: failed, 1: succeeded
    first_chain_success_at: int  # 0 if the first chain never succeeded
    reset_successes: int

    @property
    def credited(self) -> bool:
        return self.first_desired or self.first_chain_success_at > 0


def summarize(t: Transcript, exhausted: bool = False) -> TrialOutcome:
    """Reduce a transcript to the statistics the harness aggregates."""
    stage_ones = 0
    first_desired = False
    first_reset = -1
    chain_pos = 0
    success_at = 0
    successes = 0
    corrected = False
    last_stage2 = None
    for e in t.events:
        if e.type == STAGE1:
            stage_ones += 1
            if stage_ones == 1:
                first_desired = e.outcome == 0
        elif e.type == RESET_ATTEMPT:
            if first_reset < 0:
                first_reset = int(e.success)
            successes += e.success
            if stage_ones == 1:
                chain_pos += 1
                if e.success:
                    success_at = chain_pos
        elif e.type == X_CORRECTION:
            corrected = True
        elif e.type == STAGE2:
            last_stage2 = e.outcome
    if exhausted:
        leaf = "EXHAUSTED"
    elif t.completed:
        leaf = f"BOB_PHI{(2 if corrected else 0) + last_stage2}"
    else:
        leaf = "TRUNCATED"
    return TrialOutcome(t.bits_sent, t.copies_consumed, leaf, t.completed, first_desired,
                        first_reset, success_at, successes)


def _run_chunk(phi: UnknownQubit, config: ProtocolConfig, seed: int, start: int, stop: int) -> list[TrialOutcome]:
    width = draw_width(config)
    draws = trial_draws(seed, start, stop, width).tolist()
    out = []
    for row in draws:
        try:
            out.append(summarize(run_teleport(phi, config, row)))
        except ResourceExhaustedError as exc:
            out.append(summarize(exc.transcript, exhausted=True))
    return out


def _chunks(n: int, size: int = CHUNK) -> list[tuple[int, int]]:
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def _map_chunks(fn, args_for, n: int, workers: int) -> list:
    spans = _chunks(n)
    if workers <= 1 or len(spans) == 1:
        parts = [fn(*args_for(s, e)) for s, e in spans]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, *args_for(s, e)) for s, e in spans]
            parts = [f.result() for f in futures]
    return [rec for part in parts for rec in part]


@dataclass
class TrialStats:
    n_trials: int
    seed: int
    strategy: str
    max_resets: int
    counts: dict[str, int]
    mean_bits: float
    mean_copies: float
    empirical_one_bit_prob: float
    statistics: dict[str, float]
    sample_sizes: dict[str, int]
    standard_errors: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_trials": self.n_trials,
            "seed": self.seed,
            "strategy": self.strategy,
            "max_resets": self.max_resets,
            "counts": dict(sorted(self.counts.items())),
            "mean_bits": self.mean_bits,
            "mean_copies": self.mean_copies,
            "empirical_one_bit_prob": self.empirical_one_bit_prob,
            "statistics": {
                name: {"value": v, "n": self.sample_sizes[name], "stderr": self.standard_errors[name]}
                for name, v in self.statistics.items()
            },
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["statistic", "empirical", "n", "stderr"])
        for name, v in self.statistics.items():
            w.writerow([name, repr(v), self.sample_sizes[name], repr(self.standard_errors[name])])
        return buf.getvalue()


def _proportion(hits: int, n: int) -> tuple[float, float]:
    p = hits / n
    return p, math.sqrt(p * (1 - p) / n)


def _mean(values: list[int]) -> tuple[float, float]:
    n = len(values)
    m = math.fsum(values) / n
    if n < 2:
        return m, 0.0
    var = math.fsum((v - m) ** 2 for v in values) / (n - 1)
    return m, math.sqrt(var / n)


def aggregate(config: TrialConfig, records: list[TrialOutcome]) -> TrialStats:
    pc = config.protocol_config
    n = len(records)
    counts: dict[str, int] = {}
    for r in records:
        key = f"bits={r.bits}|copies={r.copies}|leaf={r.leaf}"
        counts[key] = counts.get(key, 0) + 1

    stats: dict[str, float] = {}
    sizes: dict[str, int] = {}
    errs: dict[str, float] = {}

    def put(name, value_err, size):
        stats[name], errs[name] = value_err
        sizes[name] = size

    put("mean_bits", _mean([r.bits for r in records]), n)
    put("mean_copies", _mean([r.copies for r in records]), n)
    done = [r.bits for r in records if r.completed]
    if done:
        put("mean_bits_completed", _mean(done), len(done))
    put("one_bit_prob", _proportion(sum(r.credited for r in records), n), n)
    put("credited_bits", _mean([1 if r.credited else 2 for r in records]), n)
    put("completed_one_bit_prob", _proportion(sum(r.completed and r.bits == 1 for r in records), n), n)
    put("phi01_prob", _proportion(sum(r.leaf in ("BOB_PHI0", "BOB_PHI1") for r in records), n), n)
    put("abandon_prob", _proportion(sum(r.leaf == "TRUNCATED" for r in records), n), n)
    put("exhausted_prob", _proportion(sum(r.leaf == "EXHAUSTED" for r in records), n), n)
    tried = [r for r in records if r.first_reset >= 0]
    if tried:
        put("first_reset_success", _proportion(sum(r.first_reset for r in tried), len(tried)), len(tried))
    undesired = [r for r in records if not r.first_desired]
    if pc.effective_resets and undesired:
        for k in range(1, min(pc.effective_resets, NEED_K_ROWS) + 1):
            hits = sum(r.first_chain_success_at == k for r in undesired)
            put(f"need_{k}_resets", _proportion(hits, len(undesired)), len(undesired))
    total_successes = sum(r.reset_successes for r in records)
    stats["reset_successes"], errs["reset_successes"], sizes["reset_successes"] = float(total_successes), 0.0, n

    return TrialStats(
        n_trials=n,
        seed=config.seed,
        strategy=pc.strategy.value,
        max_resets=pc.max_resets,
        counts=counts,
        mean_bits=stats["mean_bits"],
        mean_copies=stats["mean_copies"],
        empirical_one_bit_prob=stats["one_bit_prob"],
        statistics=stats,
        sample_sizes=sizes,
        standard_errors=errs,
    )


def run_trials(config: TrialConfig, workers: int = 1) -> TrialStats:
    """Run ``config.n_trials`` independent protocol runs; deterministic in ``config.seed``."""
    records = _map_chunks(
        _run_chunk,
        lambda s, e: (config.phi, config.protocol_config, config.seed, s, e),
        config.n_trials,
        workers,
    )
    return aggregate(config, records)


@dataclass(frozen=True)
class ComparisonRow:
    statistic: str
    analytic: float
    empirical: float
    stderr: float
    z_score: float | None
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "statistic": self.statistic,
            "analytic": self.analytic,
            "empirical": self.empirical,
            "stderr": self.stderr,
            "z": self.z_score,
            "pass": self.passed,
        }


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    z_threshold: float = Z_THRESHOLD
    label: str = ""

    @property
    def header(self) -> str:
        return (f"pass iff |z| < {self.z_threshold:g} (about 6e-5 false alarms per row); "
                "zero-variance rows compared exactly")

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list[ComparisonRow]:
        return [r for r in self.rows if not r.passed]

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "header": self.header,
            "z_threshold": self.z_threshold,
            "passed": self.passed,
            "rows": [r.to_dict() for r in self.rows],
        }

    def csv_rows(self) -> list[list[str]]:
        out = []
        for r in self.rows:
            z = "" if r.z_score is None else repr(r.z_score)
            out.append([r.statistic, repr(r.analytic), repr(r.empirical), repr(r.stderr), z,
                        "true" if r.passed else "false"])
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["statistic", "analytic", "empirical", "stderr", "z", "pass"])
        w.writerows(self.csv_rows())
        return buf.getvalue()


EXACT_TOL = 1e-12


def _row(name: str, analytic: float, empirical: float, variance: float, n: int,
         threshold: float) -> ComparisonRow:
    """z uses the analytic variance, so a rare event that never showed up is not a false pass/fail."""
    if variance <= 0 or n == 0:
        ok = abs(empirical - analytic) <= EXACT_TOL
        return ComparisonRow(name, analytic, empirical, 0.0, 0.0 if ok else None, ok)
    se = math.sqrt(variance / n)
    z = (empirical - analytic) / se
    return ComparisonRow(name, analytic, empirical, se, z, abs(z) < threshold)


def _bernoulli_var(p: float) -> float:
    return max(p * (1 - p), 0.0) if 0.0 < p < 1.0 else 0.0


def compare(stats: TrialStats, phi: UnknownQubit, config: ProtocolConfig,
            threshold: float = Z_THRESHOLD, perturb: float = 0.0) -> ComparisonReport:
    """Check each empirical statistic against its exact value from :mod:`telereset.analysis`.

    ``perturb`` is added to every analytic value (used to exercise the failure path).
    """
    tree = an.build_tree(phi, config.max_resets, config.strategy, config.copies_available)
    resets = config.effective_resets
    unlimited = config.copies_available is None
    s, sizes = stats.statistics, stats.sample_sizes
    rows: list[ComparisonRow] = []

    def add(name, analytic, variance):
        if name in s:
            rows.append(_row(name, analytic + perturb, s[name], variance, sizes[name], threshold))

    def moment_row(name, fn, pred=lambda n: True):
        mass = tree.mass(pred)
        if mass <= 0:
            return
        m = tree.expectation(lambda n: fn(n) if pred(n) else 0.0) / mass
        var = tree.expectation(lambda n: (fn(n) - m) ** 2 if pred(n) else 0.0) / mass
        add(name, m, var)

    def prob_row(name, p):
        add(name, p, _bernoulli_var(p))

    moment_row("mean_bits", lambda n: n.bits_on_path)
    moment_row("mean_copies", lambda n: n.copies_on_path)
    moment_row("mean_bits_completed", lambda n: n.bits_on_path, lambda n: n.completed is True)

    if config.strategy is not Strategy.CONVENTIONAL:
        credited = an.one_bit_probability(phi, resets) if unlimited else an.credited_one_bit_mass(tree)
        prob_row("one_bit_prob", credited)
        # credited cost: 1 bit on a credited pair, 2 otherwise; the one-reset case is exactly H(T)
        cost = an.entropy_ht(phi) if (resets == 1 and unlimited) else 2 - credited
        add("credited_bits", cost, _bernoulli_var(credited))
    prob_row("completed_one_bit_prob", tree.mass(lambda n: n.completed is True and n.bits_on_path == 1))
    prob_row("phi01_prob", tree.mass(lambda n: n.label in ("BOB_PHI0", "BOB_PHI1")))
    prob_row("abandon_prob", tree.mass(lambda n: n.reason == "abandoned"))
    prob_row("exhausted_prob", tree.mass(lambda n: n.reason == "copies-exhausted"))
    if resets:
        prob_row("first_reset_success", 2 * phi.ab_sq)
        if unlimited:
            for k in range(1, min(resets, NEED_K_ROWS) + 1):
                p = an.p_need_k_resets(phi, k)
                if config.strategy is Strategy.ABANDON_ON_FAIL and k > 1:
                    p = 0.0
                prob_row(f"need_{k}_resets", p)
    return ComparisonReport(rows, threshold)


@dataclass
class BiasStats:
    n_trials: int
    seed: int
    unconditioned_bob_p0: float
    post_selected_bob_p0: float | None
    keep_fraction: float
    kept: int
    standard_errors: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_trials": self.n_trials,
            "seed": self.seed,
            "unconditioned_bob_p0": self.unconditioned_bob_p0,
            "post_selected_bob_p0": self.post_selected_bob_p0,
            "keep_fraction": self.keep_fraction,
            "kept": self.kept,
            "standard_errors": self.standard_errors,
        }


def _bias_chunk(phi: UnknownQubit, config: ProtocolConfig, seed: int, start: int, stop: int) -> list[tuple[bool, int]]:
    draws = trial_draws(seed, start, stop, draw_width(config)).tolist()
    out = []
    for row in draws:
        r = run_bias_round(phi, config, row)
        out.append((r.kept, r.bob_outcome))
    return out


def run_bias_trials(config: TrialConfig, workers: int = 1) -> BiasStats:
    """Sample Alice's unilateral steering and Bob's computational-basis reading."""
    records = _map_chunks(
        _bias_chunk,
        lambda s, e: (config.phi, config.protocol_config, config.seed, s, e),
        config.n_trials,
        workers,
    )
    n = len(records)
    zeros = sum(b == 0 for _, b in records)
    kept = [b for k, b in records if k]
    p_all, se_all = _proportion(zeros, n)
    keep, se_keep = _proportion(len(kept), n)
    if kept:
        p_kept, se_kept = _proportion(sum(b == 0 for b in kept), len(kept))
    else:
        p_kept, se_kept = None, None
    return BiasStats(n, config.seed, p_all, p_kept, keep, len(kept),
                     {"unconditioned_bob_p0": se_all, "post_selected_bob_p0": se_kept, "keep_fraction": se_keep})


def compare_bias(stats: BiasStats, phi: UnknownQubit, config: ProtocolConfig,
                 threshold: float = Z_THRESHOLD, perturb: float = 0.0) -> ComparisonReport:
    resets, strategy = config.max_resets, config.strategy
    p_all = an.bob_marginal(phi, resets, "unconditioned", strategy)
    p_kept = an.bob_marginal(phi, resets, "post-selected", strategy)
    keep = an.keep_fraction(phi, resets, strategy)
    rows = [
        _row("unconditioned_bob_p0", p_all + perturb, stats.unconditioned_bob_p0, _bernoulli_var(p_all),
             stats.n_trials, threshold),
        _row("keep_fraction", keep + perturb, stats.keep_fraction, _bernoulli_var(keep), stats.n_trials, threshold),
    ]
    if stats.kept:
        rows.append(_row("post_selected_bob_p0", p_kept + perturb, stats.post_selected_bob_p0,
                         _bernoulli_var(p_kept), stats.kept, threshold))
    return ComparisonReport(rows, threshold)
