"""Campaign engine: serial, batch and pipelined loops.

serial
    One chromosome per iteration, simulated on the coordinator thread.
batch
    ``batch_size`` chromosomes per iteration, spread over ``threads`` worker
    threads; results merge in slot order once all workers finish.
pipelined
    Workers simulate iteration ``k`` while the coordinator merges ``k - 1``
    and generates ``k + 1`` from a corpus that does not yet include ``k``.
    Two ping-pong slots hold inputs and results. A seed retained at ``k``
    can first be selected at ``k + 2``. When a stop condition fires the
    in-flight iteration is completed and merged before the report.

An iteration is one batch. ``executions`` counts simulated chromosomes.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import stats
from .corpus import CorpusState, FitnessParams, load_chromosomes, save_corpus, update_seed_corpus
from .coverage import export_snapshot, merge_batch
from .dut import ReportFileCollector, bundled_dir, create_dut, run_stimulus
from .dut.wire import SubprocessDut
from .errors import ConfigError, SimfuzzError, WorkerError
from .grammar import GrammarMode, translate
from .mutation import InputGenerator, MutationParams, RandomGenerator

MODES = ("serial", "batch", "pipelined")
GENERATORS = ("mutation", "random")
COVERAGE_PATHS = ("sketched", "report")


@dataclass
class FuzzConfig:
    dut: str = "toy-cpu"
    dut_cmd: list | None = None
    dut_options: dict = field(default_factory=dict)
    backend: str | None = None
    grammar: GrammarMode | None = None
    mutation: MutationParams = MutationParams()
    fitness: FitnessParams = FitnessParams()
    master_seed: int = 0
    mode: str = "serial"
    threads: int = 1
    batch_size: int | None = None
    max_iterations: int | None = 100_000
    stagnation_window: int | None = 10_000
    seeds: str | Path | None = None
    out_dir: str | Path | None = None
    max_corpus_size: int = 100_000
    generator: str = "mutation"
    retention: bool = True
    coverage_path: str = "sketched"
    stop_on_finding: bool = False
    stop_at_coverage: float | None = None
    time_budget: float | None = None
    record_lineage: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.mode == "serial" and self.threads != 1:
            raise ConfigError("serial mode runs with threads = 1")
        if self.batch_size is None:
            self.batch_size = self.threads
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.mode == "serial" and self.batch_size != 1:
            raise ConfigError("serial mode runs with batch_size = 1")
        if self.generator not in GENERATORS:
            raise ConfigError(f"generator must be one of {', '.join(GENERATORS)}")
        if self.coverage_path not in COVERAGE_PATHS:
            raise ConfigError(f"coverage_path must be one of {', '.join(COVERAGE_PATHS)}")
        for name in ("max_iterations", "stagnation_window"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.stop_at_coverage is not None and not 0 < self.stop_at_coverage <= 1:
            raise ConfigError("stop_at_coverage must be a fraction in (0, 1]")


@dataclass
class Finding:
    index: int
    message: str
    chromosome_id: int
    iteration: int
    execution: int
    data: bytes = field(repr=False, default=b"")
    failing_executions: int = 1

    def to_dict(self):
        d = asdict(self)
        d.pop("data")
        d["length"] = len(self.data)
        return d


@dataclass
class Lineage:
    """Instrumentation for the staleness property and stream comparisons."""

    births: dict = field(default_factory=dict)        # seed id -> iteration retained
    first_parent_use: dict = field(default_factory=dict)  # seed id -> first iteration used as parent
    inputs: list = field(default_factory=list)        # (iteration, id, origin, parents, bytes)

    def violations(self, min_gap: int) -> list:
        return [(sid, born, self.first_parent_use[sid]) for sid, born in self.births.items()
                if sid in self.first_parent_use and self.first_parent_use[sid] < born + min_gap]


@dataclass
class CampaignReport:
    dut: str
    mode: str
    threads: int
    batch_size: int
    master_seed: int
    generator: str
    iterations: int = 0
    executions: int = 0
    cycles: int = 0
    coverpoints: int = 0
    covered: int = 0
    coverage_rate: float = 0.0
    retained_seeds: int = 0
    corpus_size: int = 0
    stop_reason: str = ""
    findings: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    corpus_manifest: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    # in-memory extras, not serialized
    corpus: CorpusState | None = field(default=None, repr=False, compare=False)
    lineage: Lineage | None = field(default=None, repr=False, compare=False)
    stage_timer: stats.StageTimer | None = field(default=None, repr=False, compare=False)

    _EXTRAS = ("corpus", "lineage", "stage_timer")

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k not in self._EXTRAS}
        d["findings"] = [f.to_dict() if isinstance(f, Finding) else f for f in self.findings]
        d["trajectory"] = [list(t) for t in self.trajectory]
        d["corpus_manifest"] = [list(t) for t in self.corpus_manifest]
        return d

    def deterministic_dict(self) -> dict:
        d = self.to_dict()
        d.pop("timing")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignReport":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__ and k not in cls._EXTRAS}
        return cls(**known)

    @classmethod
    def load(cls, path) -> "CampaignReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def summary(self) -> str:
        lines = [
            f"design          {self.dut}",
            f"mode            {self.mode} (threads={self.threads}, batch={self.batch_size}, generator={self.generator})",
            f"master seed     {self.master_seed}",
            f"iterations      {self.iterations} ({self.executions} executions, {self.cycles} cycles)",
            f"coverage        {self.covered}/{self.coverpoints} = {self.coverage_rate:.4f}",
            f"corpus          {self.corpus_size} seeds ({self.retained_seeds} retained during the campaign)",
            f"stopped by      {self.stop_reason}",
            f"findings        {len(self.findings)}",
        ]
        for f in self.findings:
            f = f if isinstance(f, dict) else f.to_dict()
            lines.append(f"  finding-{f['index']}: {f['message']} (iteration {f['iteration']}, "
                         f"{f['failing_executions']} failing executions)")
        if self.timing:
            lines.append(f"wall time       {self.timing.get('wall_seconds', 0.0):.3f} s")
            lines.append(f"throughput      {self.timing.get('throughput_cycles_per_sec', 0.0):.1f} cycles/s")
            lines.append(format_breakdown(stage_timing_report(self)))
        return "\n".join(lines) + "\n"


def stage_timing_report(report: CampaignReport) -> dict:
    """Percent of wall time per stage; ``kind`` says how to read the numbers.

    ``share`` breakdowns sum to 100. ``utilization`` breakdowns (pipelined
    mode) charge overlapped work to every stage it occupies and can exceed
    100 in total.
    """
    t = report.timing or {}
    kind = t.get("share_kind", "share")
    pct = {s: 100.0 * t.get("shares", {}).get(s, 0.0) for s in stats.STAGES}
    return {"kind": kind, "percent": pct}


def format_breakdown(breakdown: dict) -> str:
    label = "stage utilization" if breakdown["kind"] == "utilization" else "stage share"
    parts = ", ".join(f"{s} {v:.1f}%" for s, v in breakdown["percent"].items())
    return f"{label:<15} {parts}"


# -- workers -------------------------------------------------------------------

def make_dut(config: FuzzConfig):
    if config.dut_cmd:
        return SubprocessDut(config.dut_cmd, grammar=config.grammar)
    return create_dut(config.dut, backend=config.backend, **config.dut_options)


class _Runner:
    """One model instance plus its coverage collector; confined to one thread."""

    def __init__(self, config: FuzzConfig, tag: str):
        self.dut = make_dut(config)
        self.collector = None
        self._tmp = None
        if config.coverage_path == "report":
            self._tmp = tempfile.TemporaryDirectory(prefix="simfuzz-cov-")
            self.collector = ReportFileCollector(Path(self._tmp.name) / f"coverage-{tag}.dat")

    def run(self, stimuli):
        return [run_stimulus(self.dut, s, self.collector) for s in stimuli]

    def close(self):
        self.dut.close()
        if self._tmp is not None:
            self._tmp.cleanup()


class WorkerPool:
    """``threads`` single-thread executors, each owning one model instance.

    The pool is created once per campaign. Slot ``i`` of a batch goes to
    worker ``i % threads``.
    """

    def __init__(self, config: FuzzConfig):
        self.threads = config.threads
        self._execs = [ThreadPoolExecutor(1, thread_name_prefix=f"simfuzz-worker{i}") for i in range(self.threads)]
        self._runners = [None] * self.threads
        futures = [ex.submit(self._init, i, config) for i, ex in enumerate(self._execs)]
        try:
            for i, fut in enumerate(futures):
                exc = fut.exception()
                if exc is not None:
                    raise WorkerError(i, exc) from exc
        except BaseException:
            self.close()
            raise

    def _init(self, i, config):
        self._runners[i] = _Runner(config, f"{os.getpid()}-{i}")

    def _work(self, i, stimuli):
        t0 = time.perf_counter()
        out = self._runners[i].run(stimuli)
        return out, t0, time.perf_counter()

    def submit(self, stimuli):
        groups = [stimuli[i::self.threads] for i in range(self.threads)]
        return [ex.submit(self._work, i, g) if g else None for i, (ex, g) in enumerate(zip(self._execs, groups))]

    def gather(self, futures, n):
        """Wait for every worker, then reassemble results in slot order."""
        results = [None] * n
        error = None
        start, end = math.inf, 0.0
        for i, fut in enumerate(futures):
            if fut is None:
                continue
            exc = fut.exception()
            if exc is not None:
                error = error or WorkerError(i, exc)
                continue
            out, t0, t1 = fut.result()
            results[i::self.threads] = out
            start, end = min(start, t0), max(end, t1)
        if error is not None:
            raise error
        return results, (start, end)

    def close(self):
        for i, ex in enumerate(self._execs):
            if self._runners[i] is not None:
                ex.submit(self._runners[i].close).result()
            ex.shutdown(wait=True)


class PingPongBuffers:
    """Two alternating slots of (inputs, results) with one writer and one reader each."""

    EMPTY, FILLED, RUNNING, DONE = range(4)

    def __init__(self):
        self._slots = [dict(state=self.EMPTY, k=None, inputs=None, payload=None) for _ in range(2)]

    def _slot(self, k, expect):
        slot = self._slots[k % 2]
        if slot["state"] != expect or (expect != self.EMPTY and slot["k"] != k):
            raise SimfuzzError(f"ping-pong handoff violated at iteration {k} (slot state {slot['state']})")
        return slot

    def put_inputs(self, k, inputs):
        slot = self._slot(k, self.EMPTY)
        slot.update(state=self.FILLED, k=k, inputs=inputs, payload=None)

    def start(self, k, payload):
        slot = self._slot(k, self.FILLED)
        slot.update(state=self.RUNNING, payload=payload)
        return slot["inputs"]

    def running(self, k):
        return self._slot(k, self.RUNNING)["payload"]

    def finish(self, k, results):
        slot = self._slot(k, self.RUNNING)
        slot.update(state=self.DONE, payload=results)

    def take(self, k):
        slot = self._slot(k, self.DONE)
        out = slot["inputs"], slot["payload"]
        slot.update(state=self.EMPTY, k=None, inputs=None, payload=None)
        return out


# -- campaign ------------------------------------------------------------------

class Campaign:
    """State shared by the three loops."""

    def __init__(self, config: FuzzConfig):
        self.config = config
        self.timer = stats.StageTimer()
        self.lineage = Lineage() if config.record_lineage else None
        self.findings: dict[str, Finding] = {}
        self.trajectory: list = []
        self.retained = 0
        self.iterations = 0
        self.executions = 0
        self.collect_seconds = 0.0
        self.stop_reason = ""
        self.sim_span = 0.0
        self.local = None
        self.pool = None

        probe = make_dut(config)
        try:
            self.descriptor = probe.descriptor
        finally:
            probe.close()
        self.grammar = config.grammar or self.descriptor.grammar
        self.corpus = CorpusState(self.descriptor.coverpoint_count, config.fitness, config.max_corpus_size)
        if config.stop_at_coverage is not None:
            self.target = math.ceil(config.stop_at_coverage * self.descriptor.coverpoint_count - 1e-9)
        else:
            self.target = None

        seeds_dir = config.seeds
        if seeds_dir is None:
            if config.dut_cmd:
                raise ConfigError("a seeds directory is required with an external simulator")
            seeds_dir = bundled_dir(config.dut, "seeds")
        loaded = load_chromosomes(seeds_dir, config.mutation.max_chromosome_bytes)
        for chrom in loaded.chromosomes:
            self.corpus.add_initial(chrom)
        first_id = max(c.id for c in loaded.chromosomes) + 1
        gen_cls = InputGenerator if config.generator == "mutation" else RandomGenerator
        self.generator = gen_cls(config.mutation, config.master_seed, first_id)

    # stages
    def generate(self, k, n):
        with self.timer.time(stats.MUTATION):
            inputs = self.generator.get_inputs(self.corpus, n, k)
            stimuli = [translate(c.data, self.descriptor.input_width_bits, self.grammar, c.id) for c in inputs]
        if self.lineage is not None:
            for c in inputs:
                for p in c.parent_ids:
                    self.lineage.first_parent_use.setdefault(p, k)
                self.lineage.inputs.append((k, c.id, c.origin, c.parent_ids, c.data))
        return inputs, stimuli

    def merge(self, k, inputs, results):
        with self.timer.time(stats.COVERAGE_CORPUS):
            batch = [(c, r.coverage) for c, r in zip(inputs, results)]
            if self.config.retention:
                summary = update_seed_corpus(self.corpus, batch)
                self.retained += summary.retained
                if self.lineage is not None:
                    for sid in summary.retained_ids:
                        self.lineage.births[sid] = k
                new_points = summary.new_points
            else:
                new_points = sum(len(r) for r in merge_batch(self.corpus.cumulative, [b[1] for b in batch]))
                if new_points:
                    self.corpus.stagnation_counter = 0
                else:
                    self.corpus.stagnation_counter += 1
            for c, r in zip(inputs, results):
                self.executions += 1
                self.timer.add_cycles(r.cycles)
                self.collect_seconds += r.collect_seconds
                if not r.check.passed:
                    self._record_finding(c, r.check.message, k)
            self.iterations += 1
            self.timer.iterations += 1
            if new_points or not self.trajectory:
                self.trajectory.append((k, self.executions, self.corpus.cumulative.covered_count))

    def _record_finding(self, chrom, message, k):
        found = self.findings.get(message)
        if found is None:
            self.findings[message] = Finding(len(self.findings), message, chrom.id, k, self.executions, chrom.data)
        else:
            found.failing_executions += 1

    def should_stop(self, k_next, start) -> str:
        # the check reads merged corpus state, so it is charged to that stage
        with self.timer.time(stats.COVERAGE_CORPUS):
            return self._stop_reason(k_next, start)

    def _stop_reason(self, k_next, start) -> str:
        cfg = self.config
        if cfg.max_iterations is not None and k_next >= cfg.max_iterations:
            return "max-iterations"
        if cfg.stagnation_window is not None and self.corpus.stagnation_counter >= cfg.stagnation_window:
            return "stagnation"
        if cfg.stop_on_finding and self.findings:
            return "finding"
        if self.target is not None and self.corpus.cumulative.covered_count >= self.target:
            return "coverage-target"
        if cfg.time_budget is not None and time.perf_counter() - start >= cfg.time_budget:
            return "time-budget"
        return ""

    def simulate_local(self, stimuli):
        if self.local is None:
            self.local = _Runner(self.config, f"{os.getpid()}-local")
        with self.timer.time(stats.SIMULATION):
            return self.local.run(stimuli)

    def close(self):
        if self.local is not None:
            self.local.close()
        if self.pool is not None:
            self.pool.close()

    # loops
    def loop_serial(self, start):
        k = 0
        while True:
            self.stop_reason = self.should_stop(k, start)
            if self.stop_reason:
                return
            inputs, stimuli = self.generate(k, self.config.batch_size)
            self.merge(k, inputs, self.simulate_local(stimuli))
            k += 1

    def loop_batch(self, start):
        self.pool = WorkerPool(self.config)
        k = 0
        while True:
            self.stop_reason = self.should_stop(k, start)
            if self.stop_reason:
                return
            inputs, stimuli = self.generate(k, self.config.batch_size)
            with self.timer.time(stats.SIMULATION):
                results, _ = self.pool.gather(self.pool.submit(stimuli), len(stimuli))
            self.merge(k, inputs, results)
            k += 1

    def loop_pipelined(self, start):
        self.pool = WorkerPool(self.config)
        buffers = PingPongBuffers()
        n = self.config.batch_size
        self.stop_reason = self.should_stop(0, start)
        if self.stop_reason:
            return
        buffers.put_inputs(0, self.generate(0, n))
        self._dispatch(buffers, 0)
        k = 0
        try:
            while True:
                if k >= 1:
                    self._merge_slot(buffers, k - 1)
                self.stop_reason = self.should_stop(k + 1, start)
                if self.stop_reason:
                    self._wait(buffers, k)
                    self._merge_slot(buffers, k)
                    return
                buffers.put_inputs(k + 1, self.generate(k + 1, n))
                self._wait(buffers, k)
                self._dispatch(buffers, k + 1)
                k += 1
        except BaseException:
            # drain whatever is still in flight before surfacing the error
            for slot in buffers._slots:
                if slot["state"] == buffers.RUNNING:
                    for fut in slot["payload"][0]:
                        if fut is not None:
                            fut.exception()
            raise

    def _merge_slot(self, buffers, k):
        (inputs, _), results = buffers.take(k)
        self.merge(k, inputs, results)

    def _dispatch(self, buffers, k):
        _, stimuli = buffers._slots[k % 2]["inputs"]
        futures = self.pool.submit(stimuli)
        buffers.start(k, (futures, len(stimuli), time.perf_counter()))

    def _wait(self, buffers, k):
        futures, n, t_dispatch = buffers.running(k)
        results, (_, t_end) = self.pool.gather(futures, n)
        if t_end > t_dispatch:
            self.timer.record(stats.SIMULATION, t_end - t_dispatch)
        buffers.finish(k, results)

    def report(self, wall) -> CampaignReport:
        cfg = self.config
        cum = self.corpus.cumulative
        timer = self.timer
        timer.wall_seconds = wall
        pipelined = cfg.mode == "pipelined"
        timing = {
            "wall_seconds": wall,
            "throughput_cycles_per_sec": stats.throughput(timer) if wall > 0 else 0.0,
            "stage_seconds": dict(timer.durations),
            "share_kind": "utilization" if pipelined else "share",
            "shares": stats.shares(timer, wall if pipelined else None),
            "attributed_fraction": timer.attributed / wall if wall > 0 else 0.0,
            "coverage_collect_seconds": self.collect_seconds,
        }
        return CampaignReport(
            dut=self.descriptor.name, mode=cfg.mode, threads=cfg.threads, batch_size=cfg.batch_size,
            master_seed=cfg.master_seed, generator=cfg.generator,
            iterations=self.iterations, executions=self.executions, cycles=timer.cycles,
            coverpoints=cum.size, covered=cum.covered_count,
            coverage_rate=cum.covered_count / cum.size,
            retained_seeds=self.retained, corpus_size=len(self.corpus),
            stop_reason=self.stop_reason,
            findings=[f.to_dict() for f in self.findings.values()],
            trajectory=list(self.trajectory),
            corpus_manifest=[(s.chromosome.id, len(s.chromosome.data)) for s in self.corpus.seeds],
            timing=timing, corpus=self.corpus, lineage=self.lineage, stage_timer=timer,
        )

    def write_outputs(self, report: CampaignReport | None):
        out = Path(self.config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_corpus(self.corpus, out / "corpus")
        findings_dir = out / "findings"
        findings_dir.mkdir(exist_ok=True)
        for f in self.findings.values():
            (findings_dir / f"finding-{f.index}.bin").write_bytes(f.data)
        (out / "coverage.tsv").write_text(export_snapshot(self.corpus.cumulative), encoding="utf-8")
        if report is not None:
            (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
            (out / "report.txt").write_text(report.summary(), encoding="utf-8")


def run_campaign(config: FuzzConfig) -> CampaignReport:
    """Run ``config`` in its mode and return the report.

    With ``out_dir`` set, the corpus, findings, coverage snapshot and report
    files are written there; on error the corpus is still flushed.
    """
    campaign = Campaign(config)
    loop = {"serial": campaign.loop_serial, "batch": campaign.loop_batch,
            "pipelined": campaign.loop_pipelined}[config.mode]
    start = time.perf_counter()
    if config.mode != "pipelined":
        campaign.timer.contiguous = True
        campaign.timer.start_clock(start)
    try:
        loop(start)
    except BaseException:
        if config.out_dir is not None:
            campaign.write_outputs(None)
        raise
    finally:
        campaign.close()
    report = campaign.report(time.perf_counter() - start)
    if config.out_dir is not None:
        campaign.write_outputs(report)
    return report


def _with_mode(config: FuzzConfig, mode: str) -> FuzzConfig:
    if config.mode == mode:
        return config
    values = dict(config.__dict__)
    values["mode"] = mode
    return FuzzConfig(**values)


def run_serial(config: FuzzConfig) -> CampaignReport:
    return run_campaign(_with_mode(config, "serial"))


def run_batch(config: FuzzConfig) -> CampaignReport:
    return run_campaign(_with_mode(config, "batch"))


def run_pipelined(config: FuzzConfig) -> CampaignReport:
    return run_campaign(_with_mode(config, "pipelined"))


def iterations_to(report: CampaignReport, covered: int) -> int | None:
    """Executions needed to first reach ``covered`` points, from the trajectory."""
    for _, executions, count in report.trajectory:
        if count >= covered:
            return executions
    return None


__all__ = [
    "CampaignReport", "Finding", "FuzzConfig", "Lineage", "PingPongBuffers", "WorkerPool",
    "iterations_to", "run_batch", "run_campaign", "run_pipelined", "run_serial", "stage_timing_report",
]
