"""Phase-parallel sweeps over a thread pool, tracing and checkpointing.

Every variate is keyed by (seed, sweep, role, indices), never by worker, so
traces are bit-identical for any worker count.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .data.snapshot import restore_chain, snapshot_chain
from .data.traces import TRACE_FILE, Traces, format_record, truncate_trace, write_meta
from .errors import HdpccError
from .gibbs import phase_triplets, split_blocks, sweep
from .inference import sweep_statistics

INITIAL_SNAPSHOT = "initial.snap"
CHECKPOINT = "checkpoint.snap"
FINAL_SNAPSHOT = "final.snap"


class RunAborted(HdpccError):
    """A sweep failed; `snapshot` names the last durable checkpoint (or None)."""

    def __init__(self, msg, snapshot=None, cause=None):
        super().__init__(msg)
        self.snapshot = snapshot
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


@dataclass
class WorkPlan:
    phases: list        # per k: (n_k, 3) triplets (i, j, cache) in canonical order
    blocks: list        # per k: [lo, hi) per worker
    workers: int

    def assignment(self, k, w):
        lo, hi = self.blocks[k][w]
        return self.phases[k][lo:hi]

    def substream(self, i, j):
        """Uniform-block row of triplet (i, j); independent of worker identity."""
        return ("triplets", i, j)


def plan(config, model):
    workers = int(config.workers)
    if workers < 1:
        from .errors import ConfigError
        raise ConfigError("workers must be at least 1", ["workers"])
    phases = [phase_triplets(model, k) for k in (0, 1)]
    return WorkPlan(phases, [split_blocks(len(p), workers) for p in phases], workers)


def recorded(sweep_no, config):
    return sweep_no > config.burnin and (sweep_no - config.burnin) % config.thin == 0


def run_meta(model):
    t = model.tensor
    return {"ids": list(t.ids), "genes": list(t.genes), "Lj": [int(x) for x in t.Lj],
            "group": [int(g) for g in t.group], "M": int(model.config.M),
            "d": int(model.env.d), "burnin": int(model.config.burnin),
            "thin": int(model.config.thin)}


@dataclass
class RunResult:
    state: object
    traces: Traces
    snapshot: str = None


def run(state, model, work_plan=None, iterations=None, out=None, checkpoint_every=100,
        audit=False, audit_hook=None, stop_after=None):
    """Advance `state` until state.sweep == iterations, recording thinned statistics.

    With `out`, trace lines are appended to out/trace.tsv as they are produced,
    the initial state is written once, and a checkpoint is kept every
    `checkpoint_every` sweeps. `stop_after` simulates an interruption.
    """
    cfg = model.config
    work_plan = work_plan or plan(cfg, model)
    iterations = cfg.iterations if iterations is None else int(iterations)
    traces = Traces(meta=run_meta(model))
    trace_f = None
    last_snap = None
    if out:
        os.makedirs(out, exist_ok=True)
        write_meta(out, traces.meta)
        init = os.path.join(out, INITIAL_SNAPSHOT)
        if state.sweep == 0 and not os.path.exists(init):
            snapshot_chain(state, init)
        last_snap = init
        if os.path.exists(os.path.join(out, CHECKPOINT)):
            last_snap = os.path.join(out, CHECKPOINT)
        trace_f = open(os.path.join(out, TRACE_FILE), "a")
    executor = ThreadPoolExecutor(work_plan.workers) if work_plan.workers > 1 else None
    done = 0
    try:
        while state.sweep < iterations:
            if stop_after is not None and done >= stop_after:
                break
            try:
                sweep(state, model, executor, work_plan.workers, audit_every=audit,
                      audit_hook=audit_hook)
            except HdpccError as e:
                raise RunAborted(f"sweep {state.sweep + 1} failed: {e}", last_snap, e) from e
            done += 1
            if recorded(state.sweep, cfg):
                recs = sweep_statistics(state, model, dpl=cfg.record_dpl,
                                        covariance=cfg.record_covariance, r_cov=cfg.r_cov)
                traces.extend(state.sweep, recs)
                if trace_f:
                    trace_f.writelines(format_record(state.sweep, *r) for r in recs)
            if out and checkpoint_every and state.sweep % checkpoint_every == 0:
                trace_f.flush()
                last_snap = os.path.join(out, CHECKPOINT)
                snapshot_chain(state, last_snap)
        if out and done and state.sweep >= iterations:
            last_snap = os.path.join(out, FINAL_SNAPSHOT)
            snapshot_chain(state, last_snap)
    finally:
        if executor:
            executor.shutdown()
        if trace_f:
            trace_f.close()
    return RunResult(state, traces, last_snap)


def resume(out, model, work_plan=None, iterations=None, snapshot=None, **kw):
    """Continue a run from its checkpoint (or a given snapshot); trace lines past
    the snapshot's sweep are dropped first, so the finished trace equals an
    uninterrupted run."""
    path = snapshot or os.path.join(out, CHECKPOINT)
    if not os.path.exists(path):
        path = os.path.join(out, INITIAL_SNAPSHOT)
    state = restore_chain(path)
    truncate_trace(out, state.sweep)
    return run(state, model, work_plan, iterations, out, **kw)


def fit(model, seed=None, iterations=None, workers=None, out=None, **kw):
    """Initialize a chain from the model and run it."""
    from .gibbs import init_state

    cfg = model.config
    if workers is not None:
        cfg = cfg.replace(workers=workers)
        model.config = cfg
    state = init_state(model, cfg.seed if seed is None else seed)
    if out:
        for name in (TRACE_FILE, INITIAL_SNAPSHOT, CHECKPOINT, FINAL_SNAPSHOT):
            p = os.path.join(out, name)
            if os.path.exists(p):
                os.remove(p)
    return run(state, model, plan(cfg, model), iterations, out, **kw)


def trace_bytes(traces):
    return "".join(traces.lines()).encode()

