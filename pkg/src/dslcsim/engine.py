"""Replay orchestration and run-level metrics.

run_trace replays a request stream once; run_until_death loops it,
shifting timestamps by a whole number of loop periods per epoch, until
some chip cannot supply a block for a required program.  Both return a
SimReport with counters, overhead rates, throughput, and a timeline of
block-mode occupancy snapshots taken every 1% of the expected write
budget (plus one final snapshot).
"""

import json
from dataclasses import dataclass, asdict, field

import numpy as np

from . import _kernels as K
from .ftl import Ftl, FtlCounters, RetentionViolation, build_oracle_index
from .retention import preset_table
from .trace import OpKind, page_ops

SNAPSHOT_CAP = 1024
SNAPSHOTS_PER_RUN = 100


def prepare_page_ops(requests, page_size, logical_pages):
    """Flatten requests to page-op arrays (timestamps, kinds, lpns).

    Enforces that every touched lpn fits the device's logical space.
    """
    ts, kinds, lpns = [], [], []
    for op in page_ops(requests, page_size):
        ts.append(op.timestamp_us)
        kinds.append(K.KIND_WRITE if op.kind is OpKind.WRITE else K.KIND_READ)
        lpns.append(op.lpn)
    ts = np.asarray(ts, np.int64)
    kinds = np.asarray(kinds, np.int64)
    lpns = np.asarray(lpns, np.int64)
    if lpns.size and int(lpns.max()) >= logical_pages:
        raise ValueError(
            f"trace touches lpn {int(lpns.max())} but the device exposes "
            f"only {logical_pages} logical pages")
    return ts, kinds, lpns


@dataclass(frozen=True)
class PweSnapshot:
    """Block-mode occupancy at one instant: states value -> block count."""

    time_us: int
    counts: dict
    total: int

    @property
    def time_hours(self):
        return self.time_us / 3_600_000_000

    def fraction(self, states):
        if self.total == 0:
            return 0.0
        return self.counts.get(states, 0) / self.total


@dataclass(frozen=True)
class SimReport:
    """Everything measured over one simulation run."""

    policy: str
    table_name: str
    backend: str
    mode_states: tuple
    died: bool
    death_chip: int | None
    death_time_us: int | None
    epochs: int
    events: int
    counters: FtlCounters
    host_bytes: int
    lifetime_kb: float
    span_us: float
    busy_us: float
    throughput_kb_s: float
    pwe_by_mode: dict
    pwe: int
    gc_per_million_host_pages: float
    gc_cost_pages: float
    scrub_rate: float
    scrub_cost_pages: float
    snapshots: tuple = field(default_factory=tuple)

    def as_dict(self):
        d = asdict(self)
        d["counters"] = self.counters.as_dict()
        d["pwe_by_mode"] = {str(k): v for k, v in self.pwe_by_mode.items()}
        d["snapshots"] = [
            {"time_us": s.time_us, "total": s.total,
             "counts": {str(k): v for k, v in s.counts.items()}}
            for s in self.snapshots
        ]
        return d

    def to_json(self, indent=2):
        return json.dumps(self.as_dict(), indent=indent)

    def timeline_csv(self):
        """Mode-occupancy fractions over time, one row per snapshot."""
        cols = [2, 4, 5, 6, 8]
        lines = ["time_hours," + ",".join(f"frac_{c}" for c in cols)]
        for s in self.snapshots:
            fr = ",".join(f"{s.fraction(c):.6f}" for c in cols)
            lines.append(f"{s.time_hours:.6f},{fr}")
        return "\n".join(lines) + "\n"

    def summary_lines(self):
        c = self.counters
        out = [
            f"policy={self.policy} table={self.table_name} backend={self.backend}",
            f"events={self.events} epochs={self.epochs} died={self.died}"
            + (f" chip={self.death_chip} at {self.death_time_us}us" if self.died else ""),
            f"host_pages={c.host_pages_written} total_pages={c.total_pages_written}"
            f" lifetime_kb={self.lifetime_kb:.0f}",
            f"pwe={self.pwe} by_mode={self.pwe_by_mode}",
            f"gc: {c.gc_invocations} invocations,"
            f" {self.gc_per_million_host_pages:.1f}/Mpage,"
            f" {self.gc_cost_pages:.2f} pages each",
            f"scrub: {c.scrub_invocations} invocations,"
            f" rate {self.scrub_rate:.4f}/allocation,"
            f" {self.scrub_cost_pages:.2f} pages each",
            f"throughput={self.throughput_kb_s:.1f} KB/s"
            f" span={self.span_us / 1e6:.1f}s busy={self.busy_us / 1e6:.1f}s",
        ]
        return out


def _resolve_table(table):
    if table is None or hasattr(table, "grid"):
        return table
    return preset_table(table)


def _loop_period_us(ts):
    """Epoch shift for a looped page-op stream: span plus one mean gap."""
    span = int(ts[-1]) - int(ts[0])
    n = int(ts.size)
    mean_gap = span // (n - 1) if n > 1 else 1
    return span + max(1, mean_gap)


def _expected_write_budget(config, pack):
    """Rough host-page budget of a device lifetime, for snapshot cadence."""
    max_pwe = max(int(s) - 1 for s in pack.mode_states)
    return config.total_pages * (config.endurance + 1) * max_pwe


def _snapshot_list(pack, snap_time, snap_counts, snap_total, n):
    states = [int(s) for s in pack.mode_states]
    out = []
    for k in range(n):
        counts = {states[m]: int(snap_counts[k, m]) for m in range(len(states))}
        out.append(PweSnapshot(time_us=int(snap_time[k]), counts=counts,
                               total=int(snap_total[k])))
    return tuple(out)


def _finish_report(ftl, policy, epochs, died, death_chip, death_time_us,
                   t_first, sim, snap_time, snap_counts, snap_total):
    d = ftl.device
    dev, geom = d.dev, d.geom
    # Final snapshot so short runs still have at least one point.
    n = int(sim[K.SIM_SNAP_N])
    if n < snap_time.shape[0] and dev.counters[K.C_HOST_PAGES] > 0:
        K.snapshot_record_k(dev, geom, snap_time, snap_counts, snap_total,
                            n, sim[K.SIM_LAST_NOW])
        n += 1
    counters = FtlCounters.from_array(dev.counters)
    host_bytes = counters.host_pages_written * geom.page_size
    span_us = float(max(0, int(sim[K.SIM_LAST_NOW]) - t_first))
    busy_us = float(dev.busy.sum(axis=1).max()) if geom.chips else 0.0
    denom_us = max(span_us, busy_us, 1.0)
    pwe_by_mode = ftl.pwe_by_mode()
    gc_inv = counters.gc_invocations
    scrub_inv = counters.scrub_invocations
    return SimReport(
        policy=policy,
        table_name=ftl.table.name,
        backend=K.BACKEND,
        mode_states=tuple(int(s) for s in d.policy.mode_states),
        died=died,
        death_chip=death_chip,
        death_time_us=death_time_us,
        epochs=epochs,
        events=counters.events,
        counters=counters,
        host_bytes=host_bytes,
        lifetime_kb=host_bytes / 1024.0,
        span_us=span_us,
        busy_us=busy_us,
        throughput_kb_s=(host_bytes / 1024.0) / (denom_us / 1e6),
        pwe_by_mode=pwe_by_mode,
        pwe=max(pwe_by_mode.values()) if pwe_by_mode else 0,
        gc_per_million_host_pages=(
            gc_inv * 1e6 / max(1, counters.host_pages_written)),
        gc_cost_pages=(
            counters.gc_page_migrations / gc_inv if gc_inv else 0.0),
        scrub_rate=(
            scrub_inv / max(1, counters.blocks_allocated)),
        scrub_cost_pages=(
            counters.scrub_page_migrations / scrub_inv if scrub_inv else 0.0),
        snapshots=_snapshot_list(d.policy, snap_time, snap_counts,
                                 snap_total, n),
    )


def _replay(config, requests, policy, table, lifetime, epoch_limit):
    table = _resolve_table(table)
    ts, kinds, lpns = prepare_page_ops(requests, config.page_size_bytes,
                                       config.logical_pages)
    n_writes = int((kinds == K.KIND_WRITE).sum())
    period = _loop_period_us(ts) if ts.size else 0
    oracle = None
    if policy == "oracle":
        oracle = build_oracle_index(ts, kinds, lpns, config.logical_pages,
                                    period_us=period, looping=lifetime)
    ftl = Ftl(config, policy=policy, table=table, oracle=oracle)
    d = ftl.device

    if lifetime:
        if n_writes == 0:
            raise ValueError("a lifetime run needs at least one write")
        budget = _expected_write_budget(config, d.policy)
        snap_every = max(1, budget // SNAPSHOTS_PER_RUN)
    else:
        snap_every = max(1, n_writes // SNAPSHOTS_PER_RUN)

    t_first = int(ts[0]) if ts.size else 0
    sim = np.zeros(K.N_SIM, np.int64)
    sim[K.SIM_NEXT_SCRUB] = t_first + d.timing.scrub_period_us
    sim[K.SIM_NEXT_SNAP] = snap_every
    sim[K.SIM_SNAP_EVERY] = snap_every
    sim[K.SIM_LAST_NOW] = t_first
    snap_time = np.zeros(SNAPSHOT_CAP, np.int64)
    snap_counts = np.zeros((SNAPSHOT_CAP, len(d.policy.mode_states)), np.int64)
    snap_total = np.zeros(SNAPSHOT_CAP, np.int64)

    died = False
    death_chip = None
    death_time_us = None
    epochs = 0
    epoch = 0
    while True:
        if epoch_limit is not None and epoch >= epoch_limit:
            break
        shifted = ts if epoch == 0 else ts + epoch * period
        st, idx = K.replay_epoch_k(d.dev, d.geom, d.timing, d.policy,
                                   shifted, kinds, lpns, sim,
                                   snap_time, snap_counts, snap_total)
        if st == K.INTEGRITY:
            raise RetentionViolation(int(lpns[idx]), int(sim[K.SIM_LAST_NOW]))
        if st == K.DEAD:
            died = True
            death_chip = int(d.dev.counters[K.C_DEAD_CHIP]) - 1
            death_time_us = int(sim[K.SIM_LAST_NOW])
            break
        epochs += 1
        epoch += 1
        if not lifetime:
            break

    return _finish_report(ftl, policy, epochs, died, death_chip,
                          death_time_us, t_first, sim,
                          snap_time, snap_counts, snap_total)


def run_trace(config, requests, policy="dslc", table=None):
    """Replay a request stream once and report counters and rates."""
    return _replay(config, requests, policy, table,
                   lifetime=False, epoch_limit=1)


def run_until_death(config, requests, policy="dslc", table=None,
                    epoch_limit=None):
    """Loop the stream, shifting each epoch in time, until the device dies.

    The report's lifetime_kb is the total host data written before the
    first unserviceable write.  epoch_limit bounds the loop for safety;
    reaching it yields a report with died=False.
    """
    return _replay(config, requests, policy, table,
                   lifetime=True, epoch_limit=epoch_limit)
