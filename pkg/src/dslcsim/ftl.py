"""Flash translation layer: write policies, GC, scrubbing, counters.

Three write policies share one mechanism:

- "baseline": every block runs the conventional single 2-state round per
  erase cycle; the mode table collapses to 2-state everywhere.
- "dslc": multi-round blocks; data keeps the mode of the block it
  already lives in, new data starts in the highest-state mode.
- "oracle": like dslc but each write consults a prebuilt index of the
  trace's future writes, placing data by its actual time-to-next-write.

The heavy lifting happens inside _kernels.  This module provides the
object veneer: policy construction, the oracle index, exceptions in
place of kernel status codes, and a readable counters snapshot.
"""

from dataclasses import dataclass, asdict

import numpy as np

from . import _kernels as K
from .flash import FlashDevice, bare_policy, table_arrays
from .retention import ModeAssignmentTable, baseline_table, preset_table

POLICY_CODES = {
    "baseline": K.POLICY_BASELINE,
    "dslc": K.POLICY_DSLC,
    "oracle": K.POLICY_ORACLE,
}


class DeviceDead(Exception):
    """A required page program found no usable block on its chip."""

    def __init__(self, chip):
        super().__init__(f"chip {chip} has no usable block left")
        self.chip = chip


class RetentionViolation(Exception):
    """A mapped read arrived after its block's retention deadline."""

    def __init__(self, lpn, now_us):
        super().__init__(f"lpn {lpn} read past its retention deadline at t={now_us}us")
        self.lpn = lpn
        self.now_us = now_us


@dataclass(frozen=True)
class OracleIndex:
    """Per-lpn sorted write times of a trace, in CSR layout.

    offsets[lpn]:offsets[lpn+1] slices times.  With looping set, the
    stream repeats every period_us and future epochs are implied.
    """

    times: np.ndarray
    offsets: np.ndarray
    period_us: int
    looping: bool


def build_oracle_index(timestamps, kinds, lpns, logical_pages,
                       period_us=0, looping=False):
    """Index a page-op stream's writes by lpn for future-write lookups."""
    ts = np.asarray(timestamps, np.int64)
    kd = np.asarray(kinds, np.int64)
    lp = np.asarray(lpns, np.int64)
    if looping and period_us <= 0:
        raise ValueError("a looping oracle index needs a positive period")
    mask = kd == K.KIND_WRITE
    wt = ts[mask]
    wl = lp[mask]
    order = np.argsort(wt, kind="stable")
    wt = wt[order]
    wl = wl[order]
    group = np.argsort(wl, kind="stable")  # stable keeps per-lpn time order
    wt = wt[group]
    wl = wl[group]
    counts = np.bincount(wl, minlength=logical_pages).astype(np.int64)
    offsets = np.zeros(logical_pages + 1, np.int64)
    np.cumsum(counts, out=offsets[1:])
    return OracleIndex(times=wt, offsets=offsets,
                       period_us=int(period_us), looping=bool(looping))


def build_policy_pack(policy, table=None, oracle=None):
    """Kernel Policy for a named policy.

    Returns (table, pack).  The baseline policy always runs the all
    2-state table; the others default to the normal-drift preset.
    """
    if policy not in POLICY_CODES:
        raise ValueError(f"unknown policy {policy!r}; expected one of "
                         f"{sorted(POLICY_CODES)}")
    if policy == "baseline":
        table = baseline_table()
    elif table is None:
        table = preset_table("normal3")
    if not isinstance(table, ModeAssignmentTable):
        raise TypeError("table must be a ModeAssignmentTable")
    code = POLICY_CODES[policy]
    if policy == "oracle":
        if oracle is None:
            raise ValueError("the oracle policy needs an OracleIndex")
        mode_states, assign, cap_us = table_arrays(table)
        pack = K.Policy(
            code=code,
            mode_states=mode_states,
            assign=assign,
            cap_us=cap_us,
            oracle_times=np.ascontiguousarray(oracle.times, np.int64),
            oracle_offsets=np.ascontiguousarray(oracle.offsets, np.int64),
            oracle_period=int(oracle.period_us),
            oracle_looping=1 if oracle.looping else 0,
        )
    else:
        pack = bare_policy(table, code=code)
    return table, pack


@dataclass(frozen=True)
class FtlCounters:
    """Snapshot of the FTL's cumulative activity counters."""

    host_pages_written: int = 0
    gc_page_migrations: int = 0
    scrub_page_migrations: int = 0
    total_pages_written: int = 0
    gc_invocations: int = 0
    scrub_invocations: int = 0
    erases: int = 0
    round_transitions: int = 0
    blocks_allocated: int = 0
    dummy_page_passes: int = 0
    reads: int = 0
    cold_reads: int = 0
    retired_blocks: int = 0
    events: int = 0

    @classmethod
    def from_array(cls, counters):
        return cls(
            host_pages_written=int(counters[K.C_HOST_PAGES]),
            gc_page_migrations=int(counters[K.C_GC_MIGRATIONS]),
            scrub_page_migrations=int(counters[K.C_SCRUB_MIGRATIONS]),
            total_pages_written=int(counters[K.C_TOTAL_PROGRAMS]),
            gc_invocations=int(counters[K.C_GC_INVOCATIONS]),
            scrub_invocations=int(counters[K.C_SCRUB_INVOCATIONS]),
            erases=int(counters[K.C_ERASES]),
            round_transitions=int(counters[K.C_ROUND_TRANSITIONS]),
            blocks_allocated=int(counters[K.C_BLOCKS_ALLOCATED]),
            dummy_page_passes=int(counters[K.C_DUMMY_PAGE_PASSES]),
            reads=int(counters[K.C_READS]),
            cold_reads=int(counters[K.C_COLD_READS]),
            retired_blocks=int(counters[K.C_RETIRED]),
            events=int(counters[K.C_EVENTS]),
        )

    def as_dict(self):
        return asdict(self)

    def to_csv(self):
        lines = ["counter,value"]
        for k, v in self.as_dict().items():
            lines.append(f"{k},{v}")
        return "\n".join(lines) + "\n"


_GC_CODE_NAMES = {
    K.GC_RECLAIMED: "reclaimed",
    K.GC_ADVANCED: "advanced",
    K.GC_NO_VICTIM: "no_victim",
}


class Ftl:
    """Page-mapped FTL over a FlashDevice."""

    def __init__(self, config, policy="dslc", table=None, oracle=None):
        self.policy_name = policy
        self.table, pack = build_policy_pack(policy, table=table, oracle=oracle)
        self.device = FlashDevice(config, table=self.table, policy=pack)

    @property
    def config(self):
        return self.device.config

    def chip_of_lpn(self, lpn):
        return lpn % self.device.geom.chips

    def mapping(self, lpn):
        """Physical (block, page) of an lpn, or None when unmapped."""
        loc = int(self.device.dev.mapping[lpn])
        if loc < 0:
            return None
        ppb = self.device.geom.pages_per_block
        return loc // ppb, loc % ppb

    def handle_write(self, lpn, now_us):
        """Serve one page write; returns its latency in microseconds."""
        d = self.device
        st, lat = K.host_write_k(d.dev, d.geom, d.timing, d.policy, lpn, now_us)
        if st == K.DEAD:
            raise DeviceDead(int(d.dev.counters[K.C_DEAD_CHIP]) - 1)
        return lat

    def handle_read(self, lpn, now_us):
        """Serve one page read; returns its latency in microseconds."""
        d = self.device
        st, lat = K.host_read_k(d.dev, d.geom, d.timing, d.policy, lpn, now_us)
        if st == K.INTEGRITY:
            raise RetentionViolation(lpn, now_us)
        return lat

    def scrub_expired(self, now_us):
        """One periodic scrub pass over every block."""
        d = self.device
        st = K.scrub_pass_k(d.dev, d.geom, d.timing, d.policy, now_us)
        if st == K.DEAD:
            raise DeviceDead(int(d.dev.counters[K.C_DEAD_CHIP]) - 1)

    def select_gc_victim(self, chip):
        """GREEDY victim for the chip, or None when nothing is collectable."""
        d = self.device
        g = K.select_victim_k(d.dev, d.geom, chip, K.NO_BLOCK)
        return None if g == K.NO_BLOCK else int(g)

    def run_gc(self, chip, now_us):
        """Collect one victim; returns 'reclaimed', 'advanced', or 'no_victim'."""
        d = self.device
        rc = K.run_gc_k(d.dev, d.geom, d.timing, d.policy, chip, now_us)
        if rc == K.GC_DEAD:
            raise DeviceDead(chip)
        return _GC_CODE_NAMES[rc]

    def activate_block(self, chip, states, now_us):
        """Ensure the chip has a writable active block of the given mode.

        Returns its global block id.
        """
        d = self.device
        hits = np.where(d.policy.mode_states == states)[0]
        if hits.size == 0:
            raise ValueError(f"{states}-state is not in this table's mode set")
        mi = int(hits[0])
        cur = int(d.dev.active[chip, mi])
        if cur != K.NO_BLOCK:
            if d.dev.write_ptr[cur] < d.geom.pages_per_block:
                return cur
            K.detach_active_k(d.dev, d.geom, cur)
        g = K.activate_hard_k(d.dev, d.geom, d.timing, d.policy, chip, mi, now_us)
        if g == K.NO_BLOCK:
            raise DeviceDead(chip)
        return int(g)

    @property
    def counters(self):
        return FtlCounters.from_array(self.device.dev.counters)

    def pwe_by_mode(self):
        """Maximum observed page writes per erase cycle, keyed by states.

        Folds in still-live blocks' current cycle so a run that never
        erased a block still reports honestly.
        """
        d = self.device
        out = {}
        for mi, states in enumerate(d.policy.mode_states):
            peak = int(d.dev.max_cycle[mi])
            mask = d.dev.mode_idx == mi
            if mask.any():
                live = int(d.dev.cycle_writes[mask].max())
                peak = max(peak, live)
            out[int(states)] = peak
        return out

    def mode_block_counts(self):
        """Non-Clean, non-retired block count per mode states value."""
        d = self.device
        out = {}
        for mi, states in enumerate(d.policy.mode_states):
            mask = (d.dev.mode_idx == mi) & ~d.dev.retired
            out[int(states)] = int(mask.sum())
        return out
