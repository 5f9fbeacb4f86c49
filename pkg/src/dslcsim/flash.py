"""Device geometry, raw flash operations, and latency accounting.

The mutable state lives in the flat arrays of _kernels.Dev; this module
wraps them in a configuration dataclass, a FlashDevice handle with
per-operation methods, and a read-only Block view used by tests and
debugging tools.  Latencies are microseconds throughout; bandwidth is
megabytes per second with 1 MB/s = 1 byte/us.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .retention import ModeAssignmentTable, preset_table


@dataclass(frozen=True)
class DeviceConfig:
    """Device geometry, timing, and FTL tunables."""

    chips: int = 8
    blocks_per_chip: int = 8192
    pages_per_block: int = 128
    page_size_bytes: int = 8192
    endurance: int = 50_000
    read_us: float = 35.0
    write_us: float = 350.0
    erase_us: float = 1500.0
    transfer_mb_per_s: float = 200.0
    gc_clean_threshold: float = 0.05
    scrub_period_s: float = 60.0
    overprovision: float = 0.0
    dummy_write_mult: float = 1.0

    def __post_init__(self):
        for name in ("chips", "blocks_per_chip", "pages_per_block",
                     "page_size_bytes", "endurance"):
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        for name in ("read_us", "write_us", "erase_us", "transfer_mb_per_s",
                     "scrub_period_s"):
            v = getattr(self, name)
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v!r}")
        if not 0.0 < self.gc_clean_threshold < 1.0:
            raise ValueError("gc_clean_threshold must lie strictly in (0, 1)")
        if not 0.0 <= self.overprovision < 1.0:
            raise ValueError("overprovision must lie in [0, 1)")
        if self.dummy_write_mult < 0.0:
            raise ValueError("dummy_write_mult must be non-negative")
        # The scrubber treats blocks expiring within one period as expired;
        # that rescue only covers every block if the period never exceeds
        # the shortest retention window any mode can carry (one hour).
        if self.scrub_period_s > 3600.0:
            raise ValueError("scrub_period_s must not exceed 3600")
        if self.logical_pages < 1:
            raise ValueError("overprovision leaves no logical space")

    @property
    def total_blocks(self):
        return self.chips * self.blocks_per_chip

    @property
    def total_pages(self):
        return self.total_blocks * self.pages_per_block

    @property
    def logical_pages(self):
        return int(self.total_pages * (1.0 - self.overprovision))

    @property
    def us_per_byte(self):
        return 1.0 / self.transfer_mb_per_s

    @property
    def scrub_period_us(self):
        return int(round(self.scrub_period_s * 1e6))

    def transfer_us(self, n_bytes):
        return n_bytes * self.us_per_byte


def build_geom(config):
    return K.Geom(
        chips=config.chips,
        blocks_per_chip=config.blocks_per_chip,
        pages_per_block=config.pages_per_block,
        page_size=config.page_size_bytes,
        endurance=config.endurance,
        logical_pages=config.logical_pages,
        total_blocks=config.total_blocks,
    )


def build_timing(config):
    return K.Timing(
        read_us=config.read_us,
        write_us=config.write_us,
        erase_us=config.erase_us,
        us_per_byte=config.us_per_byte,
        dummy_mult=config.dummy_write_mult,
        scrub_period_us=config.scrub_period_us,
        gc_threshold=config.gc_clean_threshold,
    )


def table_arrays(table):
    """Kernel-side arrays for a mode assignment table.

    Returns (mode_states, assign, cap_us): the descending state counts,
    the category x age-bucket grid of state counts, and the per-mode
    per-bucket retention capacity in integer microseconds (UNBOUNDED for
    the final 2-state mode).
    """
    modes = table.mode_set
    mode_states = np.array([m.states for m in modes], np.int64)
    assign = np.zeros((4, 5), np.int64)
    for c in range(4):
        for b in range(5):
            assign[c, b] = table.grid[c][b]
    cap_us = np.zeros((len(modes), 5), np.int64)
    for i, mode in enumerate(modes):
        for b in range(5):
            hours = table.mode_retention_capacity(mode, b)
            if hours == float("inf"):
                cap_us[i, b] = K.UNBOUNDED
            else:
                cap_us[i, b] = int(round(hours * 3_600_000_000))
    return mode_states, assign, cap_us


_EMPTY_I64 = np.zeros(0, np.int64)
_EMPTY_OFFSETS = np.zeros(1, np.int64)


def bare_policy(table, code=K.POLICY_DSLC):
    """Policy pack without an oracle index (baseline and residence modes)."""
    mode_states, assign, cap_us = table_arrays(table)
    return K.Policy(
        code=code,
        mode_states=mode_states,
        assign=assign,
        cap_us=cap_us,
        oracle_times=_EMPTY_I64,
        oracle_offsets=_EMPTY_OFFSETS,
        oracle_period=0,
        oracle_looping=0,
    )


class FlashDevice:
    """A formatted device: flat kernel state plus its geometry and timing."""

    def __init__(self, config, table=None, policy=None):
        if table is None:
            table = preset_table("normal3")
        if not isinstance(table, ModeAssignmentTable):
            raise TypeError("table must be a ModeAssignmentTable")
        self.config = config
        self.table = table
        self.geom = build_geom(config)
        self.timing = build_timing(config)
        self.policy = policy if policy is not None else bare_policy(table)
        self.dev = K.new_dev(self.geom, int(self.policy.mode_states.shape[0]))

    @property
    def n_modes(self):
        return int(self.policy.mode_states.shape[0])

    def chip_of(self, gid):
        return gid // self.geom.blocks_per_chip

    def loc(self, gid, page_index):
        return gid * self.geom.pages_per_block + page_index

    # Raw operations; all take a global block id and return latency in us.

    def program_page(self, gid, page_index, lpn, now):
        return K.program_page_k(self.dev, self.geom, self.timing, self.policy,
                                gid, page_index, lpn, now)

    def invalidate(self, gid, page_index):
        K.invalidate_k(self.dev, self.geom, self.loc(gid, page_index))

    def dummy_write(self, gid):
        return K.dummy_write_k(self.dev, self.geom, self.timing, self.policy, gid)

    def erase_block(self, gid):
        return K.erase_block_k(self.dev, self.geom, self.timing, self.policy, gid)

    def block(self, gid):
        return Block(self, gid)

    def iter_blocks(self):
        return (Block(self, g) for g in range(self.geom.total_blocks))

    def clean_count(self, chip):
        return int(self.dev.clean_count[chip])

    def ledger(self):
        return LatencyLedger.from_busy(self.dev.busy)


@dataclass(frozen=True)
class Block:
    """Read-only view of one block's state."""

    device: FlashDevice
    gid: int

    @property
    def chip(self):
        return self.device.chip_of(self.gid)

    @property
    def is_clean(self):
        return self.device.dev.mode_idx[self.gid] == K.CLEAN

    @property
    def states(self):
        """Voltage-state count of the current mode, or None when Clean."""
        mi = self.device.dev.mode_idx[self.gid]
        if mi == K.CLEAN:
            return None
        return int(self.device.policy.mode_states[mi])

    @property
    def round_no(self):
        return int(self.device.dev.round_no[self.gid])

    @property
    def write_ptr(self):
        return int(self.device.dev.write_ptr[self.gid])

    @property
    def valid_count(self):
        return int(self.device.dev.valid_count[self.gid])

    @property
    def pe_count(self):
        return int(self.device.dev.pe_count[self.gid])

    @property
    def retired(self):
        return bool(self.device.dev.retired[self.gid])

    @property
    def is_active(self):
        return bool(self.device.dev.is_active[self.gid])

    @property
    def deadline_us(self):
        """Retention deadline of the current round, or None when unbounded."""
        d = int(self.device.dev.deadline[self.gid])
        return None if d == K.UNBOUNDED else d

    @property
    def is_full(self):
        return self.write_ptr == self.device.geom.pages_per_block

    def page_lpn(self, page_index):
        """Owning lpn of a Valid page, 'free', or 'invalid'."""
        v = int(self.device.dev.page_lpn[self.device.loc(self.gid, page_index)])
        if v == K.FREE:
            return "free"
        if v == K.INVALID:
            return "invalid"
        return v


@dataclass(frozen=True)
class LatencyLedger:
    """Accumulated device busy time in microseconds, by component."""

    read_us: float = 0.0
    write_us: float = 0.0
    erase_us: float = 0.0
    dummy_us: float = 0.0
    transfer_us: float = 0.0
    per_chip_us: tuple = field(default_factory=tuple)

    @classmethod
    def from_busy(cls, busy):
        totals = busy.sum(axis=0)
        return cls(
            read_us=float(totals[K.B_READ]),
            write_us=float(totals[K.B_WRITE]),
            erase_us=float(totals[K.B_ERASE]),
            dummy_us=float(totals[K.B_DUMMY]),
            transfer_us=float(totals[K.B_XFER]),
            per_chip_us=tuple(float(x) for x in busy.sum(axis=1)),
        )

    @property
    def total_us(self):
        return (self.read_us + self.write_us + self.erase_us
                + self.dummy_us + self.transfer_us)

    @property
    def busiest_chip_us(self):
        return max(self.per_chip_us) if self.per_chip_us else 0.0
