"""Flat-array device state and the hot transition kernels.

All mutable simulation state lives in numpy arrays bundled into the Dev
namedtuple, and every state transition is a plain function over those
arrays.  The same source compiles under numba's nopython mode (the
default when numba is importable) or runs as ordinary Python, selected by
the DSLCSIM_JIT environment variable: "0"/"off" forces the pure-Python
path, "1"/"on" requires numba, anything else auto-detects.

The functions form an acyclic call graph on purpose: numba cannot compile
mutual recursion, so nested garbage collection is expressed as run_gc
calling a separate non-nesting variant (gc_basic) rather than itself.

Expected control flow (device death, integrity violations) is reported
through status codes; raises are reserved for invariant violations that
indicate a simulator bug.
"""

import os
from collections import namedtuple

import numpy as np


def _jit_requested():
    flag = os.environ.get("DSLCSIM_JIT", "auto").strip().lower()
    if flag in ("0", "off", "false", "no"):
        return False
    if flag in ("1", "on", "true", "yes"):
        return True
    return None


_flag = _jit_requested()
if _flag is False:
    NUMBA_ENABLED = False
else:
    try:
        from numba import njit as _njit
        NUMBA_ENABLED = True
    except ImportError:
        if _flag is True:
            raise RuntimeError("DSLCSIM_JIT=1 but numba is not importable")
        NUMBA_ENABLED = False

BACKEND = "numba" if NUMBA_ENABLED else "python"

if NUMBA_ENABLED:
    def kernel(fn):
        return _njit(cache=True, nogil=True)(fn)
else:
    def kernel(fn):
        return fn


# Page-state sentinels inside page_lpn (values >= 0 are the owning LPN).
FREE = -1
INVALID = -2

# Block-mode sentinel inside mode_idx.
CLEAN = -1

NO_BLOCK = -1
NO_PAGE = -1

# Deadline / duration sentinel: effectively never.
UNBOUNDED = np.iinfo(np.int64).max

# Status codes returned by event-level kernels.
OK = 0
DEAD = 1          # no block obtainable for a required program
INTEGRITY = 2     # mapped read past its block's retention deadline

# run_gc outcome codes.
GC_RECLAIMED = 0  # victim erased to Clean
GC_ADVANCED = 1   # victim dummy-written into its next round
GC_NO_VICTIM = 2
GC_DEAD = 3

# Policy codes.
POLICY_BASELINE = 0
POLICY_DSLC = 1
POLICY_ORACLE = 2

# Retention-category bounds in integer microseconds (right-closed).
CAT_BOUND_0_US = 3_600_000_000
CAT_BOUND_1_US = 36_000_000_000
CAT_BOUND_2_US = 259_200_000_000

# Longevity assigned to data with no future write (10 years).
MAX_LONGEVITY_US = 315_360_000_000_000

# Counter slot indices (dev.counters).
C_HOST_PAGES = 0
C_READS = 1
C_COLD_READS = 2
C_GC_INVOCATIONS = 3
C_GC_MIGRATIONS = 4
C_SCRUB_INVOCATIONS = 5
C_SCRUB_MIGRATIONS = 6
C_ERASES = 7
C_ROUND_TRANSITIONS = 8
C_BLOCKS_ALLOCATED = 9
C_TOTAL_PROGRAMS = 10
C_DUMMY_PAGE_PASSES = 11
C_RETIRED = 12
C_EVENTS = 13
C_DEAD_CHIP = 14  # failing chip + 1, 0 while alive
N_COUNTERS = 15

# Busy-ledger component indices (dev.busy columns).
B_READ = 0
B_WRITE = 1
B_ERASE = 2
B_DUMMY = 3
B_XFER = 4
N_BUSY = 5

# Event kinds in replay arrays.
KIND_READ = 0
KIND_WRITE = 1

# Replay scratch state indices (sim array).
SIM_NEXT_SCRUB = 0
SIM_NEXT_SNAP = 1
SIM_SNAP_EVERY = 2
SIM_SNAP_N = 3
SIM_LAST_NOW = 4
N_SIM = 5


Dev = namedtuple("Dev", [
    "mapping",        # int64[logical_pages]: packed page location or NO_PAGE
    "page_lpn",       # int64[total_pages]: owning lpn, FREE, or INVALID
    "pe_count",       # int64[total_blocks]
    "mode_idx",       # int64[total_blocks]: index into pol.mode_states, CLEAN
    "round_no",       # int64[total_blocks]: 1..pwe while in use, 0 when Clean
    "write_ptr",      # int64[total_blocks]: next in-order page index
    "valid_count",    # int64[total_blocks]
    "round_start",    # int64[total_blocks]: first program time of the round, -1
    "deadline",       # int64[total_blocks]: retention deadline or UNBOUNDED
    "cycle_writes",   # int64[total_blocks]: programs since last erase
    "retired",        # bool_[total_blocks]
    "is_active",      # bool_[total_blocks]
    "active",         # int64[chips, n_modes]: active block per mode or NO_BLOCK
    "clean_count",    # int64[chips]
    "spare_count",    # int64[chips]: idle advanced blocks (GC products not yet reused)
    "counters",       # int64[N_COUNTERS]
    "busy",           # float64[chips, N_BUSY] accumulated microseconds
    "max_cycle",      # int64[n_modes]: max cycle_writes seen at erase per mode
])

Geom = namedtuple("Geom", [
    "chips", "blocks_per_chip", "pages_per_block", "page_size",
    "endurance", "logical_pages", "total_blocks",
])

Timing = namedtuple("Timing", [
    "read_us", "write_us", "erase_us", "us_per_byte", "dummy_mult",
    "scrub_period_us", "gc_threshold",
])

Policy = namedtuple("Policy", [
    "code", "mode_states", "assign", "cap_us",
    "oracle_times", "oracle_offsets", "oracle_period", "oracle_looping",
])


def new_dev(geom, n_modes):
    """Freshly-formatted device: every block Clean, nothing mapped."""
    tb = geom.total_blocks
    return Dev(
        mapping=np.full(geom.logical_pages, NO_PAGE, np.int64),
        page_lpn=np.full(tb * geom.pages_per_block, FREE, np.int64),
        pe_count=np.zeros(tb, np.int64),
        mode_idx=np.full(tb, CLEAN, np.int64),
        round_no=np.zeros(tb, np.int64),
        write_ptr=np.zeros(tb, np.int64),
        valid_count=np.zeros(tb, np.int64),
        round_start=np.full(tb, -1, np.int64),
        deadline=np.full(tb, UNBOUNDED, np.int64),
        cycle_writes=np.zeros(tb, np.int64),
        retired=np.zeros(tb, np.bool_),
        is_active=np.zeros(tb, np.bool_),
        active=np.full((geom.chips, n_modes), NO_BLOCK, np.int64),
        clean_count=np.full(geom.chips, geom.blocks_per_chip, np.int64),
        spare_count=np.zeros(geom.chips, np.int64),
        counters=np.zeros(N_COUNTERS, np.int64),
        busy=np.zeros((geom.chips, N_BUSY), np.float64),
        max_cycle=np.zeros(n_modes, np.int64),
    )


@kernel
def age_bucket_k(pe, endurance):
    b = (5 * pe) // endurance
    if b > 4:
        b = 4
    return b


@kernel
def categorize_us_k(dur_us):
    if dur_us <= CAT_BOUND_0_US:
        return 0
    if dur_us <= CAT_BOUND_1_US:
        return 1
    if dur_us <= CAT_BOUND_2_US:
        return 2
    return 3


@kernel
def mode_index_k(pol, states):
    for i in range(pol.mode_states.shape[0]):
        if pol.mode_states[i] == states:
            return i
    raise RuntimeError("state count missing from the mode set")


@kernel
def program_page_k(dev, geom, timing, pol, gid, page_index, lpn, now):
    """Program one page in order; anchors the round deadline on page 0."""
    if dev.retired[gid]:
        raise RuntimeError("program on a retired block")
    mi = dev.mode_idx[gid]
    if mi == CLEAN:
        raise RuntimeError("program on a Clean block")
    if page_index != dev.write_ptr[gid] or page_index >= geom.pages_per_block:
        raise RuntimeError("out-of-order page program")
    loc = gid * geom.pages_per_block + page_index
    if dev.page_lpn[loc] != FREE:
        raise RuntimeError("program on a non-Free page")
    if page_index == 0:
        dev.round_start[gid] = now
        cap = pol.cap_us[mi, age_bucket_k(dev.pe_count[gid], geom.endurance)]
        if cap == UNBOUNDED:
            dev.deadline[gid] = UNBOUNDED
        else:
            dev.deadline[gid] = now + cap
    dev.page_lpn[loc] = lpn
    dev.valid_count[gid] += 1
    dev.write_ptr[gid] += 1
    dev.cycle_writes[gid] += 1
    dev.counters[C_TOTAL_PROGRAMS] += 1
    chip = gid // geom.blocks_per_chip
    dev.busy[chip, B_WRITE] += timing.write_us
    dev.busy[chip, B_XFER] += geom.page_size * timing.us_per_byte
    return timing.write_us


@kernel
def invalidate_k(dev, geom, loc):
    if dev.page_lpn[loc] < 0:
        raise RuntimeError("invalidate on a page that is not Valid")
    dev.page_lpn[loc] = INVALID
    dev.valid_count[loc // geom.pages_per_block] -= 1


@kernel
def dummy_write_k(dev, geom, timing, pol, gid):
    """Advance a fully-drained block to its next round without an erase."""
    mi = dev.mode_idx[gid]
    if mi == CLEAN or dev.retired[gid]:
        raise RuntimeError("dummy write on a Clean or retired block")
    if dev.valid_count[gid] != 0:
        raise RuntimeError("dummy write with Valid pages present")
    if dev.round_no[gid] >= pol.mode_states[mi] - 1:
        raise RuntimeError("dummy write on the final round")
    base = gid * geom.pages_per_block
    for p in range(geom.pages_per_block):
        dev.page_lpn[base + p] = FREE
    dev.round_no[gid] += 1
    dev.write_ptr[gid] = 0
    dev.deadline[gid] = UNBOUNDED
    dev.round_start[gid] = -1
    chip = gid // geom.blocks_per_chip
    lat = geom.pages_per_block * timing.write_us * timing.dummy_mult
    dev.busy[chip, B_DUMMY] += lat
    dev.counters[C_ROUND_TRANSITIONS] += 1
    dev.counters[C_DUMMY_PAGE_PASSES] += geom.pages_per_block
    return lat


@kernel
def erase_block_k(dev, geom, timing, pol, gid):
    """Erase a drained block, or retire it at the endurance limit.

    Returns the erase latency, 0.0 when the block retires instead.
    """
    mi = dev.mode_idx[gid]
    if mi == CLEAN or dev.retired[gid]:
        raise RuntimeError("erase on a Clean or retired block")
    if dev.valid_count[gid] != 0:
        raise RuntimeError("erase with Valid pages present")
    if dev.is_active[gid]:
        raise RuntimeError("erase on an installed active block")
    if dev.cycle_writes[gid] > geom.pages_per_block * (pol.mode_states[mi] - 1):
        raise RuntimeError("write budget exceeded within one erase cycle")
    if dev.cycle_writes[gid] > dev.max_cycle[mi]:
        dev.max_cycle[mi] = dev.cycle_writes[gid]
    base = gid * geom.pages_per_block
    for p in range(geom.pages_per_block):
        dev.page_lpn[base + p] = FREE
    dev.mode_idx[gid] = CLEAN
    dev.round_no[gid] = 0
    dev.write_ptr[gid] = 0
    dev.deadline[gid] = UNBOUNDED
    dev.round_start[gid] = -1
    dev.cycle_writes[gid] = 0
    if dev.pe_count[gid] >= geom.endurance:
        dev.retired[gid] = True
        dev.counters[C_RETIRED] += 1
        return 0.0
    dev.pe_count[gid] += 1
    chip = gid // geom.blocks_per_chip
    dev.clean_count[chip] += 1
    dev.counters[C_ERASES] += 1
    dev.busy[chip, B_ERASE] += timing.erase_us
    return timing.erase_us


@kernel
def pick_clean_k(dev, geom, chip):
    """Least-worn Clean block on the chip, ties to the lowest index."""
    lo = chip * geom.blocks_per_chip
    hi = lo + geom.blocks_per_chip
    best = NO_BLOCK
    best_pe = 0
    for g in range(lo, hi):
        if dev.retired[g] or dev.mode_idx[g] != CLEAN:
            continue
        if best == NO_BLOCK or dev.pe_count[g] < best_pe:
            best = g
            best_pe = dev.pe_count[g]
    return best


@kernel
def pick_spare_k(dev, geom, chip, mi):
    """Idle mid-cycle block (advanced by GC, not installed); mi -1 = any mode."""
    lo = chip * geom.blocks_per_chip
    hi = lo + geom.blocks_per_chip
    best = NO_BLOCK
    best_pe = 0
    for g in range(lo, hi):
        if dev.retired[g] or dev.is_active[g]:
            continue
        m = dev.mode_idx[g]
        if m == CLEAN:
            continue
        if mi >= 0 and m != mi:
            continue
        if dev.write_ptr[g] != 0 or dev.valid_count[g] != 0:
            continue
        if best == NO_BLOCK or dev.pe_count[g] < best_pe:
            best = g
            best_pe = dev.pe_count[g]
    return best


@kernel
def install_active_k(dev, geom, chip, mi, gid):
    if dev.active[chip, mi] != NO_BLOCK:
        raise RuntimeError("installing over an occupied active slot")
    dev.active[chip, mi] = gid
    dev.is_active[gid] = True
    dev.counters[C_BLOCKS_ALLOCATED] += 1


@kernel
def detach_active_k(dev, geom, gid):
    chip = gid // geom.blocks_per_chip
    mi = dev.mode_idx[gid]
    if mi != CLEAN and dev.active[chip, mi] == gid:
        dev.active[chip, mi] = NO_BLOCK
    dev.is_active[gid] = False


@kernel
def activate_no_gc_k(dev, geom, chip, mi):
    """Fill the (chip, mi) active slot from a Clean block or an idle spare.

    Returns the installed block, or NO_BLOCK when neither source exists.
    The slot must be empty.
    """
    gid = pick_clean_k(dev, geom, chip)
    if gid != NO_BLOCK:
        dev.mode_idx[gid] = mi
        dev.round_no[gid] = 1
        dev.clean_count[chip] -= 1
    else:
        gid = pick_spare_k(dev, geom, chip, mi)
        if gid == NO_BLOCK:
            return NO_BLOCK
        dev.spare_count[chip] -= 1
    install_active_k(dev, geom, chip, mi, gid)
    return gid


@kernel
def select_victim_k(dev, geom, chip, exclude):
    """GREEDY victim: fully-written block with fewest Valid pages.

    Ties break to lower pe_count, then lower index.  Mode and round are
    deliberately ignored.
    """
    lo = chip * geom.blocks_per_chip
    hi = lo + geom.blocks_per_chip
    best = NO_BLOCK
    best_valid = 0
    best_pe = 0
    for g in range(lo, hi):
        if g == exclude or dev.retired[g]:
            continue
        if dev.write_ptr[g] != geom.pages_per_block:
            continue
        v = dev.valid_count[g]
        pe = dev.pe_count[g]
        if best == NO_BLOCK or v < best_valid or (v == best_valid and pe < best_pe):
            best = g
            best_valid = v
            best_pe = pe
    return best


@kernel
def migrate_page_k(dev, geom, timing, pol, src_loc, dest_gid, now, is_scrub):
    """Copy one Valid page into the destination's write point."""
    lpn = dev.page_lpn[src_loc]
    idx = dev.write_ptr[dest_gid]
    program_page_k(dev, geom, timing, pol, dest_gid, idx, lpn, now)
    invalidate_k(dev, geom, src_loc)
    dev.mapping[lpn] = dest_gid * geom.pages_per_block + idx
    chip = dest_gid // geom.blocks_per_chip
    dev.busy[chip, B_READ] += timing.read_us
    dev.busy[chip, B_XFER] += geom.page_size * timing.us_per_byte
    if is_scrub:
        dev.counters[C_SCRUB_MIGRATIONS] += 1
    else:
        dev.counters[C_GC_MIGRATIONS] += 1


@kernel
def finish_victim_k(dev, geom, timing, pol, gid):
    """Advance or erase a fully-migrated victim; may retire it."""
    mi = dev.mode_idx[gid]
    if dev.round_no[gid] < pol.mode_states[mi] - 1:
        dummy_write_k(dev, geom, timing, pol, gid)
        return GC_ADVANCED
    erase_block_k(dev, geom, timing, pol, gid)
    if dev.retired[gid]:
        return GC_NO_VICTIM  # caller treats retirement as "keep looking"
    return GC_RECLAIMED


@kernel
def maybe_install_k(dev, geom, chip, gid):
    """Reinstall an advanced victim as its own mode's active block.

    Only when that slot is empty or holds a full block; otherwise the
    block stays idle until activation picks it up as a spare.
    """
    mi = dev.mode_idx[gid]
    cur = dev.active[chip, mi]
    if cur == gid:
        raise RuntimeError("advanced victim still installed")
    if cur != NO_BLOCK:
        if dev.write_ptr[cur] != geom.pages_per_block:
            dev.spare_count[chip] += 1
            return
        detach_active_k(dev, geom, cur)
    install_active_k(dev, geom, chip, mi, gid)


@kernel
def spare_erase_activate_k(dev, geom, timing, pol, chip, mi):
    """Early-erase an idle mid-cycle block so mode mi can activate.

    Sacrifices the remaining rounds of a spare of any mode to keep the
    chip alive when no Clean block and no spare of the wanted mode
    exists.  Returns the installed block or NO_BLOCK.
    """
    while True:
        g = pick_spare_k(dev, geom, chip, -1)
        if g == NO_BLOCK:
            return NO_BLOCK
        dev.spare_count[chip] -= 1
        erase_block_k(dev, geom, timing, pol, g)
        if not dev.retired[g]:
            return activate_no_gc_k(dev, geom, chip, mi)


@kernel
def next_write_k(times, offsets, period, looping, lpn, now):
    """Smallest future write time of lpn, or UNBOUNDED.

    times/offsets is a CSR-style layout of per-LPN sorted write times for
    epoch 0; with looping, later epochs are the same times shifted by
    whole periods, so only two period candidates need checking.
    """
    s = offsets[lpn]
    e = offsets[lpn + 1]
    if e <= s:
        return UNBOUNDED
    window = times[s:e]
    if looping == 0:
        i = np.searchsorted(window, now, side="right")
        if i < e - s:
            return window[i]
        return UNBOUNDED
    w0 = window[0]
    if now < w0:
        k = 0
    else:
        k = (now - w0) // period
    for kk in range(k, k + 2):
        shift = kk * period
        i = np.searchsorted(window, now - shift, side="right")
        if i < e - s:
            return window[i] + shift
    return w0 + (k + 2) * period


@kernel
def candidate_pe_k(dev, geom, chip, mi):
    """Age estimate of the block a write to (chip, mi) would land in.

    Mirrors the activation preference order; the GC case estimates the
    reclaimed block as the current victim after one more erase.
    """
    gid = dev.active[chip, mi]
    if gid != NO_BLOCK and dev.write_ptr[gid] < geom.pages_per_block:
        return dev.pe_count[gid]
    g = pick_clean_k(dev, geom, chip)
    if g != NO_BLOCK:
        return dev.pe_count[g]
    g = pick_spare_k(dev, geom, chip, mi)
    if g != NO_BLOCK:
        return dev.pe_count[g]
    g = select_victim_k(dev, geom, chip, NO_BLOCK)
    if g != NO_BLOCK:
        pe = dev.pe_count[g] + 1
        if pe > geom.endurance:
            pe = geom.endurance
        return pe
    return 0


@kernel
def landing_window_k(dev, geom, timing, pol, chip, mi, now):
    """Retention window left for a page written to (chip, mi) right now.

    An in-progress round keeps its anchored deadline, so late arrivals
    get only the remainder; a fresh round would anchor at the landing
    block's age-bucket capacity.  The scrub-check period is subtracted
    because the margin-based scrub rescues pages that close to expiry.
    """
    cap = UNBOUNDED
    gid = dev.active[chip, mi]
    if gid != NO_BLOCK and dev.write_ptr[gid] < geom.pages_per_block \
            and dev.deadline[gid] != UNBOUNDED:
        cap = dev.deadline[gid] - now
    else:
        pe = candidate_pe_k(dev, geom, chip, mi)
        cap = pol.cap_us[mi, age_bucket_k(pe, geom.endurance)]
    if cap == UNBOUNDED:
        return UNBOUNDED
    return cap - timing.scrub_period_us


@kernel
def block_window_k(dev, geom, timing, pol, gid, now):
    """Retention window left for a page programmed into gid right now.

    Exact form of landing_window_k for a known landing block: an
    in-progress round keeps its anchored deadline, a fresh round anchors
    at the block's own age-bucket capacity.
    """
    mi = dev.mode_idx[gid]
    if pol.mode_states[mi] == 2:
        return UNBOUNDED
    if dev.write_ptr[gid] > 0 and dev.deadline[gid] != UNBOUNDED:
        cap = dev.deadline[gid] - now
    else:
        cap = pol.cap_us[mi, age_bucket_k(dev.pe_count[gid], geom.endurance)]
    if cap == UNBOUNDED:
        return UNBOUNDED
    return cap - timing.scrub_period_us


@kernel
def oracle_dur_k(pol, lpn, now):
    """Known time until lpn's next write; write-once data never returns."""
    nxt = next_write_k(pol.oracle_times, pol.oracle_offsets,
                       pol.oracle_period, pol.oracle_looping, lpn, now)
    if nxt == UNBOUNDED:
        return MAX_LONGEVITY_US
    return nxt - now


@kernel
def migration_mode_k(dev, geom, timing, pol, chip, lpn, mi_from, now):
    """Destination mode for relocating the Valid page lpn out of mi_from.

    Relocation keeps the source block's mode.  Under the oracle policy
    the time of the next write is known, so a landing window too short
    for the page's remaining lifetime steps the destination toward fewer
    states; 2-state never expires and always suffices.
    """
    if pol.code != POLICY_ORACLE:
        return mi_from
    dur = oracle_dur_k(pol, lpn, now)
    mi = mi_from
    while mi < pol.mode_states.shape[0] - 1:
        if landing_window_k(dev, geom, timing, pol, chip, mi, now) >= dur:
            break
        mi += 1
    return mi


@kernel
def gc_basic_k(dev, geom, timing, pol, chip, now, exclude):
    """One-victim GC with no nested collection for its destinations.

    Retries the next candidate when a victim retires.  Returns a
    GC_* code; destinations come from Clean blocks and idle spares,
    with an early erase of a foreign-mode spare as the last resort.
    """
    for _attempt in range(geom.blocks_per_chip):
        victim = select_victim_k(dev, geom, chip, exclude)
        if victim == NO_BLOCK:
            return GC_NO_VICTIM
        if dev.is_active[victim]:
            detach_active_k(dev, geom, victim)
        dev.counters[C_GC_INVOCATIONS] += 1
        mi_v = dev.mode_idx[victim]
        base = victim * geom.pages_per_block
        for p in range(geom.pages_per_block):
            loc = base + p
            if dev.page_lpn[loc] < 0:
                continue
            mi_t = migration_mode_k(dev, geom, timing, pol, chip,
                                    dev.page_lpn[loc], mi_v, now)
            dest = NO_BLOCK
            for _try in range(pol.mode_states.shape[0]):
                dest = dev.active[chip, mi_t]
                if dest == NO_BLOCK or dev.write_ptr[dest] >= geom.pages_per_block:
                    if dest != NO_BLOCK:
                        detach_active_k(dev, geom, dest)
                    dest = activate_no_gc_k(dev, geom, chip, mi_t)
                    if dest == NO_BLOCK:
                        dest = spare_erase_activate_k(dev, geom, timing, pol,
                                                      chip, mi_t)
                    if dest == NO_BLOCK:
                        return GC_DEAD
                # migration_mode_k previewed the landing block; verify the
                # block actually landed on and demote further if its
                # window falls short (oracle only; 2-state never expires).
                if pol.code == POLICY_ORACLE and mi_t < pol.mode_states.shape[0] - 1 \
                        and block_window_k(dev, geom, timing, pol, dest, now) \
                            < oracle_dur_k(pol, dev.page_lpn[loc], now):
                    mi_t += 1
                    continue
                break
            migrate_page_k(dev, geom, timing, pol, loc, dest, now, 0)
        code = finish_victim_k(dev, geom, timing, pol, victim)
        if code == GC_NO_VICTIM:
            continue  # victim retired; try the next candidate
        if code == GC_ADVANCED:
            maybe_install_k(dev, geom, chip, victim)
        return code
    return GC_NO_VICTIM


@kernel
def run_gc_k(dev, geom, timing, pol, chip, now):
    """One-victim GC; a destination shortage may trigger one nested level.

    Returns a GC_* code.  Retries the next candidate when a victim
    retires at its final round.
    """
    for _attempt in range(geom.blocks_per_chip):
        victim = select_victim_k(dev, geom, chip, NO_BLOCK)
        if victim == NO_BLOCK:
            return GC_NO_VICTIM
        if dev.is_active[victim]:
            detach_active_k(dev, geom, victim)
        dev.counters[C_GC_INVOCATIONS] += 1
        mi_v = dev.mode_idx[victim]
        base = victim * geom.pages_per_block
        for p in range(geom.pages_per_block):
            loc = base + p
            if dev.page_lpn[loc] < 0:
                continue
            mi_t = migration_mode_k(dev, geom, timing, pol, chip,
                                    dev.page_lpn[loc], mi_v, now)
            dest = NO_BLOCK
            for _try in range(pol.mode_states.shape[0]):
                dest = dev.active[chip, mi_t]
                if dest == NO_BLOCK or dev.write_ptr[dest] >= geom.pages_per_block:
                    if dest != NO_BLOCK:
                        detach_active_k(dev, geom, dest)
                    dest = activate_no_gc_k(dev, geom, chip, mi_t)
                    if dest == NO_BLOCK:
                        # Nested collection, excluding the in-flight victim.
                        for _inner in range(geom.blocks_per_chip):
                            rc = gc_basic_k(dev, geom, timing, pol, chip, now, victim)
                            if rc == GC_DEAD or rc == GC_NO_VICTIM:
                                break
                            cur = dev.active[chip, mi_t]
                            if cur != NO_BLOCK:
                                if dev.write_ptr[cur] < geom.pages_per_block:
                                    break
                                # The nested pass filled the slot to the brim;
                                # retire it to the victim pool and try again.
                                detach_active_k(dev, geom, cur)
                            if activate_no_gc_k(dev, geom, chip, mi_t) != NO_BLOCK:
                                break
                        dest = dev.active[chip, mi_t]
                        if dest != NO_BLOCK and dev.write_ptr[dest] >= geom.pages_per_block:
                            detach_active_k(dev, geom, dest)
                            dest = NO_BLOCK
                        if dest == NO_BLOCK:
                            dest = activate_no_gc_k(dev, geom, chip, mi_t)
                        if dest == NO_BLOCK:
                            dest = spare_erase_activate_k(dev, geom, timing, pol,
                                                          chip, mi_t)
                        if dest == NO_BLOCK:
                            return GC_DEAD
                # migration_mode_k previewed the landing block; verify the
                # block actually landed on and demote further if its
                # window falls short (oracle only; 2-state never expires).
                if pol.code == POLICY_ORACLE and mi_t < pol.mode_states.shape[0] - 1 \
                        and block_window_k(dev, geom, timing, pol, dest, now) \
                            < oracle_dur_k(pol, dev.page_lpn[loc], now):
                    mi_t += 1
                    continue
                break
            migrate_page_k(dev, geom, timing, pol, loc, dest, now, 0)
        code = finish_victim_k(dev, geom, timing, pol, victim)
        if code == GC_NO_VICTIM:
            continue
        if code == GC_ADVANCED:
            maybe_install_k(dev, geom, chip, victim)
        return code
    return GC_NO_VICTIM


@kernel
def activate_hard_k(dev, geom, timing, pol, chip, mi, now):
    """Fill the (chip, mi) active slot, collecting garbage if needed.

    Preference order: Clean block, idle spare of the mode, GC until one
    of those appears, and as a last liveness resort an early erase of an
    idle spare of any other mode.  Returns NO_BLOCK when the chip is out
    of usable blocks (device death).  The slot must be empty on entry.
    """
    gid = activate_no_gc_k(dev, geom, chip, mi)
    if gid != NO_BLOCK:
        return gid
    for _round in range(geom.blocks_per_chip + 1):
        rc = run_gc_k(dev, geom, timing, pol, chip, now)
        if rc == GC_DEAD:
            return NO_BLOCK
        # GC may have reinstalled an advanced victim straight into the slot,
        # or filled the slot to the brim with migrations of this mode.
        cur = dev.active[chip, mi]
        if cur != NO_BLOCK:
            if dev.write_ptr[cur] < geom.pages_per_block:
                return cur
            detach_active_k(dev, geom, cur)
        gid = activate_no_gc_k(dev, geom, chip, mi)
        if gid != NO_BLOCK:
            return gid
        if rc == GC_NO_VICTIM:
            break
    # Early-erase an idle mid-cycle block of another mode rather than die.
    return spare_erase_activate_k(dev, geom, timing, pol, chip, mi)


@kernel
def scrub_pass_k(dev, geom, timing, pol, now):
    """Periodic device-wide scan for blocks whose deadline is expiring.

    A block is treated as expired one period early so data cannot outlive
    its deadline between two checks.  Valid pages are demoted one mode
    down; an expired ACTIVE block is then advanced in place (or erased at
    its final round).  Zero-valid expired blocks are left for GC and not
    counted.  2-state blocks never expire.
    """
    n_modes = pol.mode_states.shape[0]
    for gid in range(geom.total_blocks):
        if dev.retired[gid]:
            continue
        mi = dev.mode_idx[gid]
        if mi == CLEAN or pol.mode_states[mi] == 2:
            continue
        dl = dev.deadline[gid]
        if dl == UNBOUNDED or dl - timing.scrub_period_us > now:
            continue
        chip = gid // geom.blocks_per_chip
        lower = mi + 1
        if lower >= n_modes:
            raise RuntimeError("no lower mode available for demotion")
        if dev.valid_count[gid] > 0:
            dev.counters[C_SCRUB_INVOCATIONS] += 1
            base = gid * geom.pages_per_block
            for p in range(geom.pages_per_block):
                loc = base + p
                if dev.page_lpn[loc] < 0:
                    continue
                dest = dev.active[chip, lower]
                if dest == NO_BLOCK or dev.write_ptr[dest] >= geom.pages_per_block:
                    if dest != NO_BLOCK:
                        detach_active_k(dev, geom, dest)
                    dest = activate_hard_k(dev, geom, timing, pol, chip, lower, now)
                    if dest == NO_BLOCK:
                        dev.counters[C_DEAD_CHIP] = chip + 1
                        return DEAD
                if dev.page_lpn[loc] < 0:
                    # GC run by the activation took this block as a victim
                    # and already moved the page.
                    continue
                migrate_page_k(dev, geom, timing, pol, loc, dest, now, 1)
        # Re-read the block: GC during a destination activation may have
        # advanced or erased it in the meantime.
        mi = dev.mode_idx[gid]
        if mi == CLEAN or dev.retired[gid]:
            continue
        dl = dev.deadline[gid]
        if dl == UNBOUNDED or dl - timing.scrub_period_us > now:
            continue
        if dev.is_active[gid]:
            # The active block's round expired; start it on a fresh round
            # (or erase it if no rounds remain) so its deadline resets.
            if dev.round_no[gid] < pol.mode_states[mi] - 1:
                dummy_write_k(dev, geom, timing, pol, gid)
            else:
                detach_active_k(dev, geom, gid)
                erase_block_k(dev, geom, timing, pol, gid)
    return OK


@kernel
def choose_mode_k(dev, geom, timing, pol, chip, lpn, now):
    """Target mode index for a host write under the configured policy."""
    if pol.code == POLICY_BASELINE:
        return 0
    if pol.code == POLICY_DSLC:
        loc = dev.mapping[lpn]
        if loc < 0:
            return 0  # new data goes to the highest-state mode
        mi = dev.mode_idx[loc // geom.pages_per_block]
        if mi == CLEAN:
            raise RuntimeError("mapping points into a Clean block")
        return mi
    # Oracle: category of the known time-to-next-write, evaluated at the
    # age of the block the write would land in; iterated to a fixpoint
    # because the chosen mode determines that block.
    dur = oracle_dur_k(pol, lpn, now)
    cat = categorize_us_k(dur)
    mi = 0
    for _i in range(pol.mode_states.shape[0]):
        pe = candidate_pe_k(dev, geom, chip, mi)
        want = mode_index_k(pol, pol.assign[cat, age_bucket_k(pe, geom.endurance)])
        if want == mi:
            break
        mi = want
    # The fixpoint can end on a mode whose block cannot hold the data
    # long enough (candidate ages differ across modes, so the table can
    # oscillate).  Step toward fewer states until the landing window
    # covers the known longevity; 2-state is unbounded and always does.
    while mi < pol.mode_states.shape[0] - 1:
        if landing_window_k(dev, geom, timing, pol, chip, mi, now) >= dur:
            break
        mi += 1
    return mi


@kernel
def host_write_k(dev, geom, timing, pol, lpn, now):
    """Serve one host page write.  Returns (status, latency_us)."""
    chip = lpn % geom.chips
    mi = choose_mode_k(dev, geom, timing, pol, chip, lpn, now)
    old = dev.mapping[lpn]
    if old >= 0:
        invalidate_k(dev, geom, old)
        dev.mapping[lpn] = NO_PAGE
    gid = NO_BLOCK
    for _try in range(pol.mode_states.shape[0]):
        gid = dev.active[chip, mi]
        if gid == NO_BLOCK or dev.write_ptr[gid] >= geom.pages_per_block:
            if gid != NO_BLOCK:
                detach_active_k(dev, geom, gid)
            gid = activate_hard_k(dev, geom, timing, pol, chip, mi, now)
            if gid == NO_BLOCK:
                dev.counters[C_DEAD_CHIP] = chip + 1
                return DEAD, 0.0
        # choose_mode_k sized the window from a preview of the landing
        # block, but the GC run by a hard activation can install an older
        # block than previewed.  The oracle knows the data's lifetime, so
        # verify against the block actually landed on and demote further
        # if it falls short; 2-state never expires.
        if pol.code == POLICY_ORACLE and mi < pol.mode_states.shape[0] - 1 \
                and block_window_k(dev, geom, timing, pol, gid, now) \
                    < oracle_dur_k(pol, lpn, now):
            mi += 1
            continue
        break
    idx = dev.write_ptr[gid]
    program_page_k(dev, geom, timing, pol, gid, idx, lpn, now)
    dev.mapping[lpn] = gid * geom.pages_per_block + idx
    dev.counters[C_HOST_PAGES] += 1
    lat = timing.write_us + geom.page_size * timing.us_per_byte
    # Background reclaim when the chip's pool of reusable blocks (Clean
    # plus idle advanced spares, both being GC products) runs low.
    pool = dev.clean_count[chip] + dev.spare_count[chip]
    if pool < timing.gc_threshold * geom.blocks_per_chip:
        rc = run_gc_k(dev, geom, timing, pol, chip, now)
        if rc == GC_DEAD:
            dev.counters[C_DEAD_CHIP] = chip + 1
            return DEAD, lat
    return OK, lat


@kernel
def host_read_k(dev, geom, timing, pol, lpn, now):
    """Serve one host page read.  Returns (status, latency_us)."""
    chip = lpn % geom.chips
    loc = dev.mapping[lpn]
    if loc >= 0:
        gid = loc // geom.pages_per_block
        if now > dev.deadline[gid]:
            return INTEGRITY, 0.0
        if dev.page_lpn[loc] != lpn:
            raise RuntimeError("mapping points at a page owned by another lpn")
    else:
        dev.counters[C_COLD_READS] += 1
    dev.counters[C_READS] += 1
    dev.busy[chip, B_READ] += timing.read_us
    dev.busy[chip, B_XFER] += geom.page_size * timing.us_per_byte
    return OK, timing.read_us + geom.page_size * timing.us_per_byte


@kernel
def snapshot_record_k(dev, geom, snap_time, snap_counts, snap_total, k, now):
    """Record non-Clean block counts per mode at time now into slot k."""
    if k >= snap_time.shape[0]:
        return
    for m in range(snap_counts.shape[1]):
        snap_counts[k, m] = 0
    total = 0
    for gid in range(geom.total_blocks):
        if dev.retired[gid]:
            continue
        mi = dev.mode_idx[gid]
        if mi == CLEAN:
            continue
        snap_counts[k, mi] += 1
        total += 1
    snap_total[k] = total
    snap_time[k] = now


@kernel
def replay_epoch_k(dev, geom, timing, pol, ts, kinds, lpns, sim,
                   snap_time, snap_counts, snap_total):
    """Replay one epoch of page events, interleaving scrub ticks.

    Returns (status, index of the event that stopped the run or the event
    count when the epoch completed).
    """
    n = ts.shape[0]
    for i in range(n):
        now = ts[i]
        while sim[SIM_NEXT_SCRUB] <= now:
            tick = sim[SIM_NEXT_SCRUB]
            st = scrub_pass_k(dev, geom, timing, pol, tick)
            if st != OK:
                sim[SIM_LAST_NOW] = tick
                return st, i
            sim[SIM_NEXT_SCRUB] = tick + timing.scrub_period_us
        dev.counters[C_EVENTS] += 1
        sim[SIM_LAST_NOW] = now
        if kinds[i] == KIND_WRITE:
            st, _lat = host_write_k(dev, geom, timing, pol, lpns[i], now)
            if st == OK and sim[SIM_SNAP_EVERY] > 0 \
                    and dev.counters[C_HOST_PAGES] >= sim[SIM_NEXT_SNAP]:
                snapshot_record_k(dev, geom, snap_time, snap_counts,
                                  snap_total, sim[SIM_SNAP_N], now)
                if sim[SIM_SNAP_N] < snap_time.shape[0]:
                    sim[SIM_SNAP_N] += 1
                sim[SIM_NEXT_SNAP] += sim[SIM_SNAP_EVERY]
        else:
            st, _lat = host_read_k(dev, geom, timing, pol, lpns[i], now)
        if st != OK:
            return st, i
    return OK, n
