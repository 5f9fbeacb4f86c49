"""MSR-format block trace ingestion, page splitting, longevity analysis,
and synthetic workload generation.

Trace timestamps are integer microseconds relative to the first record so
replay is deterministic across platforms.  The MSR CSV layout is seven
fields with no header: Timestamp (Windows FILETIME, 100 ns ticks),
Hostname, DiskNumber, Type, Offset, Size, ResponseTime.  Hostname,
DiskNumber, and ResponseTime are parsed but ignored.
"""

import random
from dataclasses import dataclass, replace
from enum import Enum

from .retention import (MAX_LONGEVITY_US, RetentionCategory,
                        categorize_longevity_us)

# FILETIME ticks per microsecond.
_TICKS_PER_US = 10

# Representative re-write cadence, in seconds, for each retention category
# when a synthetic mixture names the category instead of a duration.
# BEYOND_3D data is written once and never updated.
CATEGORY_CADENCE_S = {
    RetentionCategory.UP_TO_1H: 600.0,
    RetentionCategory.HOURS_1_TO_10: 5 * 3600.0,
    RetentionCategory.HOURS_10_TO_3D: 24 * 3600.0,
    RetentionCategory.BEYOND_3D: None,
}


class OpKind(Enum):
    READ = "Read"
    WRITE = "Write"


@dataclass(frozen=True)
class IORequest:
    """One timestamped request against a logical byte range."""

    timestamp_us: int
    kind: OpKind
    offset_bytes: int
    size_bytes: int

    def __post_init__(self):
        if self.size_bytes <= 0:
            raise ValueError("size_bytes must be positive, got %r" % (self.size_bytes,))
        if self.offset_bytes < 0:
            raise ValueError("offset_bytes must be non-negative")


@dataclass(frozen=True)
class PageOp:
    """A request reduced to a single logical page."""

    timestamp_us: int
    kind: OpKind
    lpn: int


class TraceParseError(ValueError):
    pass


def _fail(line_no, msg):
    where = "line %s: " % line_no if line_no is not None else ""
    raise TraceParseError(where + msg)


def parse_msr_line(line, anchor_ticks=0, line_no=None):
    """Parse one MSR CSV record into an IORequest.

    anchor_ticks is the first record's FILETIME; timestamps come out as
    microseconds relative to it (ticks are 100 ns, so ticks/10).
    """
    fields = line.strip().split(",")
    if len(fields) != 7:
        _fail(line_no, "expected 7 comma-separated fields, got %d" % len(fields))
    ts_raw, _host, _disk, kind_raw, off_raw, size_raw, _resp = fields
    try:
        ticks = int(ts_raw)
    except ValueError:
        _fail(line_no, "non-numeric timestamp %r" % ts_raw)
    kind_name = kind_raw.strip().lower()
    if kind_name == "read":
        kind = OpKind.READ
    elif kind_name == "write":
        kind = OpKind.WRITE
    else:
        _fail(line_no, "unknown request type %r" % kind_raw)
    try:
        offset = int(off_raw)
        size = int(size_raw)
    except ValueError:
        _fail(line_no, "non-numeric offset/size %r/%r" % (off_raw, size_raw))
    if size <= 0:
        _fail(line_no, "non-positive size %r" % size)
    return IORequest((ticks - anchor_ticks) // _TICKS_PER_US, kind, offset, size)


def parse_msr_lines(lines):
    """Parse an iterable of MSR records, anchoring to the first one.

    Records are stably sorted by timestamp afterwards, so out-of-order
    inputs replay in time order while ties keep file order.
    """
    requests = []
    anchor = None
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if anchor is None:
            first = line.strip().split(",")
            if len(first) != 7:
                _fail(i, "expected 7 comma-separated fields, got %d" % len(first))
            try:
                anchor = int(first[0])
            except ValueError:
                _fail(i, "non-numeric timestamp %r" % first[0])
        requests.append(parse_msr_line(line, anchor_ticks=anchor, line_no=i))
    requests.sort(key=lambda r: r.timestamp_us)
    return requests


def read_msr_trace(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_msr_lines(fh)


def format_msr_line(req, hostname="synth", disk=0, anchor_ticks=0):
    ticks = anchor_ticks + req.timestamp_us * _TICKS_PER_US
    return "%d,%s,%d,%s,%d,%d,0" % (ticks, hostname, disk, req.kind.value,
                                    req.offset_bytes, req.size_bytes)


def write_msr_trace(path, requests, hostname="synth", disk=0):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for req in requests:
            fh.write(format_msr_line(req, hostname, disk) + "\n")


def split_to_pages(req, page_size_bytes):
    """PageOps covering every page the request's byte range touches."""
    if page_size_bytes <= 0:
        raise ValueError("page_size_bytes must be positive")
    first = req.offset_bytes // page_size_bytes
    last = (req.offset_bytes + req.size_bytes - 1) // page_size_bytes
    return [PageOp(req.timestamp_us, req.kind, lpn) for lpn in range(first, last + 1)]


def page_ops(requests, page_size_bytes):
    """Flatten requests to page granularity, preserving order."""
    ops = []
    for req in requests:
        ops.extend(split_to_pages(req, page_size_bytes))
    return ops


@dataclass
class LongevityProfile:
    """Distribution of times between consecutive writes of the same page."""

    writes_per_lpn: dict
    cdf_points: list
    category_fractions: dict
    n_samples: int

    @property
    def empty(self):
        return self.n_samples == 0


def analyze_longevity(ops):
    """Gap analysis over a time-ordered page-op stream.

    Each pair of consecutive writes to an LPN yields one longevity sample;
    pages written exactly once yield one sample at the 10-year maximum.
    Reads contribute nothing.
    """
    writes = {}
    for op in ops:
        if op.kind is OpKind.WRITE:
            writes.setdefault(op.lpn, []).append(op.timestamp_us)

    samples = []
    for times in writes.values():
        if len(times) == 1:
            samples.append(MAX_LONGEVITY_US)
        else:
            samples.extend(b - a for a, b in zip(times, times[1:]))

    fractions = {cat: 0.0 for cat in RetentionCategory}
    if not samples:
        return LongevityProfile(writes, [], fractions, 0)

    counts = {cat: 0 for cat in RetentionCategory}
    for s in samples:
        counts[categorize_longevity_us(s)] += 1
    n = len(samples)
    fractions = {cat: counts[cat] / n for cat in RetentionCategory}

    samples.sort()
    cdf = []
    for i, s in enumerate(samples, start=1):
        sec = s / 1e6
        if cdf and cdf[-1][0] == sec:
            cdf[-1] = (sec, i / n)
        else:
            cdf.append((sec, i / n))
    return LongevityProfile(writes, cdf, fractions, n)


def profile_to_csv(profile):
    """CSV text: a cdf section then a category-fraction summary block."""
    lines = ["longevity_seconds,cdf"]
    for sec, frac in profile.cdf_points:
        lines.append("%.6f,%.9f" % (sec, frac))
    lines.append("category,fraction")
    for cat in RetentionCategory:
        lines.append("%s,%.9f" % (cat.name.lower(), profile.category_fractions[cat]))
    return "\n".join(lines) + "\n"


def write_profile_csv(path, profile):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(profile_to_csv(profile))


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for a generated workload with controlled longevities.

    longevity_mixture entries are (component, weight) where component is a
    RetentionCategory or an explicit cadence in seconds; weights apportion
    the longevity SAMPLES the trace will produce, which is what the
    analyzer measures.  A cadence longer than the duration degenerates to
    a write-once page (one maximum-longevity sample).
    """

    working_set_pages: int
    longevity_mixture: tuple
    duration_s: float
    write_ratio: float = 1.0
    request_size_bytes: int = 8192
    page_size_bytes: int = 8192
    jitter: float = 0.05
    seed: int = 42

    def __post_init__(self):
        if self.working_set_pages <= 0:
            raise ValueError("working_set_pages must be positive")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if not 0.0 < self.write_ratio <= 1.0:
            raise ValueError("write_ratio must be in (0, 1]")
        if not 0.0 <= self.jitter <= 0.05:
            raise ValueError("jitter must be within [0, 0.05]")
        if not self.longevity_mixture:
            raise ValueError("longevity_mixture must not be empty")
        total = sum(w for _c, w in self.longevity_mixture)
        if abs(total - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1.0, got %r" % total)
        if any(w < 0 for _c, w in self.longevity_mixture):
            raise ValueError("mixture weights must be non-negative")
        if self.page_size_bytes <= 0 or self.request_size_bytes <= 0:
            raise ValueError("sizes must be positive")
        if self.request_size_bytes % self.page_size_bytes != 0 \
                and self.request_size_bytes > self.page_size_bytes:
            raise ValueError("request_size_bytes must be a multiple of the page "
                             "size (or at most one page)")


def _component_cadence_s(component):
    if isinstance(component, RetentionCategory):
        return CATEGORY_CADENCE_S[component]
    cadence = float(component)
    if cadence <= 0:
        raise ValueError("explicit cadence must be positive, got %r" % (component,))
    return cadence


def generate_synthetic(spec):
    """Deterministic synthetic trace whose longevity mixture is spec's.

    Pages are partitioned among mixture components so that each
    component's share of gap samples matches its weight: a page on
    cadence c emits exactly max(2, round(duration/c)) writes, hence a
    known sample count, and page counts are allocated in inverse
    proportion to it.  Write-once pages emit one write (one maximum
    sample).  Reads, if any, target random already-written pages.
    """
    rng = random.Random(spec.seed)
    chunk_pages = max(1, spec.request_size_bytes // spec.page_size_bytes)
    n_chunks = spec.working_set_pages // chunk_pages
    if n_chunks == 0:
        raise ValueError("working set smaller than one request")

    # Writes per chunk and gap samples per chunk, for each component.
    comps = []
    for component, weight in spec.longevity_mixture:
        cadence = _component_cadence_s(component)
        if cadence is None or cadence > spec.duration_s:
            writes, cadence = 1, None
        else:
            writes = max(2, round(spec.duration_s / cadence))
        samples_per_chunk = chunk_pages * max(1, writes - 1)
        comps.append((cadence, writes, samples_per_chunk, weight))

    # Chunk counts proportional to weight / samples_per_chunk.
    raw = [w / spc for _c, _w, spc, w in comps]
    scale = n_chunks / sum(raw) if sum(raw) > 0 else 0.0
    chunk_counts = [int(round(r * scale)) if w > 0 else 0
                    for r, (_c, _wr, _s, w) in zip(raw, comps)]
    for i, (_c, _wr, _s, w) in enumerate(comps):
        if w > 0 and chunk_counts[i] == 0:
            chunk_counts[i] = 1
    # Absorb rounding drift into the heaviest component, never exceeding
    # the working set (LPNs must stay inside it).
    drift = n_chunks - sum(chunk_counts)
    heaviest = max(range(len(comps)), key=lambda i: comps[i][3])
    chunk_counts[heaviest] = max(1, chunk_counts[heaviest] + drift)
    while sum(chunk_counts) > n_chunks:
        i = max(range(len(comps)), key=lambda i: chunk_counts[i])
        if chunk_counts[i] <= 1:
            break
        chunk_counts[i] -= 1

    requests = []
    chunk = 0
    for (cadence, writes, _spc, _w), count in zip(comps, chunk_counts):
        for _ in range(count):
            offset = chunk * chunk_pages * spec.page_size_bytes
            if cadence is None:
                t = rng.uniform(0.0, spec.duration_s)
                requests.append(IORequest(int(t * 1e6), OpKind.WRITE,
                                          offset, spec.request_size_bytes))
            else:
                t = rng.uniform(0.0, cadence)
                for _k in range(writes):
                    requests.append(IORequest(int(t * 1e6), OpKind.WRITE,
                                              offset, spec.request_size_bytes))
                    step = cadence
                    if spec.jitter > 0:
                        step *= 1.0 + spec.jitter * (2.0 * rng.random() - 1.0)
                    t += step
            chunk += 1

    n_writes = len(requests)
    n_reads = int(round(n_writes * (1.0 - spec.write_ratio) / spec.write_ratio))
    horizon = max(r.timestamp_us for r in requests)
    for _ in range(n_reads):
        target = rng.randrange(n_chunks)
        offset = target * chunk_pages * spec.page_size_bytes
        t = rng.randrange(0, horizon + 1)
        requests.append(IORequest(t, OpKind.READ, offset, spec.request_size_bytes))

    requests.sort(key=lambda r: r.timestamp_us)
    return requests


def loop_period_us(requests):
    """Shift applied per epoch when a trace is looped: span + one mean gap."""
    if not requests:
        raise ValueError("trace is empty")
    span = requests[-1].timestamp_us - requests[0].timestamp_us
    n = len(requests)
    mean_gap = span // (n - 1) if n > 1 else 1
    return span + max(1, mean_gap)


def loop_stream(requests, epoch):
    """The trace re-timed for its epoch-th repetition (epoch 0 = identity)."""
    if epoch == 0:
        return list(requests)
    shift = epoch * loop_period_us(requests)
    return [replace(r, timestamp_us=r.timestamp_us + shift) for r in requests]
