"""Voltage-drift model, retention categories, and block mode assignment.

A block programmed with n voltage states absorbs n-1 page writes per erase
cycle, but its narrower guard margins tolerate less threshold drift, so
high-state modes can only hold data for a short window before it must be
rewritten or moved.  The drift model here gives the analytical shape of
that trade-off; the preset assignment tables carry the calibrated policy
the simulator actually runs (drift math is a calibration/analysis utility,
the tables are authoritative for simulation).
"""

import math
from dataclasses import dataclass
from enum import IntEnum

# Device-specific drift scaling constants for the three device strengths.
WEAK_K = 5e-4
NORMAL_K = 4e-4
STRONG_K = 3e-4

# Sentinel for "never expires" capacities, in hours.
UNBOUNDED_HOURS = math.inf

# Longevity duration for data that is written once and never updated.
# Ten years, the usual guaranteed-retention figure for SLC flash.
MAX_LONGEVITY_US = 10 * 365 * 24 * 3600 * 1_000_000

# State counts the device supports.
ALLOWED_STATES = (2, 4, 5, 6, 8)

# Number of block-age buckets (fifths of the endurance limit).
N_AGE_BUCKETS = 5


@dataclass(frozen=True)
class DriftParams:
    """Scaling constant for the drift model plus a human label."""

    k_scale: float
    label: str = "Custom"

    def __post_init__(self):
        if self.k_scale <= 0:
            raise ValueError("k_scale must be positive, got %r" % (self.k_scale,))


WEAK = DriftParams(WEAK_K, "Weak")
NORMAL = DriftParams(NORMAL_K, "Normal")
STRONG = DriftParams(STRONG_K, "Strong")

DRIFT_PRESETS = {"weak": WEAK, "normal": NORMAL, "strong": STRONG}


def drift_distance(params, n_pe, t_rt_hours):
    """Threshold-voltage drift after t_rt_hours at wear level n_pe.

    drift = k_scale * n_pe * ln(1 + t_rt_hours), in normalized voltage units.
    """
    if n_pe < 0:
        raise ValueError("n_pe must be non-negative, got %r" % (n_pe,))
    if t_rt_hours < 0:
        raise ValueError("t_rt_hours must be non-negative, got %r" % (t_rt_hours,))
    return params.k_scale * n_pe * math.log1p(t_rt_hours)


def retention_capacity_hours(params, n_pe, guard):
    """Hours until drift reaches the guard margin: the model's inverse.

    Returns UNBOUNDED_HOURS when n_pe is zero (an unworn cell never drifts
    past any positive guard under this model).
    """
    if n_pe < 0:
        raise ValueError("n_pe must be non-negative, got %r" % (n_pe,))
    if guard < 0:
        raise ValueError("guard must be non-negative, got %r" % (guard,))
    if n_pe == 0:
        return UNBOUNDED_HOURS
    return math.expm1(guard / (params.k_scale * n_pe))


class RetentionCategory(IntEnum):
    """How long a piece of data must survive before its next update."""

    UP_TO_1H = 0
    HOURS_1_TO_10 = 1
    HOURS_10_TO_3D = 2
    BEYOND_3D = 3

    @property
    def upper_bound_hours(self):
        return _CATEGORY_BOUNDS_HOURS[self.value]


# Upper bounds, closed on the right: a gap of exactly 1 h is UP_TO_1H.
_CATEGORY_BOUNDS_HOURS = (1.0, 10.0, 72.0, UNBOUNDED_HOURS)

# Same bounds in integer microseconds, for exact comparisons during replay.
CATEGORY_BOUNDS_US = (
    3_600_000_000,
    36_000_000_000,
    259_200_000_000,
)


def categorize_longevity(hours):
    """Map a longevity duration in hours to its retention category."""
    if hours < 0:
        raise ValueError("duration must be non-negative, got %r" % (hours,))
    for cat in (RetentionCategory.UP_TO_1H,
                RetentionCategory.HOURS_1_TO_10,
                RetentionCategory.HOURS_10_TO_3D):
        if hours <= cat.upper_bound_hours:
            return cat
    return RetentionCategory.BEYOND_3D


def categorize_longevity_us(us):
    """Same bucketing over integer microseconds (used by trace analysis)."""
    if us < 0:
        raise ValueError("duration must be non-negative, got %r" % (us,))
    for cat, bound in zip(RetentionCategory, CATEGORY_BOUNDS_US):
        if us <= bound:
            return cat
    return RetentionCategory.BEYOND_3D


def age_bucket(pe, endurance):
    """Which fifth of its endurance a block with pe erases is in (0..4)."""
    if endurance <= 0:
        raise ValueError("endurance must be positive")
    if pe < 0:
        raise ValueError("pe must be non-negative")
    return min(N_AGE_BUCKETS - 1, (N_AGE_BUCKETS * pe) // endurance)


@dataclass(frozen=True)
class StateMode:
    """A voltage-state count and the page-writes-per-erase it buys."""

    states: int

    def __post_init__(self):
        if self.states not in ALLOWED_STATES:
            raise ValueError("unsupported state count %r" % (self.states,))

    @property
    def pwe(self):
        return self.states - 1

    def __repr__(self):
        return "StateMode(%d)" % self.states


_CATEGORIES = tuple(RetentionCategory)


@dataclass(frozen=True)
class ModeAssignmentTable:
    """(retention category x block age bucket) -> state-count policy grid.

    The grid rows follow RetentionCategory order, columns follow age buckets
    youngest to oldest.  mode_set lists the distinct modes, highest state
    count first; that ordering is what "next-lower mode" means for scrub
    demotion.
    """

    name: str
    grid: tuple

    def __post_init__(self):
        grid = tuple(tuple(int(v) for v in row) for row in self.grid)
        object.__setattr__(self, "grid", grid)
        if len(grid) != len(_CATEGORIES):
            raise ValueError("grid must have %d category rows" % len(_CATEGORIES))
        for row in grid:
            if len(row) != N_AGE_BUCKETS:
                raise ValueError("grid rows must have %d buckets" % N_AGE_BUCKETS)
            for v in row:
                if v not in ALLOWED_STATES:
                    raise ValueError("grid entry %r is not a supported state count" % (v,))
            for a, b in zip(row, row[1:]):
                if b > a:
                    raise ValueError("states must not increase with block age: %r" % (row,))
        if any(v != 2 for v in grid[RetentionCategory.BEYOND_3D]):
            raise ValueError("the longest-lived category must always use 2 states")

    @property
    def mode_set(self):
        """Distinct modes in the grid, highest state count first."""
        states = sorted({v for row in self.grid for v in row}, reverse=True)
        return tuple(StateMode(s) for s in states)

    def assign(self, cat, bucket):
        """The mode this table prescribes for a category at an age bucket."""
        if not 0 <= bucket < N_AGE_BUCKETS:
            raise ValueError("bucket out of range: %r" % (bucket,))
        return StateMode(self.grid[int(cat)][bucket])

    def mode_retention_capacity(self, mode, bucket):
        """Hours the given mode must hold data at the given age bucket.

        The capacity is the largest category bound routed to the mode at
        that bucket; 2-state is unbounded.  A bucket where the table no
        longer routes anything to the mode inherits the bound from the
        nearest younger bucket where it did (a live block can still carry
        a mode the policy stopped assigning), and is unbounded if the mode
        was never used up to that point.
        """
        if mode not in self.mode_set:
            raise ValueError("%r is not in this table's mode set" % (mode,))
        if mode.states == 2:
            return UNBOUNDED_HOURS
        for b in range(bucket, -1, -1):
            bounds = [cat.upper_bound_hours
                      for cat in _CATEGORIES
                      if self.grid[cat][b] == mode.states]
            if bounds:
                return max(bounds)
        return UNBOUNDED_HOURS

    def to_grid_dict(self):
        """Serializable {category name: [state counts per bucket]} form."""
        return {cat.name.lower(): list(self.grid[cat]) for cat in _CATEGORIES}

    @classmethod
    def from_grid_dict(cls, name, d):
        rows = []
        for cat in _CATEGORIES:
            key = cat.name.lower()
            if key not in d:
                raise ValueError("mode table grid is missing row %r" % key)
            rows.append(tuple(d[key]))
        extra = set(d) - {cat.name.lower() for cat in _CATEGORIES}
        if extra:
            raise ValueError("mode table grid has unknown rows: %s" % sorted(extra))
        return cls(name, tuple(rows))


def assign_mode(table, cat, pe, endurance):
    """Table lookup at the age bucket of a block with pe erases."""
    if pe > endurance:
        raise ValueError("pe exceeds endurance")
    return table.assign(cat, age_bucket(pe, endurance))


# Preset policy grids.  Rows: UP_TO_1H, HOURS_1_TO_10, HOURS_10_TO_3D,
# BEYOND_3D.  Columns: age buckets, youngest first.
_PRESET_GRIDS = {
    "normal3": ((8, 8, 8, 8, 8),
                (8, 8, 8, 4, 4),
                (4, 4, 4, 2, 2),
                (2, 2, 2, 2, 2)),
    "weak3":   ((8, 8, 8, 8, 8),
                (8, 4, 4, 4, 4),
                (4, 4, 2, 2, 2),
                (2, 2, 2, 2, 2)),
    "strong3": ((8, 8, 8, 8, 8),
                (8, 8, 8, 8, 8),
                (8, 4, 4, 4, 4),
                (2, 2, 2, 2, 2)),
    "mode2":   ((8, 8, 8, 8, 8),
                (8, 8, 8, 2, 2),
                (2, 2, 2, 2, 2),
                (2, 2, 2, 2, 2)),
    "mode4":   ((8, 8, 8, 8, 8),
                (8, 8, 8, 5, 5),
                (5, 5, 4, 2, 2),
                (2, 2, 2, 2, 2)),
    "mode5":   ((8, 8, 8, 8, 8),
                (8, 8, 8, 6, 6),
                (6, 5, 4, 2, 2),
                (2, 2, 2, 2, 2)),
}

PRESET_NAMES = ("normal3", "weak3", "strong3", "mode2", "mode3", "mode4", "mode5")


def preset_table(preset):
    """One of the named policy tables; mode3 is an alias of normal3."""
    key = "normal3" if preset == "mode3" else preset
    if key not in _PRESET_GRIDS:
        raise ValueError("unknown preset %r (expected one of %s)"
                         % (preset, ", ".join(PRESET_NAMES)))
    return ModeAssignmentTable(preset, _PRESET_GRIDS[key])


def baseline_table():
    """Degenerate single-mode table for the conventional-SLC baseline."""
    row = (2,) * N_AGE_BUCKETS
    return ModeAssignmentTable("baseline", (row, row, row, row))
