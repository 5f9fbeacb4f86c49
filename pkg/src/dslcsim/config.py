"""Run configuration: YAML loading, device scales, validation.

A config file is a YAML mapping with up to five sections:

    scale: desk              # named geometry baseline, default "full"
    device:                  # DeviceConfig field overrides
      chips: 1
    run:
      policy: dslc           # baseline | dslc | oracle
      preset: normal3        # mode table preset
      seed: 42
      epoch_limit: 500       # optional bound on lifetime loops
    trace: path/to/trace.csv # MSR-format trace to replay
    synth:                   # or a synthetic workload
      working_set_pages: 256
      duration_s: 7200
      write_ratio: 1.0
      mixture:
        - category: up_to_1h
          weight: 0.75
        - cadence_s: 86400
          weight: 0.25

An empty file yields all defaults.  Validation is exhaustive: every
unknown key and bad value is reported at once, each with its field path.
"""

from dataclasses import dataclass, fields, replace

import yaml

from .flash import DeviceConfig
from .ftl import POLICY_CODES
from .retention import PRESET_NAMES, RetentionCategory
from .trace import SyntheticSpec

# Geometry baselines.  "full" is the datacenter device; "desk" and "mini"
# are small enough for interactive experiments and the test suite.
DEVICE_SCALES = {
    "full": {},
    "desk": {"chips": 1, "blocks_per_chip": 64, "pages_per_block": 16,
             "endurance": 50},
    "mini": {"chips": 1, "blocks_per_chip": 32, "pages_per_block": 16,
             "endurance": 20},
}

_DEVICE_FIELDS = {f.name: f.type for f in fields(DeviceConfig)}
_INT_DEVICE_FIELDS = {"chips", "blocks_per_chip", "pages_per_block",
                      "page_size_bytes", "endurance"}
_RUN_KEYS = {"policy", "preset", "seed", "epoch_limit"}
_SYNTH_KEYS = {"working_set_pages", "duration_s", "write_ratio",
               "request_size_bytes", "jitter", "seed", "mixture"}
_TOP_KEYS = {"scale", "device", "run", "trace", "synth"}

_CATEGORY_ALIASES = {
    "write_once": RetentionCategory.BEYOND_3D,
    "once": RetentionCategory.BEYOND_3D,
}


class ConfigError(ValueError):
    """One or more configuration problems, all listed in the message."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" +
                         "\n".join(f"  - {p}" for p in self.problems))


@dataclass(frozen=True)
class RunConfig:
    """A fully-resolved simulation setup."""

    device: DeviceConfig
    policy: str = "dslc"
    preset: str = "normal3"
    seed: int = 42
    epoch_limit: int | None = None
    trace_path: str | None = None
    synth: SyntheticSpec | None = None


def device_config(scale="full", **overrides):
    """DeviceConfig for a named scale with field overrides on top."""
    if scale not in DEVICE_SCALES:
        raise ConfigError([f"scale: unknown scale {scale!r}; expected one of "
                           f"{sorted(DEVICE_SCALES)}"])
    merged = dict(DEVICE_SCALES[scale])
    merged.update(overrides)
    return DeviceConfig(**merged)


def _check_mapping(data, where, errors):
    if data is None:
        return {}
    if not isinstance(data, dict):
        errors.append(f"{where}: expected a mapping, got {type(data).__name__}")
        return {}
    return data


def _reject_unknown(data, allowed, where, errors):
    for key in data:
        if key not in allowed:
            errors.append(f"{where}{key}: unknown key")


def _parse_device(data, scale, errors):
    data = _check_mapping(data, "device", errors)
    _reject_unknown(data, _DEVICE_FIELDS, "device.", errors)
    overrides = {}
    for key, value in data.items():
        if key not in _DEVICE_FIELDS:
            continue
        if key in _INT_DEVICE_FIELDS:
            if isinstance(value, bool) or not isinstance(value, int):
                errors.append(f"device.{key}: expected an integer, got {value!r}")
                continue
        elif not isinstance(value, (int, float)) or isinstance(value, bool):
            errors.append(f"device.{key}: expected a number, got {value!r}")
            continue
        overrides[key] = value
    if scale not in DEVICE_SCALES:
        errors.append(f"scale: unknown scale {scale!r}; expected one of "
                      f"{sorted(DEVICE_SCALES)}")
        return None
    merged = dict(DEVICE_SCALES[scale])
    merged.update(overrides)
    try:
        return DeviceConfig(**merged)
    except ValueError as exc:
        errors.append(f"device: {exc}")
        return None


def _parse_run(data, errors):
    data = _check_mapping(data, "run", errors)
    _reject_unknown(data, _RUN_KEYS, "run.", errors)
    out = {"policy": "dslc", "preset": "normal3", "seed": 42,
           "epoch_limit": None}
    policy = data.get("policy", out["policy"])
    if policy not in POLICY_CODES:
        errors.append(f"run.policy: unknown policy {policy!r}; expected one "
                      f"of {sorted(POLICY_CODES)}")
    else:
        out["policy"] = policy
    preset = data.get("preset", out["preset"])
    if preset not in PRESET_NAMES:
        errors.append(f"run.preset: unknown preset {preset!r}; expected one "
                      f"of {sorted(PRESET_NAMES)}")
    else:
        out["preset"] = preset
    seed = data.get("seed", out["seed"])
    if isinstance(seed, bool) or not isinstance(seed, int):
        errors.append(f"run.seed: expected an integer, got {seed!r}")
    else:
        out["seed"] = seed
    limit = data.get("epoch_limit", None)
    if limit is not None and (isinstance(limit, bool)
                              or not isinstance(limit, int) or limit <= 0):
        errors.append(f"run.epoch_limit: expected a positive integer, got {limit!r}")
    else:
        out["epoch_limit"] = limit
    return out


def _parse_component(entry, where, errors):
    if not isinstance(entry, dict):
        errors.append(f"{where}: expected a mapping with category/cadence_s "
                      f"and weight")
        return None
    unknown = set(entry) - {"category", "cadence_s", "weight"}
    for key in sorted(unknown):
        errors.append(f"{where}.{key}: unknown key")
    has_cat = "category" in entry
    has_cad = "cadence_s" in entry
    if has_cat == has_cad:
        errors.append(f"{where}: give exactly one of category or cadence_s")
        return None
    if "weight" not in entry:
        errors.append(f"{where}.weight: required")
        return None
    weight = entry["weight"]
    if not isinstance(weight, (int, float)) or isinstance(weight, bool) \
            or weight < 0:
        errors.append(f"{where}.weight: expected a non-negative number, "
                      f"got {weight!r}")
        return None
    if has_cat:
        raw = entry["category"]
        name = str(raw).strip().lower()
        if name in _CATEGORY_ALIASES:
            return _CATEGORY_ALIASES[name], float(weight)
        try:
            return RetentionCategory[name.upper()], float(weight)
        except KeyError:
            known = [c.name.lower() for c in RetentionCategory]
            errors.append(f"{where}.category: unknown category {raw!r}; "
                          f"expected one of {known + sorted(_CATEGORY_ALIASES)}")
            return None
    cadence = entry["cadence_s"]
    if not isinstance(cadence, (int, float)) or isinstance(cadence, bool) \
            or cadence <= 0:
        errors.append(f"{where}.cadence_s: expected a positive number, "
                      f"got {cadence!r}")
        return None
    return float(cadence), float(weight)


def _parse_synth(data, errors):
    start = len(errors)
    data = _check_mapping(data, "synth", errors)
    if not data:
        return None
    _reject_unknown(data, _SYNTH_KEYS, "synth.", errors)
    mixture = data.get("mixture")
    comps = []
    if not isinstance(mixture, list) or not mixture:
        errors.append("synth.mixture: expected a non-empty list")
    else:
        for i, entry in enumerate(mixture):
            comp = _parse_component(entry, f"synth.mixture[{i}]", errors)
            if comp is not None:
                comps.append(comp)
    kwargs = {}
    for key in ("working_set_pages", "request_size_bytes", "seed"):
        if key in data:
            v = data[key]
            if isinstance(v, bool) or not isinstance(v, int):
                errors.append(f"synth.{key}: expected an integer, got {v!r}")
            else:
                kwargs[key] = v
    for key in ("duration_s", "write_ratio", "jitter"):
        if key in data:
            v = data[key]
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                errors.append(f"synth.{key}: expected a number, got {v!r}")
            else:
                kwargs[key] = float(v)
    if "working_set_pages" not in kwargs:
        errors.append("synth.working_set_pages: required")
    if "duration_s" not in kwargs:
        errors.append("synth.duration_s: required")
    if len(errors) > start:
        return None
    try:
        return SyntheticSpec(longevity_mixture=tuple(comps), **kwargs)
    except ValueError as exc:
        errors.append(f"synth: {exc}")
        return None


def parse_config(data):
    """RunConfig from a parsed YAML mapping; None means all defaults."""
    errors = []
    data = _check_mapping(data, "config", errors)
    _reject_unknown(data, _TOP_KEYS, "", errors)
    scale = data.get("scale", "full")
    if not isinstance(scale, str):
        errors.append(f"scale: expected a string, got {scale!r}")
        scale = "full"
    device = _parse_device(data.get("device"), scale, errors)
    run = _parse_run(data.get("run"), errors)
    trace_path = data.get("trace")
    if trace_path is not None and not isinstance(trace_path, str):
        errors.append(f"trace: expected a path string, got {trace_path!r}")
        trace_path = None
    synth = _parse_synth(data.get("synth"), errors)
    if trace_path is not None and synth is not None:
        errors.append("trace, synth: give at most one workload source")
    if errors:
        raise ConfigError(errors)
    return RunConfig(device=device, trace_path=trace_path, synth=synth, **run)


def load_config(path=None):
    """RunConfig from a YAML file; a missing path or empty file = defaults."""
    if path is None:
        return parse_config(None)
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return parse_config(data)


def apply_overrides(cfg, scale=None, policy=None, preset=None, seed=None,
                    epoch_limit=None, trace_path=None):
    """Command-line flags layered over a loaded RunConfig."""
    out = cfg
    if scale is not None:
        out = replace(out, device=device_config(scale))
    if policy is not None:
        if policy not in POLICY_CODES:
            raise ConfigError([f"policy: unknown policy {policy!r}"])
        out = replace(out, policy=policy)
    if preset is not None:
        if preset not in PRESET_NAMES:
            raise ConfigError([f"preset: unknown preset {preset!r}"])
        out = replace(out, preset=preset)
    if seed is not None:
        out = replace(out, seed=seed)
        if out.synth is not None:
            out = replace(out, synth=replace(out.synth, seed=seed))
    if epoch_limit is not None:
        out = replace(out, epoch_limit=epoch_limit)
    if trace_path is not None:
        out = replace(out, trace_path=trace_path, synth=None)
    return out
