"""Command-line front end.

Subcommands:

- analyze: longevity profile (gap CDF + category fractions) of a trace
- run:     replay one workload under one policy, once or to device death
- compare: lifetime of the multi-round policy vs the conventional baseline
- sweep:   lifetime across several mode-table presets, run concurrently
- synth:   generate a synthetic MSR-format trace from a config's synth section

Every command accepts --config (YAML, see config module) plus flag
overrides.  Exit status is 0 when all requested runs completed (device
death in a lifetime run is a completed measurement, not a failure).
"""

import argparse
import json
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import ConfigError, apply_overrides, load_config
from .engine import run_trace, run_until_death
from .ftl import POLICY_CODES
from .retention import PRESET_NAMES
from .trace import (analyze_longevity, generate_synthetic, page_ops,
                    profile_to_csv, read_msr_trace, write_msr_trace)


def _add_common(p):
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--trace", help="MSR-format trace CSV (overrides config)")
    p.add_argument("--out", help="output directory (default: current)")
    p.add_argument("--scale", choices=("full", "desk", "mini"),
                   help="device geometry baseline")
    p.add_argument("--policy", choices=sorted(POLICY_CODES),
                   help="write policy")
    p.add_argument("--preset", choices=PRESET_NAMES, help="mode table preset")
    p.add_argument("--seed", type=int, help="seed for synthetic workloads")
    p.add_argument("--epoch-limit", type=int, dest="epoch_limit",
                   help="bound on lifetime loop repetitions")


def _resolve(args):
    cfg = load_config(args.config)
    return apply_overrides(cfg, scale=args.scale, policy=args.policy,
                           preset=args.preset, seed=args.seed,
                           epoch_limit=args.epoch_limit,
                           trace_path=args.trace)


def _workload(cfg):
    if cfg.trace_path is not None:
        return read_msr_trace(cfg.trace_path)
    if cfg.synth is not None:
        return generate_synthetic(cfg.synth)
    raise ConfigError(["no workload: give a trace path or a synth section"])


def _outdir(args):
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_report(out, stem, report):
    (out / f"{stem}.json").write_text(report.to_json(), encoding="utf-8")
    (out / f"{stem}-timeline.csv").write_text(report.timeline_csv(),
                                              encoding="utf-8")
    (out / f"{stem}-counters.csv").write_text(report.counters.to_csv(),
                                              encoding="utf-8")


def _lifetime_run(cfg, requests, policy, preset):
    return run_until_death(cfg.device, requests, policy=policy,
                           table=preset, epoch_limit=cfg.epoch_limit)


def cmd_run(args):
    cfg = _resolve(args)
    requests = _workload(cfg)
    out = _outdir(args)
    if args.lifetime:
        report = _lifetime_run(cfg, requests, cfg.policy, cfg.preset)
    else:
        report = run_trace(cfg.device, requests, policy=cfg.policy,
                           table=cfg.preset)
    _write_report(out, "run", report)
    for line in report.summary_lines():
        print(line)
    return 0


def cmd_compare(args):
    cfg = _resolve(args)
    requests = _workload(cfg)
    out = _outdir(args)
    dslc = _lifetime_run(cfg, requests, cfg.policy if cfg.policy != "baseline"
                         else "dslc", cfg.preset)
    base = _lifetime_run(cfg, requests, "baseline", cfg.preset)
    ratio = dslc.lifetime_kb / base.lifetime_kb if base.lifetime_kb else 0.0
    _write_report(out, f"compare-{dslc.policy}", dslc)
    _write_report(out, "compare-baseline", base)
    summary = {
        "policy": dslc.policy,
        "preset": cfg.preset,
        "lifetime_kb": dslc.lifetime_kb,
        "baseline_lifetime_kb": base.lifetime_kb,
        "lifetime_ratio": ratio,
        "throughput_kb_s": dslc.throughput_kb_s,
        "baseline_throughput_kb_s": base.throughput_kb_s,
    }
    (out / "compare.json").write_text(json.dumps(summary, indent=2),
                                      encoding="utf-8")
    print(f"{dslc.policy}: lifetime {dslc.lifetime_kb:.0f} KB, "
          f"throughput {dslc.throughput_kb_s:.1f} KB/s")
    print(f"baseline: lifetime {base.lifetime_kb:.0f} KB, "
          f"throughput {base.throughput_kb_s:.1f} KB/s")
    print(f"lifetime ratio: {ratio:.3f}")
    return 0


def _sweep_one(cfg, requests, preset, out):
    log = out / f"sweep-{preset}.log"
    try:
        report = _lifetime_run(cfg, requests, cfg.policy, preset)
        _write_report(out, f"sweep-{preset}", report)
        log.write_text("\n".join(report.summary_lines()) + "\n",
                       encoding="utf-8")
        return preset, report, None
    except Exception:
        log.write_text(traceback.format_exc(), encoding="utf-8")
        return preset, None, traceback.format_exc(limit=1)


def cmd_sweep(args):
    cfg = _resolve(args)
    if cfg.policy == "baseline":
        print("sweep varies mode-table presets; the baseline policy "
              "ignores them", file=sys.stderr)
        return 2
    requests = _workload(cfg)
    out = _outdir(args)
    presets = args.presets.split(",") if args.presets else list(PRESET_NAMES)
    for p in presets:
        if p not in PRESET_NAMES:
            print(f"unknown preset {p!r}", file=sys.stderr)
            return 2
    results = {}
    with ThreadPoolExecutor(max_workers=len(presets)) as pool:
        for preset, report, err in pool.map(
                lambda p: _sweep_one(cfg, requests, p, out), presets):
            results[preset] = (report, err)
    failed = [p for p, (_r, err) in results.items() if err is not None]
    rows = {}
    for preset in presets:
        report, err = results[preset]
        if err is not None:
            print(f"{preset}: FAILED ({err.strip().splitlines()[-1]})")
            continue
        rows[preset] = {
            "lifetime_kb": report.lifetime_kb,
            "pwe": report.pwe,
            "died": report.died,
            "throughput_kb_s": report.throughput_kb_s,
        }
        print(f"{preset}: lifetime {report.lifetime_kb:.0f} KB, "
              f"pwe {report.pwe}, throughput {report.throughput_kb_s:.1f} KB/s")
    (out / "sweep.json").write_text(json.dumps(rows, indent=2),
                                    encoding="utf-8")
    return 1 if failed else 0


def cmd_analyze(args):
    cfg = _resolve(args)
    requests = _workload(cfg)
    out = _outdir(args)
    ops = page_ops(requests, cfg.device.page_size_bytes)
    profile = analyze_longevity(ops)
    (out / "profile.csv").write_text(profile_to_csv(profile),
                                     encoding="utf-8")
    print(f"page ops: {len(ops)}, longevity samples: {profile.n_samples}")
    for cat, frac in profile.category_fractions.items():
        print(f"{cat.name.lower()}: {frac:.4f}")
    return 0


def cmd_synth(args):
    cfg = _resolve(args)
    if cfg.synth is None:
        raise ConfigError(["synth: section required for the synth command"])
    out = _outdir(args)
    requests = generate_synthetic(cfg.synth)
    path = out / "trace.csv"
    write_msr_trace(path, requests)
    print(f"wrote {len(requests)} requests to {path}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dslcsim",
        description="Trace-driven lifetime simulator for SLC storage-class "
                    "memory with multi-round page writes per erase cycle.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="replay one workload under one policy")
    _add_common(p_run)
    p_run.add_argument("--lifetime", action="store_true",
                       help="loop the workload until the device dies")
    p_run.set_defaults(fn=cmd_run)

    p_cmp = sub.add_parser("compare",
                           help="lifetime vs the conventional baseline")
    _add_common(p_cmp)
    p_cmp.set_defaults(fn=cmd_compare)

    p_swp = sub.add_parser("sweep", help="lifetime across mode-table presets")
    _add_common(p_swp)
    p_swp.add_argument("--presets",
                       help="comma-separated preset names (default: all)")
    p_swp.set_defaults(fn=cmd_sweep)

    p_ana = sub.add_parser("analyze", help="longevity profile of a workload")
    _add_common(p_ana)
    p_ana.set_defaults(fn=cmd_analyze)

    p_syn = sub.add_parser("synth", help="generate a synthetic trace")
    _add_common(p_syn)
    p_syn.set_defaults(fn=cmd_synth)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
