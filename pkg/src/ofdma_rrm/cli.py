"""
Command-line front end.

Runs the cartesian sweep scheduler x mask x antenna over a list of seeds
(one drop per seed) and writes results tables, per-UE distributions, plot
data and figures to ``--out``.

    ofdma-rrm --scheduler pf,mpmpf-m1 --mask flat,pm1,pm2 --drops 4 --out results/
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .config import ConfigError, SystemConfig, parse_config, scheduler_variant, with_overrides
from .engine import run_variants
from .report import ResultRecord, emit_report, fmt, SUMMARY_COLUMNS
from .stats import aggregate

log = logging.getLogger("ofdma_rrm")


@dataclass
class RunSpec:
    config_path: str | None = None
    schedulers: list = field(default_factory=list)     # labels such as "pf" or "mpmpf-m2"
    masks: list = field(default_factory=list)
    antennas: list = field(default_factory=list)
    alpha1: float | None = None
    alpha2: float | None = None
    seeds: list = field(default_factory=list)
    drops: int | None = None
    ttis: int | None = None
    warmup: int | None = None
    out: str = "results"


@dataclass
class Variant:
    label: str
    config: SystemConfig
    scheduler: str
    mask: str
    antenna: str


def _split(text):
    return [t.strip() for t in text.split(",") if t.strip()] if text else []


def parse_seeds(text: str) -> list:
    """``"1,2,5"`` or ``"1-4"`` (inclusive) or a mix of both."""
    seeds = []
    for part in _split(text):
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                seeds += list(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ConfigError(f"--seeds: cannot parse {part!r}") from None
    return seeds


def build_variants(spec: RunSpec) -> tuple:
    """Resolve the base config and expand the sweep; returns (base config, variants, seeds)."""
    base = parse_config(spec.config_path)
    overrides = {"run.n_ttis": spec.ttis, "run.warmup_ttis": spec.warmup, "run.n_drops": spec.drops}
    base = with_overrides(base, overrides)

    schedulers = spec.schedulers or [base.scheduler.algorithm]
    masks = spec.masks or [base.mask.kind]
    antennas = spec.antennas or [base.radio.antenna]
    variants = []
    for sched, mask, antenna in itertools.product(schedulers, masks, antennas):
        ov = scheduler_variant(sched) if sched else {}
        ov.update({"mask.kind": mask, "radio.antenna": antenna})
        # explicit alphas win over a preset
        for key, value in (("scheduler.alpha1", spec.alpha1), ("scheduler.alpha2", spec.alpha2)):
            if value is not None:
                ov[key] = value
        cfg = with_overrides(base, ov)
        label = sched
        if spec.alpha1 is not None or spec.alpha2 is not None:
            label += f"(a1={fmt(cfg.scheduler.alpha1)},a2={fmt(cfg.scheduler.alpha2)})"
        if len(masks) > 1 or mask != "flat":
            label += f"/{mask}"
        if len(antennas) > 1:
            label += f"/{antenna}"
        variants.append(Variant(label, cfg, cfg.scheduler.algorithm, mask, antenna))

    labels = [v.label for v in variants]
    if len(set(labels)) != len(labels):
        raise ConfigError("sweep produces duplicate variant labels")
    seeds = spec.seeds or list(range(base.run.seed, base.run.seed + base.run.n_drops))
    return base, variants, seeds


def run_experiment(spec: RunSpec) -> list:
    """
    Run every variant on every seed and return one :class:`ResultRecord` per variant.

    Variants share each drop's channel but not their state. A variant whose
    drop fails is recorded with its error and the others continue.
    """
    base, variants, seeds = build_variants(spec)
    drops = {v.label: [] for v in variants}
    seconds = {v.label: 0.0 for v in variants}
    errors = {}
    for seed in seeds:
        live = [v for v in variants if v.label not in errors]
        if not live:
            break
        log.info("seed %d: %d variants", seed, len(live))
        for v, res in zip(live, run_variants([v.config for v in live], seed)):
            if isinstance(res, Exception):
                errors[v.label] = f"seed {seed}: {type(res).__name__}: {res}"
            else:
                drops[v.label].append(res)
                seconds[v.label] += res.seconds

    records = []
    for v in variants:
        meta = dict(scheduler=v.scheduler, mask=v.mask, antenna=v.antenna)
        fp = v.config.fingerprint()
        if v.label in errors:
            records.append(ResultRecord(v.label, fp, seeds, seconds=seconds[v.label], error=errors[v.label], **meta))
        else:
            records.append(ResultRecord.from_report(v.label, fp, seeds, aggregate(drops[v.label]),
                                                    seconds[v.label], **meta))
    return records


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ofdma-rrm", description="OFDMA downlink scheduler simulations.")
    p.add_argument("--config", help="TOML run configuration (defaults apply to omitted keys)")
    p.add_argument("--scheduler", help="comma list of pf, ppf, mmpf, mpmpf, optionally with -m1/-m2/-m3")
    p.add_argument("--mask", help="comma list of flat, pm1, pm2, rb012, custom")
    p.add_argument("--alpha1", type=float, help="override alpha1 for every variant")
    p.add_argument("--alpha2", type=float, help="override alpha2 for every variant")
    p.add_argument("--antenna", help="comma list of mimo (2x2 LMMSE), simo (1x2 MRC)")
    p.add_argument("--seeds", help='drop seeds, e.g. "1,2,3" or "1-4"')
    p.add_argument("--drops", type=int, help="number of drops (seeds run.seed, run.seed+1, ...)")
    p.add_argument("--ttis", type=int, help="TTIs per drop, warm-up included")
    p.add_argument("--warmup", type=int, help="warm-up TTIs excluded from statistics")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = RunSpec(args.config, _split(args.scheduler), _split(args.mask), _split(args.antenna),
                       args.alpha1, args.alpha2, parse_seeds(args.seeds), args.drops, args.ttis,
                       args.warmup, args.out)
        base, variants, seeds = build_variants(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(
            {v.label: {"fingerprint": v.config.fingerprint(), "config": v.config.to_dict()} for v in variants},
            indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        print(f"cannot write to {out}: {exc}", file=sys.stderr)
        return 2
    print(f"# base config {base.fingerprint()}, seeds {seeds}, {len(variants)} variant(s)")

    records = run_experiment(spec)
    try:
        emit_report(records, out, args.format, figures=not args.no_figures)
    except OSError as exc:
        print(f"cannot write results: {exc}", file=sys.stderr)
        return 2

    print(",".join(SUMMARY_COLUMNS))
    for r in records:
        print(",".join(fmt(getattr(r, c)) for c in SUMMARY_COLUMNS))
        if r.error:
            print(f"# {r.label} failed: {r.error}", file=sys.stderr)
    return 0 if all(r.ok for r in records) else 1


if __name__ == "__main__":
    sys.exit(main())
