"""Command-line scenario runner.

    ondamp --list
    ondamp run 'figures/*' --output-dir runs --seed 3
    ondamp run --config configs/example.toml

Each scenario writes its traces and tables as CSV into
``<output_dir>/<scenario>/``; one ``summary.json`` per invocation collects
metrics and checks. The exit status is 1 if any check fails or a scenario
errors, 2 on usage or config errors and 0 otherwise.
"""

from __future__ import annotations

import argparse
import fnmatch
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import RunConfig, ScenarioConfig, load_config
from .errors import ConfigurationError
from .scenarios import SCENARIOS, ScenarioResult, run_scenario


def select(patterns, names=None) -> list[str]:
    """Registered names matching any glob pattern, in registry order."""
    names = list(SCENARIOS) if names is None else list(names)
    out = []
    for pat in patterns:
        hits = [n for n in names if fnmatch.fnmatchcase(n, pat)]
        if not hits:
            raise ConfigurationError(f"selector {pat!r} matches no registered scenario")
        out.extend(h for h in hits if h not in out)
    return [n for n in names if n in out]


def _clean(v):
    if isinstance(v, float):
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def write_artifacts(res: ScenarioResult, root: Path) -> list[str]:
    """Write one CSV per trace and table; return paths relative to ``root``."""
    d = root / res.name
    files = []
    for name, tr in res.traces.items():
        tr.to_csv(d / f"{name}.csv")
        files.append(f"{res.name}/{name}.csv")
    for name, table in res.tables.items():
        table.to_csv(d / f"{name}.csv")
        files.append(f"{res.name}/{name}.csv")
    return files


def execute(sc: ScenarioConfig) -> dict:
    """Run one scenario and write its artifacts; never raises."""
    entry = {"status": "error", "artifacts": [], "metrics": {}, "checks": []}
    try:
        res = run_scenario(sc.name, sc.params, sc.seed, sc.sysid, sc.sim)
        entry["artifacts"] = write_artifacts(res, Path(sc.output_dir))
    except Exception as exc:  # reported per scenario, turned into the exit status
        entry["error"] = f"{sc.name}: {type(exc).__name__}: {exc}"
        return entry
    entry["status"] = "passed" if res.passed else "failed"
    entry["metrics"] = res.metrics
    entry["checks"] = [
        {"name": c.name, "passed": c.passed, "value": c.value, "limit": c.limit}
        for c in res.checks
    ]
    return entry


def run(cfg: RunConfig, names: list[str], jobs: int = 1, out=None) -> int:
    out = out or sys.stdout
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    configs = [cfg.scenario(n) for n in names]
    started = time.perf_counter()
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(execute, configs))
    else:
        entries = []
        for sc in configs:
            t0 = time.perf_counter()
            entries.append(execute(sc))
            print(f"{sc.name}: {entries[-1]['status']} ({time.perf_counter() - t0:.1f} s)", file=out)
    for name, e in zip(names, entries):
        if jobs > 1 and len(configs) > 1:
            print(f"{name}: {e['status']}", file=out)
        for c in e["checks"]:
            flag = "PASS" if c["passed"] else "FAIL"
            print(f"  {flag} {c['name']} ({c['limit']})", file=out)
        if "error" in e:
            print(f"  ERROR {e['error']}", file=out)
    ok = all(e["status"] == "passed" for e in entries)
    summary = {"version": __version__, "seed": cfg.seed, "passed": ok,
               "scenarios": dict(zip(names, entries))}
    (root / "summary.json").write_text(
        json.dumps(_clean(summary), indent=2, sort_keys=True, allow_nan=False) + "\n"
    )
    print(f"{sum(e['status'] == 'passed' for e in entries)}/{len(entries)} scenarios passed "
          f"in {time.perf_counter() - started:.1f} s; summary: {root / 'summary.json'}", file=out)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ondamp", description="Run OND control scenarios.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--list", action="store_true", help="list registered scenarios and exit")
    sub = p.add_subparsers(dest="command")
    r = sub.add_parser("run", help="run scenarios matching glob selectors")
    r.add_argument("selectors", nargs="*", help="scenario names or globs, e.g. 'figures/*'")
    r.add_argument("-c", "--config", help="TOML config file")
    r.add_argument("-o", "--output-dir", help="override the output directory")
    r.add_argument("--seed", type=int, help="override the seed")
    r.add_argument("-j", "--jobs", type=int, default=1, help="scenarios to run in parallel")
    sub.add_parser("list", help="list registered scenarios")
    return p


def list_scenarios(out=None) -> None:
    out = out or sys.stdout
    width = max(len(n) for n in SCENARIOS)
    for name, sc in SCENARIOS.items():
        print(f"{name:<{width}}  {sc.description}", file=out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list or args.command == "list":
        list_scenarios()
        return 0
    if args.command != "run":
        parser.print_help()
        return 2
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        overrides = {}
        if args.output_dir is not None:
            overrides["output_dir"] = Path(args.output_dir)
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            cfg = _replace(cfg, **overrides)
        patterns = args.selectors or list(cfg.scenarios)
        if not patterns:
            raise ConfigurationError("no scenarios selected (pass selectors or set 'scenarios')")
        names = select(patterns)
        if args.jobs < 1:
            raise ConfigurationError("--jobs must be >= 1")
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg, names, args.jobs)


def _replace(cfg: RunConfig, **kw) -> RunConfig:
    """Apply command-line overrides; a seed override also reseeds the custom loop's noise."""
    new = replace(cfg, **kw)
    if "seed" in kw and new.sim is not None:
        sim = new.sim
        new = replace(new, sim=replace(sim, noise=replace(sim.noise, seed=kw["seed"])))
    return new


if __name__ == "__main__":
    sys.exit(main())
