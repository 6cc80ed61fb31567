"""Command-line entry point: ``dsomarket run | sweep | inspect``.

Exit codes: 0 success, 1 invalid input or configuration, 2 infeasible model,
3 numerical breakdown in the LP kernel.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .builtin import MODES, builtin_instance, builtin_scenarios
from .instance import Instance
from .instance_io import InstanceError, instance_hash, load_instance
from .model import ModelError, assemble
from .pricing import (SWEEP_MODES, run_case, sensitivity_sweep, write_lmps_da, write_lmps_rt,
                      write_settlement, write_solution, write_sweep)
from .scenario import ScenarioError, ScenarioSet
from .solver.lp import NumericalBreakdown, Tolerances
from .solver.milp import MilpInfeasible
from .solver.mps import write_model_mps

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_BREAKDOWN = 0, 1, 2, 3

SWEEP_MODE_ALIASES = {"rt_premium": "rt_premium_scale", "spread": "sell_buy_spread_scale",
                      "rt_premium_scale": "rt_premium_scale",
                      "sell_buy_spread_scale": "sell_buy_spread_scale"}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as "infeasible"
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    builtin: str | None = None
    instance: str | None = None
    scenarios: str | None = None
    out: str = "out"
    tol: Tolerances = field(default_factory=Tolerances)
    multipliers: list[float] = field(default_factory=list)
    sweep_mode: str = "rt_premium_scale"
    export_lp: bool = False

    @property
    def scenario_mode(self) -> str:
        return self.scenarios or self.builtin or "deterministic"


def parse_multipliers(text: str) -> list[float]:
    """``a..b`` (inclusive integer range) or a comma list of numbers."""
    text = text.strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ConfigError(f"empty sweep range {text!r}")
            vals = [float(i) for i in range(lo, hi + 1)]
        else:
            vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse sweep multipliers {text!r}") from None
    if not vals:
        raise ConfigError("no sweep multipliers given")
    bad = [v for v in vals if not v > 0]
    if bad:
        raise ConfigError(f"sweep multipliers must be positive, got {bad[0]:g}")
    return vals


def load_case(cfg: RunConfig) -> tuple[Instance, ScenarioSet]:
    if (cfg.builtin is None) == (cfg.instance is None):
        raise ConfigError("give exactly one of --builtin or --instance")
    if cfg.scenario_mode not in MODES:
        raise ConfigError(f"unknown scenario mode {cfg.scenario_mode!r}")
    if cfg.builtin is not None:
        if cfg.builtin not in MODES:
            raise ConfigError(f"unknown builtin mode {cfg.builtin!r}")
        inst = builtin_instance(cfg.builtin)
    else:
        path = Path(cfg.instance)
        if not path.is_file():
            raise ConfigError(f"instance file not found: {path}")
        inst = load_instance(path)
    return inst, builtin_scenarios(inst, cfg.scenario_mode)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _provenance(inst: Instance) -> dict:
    paper = sorted(k for k, v in inst.provenance.items() if v == "paper")
    default = sorted(k for k, v in inst.provenance.items() if v == "default")
    other = {k: v for k, v in sorted(inst.provenance.items()) if v not in ("paper", "default")}
    return {"paper": paper, "default": default, "other": other}


def _write_manifest(out: Path, payload: dict) -> Path:
    path = out / "manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def cmd_run(cfg: RunConfig, stdout=sys.stdout) -> int:
    inst, scen = load_case(cfg)
    out = _out_dir(cfg)
    files = []
    t0 = time.perf_counter()
    if cfg.export_lp:
        files.append(write_model_mps(assemble(inst, scen), out / "model.mps").name)
    with (out / "solve.log").open("w") as log:
        res = run_case(inst, scen, cfg.tol, stream=log)
    elapsed = time.perf_counter() - t0
    files += [write_solution(out / "solution.csv", res.model, res.milp.x).name,
              write_lmps_da(out / "lmps_da.csv", res.lmps).name,
              write_lmps_rt(out / "lmps_rt.csv", res.lmps).name,
              write_settlement(out / "settlement.csv", res.settlement, scen).name,
              "solve.log"]
    m = res.milp
    _write_manifest(out, {
        "command": "run", "version": __version__,
        "source": {"builtin": cfg.builtin, "instance": cfg.instance, "scenarios": cfg.scenario_mode},
        "instance_sha256": instance_hash(inst),
        "provenance": _provenance(inst),
        "scenarios": [{"id": s.id, "probability": s.probability, "label": s.label} for s in scen],
        "model": {"columns": res.model.n_cols, "rows": res.model.n_rows,
                  "binaries": int(res.model.binaries.size)},
        "solver": {"status": m.status.value, "objective": m.objective, "root_bound": m.root_bound,
                   "nodes": m.nodes, "lp_iterations": m.lp_iterations, "seconds": round(elapsed, 3),
                   "tolerances": asdict(cfg.tol)},
        "files": sorted(files),
    })
    print(f"status {m.status.value}  objective {m.objective:.6f}  nodes {m.nodes}  "
          f"lp iterations {m.lp_iterations}  ({elapsed:.2f} s)", file=stdout)
    for a in res.settlement.aggregators:
        print(f"  {a.kind:6s} {a.id:3d}  da {a.da_energy:12.4f}  reg {a.reg_capacity + a.reg_mileage:10.4f}"
              f"  rt {a.rt_expected:11.4f}  total {a.total_expected:12.4f}", file=stdout)
    print(f"wrote {len(files) + 1} files to {out}", file=stdout)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, stdout=sys.stdout) -> int:
    if not cfg.multipliers:
        raise ConfigError("sweep needs --sweep a..b or a comma list of multipliers")
    inst, scen = load_case(cfg)
    out = _out_dir(cfg)
    t0 = time.perf_counter()
    series = sensitivity_sweep(inst, scen, cfg.multipliers, cfg.sweep_mode, cfg.tol)
    elapsed = time.perf_counter() - t0
    write_sweep(out / "sweep.csv", series)
    failed = series.failed
    _write_manifest(out, {
        "command": "sweep", "version": __version__,
        "source": {"builtin": cfg.builtin, "instance": cfg.instance, "scenarios": cfg.scenario_mode},
        "instance_sha256": instance_hash(inst),
        "provenance": _provenance(inst),
        "sweep": {"mode": cfg.sweep_mode, "multipliers": cfg.multipliers,
                  "failed": [r.multiplier for r in failed], "seconds": round(elapsed, 3)},
        "files": ["sweep.csv"],
    })
    for r in series.records:
        if r.error:
            print(f"  i={r.multiplier:g}  FAILED  {r.error}", file=stdout)
        else:
            print(f"  i={r.multiplier:g}  da {r.reag_da_revenue:11.4f}  rt {r.reag_rt_expected:11.4f}"
                  f"  total {r.reag_total:11.4f}  max schedule {max(r.reag_schedule):.4f}", file=stdout)
    print(f"{len(series.records)} cases, {len(failed)} failed ({elapsed:.1f} s); wrote {out / 'sweep.csv'}",
          file=stdout)
    if not failed:
        return EXIT_OK
    kinds = {r.error_kind for r in failed}
    if kinds == {"infeasible"}:
        return EXIT_INFEASIBLE
    if "breakdown" in kinds:
        return EXIT_BREAKDOWN
    return EXIT_INVALID


def cmd_inspect(cfg: RunConfig, stdout=sys.stdout) -> int:
    inst, scen = load_case(cfg)
    p = lambda *a: print(*a, file=stdout)  # noqa: E731
    p(f"scenarios ({cfg.scenario_mode}): {len(scen)}")
    p(f"  {'id':>3s} {'probability':>22s}  {'label':10s} {'reag mean':>10s} {'load mean':>10s} "
      f"{'rt buy mean':>11s} {'rt sell mean':>12s}")
    for s in scen:
        reag = sum(sum(v) for v in s.reag.values()) / max(inst.T, 1)
        load = sum(sum(v) for v in s.load_p.values()) / max(inst.T, 1)
        p(f"  {s.id:3d} {s.probability!r:>22s}  {s.label:10s} {reag:10.4f} {load:10.4f} "
          f"{sum(s.rt_buy) / inst.T:11.4f} {sum(s.rt_sell) / inst.T:12.4f}")
    model = assemble(inst, scen)
    p(f"model: {model.n_cols} columns ({model.binaries.size} binary), {model.n_rows} rows")
    p("  columns by kind:")
    for k, v in model.index.count_by_kind().items():
        p(f"    {k:14s} {v:6d}")
    p("  rows by family:")
    fam: dict[str, int] = {}
    for t in model.tags:
        fam[t.family] = fam.get(t.family, 0) + 1
    for k, v in fam.items():
        p(f"    {k:20s} {v:6d}")
    prov = _provenance(inst)
    p(f"provenance: {len(prov['paper'])} paper, {len(prov['default'])} default")
    for k in prov["paper"]:
        p(f"  paper    {k}")
    for k in prov["default"]:
        p(f"  default  {k}")
    for k, v in prov["other"].items():
        p(f"  {v:8s} {k}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dsomarket",
                 description="Two-stage DSO market clearing with DER aggregators.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--builtin", choices=MODES, help="built-in five-bus case")
        src.add_argument("--instance", metavar="PATH", help="instance document (YAML)")
        p.add_argument("--scenarios", choices=MODES,
                       help="scenario generator (defaults to the builtin mode, else deterministic)")

    def solver_opts(p):
        d = Tolerances()
        p.add_argument("--out", default="out", help="output directory (default: %(default)s)")
        for name in ("feasibility", "optimality", "pivot", "integrality", "gap"):
            p.add_argument(f"--tol-{name}", type=float, default=getattr(d, name), metavar="X",
                           help=f"{name} tolerance (default: {getattr(d, name):g})")

    run = sub.add_parser("run", help="solve one case and write CSVs plus a manifest")
    common(run)
    solver_opts(run)
    run.add_argument("--export-lp", action="store_true", help="also write model.mps")
    run.add_argument("--sweep", metavar="A..B", help="run a sweep instead (same as the sweep command)")
    run.add_argument("--sweep-mode", choices=sorted(SWEEP_MODE_ALIASES), default="rt_premium")

    sw = sub.add_parser("sweep", help="real-time price sensitivity sweep")
    common(sw)
    solver_opts(sw)
    sw.add_argument("--sweep", metavar="A..B", default="1..25",
                    help="multipliers: inclusive integer range or comma list (default: %(default)s)")
    sw.add_argument("--sweep-mode", choices=sorted(SWEEP_MODE_ALIASES), default="rt_premium")

    ins = sub.add_parser("inspect", help="print scenarios, model size and parameter provenance")
    common(ins)
    return ap


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(builtin=args.builtin, instance=args.instance, scenarios=args.scenarios)
    if hasattr(args, "out"):
        cfg.out = args.out
        tol = Tolerances(**{name: getattr(args, f"tol_{name}") for name in
                            ("feasibility", "optimality", "pivot", "integrality", "gap")})
        if any(not v > 0 for v in asdict(tol).values()):
            raise ConfigError("tolerances must be positive")
        cfg.tol = tol
    if getattr(args, "sweep", None):
        cfg.multipliers = parse_multipliers(args.sweep)
        cfg.sweep_mode = SWEEP_MODE_ALIASES[args.sweep_mode]
    cfg.export_lp = bool(getattr(args, "export_lp", False))
    return cfg


def main(argv: list[str] | None = None, stdout=sys.stdout, stderr=sys.stderr) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        if args.command == "inspect":
            return cmd_inspect(cfg, stdout)
        if args.command == "sweep" or cfg.multipliers:
            return cmd_sweep(cfg, stdout)
        return cmd_run(cfg, stdout)
    except (ConfigError, InstanceError, ScenarioError, ModelError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    except MilpInfeasible as exc:
        print(f"infeasible: {exc}", file=stderr)
        return EXIT_INFEASIBLE
    except NumericalBreakdown as exc:
        print(f"numerical breakdown: {exc}", file=stderr)
        return EXIT_BREAKDOWN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
