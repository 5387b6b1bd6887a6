"""Suite runner: named experiment sets to CSV plus a JSON mirror.

The CSV holds only quantities determined by the config and seeds, so two runs
of the same config produce identical bytes.  Version, config digest and a
timestamp go to the JSON mirror.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import subprocess
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from .acceptance import CRITERIA, CSV_FIELDS, CriterionResult, row, run_criterion
from .bounds import bound_report
from .config import ExperimentConfig
from .crossing import duality_audit, estimate_A, estimate_B, planar_samples

log = logging.getLogger(__name__)

EXPERIMENTS = ("acceptance", "crossing-a", "crossing-b", "duality", "bounds") + tuple(
    f"criterion-{i}" for i in CRITERIA)


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True, text=True,
                             timeout=10, check=True)
        return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        return __version__


@dataclass
class ExperimentOutcome:
    name: str
    passed: bool
    summary: str
    rows: list[dict] = field(default_factory=list)
    error: str = ""
    seeds: list = field(default_factory=list)


@dataclass
class SuiteResult:
    outcomes: list[ExperimentOutcome]
    csv_path: Path
    json_path: Path

    @property
    def failures(self) -> list[str]:
        return [o.name for o in self.outcomes if not o.passed]

    @property
    def exit_status(self) -> int:
        return 1 if self.failures else 0


def _from_criterion(res: CriterionResult) -> ExperimentOutcome:
    seeds = sorted({r["seed"] for r in res.rows if r["seed"] != ""}, key=str)
    return ExperimentOutcome(f"criterion-{res.number}", res.passed, res.line(), res.rows, seeds=seeds)


def _crossing(config: ExperimentConfig, kind: str) -> ExperimentOutcome:
    us = list(config.u_values)
    n = max(config.depth, 1)
    if kind == "A":
        est = estimate_A(us, n, config, config.seed)
        mono = bool(np.all(np.diff(est.probability[np.argsort(est.us)]) <= 0))
    else:
        est = estimate_B(us, n, np.zeros(config.dim, dtype=np.int64), config, config.seed)
        mono = bool(np.all(np.diff(est.probability[np.argsort(est.us)]) >= 0))
    flag = ";".join(est.flags)
    rows = [row(kind, config.dim, float(u), est.L0, n, est.reps, float(p), float(se), "", flag, config.seed)
            for u, p, se in zip(est.us, est.probability, est.standard_error)]
    summary = f"{kind} n={n}: " + ", ".join(f"u={u:g}: {p:.4f}±{se:.4f}"
                                            for u, p, se in zip(est.us, est.probability, est.standard_error))
    return ExperimentOutcome(f"crossing-{kind.lower()}", mono, summary + ("" if mono else " (NOT monotone)"),
                             rows, seeds=[config.seed])


def _duality(config: ExperimentConfig) -> ExperimentOutcome:
    n = max(config.depth, 1)
    us = list(config.u_values)
    samples = planar_samples(us, n, config, config.seed, config.reps)
    bad = sum(not duality_audit(occ, n, config.L0).complementary for u in samples for occ in samples[u])
    total = config.reps * len(us)
    rows = [row("duality", config.dim, ";".join(f"{u:g}" for u in us), config.L0, n, total, bad, 0, 0, "",
                config.seed)]
    return ExperimentOutcome("duality", bad == 0, f"{total} configurations, {bad} mismatches", rows,
                             seeds=[config.seed])


def _bounds(config: ExperimentConfig) -> ExperimentOutcome:
    rep = bound_report(config.dim, config.load_green() if config.green_table else None)
    d = rep.to_dict()
    rows = [row("bounds", config.dim, "", d["L0_min"], "", 1, d["upper_bound"], 0, d["lower_bound"],
                "upper;lower", config.seed)]
    rows += [row("q_table", config.dim, q["u"], "", "", 1, q["q"], 0, "", "", config.seed) for q in d["q_table"]]
    rows += [row("p_table", config.dim, "", p["L0"], "", 1, p["p"], 0, "", "", config.seed) for p in d["p_table"]]
    return ExperimentOutcome("bounds", rep.consistent, f"lower={d['lower_bound']} upper={d['upper_bound']}",
                             rows, seeds=[config.seed])


def _run_one(name: str, config: ExperimentConfig) -> list[ExperimentOutcome]:
    if name == "acceptance":
        return [_from_criterion(run_criterion(i, config)) for i in CRITERIA]
    if name.startswith("criterion-"):
        return [_from_criterion(run_criterion(int(name.split("-", 1)[1]), config))]
    if name == "crossing-a":
        return [_crossing(config, "A")]
    if name == "crossing-b":
        return [_crossing(config, "B")]
    if name == "duality":
        return [_duality(config)]
    if name == "bounds":
        return [_bounds(config)]
    raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")


def write_csv(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def run_suite(config: ExperimentConfig, out_dir: str | Path | None = None, echo=None) -> SuiteResult:
    """Run every experiment named in the config; failures are recorded and the rest still run."""
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outcomes: list[ExperimentOutcome] = []
    for name in config.experiments:
        try:
            got = _run_one(name, config)
        except Exception as exc:  # recorded, the suite carries on
            log.error("experiment %s failed: %s", name, exc)
            got = [ExperimentOutcome(name, False, f"error: {exc}", error=traceback.format_exc())]
        for o in got:
            if echo is not None:
                echo(o.summary)
        outcomes.extend(got)
    rows = sorted((r for o in outcomes for r in o.rows), key=lambda r: (str(r["experiment"]), str(r["seed"])))
    csv_path = out / "results.csv"
    json_path = out / "results.json"
    write_csv(rows, csv_path)
    mirror = {
        "version": version_string(),
        "config": config.to_dict(),
        "config_digest": config.digest(),
        "master_seed": config.seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "experiments": [{"name": o.name, "passed": o.passed, "summary": o.summary, "seeds": o.seeds,
                         "error": o.error} for o in outcomes],
        "rows": rows,
    }
    json_path.write_text(json.dumps(mirror, indent=1, default=str) + "\n")
    return SuiteResult(outcomes, csv_path, json_path)
