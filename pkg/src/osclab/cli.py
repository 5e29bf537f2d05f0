"""Batch front end: ``osclab run --config FILE --study NAME``.

Exit status is 0 when every executed study passes, 1 when one fails and 2
on usage or configuration errors.
"""

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import lab
from .config import ConfigError, default_config, parse_config
from .errors import OscLabError

log = logging.getLogger("osclab")

STUDIES = ("coefficients", "concentrated", "boundary_measure", "trace", "main", "eigen")
EXTRA_STUDIES = ("uniqueness", "fem")


def _smooth_pair():
    """Non-constant test pair for the concentrated-integral study."""
    return (lambda P: 1.0 + 0.5 * P[..., 0] ** 2), (lambda P: np.cos(P[..., 1]))


class Runner:
    """Executes studies for one configuration, sharing expensive intermediates."""

    def __init__(self, config, parallel=False):
        self.config = config
        self.parallel = parallel
        self.scenario = config.scenario()
        self.settings = lab.SolverSettings(
            config["solver.tol"], config["solver.theta"], config["solver.max_picard"],
            config["solver.max_newton"], config["solver.perturbation"], config["seed"])
        self._coeffs = None
        self._ladder = None

    @property
    def coeffs(self):
        if self._coeffs is None:
            self._coeffs = lab.coefficients_for(self.scenario)
        return self._coeffs

    @property
    def ladder_solutions(self):
        if self._ladder is None:
            self._ladder = lab.solve_ladder(self.scenario, self.coeffs, settings=self.settings)
        return self._ladder

    def run(self, study):
        c, sc = self.config, self.scenario
        if study == "coefficients":
            return [lab.coefficients_study(sc, c["tolerances.n_hats"], c["tolerances.coefficients"])]
        if study == "concentrated":
            h, phi = _smooth_pair()
            tol = c["tolerances.concentrated"]
            one = lab.concentrated_limit_study(sc, coeffs=self.coeffs, tol=tol, parallel=self.parallel)
            pair = lab.concentrated_limit_study(sc, h, phi, self.coeffs, tol, self.parallel)
            pair.study = "concentrated_pair"
            return [one, pair]
        if study == "boundary_measure":
            return [lab.boundary_measure_study(sc, self.coeffs, c["tolerances.boundary_measure"])]
        if study == "trace":
            return [lab.trace_constant_study(sc, c["tolerances.trace_ratio"], self.parallel)]
        if study == "main":
            return [lab.main_convergence_study(sc, floor_factor=c["tolerances.main_floor_factor"],
                                               ladder_solutions=self.ladder_solutions)]
        if study == "eigen":
            return [lab.eigen_convergence_study(sc, k=c["tolerances.eigen_k"],
                                                floor_factor=c["tolerances.eigen_floor_factor"],
                                                ladder_solutions=self.ladder_solutions)]
        if study == "uniqueness":
            return [lab.uniqueness_study(sc)]
        if study == "fem":
            rep = lab.manufactured_solution_study()
            lam = lab.neumann_eigenvalues()
            exact = 1.0 + np.pi ** 2 * np.array([0.0, 1.0, 1.0, 2.0])
            rel = np.abs(lam - exact) / exact
            eig = lab.ConvergenceReport("fem_eigen", np.arange(1, 5), {"computed [1]": lam, "exact [1]": exact,
                                        "relative_error [1]": rel}, index="mode [1]", tolerance=1e-2,
                                        limit=float(rel.max()), passed=bool(rel.max() <= 1e-2))
            return [rep, eig]
        raise ValueError(study)


def provenance(config):
    sc = config.scenario()
    tol = ";".join(f"{k}={v!r}" for k, v in config.values["tolerances"].items())
    ladder = " ".join(repr(float(e)) for e in sc.ladder)
    return (f"# config={config.digest()} scenario={sc.name} seed={config['seed']} "
            f"solver_tol={config['solver.tol']!r} ladder=[{ladder}] tolerances=[{tol}]")


def _cell(v):
    return repr(float(v))


def write_report(rep, out, header):
    """Write ``<study>.csv`` and a gnuplot-readable ``<study>.dat``."""
    names = [rep.index] + list(rep.columns) + ["pass [bool]"]
    rows = [[_cell(e)] + [_cell(col[i]) for col in rep.columns.values()] + [str(int(rep.passed))]
            for i, e in enumerate(rep.ladder)]
    with open(out / f"{rep.study}.csv", "w", newline="") as fh:
        fh.write(header + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        w.writerows(rows)
    with open(out / f"{rep.study}.dat", "w") as fh:
        fh.write(header + "\n")
        fh.write("# " + " ".join(n.split(" ")[0] for n in names) + "\n")
        for r in rows:
            fh.write(" ".join(r) + "\n")


def summary_lines(rep):
    verdict = "PASS" if rep.passed else "FAIL"
    lines = [f"{rep.study}: {verdict}  limit={rep.limit!r} target={rep.target!r} "
             f"tolerance={rep.tolerance!r} rate={rep.rate!r} floor={rep.floor!r}"]
    lines += [f"    {n}" for n in rep.notes]
    return lines


def run(config, studies, out, parallel=False):
    """Execute ``studies`` and write artifacts under ``out``; return the exit status."""
    out.mkdir(parents=True, exist_ok=True)
    header = provenance(config)
    runner = Runner(config, parallel)
    summary = [header, ""]
    ok = True
    for study in studies:
        t0 = time.perf_counter()
        log.info("running %s on %s", study, config["scenario"])
        try:
            reports = runner.run(study)
        except OscLabError as exc:
            ok = False
            summary.append(f"{study}: FAIL  aborted: {exc}")
            log.error("%s aborted: %s", study, exc)
            continue
        for rep in reports:
            write_report(rep, out, header)
            summary.extend(summary_lines(rep))
            ok &= rep.passed
        log.info("%s finished in %.1f s", study, time.perf_counter() - t0)
    summary += ["", "configuration (defaults marked):"]
    defaulted = set(config.defaulted)
    for line in config.serialize().splitlines():
        summary.append(f"    {line}")
    summary.append("    defaulted: " + (", ".join(sorted(defaulted)) or "none"))
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    return 0 if ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="osclab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run studies and write CSV reports")
    r.add_argument("--config", type=Path, help="configuration file")
    r.add_argument("--scenario", help="registered scenario, when no configuration file is given")
    r.add_argument("--study", default="all", choices=STUDIES + EXTRA_STUDIES + ("all",))
    r.add_argument("--out", type=Path, help="output directory (overrides the configuration)")
    r.add_argument("--parallel", action="store_true", help="compute independent ladder points in worker processes")
    r.add_argument("--seed", type=int, help="seed for randomized initial data (overrides the configuration)")
    r.add_argument("-v", "--verbose", action="store_true")
    d = sub.add_parser("defaults", help="print the canonical configuration for a scenario")
    d.add_argument("scenario")
    return p


def _load(args):
    if args.config is not None and args.scenario is not None:
        raise ConfigError("give either --config or --scenario")
    if args.config is not None:
        text = args.config.read_text()
    elif args.scenario is not None:
        text = f"scenario = {args.scenario}\n"
    else:
        raise ConfigError("one of --config or --scenario is required")
    if args.seed is not None:
        text = _override(text, "seed", args.seed)
    if args.out is not None:
        text = _override(text, "out", args.out)
    return parse_config(text)


def _override(text, key, value):
    """Replace or insert a top-level key ahead of the first section header."""
    lines = text.splitlines()
    head = next((i for i, ln in enumerate(lines) if ln.strip().startswith("[")), len(lines))
    kept = [ln for ln in lines[:head] if ln.split("=", 1)[0].strip() != key]
    return "\n".join(kept + [f"{key} = {value}"] + lines[head:]) + "\n"


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "defaults":
        try:
            sys.stdout.write(default_config(args.scenario).serialize())
        except ConfigError as exc:
            print(f"osclab: {exc}", file=sys.stderr)
            return 2
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        config = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"osclab: {exc}", file=sys.stderr)
        return 2
    studies = STUDIES if args.study == "all" else (args.study,)
    status = run(config, studies, Path(config["out"]), args.parallel)
    text = (Path(config["out"]) / "summary.txt").read_text()
    print(text.split("\nconfiguration")[0].rstrip())
    return status


if __name__ == "__main__":
    sys.exit(main())
