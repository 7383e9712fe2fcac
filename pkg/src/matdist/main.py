#!/usr/bin/env python3
"""
Command-line entry point: matdist {dims,classify,isomorphism,trace,remodel}.

Exit codes: 0 success (a NotFound isomorphism verdict included), 2 bad
configuration or unknown law, 3 computation failure after writing whatever
partial report exists.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# Import with fallback for both package and direct execution
try:
    from . import __version__
    from .classify import BODY_DIM, BODY_TIME_DIM, NO_TIME_DIRECTION, TIME_DIRECTION, classify
    from .distributions import grid_sweep
    from .errors import (ConfigError, IncompleteSweepError, InvalidProcessError, IsomorphismNotFoundError,
                         LawNotFoundError, MatdistError, NoLeafError, NonConvergedError, TraceAbortedError)
    from .foliation import LeafVariant, freeze_time_check, trace_leaf
    from .isomorph import find_isomorphism, symmetry_algebra, transitivity_probe
    from .remodel import RemodelingProcess, check_membership, classify_growth, mass_consistency, velocity_gradient
    from .reports import write_csv, write_json
    from .settings_manager import SettingsManager
    from .workers import default_jobs
except ImportError:
    sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
    from matdist import __version__
    from matdist.classify import BODY_DIM, BODY_TIME_DIM, NO_TIME_DIRECTION, TIME_DIRECTION, classify
    from matdist.distributions import grid_sweep
    from matdist.errors import (ConfigError, IncompleteSweepError, InvalidProcessError, IsomorphismNotFoundError,
                                LawNotFoundError, MatdistError, NoLeafError, NonConvergedError, TraceAbortedError)
    from matdist.foliation import LeafVariant, freeze_time_check, trace_leaf
    from matdist.isomorph import find_isomorphism, symmetry_algebra, transitivity_probe
    from matdist.remodel import (RemodelingProcess, check_membership, classify_growth, mass_consistency,
                                 velocity_gradient)
    from matdist.reports import write_csv, write_json
    from matdist.settings_manager import SettingsManager
    from matdist.workers import default_jobs

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTATION = 3

DIMS_COLUMNS = ("t", "x1", "x2", "x3", "dim_full", "dim_base", "dim_state_t", "dim_state_t_base",
                "dim_particle_x", "dim_particle_x_base", "dim_isotropy", "dim_vertical", "status", "error")
TRACE_COLUMNS = ("segment", "step", "t", "x1", "x2", "x3", "dim")
PAIR_COLUMNS = ("anchor", "other", "t_from", "x1_from", "x2_from", "x3_from",
                "t_to", "x1_to", "x2_to", "x3_to", "status", "residual")


class MatdistApp:
    """Runs one subcommand against a loaded configuration."""

    def __init__(self, settings: SettingsManager, jobs: int = 1):
        self.settings = settings
        self.jobs = jobs
        self.out_dir = settings.output_dir()
        self.formats = settings.formats()
        self.law = settings.law()
        self.sampling = settings.sampling_config()
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def _header(self) -> Dict[str, Any]:
        return {
            "law": {"name": self.law.name, "params": dict(self.law.params), "description": self.law.description},
            "sampling": self.sampling.to_dict(),
            "version": __version__,
        }

    def _json(self, name: str, payload: Dict[str, Any]) -> None:
        if "json" in self.formats:
            write_json(self.out_dir / name, dict(self._header(), **payload))

    def _csv(self, name: str, rows: List[Dict[str, Any]], columns) -> None:
        if "csv" in self.formats:
            write_csv(self.out_dir / name, rows, columns)

    def _sweep(self):
        grid = self.settings.grid_spec()
        logger.info("🔧 Sweeping %d grid points of %s with %d workers", len(grid), self.law.name, self.jobs)
        return grid, grid_sweep(self.law, grid, self.sampling, self.jobs)

    def cmd_dims(self) -> int:
        """Fiber-dimension table over the grid."""
        _, sweep = self._sweep()
        failed = sum(r.failed for r in sweep)
        self._csv("dims.csv", [r.summary() for r in sweep], DIMS_COLUMNS)
        self._json("dims.json", {"status": "incomplete" if failed else "complete",
                                 "points": [r.to_dict() for r in sweep]})
        if failed:
            logger.error("❌ %d of %d grid points failed", failed, len(sweep))
            return EXIT_COMPUTATION
        logger.info("✅ Dimensions computed at %d points", len(sweep))
        return EXIT_OK

    def cmd_classify(self) -> int:
        """Verdicts from the dimension criteria."""
        _, sweep = self._sweep()
        thresholds = dict(self.sampling.to_dict(), body_time_dim=BODY_TIME_DIM, body_dim=BODY_DIM,
                          time_direction=TIME_DIRECTION, no_time_direction=NO_TIME_DIRECTION)
        try:
            report = classify(sweep, thresholds)
            code = EXIT_OK
        except IncompleteSweepError as e:
            logger.error("❌ %s", e)
            report, code = e.report, EXIT_COMPUTATION
        self._json("classification.json", report.to_dict())
        return code

    def cmd_isomorphism(self) -> int:
        """Pairwise search, optional transitivity probe and symmetry algebra."""
        iso_cfg = self.settings.isomorphism_config()
        source = self.settings.point("isomorphism.source")
        target = self.settings.point("isomorphism.target")
        probe = bool(self.settings.get_setting("isomorphism.probe"))
        symmetry = bool(self.settings.get_setting("isomorphism.symmetry"))
        if (source is None) != (target is None):
            raise ConfigError("isomorphism.source and isomorphism.target must be given together")
        if source is None and not probe and not symmetry:
            raise ConfigError("isomorphism needs source and target, probe = true or symmetry = true")

        payload: Dict[str, Any] = {"isomorphism": iso_cfg.to_dict()}
        code = EXIT_OK
        if source is not None:
            try:
                iso = find_isomorphism(self.law, source, target, self.sampling, iso_cfg)
                payload["result"] = dict(iso.to_dict(), status="found")
                logger.info("✅ Isomorphism found, residual %.3e", iso.residual)
            except (IsomorphismNotFoundError, NonConvergedError) as e:
                status = "not_found" if isinstance(e, IsomorphismNotFoundError) else "non_converged"
                payload["result"] = {
                    "status": status,
                    "from": {"t": source[0], "x": list(source[1])},
                    "to": {"t": target[0], "x": list(target[1])},
                    "best_residual": e.best_residual,
                    "best_P": None if e.best_P is None else e.best_P.tolist(),
                }
                logger.info("🔍 Search ended: %s (best residual %.3e)", status, e.best_residual)
                if status == "non_converged":
                    code = EXIT_COMPUTATION

        if symmetry:
            at = source or self.settings.grid_spec().points()[0]
            payload["symmetry"] = symmetry_algebra(self.law, at, self.sampling).to_dict()

        if probe:
            report = transitivity_probe(self.law, self.settings.grid_spec(), self.sampling, iso_cfg, self.jobs)
            self._json("transitivity.json", report.to_dict())
            self._csv("transitivity.csv", [pair.row() for pair in report.pairs], PAIR_COLUMNS)
            payload["transitivity"] = {
                "orbits": report.orbits,
                "uniform_remodeling_evidence": report.uniform_remodeling_evidence,
                "uniform_aging_evidence": report.uniform_aging_evidence,
            }
        self._json("isomorphism.json", payload)
        return code

    def cmd_trace(self) -> int:
        """Leaf trace from the configured seed, optional freeze-time check."""
        seed = self.settings.point("trace.seed")
        if seed is None:
            raise ConfigError("trace.seed = {t = …, x = [x1, x2, x3]} is required")
        variant = LeafVariant(self.settings.get_setting("trace.variant"))
        steps = int(self.settings.get_setting("trace.steps"))
        step = float(self.settings.get_setting("trace.step"))
        directions = self.settings.get_setting("trace.directions")

        code = EXIT_OK
        try:
            trace = trace_leaf(self.law, seed, variant, directions, steps, step, self.sampling)
            payload = dict(trace.to_dict(), status="complete")
        except TraceAbortedError as e:
            logger.error("❌ Trace aborted: %s", e)
            trace, code = e.trace, EXIT_COMPUTATION
            payload = dict(trace.to_dict(), status="aborted", error=f"{type(e).__name__}: {e}")
        except NoLeafError as e:
            logger.error("❌ %s", e)
            trace, code = None, EXIT_COMPUTATION
            payload = {"status": "aborted", "error": f"{type(e).__name__}: {e}", "points": []}

        self._csv("trace.csv", trace.rows() if trace is not None else [], TRACE_COLUMNS)
        self._json("trace.json", payload)

        if self.settings.get_setting("trace.freeze_time_check"):
            check = freeze_time_check(self.law, seed, self.sampling, steps, step)
            self._json("freeze_time.json", check.to_dict())
            logger.info("🧊 Freeze-time distance %.3e (limit %.3e)", check.hausdorff, 5 * step)
        return code

    def cmd_remodel(self) -> int:
        """Membership, mass consistency and growth class of a process CSV."""
        path = self.settings.resolve_path("remodel.process")
        if path is None:
            raise ConfigError("remodel.process (CSV path) is required")
        if not path.exists():
            raise ConfigError(f"process file {path} does not exist")
        proc = RemodelingProcess.from_csv(path, particle=self.settings.get_setting("remodel.particle"),
                                          rho0=self.settings.get_setting("remodel.rho0"))

        growth = classify_growth(proc, float(self.settings.get_setting("remodel.tau_tr")))
        payload: Dict[str, Any] = {
            "process": {"file": path.name, "particle": list(proc.particle), "samples": int(proc.times.size)},
            "velocity_gradient": velocity_gradient(proc).tolist(),
            "growth": growth.to_dict(),
            "mass": None,
            "membership": None,
        }
        if proc.rho is not None:
            payload["mass"] = mass_consistency(proc, float(self.settings.get_setting("remodel.tau_mass"))).to_dict()
        if self.settings.get_setting("remodel.check_membership"):
            tau_iso = self.settings.isomorphism_config().tau_iso
            payload["membership"] = check_membership(self.law, proc, self.sampling, tau_iso).to_dict()
        self._json("remodel.json", payload)
        logger.info("✅ Growth classes: %s", sorted({c.value for c in growth.classes}))
        return EXIT_OK

    def run(self, command: str) -> int:
        return getattr(self, f"cmd_{command}")()


COMMANDS = ("dims", "classify", "isomorphism", "trace", "remodel")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matdist", description="Material-distribution toolkit for evolving bodies.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=getattr(MatdistApp, f"cmd_{name}").__doc__)
        p.add_argument("--config", help="TOML or JSON run configuration")
        p.add_argument("--seed", type=int, help="override sampling.seed")
        p.add_argument("--out", help="override output.dir")
        p.add_argument("--jobs", type=int, default=None, help="worker threads (default: physical cores)")
        p.add_argument("--print-config", action="store_true", help="print the merged configuration first")
    return parser


def configure_logging() -> None:
    """Root logger level from MATDIST_LOG (a .env file may set it)."""
    load_dotenv()
    level_name = os.getenv("MATDIST_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    configure_logging()

    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["sampling"] = {"seed": args.seed}
    if args.out is not None:
        overrides["output"] = {"dir": args.out}

    try:
        settings = SettingsManager(args.config, overrides)
        if args.print_config:
            settings.print_configuration()
        jobs = args.jobs if args.jobs is not None else default_jobs()
        if jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        app = MatdistApp(settings, jobs)
        return app.run(args.command)
    except (ConfigError, LawNotFoundError, InvalidProcessError) as e:
        logger.error("❌ Configuration error: %s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MatdistError as e:
        logger.error("❌ %s: %s", type(e).__name__, e)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_COMPUTATION


if __name__ == "__main__":
    sys.exit(main())
