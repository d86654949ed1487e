"""Command-line entry point ``slqns``.

Exit codes: 0 success, 2 configuration error, 3 every fit failed,
4 input/output error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, pipeline
from .dynamics import TruncationError
from .experiment import DatasetError
from .pipeline import ConfigError, RamseyConfig, SpinlockConfig, SweepConfig

log = logging.getLogger("slqns")

EXIT_OK, EXIT_CONFIG, EXIT_ALL_FAILED, EXIT_IO = 0, 2, 3, 4

CONFIG_TYPES = {
    "simulate-ramsey": RamseyConfig,
    "simulate-spinlock": SpinlockConfig,
    "generate-data": SweepConfig,
    "reconstruct": SweepConfig,
    "sweep": SweepConfig,
    "compare-loss": SweepConfig,
}


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON config or a provenance.json from an earlier run")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    p.add_argument("--seed", type=int, help="master seed, overrides the config")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes")
    p.add_argument("--no-plot", action="store_true", help="skip PNG figures")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slqns", description="Two-qubit spin-locking noise spectroscopy: simulation and reconstruction."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _global_flags()
    helps = {
        "simulate-ramsey": "Ramsey fringes and C_zz over wait time and photon number",
        "simulate-spinlock": "dressed-qubit decay and K_zz while sweeping the first Rabi frequency",
        "generate-data": "write synthetic spin-locking datasets",
        "reconstruct": "reconstruct spectra from stored datasets",
        "sweep": "generate datasets and reconstruct spectra in one run",
        "compare-loss": "Huber versus least-squares reconstruction of identical data",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, parents=[common], help=text, description=text)
        if CONFIG_TYPES[name] is SweepConfig:
            sp.add_argument("--restarts", type=int, nargs="?", const=5, metavar="N",
                            help="extra jittered starts per fit, 5 when given without N (diagnostic)")
        if name == "reconstruct":
            sp.add_argument("--data", type=Path, help="directory of dataset CSVs (overrides dataset_paths)")
    return parser


def load_config(args: argparse.Namespace):
    cls = CONFIG_TYPES[args.command]
    doc: dict = {}
    if args.config is not None:
        doc, prov_command = pipeline.load_config_document(args.config)
        if prov_command is not None and prov_command != args.command:
            raise ConfigError(f"provenance was written by '{prov_command}', not '{args.command}'")
    doc = dict(doc)
    if args.seed is not None:
        doc["seed"] = args.seed
    if cls is SweepConfig:
        if getattr(args, "restarts", None) is not None:
            fit = dict(doc.get("fit", {}))
            fit["restarts"] = args.restarts
            doc["fit"] = fit
        if args.command == "reconstruct":
            if getattr(args, "data", None) is not None:
                paths = sorted(str(p) for p in args.data.glob("*.csv"))
                if not paths:
                    raise FileNotFoundError(f"no dataset CSVs in {args.data}")
                doc["dataset_paths"] = paths
            doc["source"] = "datasets"
    return cls.from_dict(doc)


def _plot(args, fn, *fargs) -> None:
    if args.no_plot:
        return
    from . import plotting

    getattr(plotting, fn)(*fargs)


def cmd_simulate_ramsey(cfg: RamseyConfig, args) -> int:
    prov = pipeline.provenance(args.command, cfg.to_dict())
    rows = pipeline.run_ramsey(cfg)
    pipeline.write_rows(args.out / "ramsey.csv", rows, ("nbar", "time_s", "z1", "z2", "czz"), prov)
    _plot(args, "plot_ramsey", rows, args.out / "ramsey.png", prov)
    pipeline.finalize_provenance(args.out, prov)
    return EXIT_OK


def cmd_simulate_spinlock(cfg: SpinlockConfig, args) -> int:
    prov = pipeline.provenance(args.command, cfg.to_dict())
    rows = pipeline.run_spinlock(cfg)
    pipeline.write_rows(args.out / "spinlock.csv", rows, ("omega1_hz", "time_s", "tz1", "tz2", "kzz"), prov)
    _plot(args, "plot_spinlock", rows, args.out / "spinlock.png", prov)
    pipeline.finalize_provenance(args.out, prov)
    return EXIT_OK


def cmd_generate_data(cfg: SweepConfig, args) -> int:
    if cfg.source == "datasets":
        raise ConfigError("generate-data needs source 'reduced' or 'optical'")
    prov = pipeline.provenance(args.command, cfg.to_dict())
    data = pipeline.collect_data(cfg, args.workers)
    pipeline.write_datasets(data, args.out, prov)
    truth = pipeline.SweepResult(cfg, [pipeline.FrequencyFit(d.omega_rabi, None, truth=pipeline.true_spectrum(cfg, d.omega_rabi)) for d in data], prov)
    pipeline.write_rows(args.out / "truth.csv", truth.truth_rows(), ("omega_hz",) + pipeline.COMPONENTS, prov)
    pipeline.finalize_provenance(args.out, prov)
    return EXIT_OK


def _emit_sweep(result: pipeline.SweepResult, args, prefix: str = "") -> None:
    pipeline.write_sweep(result, args.out, prefix)
    rows = result.spectra_rows()
    _plot(args, "plot_spectra", rows, result.truth_rows(), args.out / f"{prefix}spectra.png", result.provenance)
    _plot(args, "plot_delta_omega", rows, args.out / f"{prefix}delta_omega.png", result.provenance)


def _check_failures(*results: pipeline.SweepResult) -> int:
    for r in results:
        if r.fits and r.n_failed == len(r.fits):
            log.error("every fit failed")
            return EXIT_ALL_FAILED
        if r.n_failed:
            log.warning("%d of %d fits did not converge", r.n_failed, len(r.fits))
    return EXIT_OK


def cmd_reconstruct(cfg: SweepConfig, args) -> int:
    result = pipeline.run_sweep(cfg, args.workers, command=args.command)
    _emit_sweep(result, args)
    pipeline.finalize_provenance(args.out, result.provenance)
    return _check_failures(result)


def cmd_sweep(cfg: SweepConfig, args) -> int:
    if cfg.source == "datasets":
        return cmd_reconstruct(cfg, args)
    data = pipeline.collect_data(cfg, args.workers)
    result = pipeline.run_sweep(cfg, args.workers, data, command=args.command)
    pipeline.write_datasets(data, args.out, result.provenance)
    _emit_sweep(result, args)
    pipeline.finalize_provenance(args.out, result.provenance)
    return _check_failures(result)


def cmd_compare_loss(cfg: SweepConfig, args) -> int:
    huber, quad = pipeline.compare_losses(cfg, args.workers)
    prov = pipeline.provenance(args.command, cfg.to_dict())
    huber.provenance = quad.provenance = prov
    pipeline.write_sweep(huber, args.out, "huber_")
    pipeline.write_sweep(quad, args.out, "quadratic_")
    rows = pipeline.loss_comparison_rows(huber, quad)
    pipeline.write_rows(
        args.out / "loss_comparison.csv", rows,
        ("omega_hz", "component", "truth", "huber", "quadratic", "huber_abs_error", "quadratic_abs_error"), prov,
    )
    pipeline.write_rows(
        args.out / "loss_summary.csv", pipeline.loss_summary(rows),
        ("component", "huber_median_abs_error", "quadratic_median_abs_error"), prov,
    )
    _plot(args, "plot_loss_comparison", rows, args.out / "loss_comparison.png", prov)
    pipeline.finalize_provenance(args.out, prov)
    return _check_failures(huber, quad)


COMMANDS = {
    "simulate-ramsey": cmd_simulate_ramsey,
    "simulate-spinlock": cmd_simulate_spinlock,
    "generate-data": cmd_generate_data,
    "reconstruct": cmd_reconstruct,
    "sweep": cmd_sweep,
    "compare-loss": cmd_compare_loss,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    if args.workers < 1:
        print("slqns: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except (DatasetError, OSError) as exc:
        print(f"slqns: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, TruncationError, ValueError) as exc:
        print(f"slqns: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
