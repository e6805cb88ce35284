"""
Command line for spectra, sampling, fitting, circuit simulation, Fourier
analysis, bounds and experiments.

Exit codes: 0 on success, 1 on configuration errors, 2 on numerical failure.
Logs go to standard error; with --emit jsonl every result is also written to
standard output as one JSON object per line.
"""

import argparse
import dataclasses
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np

from .backend.analysis import (
    BoundInputs,
    averaged_fourier,
    bound_rff_kernel,
    bound_samples_grid,
    bound_samples_krr,
    bound_samples_pauli,
    detect_packets,
    failure_probability,
    omega_effective,
    redundancy_correlation,
)
from .backend.datasets import clean_table, load_table, prepare_dataset
from .backend.experiments import ExperimentConfig, SolverConfig, fit_model, run_experiment
from .backend.rff import Dataset, FeatureMap, mse, predict
from .backend.sampling import SamplingConfig, draw
from .backend.spectrum import build_spectrum, layout_from_dict, spectrum_size, variance_sigma_p
from .backend.vqc_sim import GeneratorConfig, evaluate_batch, random_instance, sample_grid_dataset, train
from .shared.config import get_settings, load_config, require
from .shared.errors import ConfigError, NumericalError, VQCFourierError
from .shared.utils import dumps

logger = logging.getLogger("vqcfourier")


def _emit(args: argparse.Namespace, record: Dict[str, Any]) -> None:
    if args.emit == "jsonl":
        sys.stdout.write(dumps(record) + "\n")


def _say(args: argparse.Namespace, text: str) -> None:
    """Human summary line; moved to stderr when stdout carries jsonl records"""
    print(text, file=sys.stderr if args.emit == "jsonl" else sys.stdout)


def _out_dir(args: argparse.Namespace) -> Optional[Path]:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args: argparse.Namespace) -> Dict[str, Any]:
    if args.config is None:
        raise ConfigError(f"'{args.command}' needs --config")
    return load_config(args.config)


def _layout(config: Dict[str, Any]):
    return layout_from_dict(config.get("layout", config))


def _sampling(config: Dict[str, Any], args: argparse.Namespace) -> SamplingConfig:
    data = dict(require(config, "sampling"))
    if args.seed is not None:
        data["seed"] = args.seed
    return SamplingConfig.from_dict(data)


def _load_dataset(config: Dict[str, Any], args: argparse.Namespace) -> Dataset:
    path = args.data or config.get("data")
    if path is None:
        raise ConfigError("a dataset is needed: pass --data or set 'data' in the config")
    frame = clean_table(load_table(path))
    if config.get("preprocess", False):
        return prepare_dataset(frame, n_components=config.get("n_components", 5),
                               classification=bool(config.get("classification", False)))
    return Dataset.from_frame(frame)


def cmd_spectrum(args: argparse.Namespace) -> int:
    layout = _layout(_config(args))
    size = spectrum_size(layout)
    _say(args, f"|omega_plus|={size.positive}")
    record = {"distinct_per_dim": list(size.distinct_per_dim), "omega": size.total, "omega_plus": size.positive}
    out = _out_dir(args)
    if out is not None or args.emit == "jsonl":
        spectrum = build_spectrum(layout)
        record["sigma_p"] = variance_sigma_p(spectrum)
        record["sigma_p_weighted"] = variance_sigma_p(spectrum, weighted=True)
        if out is not None:
            spectrum.to_csv(out / "spectrum.csv")
    _emit(args, record)
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    config = _config(args)
    layout = _layout(config)
    sampling = _sampling(config, args)
    spectrum = build_spectrum(layout) if sampling.strategy.value == "distinct" else None
    sample = draw(sampling, spectrum=spectrum, layout=layout, d=layout.dims)
    _say(args, f"sampled D={sample.D} frequencies in d={sample.d} ({sample.strategy.value}, seed={sample.seed})")
    out = _out_dir(args)
    if out is not None:
        sample.to_csv(out / "frequencies.csv")
    _emit(args, {"strategy": sample.strategy.value, "D": sample.D, "seed": sample.seed, "rng": sample.rng,
                 "frequencies": sample.vectors})
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    config = _config(args)
    layout = _layout(config)
    sampling = _sampling(config, args)
    solver = SolverConfig.from_dict(config.get("solver", {}))
    data = _load_dataset(config, args)
    if data.d != layout.dims:
        raise ConfigError(f"dataset has {data.d} input columns, layout encodes {layout.dims}")
    spectrum = build_spectrum(layout) if sampling.strategy.value == "distinct" else None
    sample = draw(sampling, spectrum=spectrum, layout=layout, d=layout.dims)
    model = fit_model(FeatureMap.from_sample(sample), data, solver)
    train_mse = mse(predict(model, data.inputs), data.targets)
    _say(args, f"train_mse={train_mse:.6e}")
    out = _out_dir(args)
    if out is not None:
        model.save(out / "model.json")
    _emit(args, {"strategy": sampling.strategy.value, "D": sample.D, "seed": sampling.seed, "train_mse": train_mse,
                 "metadata": model.metadata})
    return 0


def _generator(config: Dict[str, Any], args: argparse.Namespace) -> GeneratorConfig:
    data = dict(config.get("generator", config))
    if args.seed is not None:
        data["seed"] = args.seed
    return GeneratorConfig.from_dict(data)


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _config(args)
    circuit, theta = random_instance(_generator(config, args))
    x_max = config.get("x_max", 2 * math.pi)
    n_points = require(config, "n_points")
    data = sample_grid_dataset(circuit, theta, x_max, n_points, force=bool(config.get("force", False)))
    _say(args, f"simulated {data.M} points on {circuit.n_qubits} qubits, {circuit.n_params} parameters")
    out = _out_dir(args)
    if out is not None:
        data.to_csv(out / "dataset.csv")
        np.savetxt(out / "theta.txt", theta)
    _emit(args, {"rows": data.M, "d": data.d, "n_params": circuit.n_params, "theta": theta})
    return 0


def cmd_train_vqc(args: argparse.Namespace) -> int:
    config = _config(args)
    circuit, theta0 = random_instance(_generator(config, args))
    data = _load_dataset(config, args)
    solver = SolverConfig.from_dict(config.get("solver", {}))
    theta = train(circuit, theta0, data, solver.adam)
    train_mse = mse(evaluate_batch(circuit, theta, data.inputs), data.targets)
    _say(args, f"train_mse={train_mse:.6e}")
    out = _out_dir(args)
    if out is not None:
        np.savetxt(out / "theta.txt", theta)
    _emit(args, {"strategy": "vqc", "train_mse": train_mse, "theta": theta, "optimizer": solver.to_dict()})
    return 0


def cmd_fourier(args: argparse.Namespace) -> int:
    config = _config(args)
    base = _generator(config, args)
    seeds = [int(s) for s in config.get("seeds", [base.seed])]
    x_max = float(config.get("x_max", 2 * math.pi))
    n_points = int(require(config, "n_points"))

    def factory(seed: int):
        circuit, theta = random_instance(dataclasses.replace(base, seed=seed))
        return lambda X: evaluate_batch(circuit, theta, X)

    empirical = averaged_fourier(factory, seeds, x_max, n_points, d=base.d, threads=args.threads)
    spectrum = build_spectrum(random_instance(base)[0].layout())
    effective = omega_effective(empirical)
    record: Dict[str, Any] = {"n_average": empirical.n_average, "omega_effective": effective}
    try:
        record["redundancy_correlation"] = redundancy_correlation(empirical, spectrum)
    except NumericalError as e:
        logger.warning("Redundancy correlation skipped: %s", e)
    if spectrum.d == 1:
        packets = detect_packets(spectrum.dims[0].frequencies, spectrum.dims[0].redundancies,
                                 float(config.get("packet_gap", 0.5)))
        record["packets"] = [dataclasses.asdict(p) for p in packets]
    _say(args, f"omega_effective={effective:.6g}")
    out = _out_dir(args)
    if out is not None:
        empirical.to_csv(out / "fourier.csv")
    _emit(args, record)
    return 0


def cmd_bound(args: argparse.Namespace) -> int:
    config = _config(args)
    kind = str(config.get("kind", "pauli"))
    inputs = BoundInputs.from_dict(config)
    if kind == "kernel":
        D = float(require(config, "D"))
        record = {"kind": kind, "D": D, "bound": bound_rff_kernel(inputs, D),
                  "probability": failure_probability(inputs, D)}
        _say(args, f"probability<={record['probability']:.6g}")
    else:
        calculators = {"krr": bound_samples_krr, "pauli": bound_samples_pauli, "grid": bound_samples_grid}
        if kind not in calculators:
            raise ConfigError(f"unknown bound kind {kind!r}")
        record = {"kind": kind, **calculators[kind](inputs).to_dict()}
        _say(args, f"D_bound={record['D_bound']:.6g}")
    _emit(args, record)
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    raw = _config(args)
    if args.seed is not None:
        raw = {**raw, "seeds": [args.seed]}
    config = ExperimentConfig.from_dict(raw)
    result = run_experiment(config, threads=args.threads, out_dir=args.out, raw_config=raw)
    for record in result.records:
        _emit(args, record.to_dict())
    for selection in result.selections:
        _emit(args, selection.to_dict())
    _say(args, f"{len(result.records)} records for experiment {config.experiment_id!r}")
    return 0


COMMANDS = {
    "spectrum": (cmd_spectrum, "count the frequency spectrum of an encoding layout"),
    "sample": (cmd_sample, "draw RFF frequencies"),
    "fit": (cmd_fit, "fit an RFF model to a dataset"),
    "simulate": (cmd_simulate, "simulate a random circuit on a grid dataset"),
    "train-vqc": (cmd_train_vqc, "train a random circuit on a dataset"),
    "fourier": (cmd_fourier, "averaged empirical Fourier spectrum of random circuits"),
    "bound": (cmd_bound, "evaluate RFF sample-complexity bounds"),
    "experiment": (cmd_experiment, "run an experiment protocol"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="structured (JSON) config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--emit", choices=["jsonl"], help="echo results to stdout")
    common.add_argument("--data", help="dataset CSV/XLSX (fit, train-vqc)")

    parser = argparse.ArgumentParser(prog="vqcfourier", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        level = get_settings().log_level
    except ConfigError:
        level = "INFO"
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)
    try:
        return COMMANDS[args.command][0](args)
    except VQCFourierError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return NumericalError.exit_code


if __name__ == "__main__":
    sys.exit(main())
