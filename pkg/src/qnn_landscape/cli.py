"""Command-line entry point: ``qnn-landscape <command> [flags]``.

Exit status is 0 on success, 1 on a usage error and 2 when a numerical
integrity check fails (a diagnostic record is still written).
"""
import argparse
import os
import sys
import zlib
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .construction import (
    EXAMPLE_KINDS,
    MAX_MATRIX_P,
    ClassicalConceptConfig,
    ExampleForm,
    add_label_noise,
    canonical_example,
    classical_concept,
    concept_circuit,
    hard_instance,
    noisy_problem,
    traceless_example_circuit,
)
from .errors import CapacityError, QNNError
from .independence import (
    RandomModelConfig,
    gram_report,
    moment_study,
    random_traceless_observable,
    sample_random_qnn,
)
from .landscape import landscape_report
from .optimize import OptimizerConfig, initial_points, minimize, sweep
from .records import Envelope, envelope, instance_problem, load_instance, save_instance, write_records
from .trig import fourier_report

COMMANDS = ("construct", "train", "sweep", "gram", "moments", "fourier", "landscape", "concept", "noise")
GENERATED = EXAMPLE_KINDS + ("hard", "concept", "haar")

EXIT_OK, EXIT_USAGE, EXIT_INTEGRITY = 0, 1, 2


class UsageError(Exception):
    pass


def stream(seed: int, name: str) -> np.random.Generator:
    """Named, reproducible RNG stream split from the run seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),)))


@dataclass
class ExperimentConfig:
    command: str
    instance: str = "base"
    p: int = 2
    optimizer: str = "rmsprop"
    lr: float = 0.01
    iters: int = 200
    inits: int = 100
    seed: int = 0
    threshold: Optional[float] = None
    sigma: float = 0.0
    grid: Optional[int] = None
    out: str = "results"
    dim: int = 16
    samples: int = 100

    def snapshot(self) -> dict:
        d = dict(self.__dict__)
        d.pop("out")
        return d

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"command: unknown command {self.command!r}")
        if self.instance not in GENERATED and not os.path.isfile(self.instance):
            raise UsageError(f"instance: {self.instance!r} is neither a known kind {GENERATED} nor an existing file")
        if self.p < 1:
            raise UsageError("p: must be >= 1")
        if self.iters < 0:
            raise UsageError("iters: must be >= 0")
        if self.inits < 1:
            raise UsageError("inits: must be >= 1")
        if self.sigma < 0:
            raise UsageError("sigma: must be >= 0")
        if self.samples < 1:
            raise UsageError("samples: must be >= 1")
        if self.grid is not None and self.grid < 1:
            raise UsageError("grid: must be >= 1")
        try:
            self.optimizer_config()
        except ValueError as exc:
            raise UsageError(f"optimizer/lr: {exc}") from exc

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(self.optimizer, lr=self.lr, max_iter=self.iters)


def _theta_star(cfg: ExperimentConfig) -> np.ndarray:
    return stream(cfg.seed, "theta-star").uniform(0, np.pi, cfg.p)


def build_problem(cfg: ExperimentConfig):
    """The loss/gradient pair selected by --instance, --p, --seed and --sigma."""
    inst = cfg.instance
    if inst in EXAMPLE_KINDS:
        problem = ExampleForm(inst, cfg.p).problem()
    elif inst == "hard":
        problem = hard_instance(traceless_example_circuit(cfg.p), _theta_star(cfg), seed=cfg.seed).problem()
    elif inst == "concept":
        data, _, _ = classical_concept(ClassicalConceptConfig(cfg.p, m=cfg.samples, seed=cfg.seed))
        problem = instance_problem(concept_circuit(cfg.p), data)
    elif inst == "haar":
        raise UsageError("instance: 'haar' only applies to gram and moments")
    else:
        circuit, data, form, _ = load_instance(inst)
        problem = instance_problem(circuit, data, form)
        if problem.p != cfg.p:
            raise UsageError(f"p: instance file has p={problem.p}, flag says {cfg.p}")
    if cfg.sigma > 0:
        problem = noisy_problem(problem, cfg.sigma, stream(cfg.seed, "label-noise"))
    return problem


def _instance_matrices(cfg: ExperimentConfig):
    inst = cfg.instance
    if inst in EXAMPLE_KINDS:
        return canonical_example(inst, cfg.p)
    if inst == "hard":
        if cfg.p > 6:
            raise CapacityError("hard instances are built densely and need p <= 6")
        hi = hard_instance(traceless_example_circuit(cfg.p), _theta_star(cfg), seed=cfg.seed)
        return hi.circuit, hi.dataset, None
    if inst == "concept":
        if cfg.p > MAX_MATRIX_P:
            raise CapacityError(f"concept datasets are stored densely and need p <= {MAX_MATRIX_P}")
        data, _, _ = classical_concept(ClassicalConceptConfig(cfg.p, m=cfg.samples, seed=cfg.seed))
        return concept_circuit(cfg.p), data, None
    if inst == "haar":
        raise UsageError("instance: 'haar' only applies to gram and moments")
    circuit, data, form, _ = load_instance(inst)
    return circuit, data, form


def _observable(cfg: ExperimentConfig):
    return random_traceless_observable(cfg.dim, stream(cfg.seed, "observable"))


def _save(cfg, name, circuit, data, form, meta) -> Tuple[str, dict]:
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, f"{name}-p{cfg.p}-seed{cfg.seed}-instance.json")
    save_instance(path, circuit, data, form, meta)
    return path, {"instance_file": os.path.basename(path), "n_data": len(data) if data is not None else 0, **meta}


def execute(cfg: ExperimentConfig) -> Tuple[int, List[Envelope]]:
    cfg.validate()
    snap = cfg.snapshot()
    cmd = cfg.command
    recs: List[Envelope] = []
    try:
        if cmd == "construct":
            circuit, data, form = _instance_matrices(cfg)
            if cfg.sigma > 0 and data is not None:
                data = add_label_noise(data, cfg.sigma, stream(cfg.seed, "label-noise"))
            if form is None and cfg.instance in EXAMPLE_KINDS:
                form = ExampleForm(cfg.instance, cfg.p)
            _, info = _save(cfg, f"construct-{os.path.basename(cfg.instance)}", circuit, data, form,
                            {"instance": cfg.instance, "dense": data is not None})
            recs.append(envelope(cmd, snap, "instance", info))
        elif cmd == "concept":
            if cfg.p > MAX_MATRIX_P:
                raise CapacityError(f"concept datasets are stored densely and need p <= {MAX_MATRIX_P}")
            data, xs, w = classical_concept(ClassicalConceptConfig(cfg.p, m=cfg.samples, seed=cfg.seed))
            _, info = _save(cfg, "concept", concept_circuit(cfg.p), data, None,
                            {"w": w.tolist(), "features": xs.tolist(), "positive_fraction": float(data.labels.mean())})
            recs.append(envelope(cmd, snap, "instance", info))
        elif cmd == "noise":
            circuit, data, form = _instance_matrices(cfg)
            if data is None:
                raise CapacityError("noise injection needs a dense dataset; lower --p")
            noisy = add_label_noise(data, cfg.sigma, stream(cfg.seed, "label-noise"))
            shifts = noisy.labels - data.labels
            _, info = _save(cfg, f"noise-{os.path.basename(cfg.instance)}", circuit, noisy, None,
                            {"sigma": cfg.sigma, "label_shifts": shifts.tolist()})
            recs.append(envelope(cmd, snap, "instance", info))
        elif cmd == "train":
            problem = build_problem(cfg)
            theta0 = initial_points(cfg.p, 1, cfg.seed)[0]
            recs.append(envelope(cmd, snap, "run", minimize(problem, theta0, cfg.optimizer_config(), seed=cfg.seed)))
        elif cmd == "sweep":
            problem = build_problem(cfg)
            summary = sweep(problem, cfg.p, cfg.optimizer_config(), cfg.inits, cfg.seed,
                            cfg.threshold, instance=f"{cfg.instance}-p{cfg.p}")
            recs.append(envelope(cmd, snap, "sweep", summary))
            recs += [envelope(cmd, snap, "run", r) for r in summary.runs]
        elif cmd == "gram":
            if cfg.instance == "haar":
                rc = RandomModelConfig(cfg.dim, cfg.p, seed=cfg.seed)
                circuit = sample_random_qnn(rc, _observable(cfg), stream(cfg.seed, "circuit"))
            else:
                circuit = _instance_matrices(cfg)[0]
                if circuit is None:
                    raise CapacityError(f"gram needs matrices; p <= {MAX_MATRIX_P}")
            recs.append(envelope(cmd, snap, "gram", gram_report(circuit)))
        elif cmd == "moments":
            rc = RandomModelConfig(cfg.dim, cfg.p, seed=cfg.seed)
            recs.append(envelope(cmd, snap, "moments", moment_study(rc, _observable(cfg), cfg.samples)))
        elif cmd == "fourier":
            problem = build_problem(cfg)
            recs.append(envelope(cmd, snap, "fourier", fourier_report(problem.loss, cfg.p, cfg.grid or 8)))
        elif cmd == "landscape":
            problem = build_problem(cfg)
            rep = landscape_report(problem, cfg.p, cfg.grid or 64, instance=f"{cfg.instance}-p{cfg.p}")
            recs.append(envelope(cmd, snap, "landscape", rep))
    except QNNError as exc:
        recs.append(envelope(cmd, snap, "error", {"error": type(exc).__name__, "message": str(exc)}))
        return EXIT_INTEGRITY, recs
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from exc
    return EXIT_OK, recs


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qnn-landscape", description="Loss-landscape experiments for under-parameterized QNNs.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--instance", default="base",
                    help="base | shifted | coupled | hard | concept | haar, or an instance file path")
    ap.add_argument("--p", type=int, default=2, help="number of parameters")
    ap.add_argument("--optimizer", default="rmsprop", choices=("gd", "adam", "rmsprop", "lbfgs"))
    ap.add_argument("--lr", type=float, default=0.01)
    ap.add_argument("--iters", type=int, default=200)
    ap.add_argument("--inits", type=int, default=100, help="random initializations for sweep")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threshold", type=float, default=None, help="success threshold (default 0.25/p)")
    ap.add_argument("--sigma", type=float, default=0.0, help="Gaussian label-noise std")
    ap.add_argument("--grid", type=int, default=None, help="grid points per axis (fourier: 8, landscape: 64)")
    ap.add_argument("--dim", type=int, default=16, help="Hilbert-space dim for the Haar model")
    ap.add_argument("--samples", type=int, default=100, help="Monte-Carlo samples or concept dataset size")
    ap.add_argument("--out", default="results", help="output directory")
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = ExperimentConfig(**vars(args))
        status, recs = execute(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        paths = write_records(recs, cfg.out, cfg.command, cfg.p, cfg.seed)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for path in paths:
        print(path)
    if status == EXIT_INTEGRITY:
        print(f"integrity failure: {recs[-1].payload['message']}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
