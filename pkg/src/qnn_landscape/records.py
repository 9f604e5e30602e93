"""Structured records: JSON-lines envelopes, CSV side files and instance files.

Complex matrices are stored as one list per row with real and imaginary parts
interleaved.  Floats are written with ``repr`` precision, which round-trips
doubles exactly.
"""
import csv
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from .circuit import CircuitSpec, Dataset, QuantumDatum, TwoLevelGenerator
from .construction import ExampleForm
from .independence import GramReport, MomentReport
from .landscape import LandscapeReport
from .optimize import RunRecord, SweepSummary
from .trig import FourierReport, PolyProblem, expand_observable, project_datum

SCHEMA_VERSION = 1

PAYLOAD_TYPES = {
    "run": RunRecord,
    "sweep": SweepSummary,
    "gram": GramReport,
    "moments": MomentReport,
    "fourier": FourierReport,
    "landscape": LandscapeReport,
}


def encode_matrix(a) -> List[List[float]]:
    a = np.asarray(a, dtype=complex)
    inter = np.empty((a.shape[0], 2 * a.shape[1]))
    inter[:, 0::2] = a.real
    inter[:, 1::2] = a.imag
    return inter.tolist()


def decode_matrix(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    return arr[:, 0::2] + 1j * arr[:, 1::2]


def timestamp() -> str:
    """UTC ISO time; honours SOURCE_DATE_EPOCH so repeated runs can be byte-identical."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch is not None else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


@dataclass
class Envelope:
    command: str
    config: dict
    kind: str
    payload: dict
    timestamp: str = ""
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if not self.timestamp:
            self.timestamp = timestamp()

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "timestamp": self.timestamp,
            "command": self.command,
            "config": self.config,
            "kind": self.kind,
            "payload": self.payload,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Envelope":
        return cls(d["command"], d["config"], d["kind"], d["payload"], d["timestamp"], d["schema_version"])

    def decode(self):
        """Rebuild the in-memory payload object where a type is registered."""
        cls = PAYLOAD_TYPES.get(self.kind)
        return cls.from_dict(self.payload) if cls else self.payload


def envelope(command: str, config: dict, kind: str, obj) -> Envelope:
    payload = obj.to_dict() if hasattr(obj, "to_dict") else obj
    return Envelope(command, config, kind, payload)


def read_records(path) -> List[Envelope]:
    with open(path) as fh:
        return [Envelope.from_dict(json.loads(line)) for line in fh if line.strip()]


def _write_lines(path: Path, envs: Iterable[Envelope]):
    with open(path, "w") as fh:
        for env in envs:
            fh.write(env.to_line() + "\n")


def write_histogram_csv(path: Path, edges, counts):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])


def write_critical_csv(path: Path, report: dict):
    p = report["p"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"theta_{l}" for l in range(p)] + ["value", "kind"])
        for c in report["points"]:
            w.writerow([repr(float(t)) for t in c["theta"]] + [repr(float(c["value"])), c["kind"]])


def write_records(records: List[Envelope], directory, command: str = "records", p: Optional[int] = None,
                  seed: Optional[int] = None) -> List[Path]:
    """Write envelopes plus CSV side files; always writes manifest.json.

    Sweep summaries go to ``<stem>-summary.jsonl`` with their runs in
    ``<stem>-runs.jsonl`` and histogram in ``<stem>-hist.csv``; landscape
    reports also get ``<stem>-critical.csv``; everything else lands in
    ``<stem>.jsonl``.  The stem embeds command, p and seed.
    """
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    stem = f"{command}-p{p if p is not None else 'na'}-seed{seed if seed is not None else 'na'}"
    groups = {"summary": [], "runs": [], "main": []}
    paths: List[Path] = []
    for env in records:
        if env.kind == "sweep":
            groups["summary"].append(env)
        elif env.kind == "run" and command == "sweep":
            groups["runs"].append(env)
        else:
            groups["main"].append(env)
    try:
        for key, suffix in (("summary", "-summary.jsonl"), ("runs", "-runs.jsonl"), ("main", ".jsonl")):
            if groups[key]:
                path = out / f"{stem}{suffix}"
                _write_lines(path, groups[key])
                paths.append(path)
        for env in records:
            if env.kind == "sweep":
                path = out / f"{stem}-hist.csv"
                write_histogram_csv(path, env.payload["hist_edges"], env.payload["hist_counts"])
                paths.append(path)
            elif env.kind == "landscape":
                path = out / f"{stem}-critical.csv"
                write_critical_csv(path, env.payload)
                paths.append(path)
        manifest = out / "manifest.json"
        with open(manifest, "w") as fh:
            json.dump({"command": command, "p": p, "seed": seed, "n_records": len(records),
                       "files": [x.name for x in paths]}, fh, indent=1, sort_keys=True)
    except OSError as exc:
        raise OSError(f"failed writing records under {out}: {exc}") from exc
    return [manifest] + paths


def circuit_to_dict(c: CircuitSpec) -> dict:
    return {
        "name": c.name,
        "generators": [{"matrix": encode_matrix(g.hamiltonian), "qubit": g.qubit, "label": g.label}
                       for g in c.generators],
        "observable": encode_matrix(c.observable),
    }


def circuit_from_dict(d: dict) -> CircuitSpec:
    gens = tuple(TwoLevelGenerator(decode_matrix(g["matrix"]), g.get("qubit"), g.get("label"))
                 for g in d["generators"])
    return CircuitSpec(gens, decode_matrix(d["observable"]), d.get("name", ""))


def dataset_to_dict(ds: Dataset) -> list:
    return [{"state": encode_matrix(x.state), "label": x.label, "weight": x.weight} for x in ds]


def dataset_from_dict(items: list) -> Dataset:
    return Dataset(tuple(QuantumDatum(decode_matrix(x["state"]), x["label"], x["weight"]) for x in items))


def save_instance(path, circuit: Optional[CircuitSpec], data: Optional[Dataset],
                  form: Optional[ExampleForm] = None, meta: Optional[dict] = None):
    doc = {"schema_version": SCHEMA_VERSION, "meta": meta or {}}
    if form is not None:
        doc["form"] = form.to_dict()
    if circuit is not None:
        doc["circuit"] = circuit_to_dict(circuit)
    if data is not None:
        doc["data"] = dataset_to_dict(data)
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_instance(path):
    """Return (circuit, dataset, form, meta); missing parts are None."""
    with open(path) as fh:
        doc = json.load(fh)
    circuit = circuit_from_dict(doc["circuit"]) if "circuit" in doc else None
    data = dataset_from_dict(doc["data"]) if "data" in doc else None
    form = ExampleForm(**doc["form"]) if "form" in doc else None
    return circuit, data, form, doc.get("meta", {})


def instance_problem(circuit, data, form=None) -> PolyProblem:
    """Fast-path problem for a loaded instance (labels taken from the file)."""
    if circuit is not None and data is not None:
        exp = expand_observable(circuit)
        polys = [project_datum(exp, s).pruned(1e-14) for s in data.states]
        return PolyProblem(polys, data.labels, data.weights, circuit.name)
    if form is not None:
        return form.problem()
    raise ValueError("instance file has neither matrices nor a closed form")
