"""JSON persistence for fitted models and copula truth models, plus the
CSV formats used by the command line."""

from __future__ import annotations

import csv
import json

import numpy as np

from .coding import ENCODER_KINDS
from .copula_lab import BetaMarginal, CopulaModel, Dataset, EmpiricalMarginal
from .ecdf import EmpiricalCdf
from .ising import GraphTopology, LatentIsingModel, assemble
from .pairwise_em import PairwiseMarginal

__all__ = [
    "model_to_dict",
    "model_from_dict",
    "save_models",
    "load_models",
    "copula_to_dict",
    "copula_from_dict",
    "save_copula",
    "load_copula",
    "save_dataset_csv",
    "load_dataset_csv",
    "load_observations_csv",
    "load_pairs_csv",
]


def model_to_dict(model: LatentIsingModel) -> dict:
    if model.encoders is None:
        raise ValueError("only fitted models (with encoders) are serialized")
    nodes = [
        {
            "id": i,
            "encoder": enc.kind,
            "p1": enc.p1,
            "cdf_samples": enc.cdf.sorted_samples.tolist(),
        }
        for i, enc in enumerate(model.encoders)
    ]
    edges = [
        {"i": i, "j": j, "p11": m.p_ij11, "n_obs": m.n_obs}
        for (i, j), m in zip(model.topology.edges, model.marginals)
    ]
    return {"alpha": model.alpha, "nodes": nodes, "edges": edges}


def model_from_dict(payload: dict) -> LatentIsingModel:
    nodes = sorted(payload["nodes"], key=lambda d: d["id"])
    if [d["id"] for d in nodes] != list(range(len(nodes))):
        raise ValueError("node ids must be 0..N-1")
    encoders = []
    for d in nodes:
        cdf = EmpiricalCdf(d["cdf_samples"])
        enc = ENCODER_KINDS[d["encoder"]](cdf, float(d["p1"]))
        encoders.append(enc)
    edges = []
    marginals = []
    for d in payload["edges"]:
        i, j = int(d["i"]), int(d["j"])
        edges.append((i, j))
        marginals.append(
            PairwiseMarginal(
                encoders[i].p1, encoders[j].p1, float(d["p11"]),
                n_obs=int(d.get("n_obs", 0)),
            )
        )
    topology = GraphTopology(len(nodes), tuple(edges))
    return assemble(topology, marginals, float(payload["alpha"]), encoders=encoders)


def save_models(models, path):
    models = [models] if isinstance(models, LatentIsingModel) else list(models)
    if len(models) == 1:
        payload = model_to_dict(models[0])
    else:
        payload = {"models": [model_to_dict(m) for m in models]}
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_models(path) -> list[LatentIsingModel]:
    with open(path) as fh:
        payload = json.load(fh)
    if "models" in payload:
        return [model_from_dict(d) for d in payload["models"]]
    return [model_from_dict(payload)]


def _marginal_from_spec(spec: dict):
    if spec["kind"] == "beta":
        return BetaMarginal(float(spec["a"]), float(spec["b"]))
    if spec["kind"] == "empirical":
        return EmpiricalMarginal(EmpiricalCdf(spec["samples"]))
    raise ValueError(f"unknown marginal kind: {spec['kind']!r}")


def copula_to_dict(model: CopulaModel) -> dict:
    return {
        "kind": "copula",
        "n_nodes": model.n_nodes,
        "edges": [list(e) for e in model.topology.edges],
        "precision": model.precision.tolist(),
        "marginals": [m.spec() for m in model.marginals],
        "always_observed": list(model.always_observed),
    }


def copula_from_dict(payload: dict) -> CopulaModel:
    topology = GraphTopology(
        int(payload["n_nodes"]), tuple(tuple(e) for e in payload["edges"])
    )
    prec = np.asarray(payload["precision"], dtype=float)
    if np.linalg.eigvalsh(prec)[0] <= 0.0:
        raise ValueError("precision matrix is not positive definite")
    cov = np.linalg.inv(prec)
    scale = 1.0 / np.sqrt(np.diag(cov))
    corr = cov * np.outer(scale, scale)
    marginals = tuple(_marginal_from_spec(d) for d in payload["marginals"])
    return CopulaModel(
        topology=topology,
        precision=prec,
        covariance=cov,
        correlation=corr,
        marginals=marginals,
        always_observed=tuple(int(i) for i in payload.get("always_observed", ())),
    )


def save_copula(model: CopulaModel, path):
    with open(path, "w") as fh:
        json.dump(copula_to_dict(model), fh)


def load_copula(path) -> CopulaModel:
    with open(path) as fh:
        return copula_from_dict(json.load(fh))


def save_dataset_csv(dataset: Dataset, path):
    values = dataset.values
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([str(i) for i in range(values.shape[1])])
        writer.writerows(values.tolist())


def load_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    values = np.asarray(rows, dtype=float)
    if values.ndim != 2 or values.shape[1] != len(header):
        raise ValueError("malformed dataset CSV")
    return Dataset(values=values)


def load_observations_csv(path) -> dict:
    """CSV rows of (node id, value); a header row is skipped if present."""
    out = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                node = int(row[0])
            except ValueError:
                continue  # header
            out[node] = float(row[1])
    return out


def load_pairs_csv(path) -> dict:
    """CSV rows of (edge id 'i-j', x_i, x_j) grouped per edge."""
    grouped: dict[tuple[int, int], tuple[list, list]] = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                i_str, j_str = row[0].split("-")
                i, j = int(i_str), int(j_str)
            except ValueError:
                continue  # header
            xi, xj = grouped.setdefault((i, j), ([], []))
            xi.append(float(row[1]))
            xj.append(float(row[2]))
    if not grouped:
        raise ValueError("no pair observations found")
    return {
        edge: (np.asarray(xi), np.asarray(xj)) for edge, (xi, xj) in grouped.items()
    }
