"""Save and load fitted models as JSON.

Floats are written with Python's shortest round-trip repr, so numeric
state survives a save/load cycle bit for bit.  Loaded models predict,
simulate and summarize; they do not retain the fitting workspace, so
the restricted-likelihood objective is unavailable on them.
"""

import json

import numpy as np

from .design import ParamDesign
from .fit import FittedModel
from .model import ModelSpec

FORMAT = "evsmooth-model"
VERSION = 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def model_to_dict(model) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "spec": model.spec.to_dict(),
        "designs": [d.to_dict() for d in model.designs],
        "beta": np.asarray(model.beta).tolist(),
        "V": np.asarray(model.V).tolist(),
        "H": np.asarray(model.H).tolist(),
        "rho": np.asarray(model.rho).tolist(),
        "edf_terms": [[p, lab, float(e), int(nc), bool(sm)]
                      for p, lab, e, nc, sm in model.edf_terms],
        "meta": _jsonable(model.meta),
    }


def model_from_dict(data) -> FittedModel:
    if data.get("format") != FORMAT:
        raise ValueError("not a saved model file")
    if data.get("version") != VERSION:
        raise ValueError(f"unsupported model file version: "
                         f"{data.get('version')!r}")
    spec = ModelSpec.from_dict(data["spec"])
    designs = [ParamDesign.from_dict(d) for d in data["designs"]]
    edf_terms = [(p, lab, float(e), int(nc), bool(sm))
                 for p, lab, e, nc, sm in data["edf_terms"]]
    return FittedModel(spec, spec.make_family(), designs,
                       np.asarray(data["beta"], dtype=float),
                       np.asarray(data["V"], dtype=float),
                       np.asarray(data["H"], dtype=float),
                       np.asarray(data["rho"], dtype=float),
                       edf_terms, data["meta"])


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, sort_keys=True,
                  separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> FittedModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
