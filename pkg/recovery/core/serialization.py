"""JSON documents for fitted factorization models."""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
from pydantic import TypeAdapter

from ..engine.errors import InvalidValue, ShapeError
from .estimators import EstimatorConfig, NnmfModel

_CONFIG_ADAPTER: TypeAdapter = TypeAdapter(EstimatorConfig)


def model_to_dict(
    model: NnmfModel,
    user_labels: Optional[Sequence[str]] = None,
    item_labels: Optional[Sequence[str]] = None,
) -> Dict[str, Any]:
    """Plain-JSON view of a model; matrices are row-major nested lists."""
    return {
        "kind": model.kind,
        "mu": model.mu,
        "shift": model.shift,
        "user_bias": model.user_bias.tolist(),
        "item_bias": model.item_bias.tolist(),
        "user_factors": model.user_factors.tolist(),
        "item_factors": model.item_factors.tolist(),
        "hyperparameters": model.config.model_dump(mode="json"),
        "seed": model.seed,
        "convergence": {
            "iterations": model.n_iterations,
            "final_rmse": model.final_rmse,
            "error_history": list(model.error_history),
        },
        "user_labels": list(user_labels) if user_labels is not None else None,
        "item_labels": list(item_labels) if item_labels is not None else None,
    }


def model_from_dict(doc: Dict[str, Any]) -> NnmfModel:
    """Rebuild a model from :func:`model_to_dict` output, checking shapes."""
    try:
        config = _CONFIG_ADAPTER.validate_python(doc["hyperparameters"])
        user_bias = np.asarray(doc["user_bias"], dtype=float)
        item_bias = np.asarray(doc["item_bias"], dtype=float)
        user_factors = np.asarray(doc["user_factors"], dtype=float)
        item_factors = np.asarray(doc["item_factors"], dtype=float)
        convergence = doc["convergence"]
    except KeyError as e:
        raise InvalidValue(f"model document is missing {e}") from e

    if config.name not in ("nnmf_sgd", "nnmf_mult"):
        raise InvalidValue(f"not a factorization model: {config.name}")
    n_users, n_items = user_bias.size, item_bias.size
    f = user_factors.shape[1] if user_factors.ndim == 2 else -1
    if user_factors.shape != (n_users, f) or item_factors.shape != (f, n_items):
        raise ShapeError(
            f"factor shapes {user_factors.shape} and {item_factors.shape} do not fit "
            f"{n_users} users x {n_items} items"
        )

    return NnmfModel(
        mu=float(doc["mu"]),
        user_bias=user_bias,
        item_bias=item_bias,
        user_factors=user_factors,
        item_factors=item_factors,
        config=config,
        seed=int(doc["seed"]),
        n_iterations=int(convergence["iterations"]),
        error_history=tuple(float(e) for e in convergence["error_history"]),
        shift=float(doc.get("shift", 0.0)),
    )


def save_model(
    model: NnmfModel,
    path: Path,
    user_labels: Optional[Sequence[str]] = None,
    item_labels: Optional[Sequence[str]] = None,
) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, user_labels, item_labels), indent=2))


def load_model(path: Path) -> NnmfModel:
    return model_from_dict(json.loads(Path(path).read_text()))
