"""From-scratch regressors sharing one train/predict contract."""

from .base import (
    TrainedModel,
    load_model,
    model_from_json,
    model_to_json,
    predict,
    save_model,
)
from .elastic_net import ElasticNetParams, fit_elastic_net
from .mlp import MlpParams, fit_mlp
from .svr import SvrParams, fit_svr

__all__ = [
    "ElasticNetParams",
    "MlpParams",
    "SvrParams",
    "TrainedModel",
    "fit_elastic_net",
    "fit_mlp",
    "fit_svr",
    "load_model",
    "model_from_json",
    "model_to_json",
    "predict",
    "save_model",
]
