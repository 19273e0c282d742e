"""Hidden Markov model play-call forecasting."""

import json

from ._core import (
    DimensionError,
    FitError,
    FittedModel,
    ForecastResult,
    HmmParams,
    ModelSpec,
    Play,
    PlaySequence,
    PreconditionError,
    SchemaError,
    SelectionError,
    DomainError,
    aic,
    base_covariate_names,
    canonicalize_states,
    evaluate_team,
    filtered_state_probs,
    fit,
    fit_team,
    forecast_first,
    forecast_next,
    forward_select,
    full_covariate_set,
    ingest,
    load_model_directory,
    n_model_params,
    read_store,
    selection_candidates,
    sequence_log_likelihood,
    simulate,
    total_log_likelihood,
)
from ._core import _SessionService

__all__ = [
    "DimensionError",
    "FitError",
    "FittedModel",
    "ForecastResult",
    "ForecastService",
    "HmmParams",
    "ModelSpec",
    "Play",
    "PlaySequence",
    "PreconditionError",
    "SchemaError",
    "SelectionError",
    "DomainError",
    "aic",
    "base_covariate_names",
    "canonicalize_states",
    "evaluate_team",
    "filtered_state_probs",
    "fit",
    "fit_team",
    "forecast_first",
    "forecast_next",
    "forward_select",
    "full_covariate_set",
    "ingest",
    "load_model_directory",
    "n_model_params",
    "read_store",
    "selection_candidates",
    "sequence_log_likelihood",
    "simulate",
    "total_log_likelihood",
]


class ForecastService:
    """In-process match sessions with the same semantics as the /v1 HTTP API.

    Every method returns (status, body) where body is the decoded JSON document.
    """

    def __init__(self, models, threshold=0.7):
        self._service = _SessionService(dict(models), threshold)

    @staticmethod
    def _decode(pair):
        status, body = pair
        return status, json.loads(body)

    def health(self):
        return self._decode(self._service.health())

    def create_session(self, body):
        return self._decode(self._service.create_session(json.dumps(body)))

    def forecast(self, session_id, body):
        return self._decode(self._service.forecast(session_id, json.dumps(body)))

    def record_play(self, session_id, body):
        return self._decode(self._service.record_play(session_id, json.dumps(body)))

    def get_session(self, session_id):
        return self._decode(self._service.get_session(session_id))
