"""Per-variant forward entry points.

All variants run through the same engine; only the registered assembly differs.
"""

import numpy as np
from src.schemas.corpus.models import AspectSets
from src.schemas.model.models import ForwardTrace, ModelParams
from src.services.model.engine import AARMEngine

from .registry import get_variant


def forward_variant(name: str, user: int, item: int, params: ModelParams, aspect_sets: AspectSets) -> ForwardTrace:
    """Inference-mode trace of one pair under the named variant assembly."""
    return AARMEngine(params, aspect_sets, get_variant(name)).trace(user, item)


def _aspect_output(name: str, user: int, item: int, params: ModelParams, aspect_sets: AspectSets) -> np.ndarray:
    y_aspect = forward_variant(name, user, item, params, aspect_sets).y_aspect
    assert y_aspect is not None
    return y_aspect


def forward_a_inter(user: int, item: int, params: ModelParams, aspect_sets: AspectSets) -> np.ndarray:
    """y_A from shared aspects only: h_a = c_a * c_a, pooled by user-level attention over A_u & A_v."""
    return _aspect_output("a_inter", user, item, params, aspect_sets)


def forward_no_aspect_att(user: int, item: int, params: ModelParams, aspect_sets: AspectSets) -> np.ndarray:
    """y_A with h_i = sum_j c_i * c_j (unweighted)."""
    return _aspect_output("no_aspect_att", user, item, params, aspect_sets)


def forward_a_static(user: int, item: int, params: ModelParams, aspect_sets: AspectSets) -> np.ndarray:
    """y_A with user-level attention conditioned on g_u instead of g_v."""
    return _aspect_output("a_static", user, item, params, aspect_sets)


def forward_no_user_att(user: int, item: int, params: ModelParams, aspect_sets: AspectSets) -> np.ndarray:
    """y_A = sum_i h_i."""
    return _aspect_output("no_user_att", user, item, params, aspect_sets)


def forward_global_only(user: int, item: int, params: ModelParams, aspect_sets: AspectSets) -> float:
    return forward_variant("global_only", user, item, params, aspect_sets).score


def forward_aspect_only(user: int, item: int, params: ModelParams, aspect_sets: AspectSets) -> float:
    return forward_variant("aspect_only", user, item, params, aspect_sets).score
