import hashlib
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from src.config import ModelSettings

MATRIX_NAMES = ("W_A", "W_trans", "w_att1", "w_att2", "W_U", "W_V", "W_out")
REGULARIZED = ("W_U", "W_V", "W_out")

MaskingMode = Literal["softmax_exclude", "literal"]
AspectPoolMode = Literal["attention", "sum", "shared_self"]
UserContextMode = Literal["item", "user", "shared"]
UserPoolMode = Literal["attention", "sum"]


class VariantSpec(BaseModel):
    """Forward-pass assembly of one model variant."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., description="Variant tag")
    aspect_pool: AspectPoolMode = Field("attention", description="How item aspects are pooled per user aspect")
    user_context: UserContextMode = Field("item", description="Context vector for user-level attention")
    user_pool: UserPoolMode = Field("attention", description="How per-aspect vectors are pooled into y_A")
    use_global: bool = Field(True, description="Global interactions part feeds the output layer")
    use_aspect: bool = Field(True, description="Aspect interactions part feeds the output layer")

    @property
    def unused(self) -> frozenset[str]:
        """Matrices this variant's graph never reads."""
        names: set[str] = set()
        if not self.use_global:
            names.update(("W_U", "W_V"))
        if not self.use_aspect:
            names.update(("W_A", "W_trans", "w_att1", "w_att2"))
        if self.aspect_pool != "attention":
            names.add("w_att1")
        if self.user_pool != "attention":
            names.add("w_att2")
        return frozenset(names)

    def output_dim(self, d_a: int, d_g: int) -> int:
        return (d_g if self.use_global else 0) + (d_a if self.use_aspect else 0)


class ModelParams(BaseModel):
    """All parameter matrices plus the configuration that produced them.

    Matrices are updated in place by the optimizer; ``trainable`` decides which ones.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: ModelSettings
    matrices: dict[str, np.ndarray]
    trainable: dict[str, bool]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.matrices[name]

    @property
    def n_users(self) -> int:
        return int(self.matrices["W_U"].shape[0])

    @property
    def n_items(self) -> int:
        return int(self.matrices["W_V"].shape[0])

    @property
    def n_aspect_rows(self) -> int:
        return int(self.matrices["W_A"].shape[0])

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.config.dtype)

    def trainable_names(self) -> list[str]:
        return [name for name in MATRIX_NAMES if self.trainable.get(name, False)]

    def copy(self) -> "ModelParams":
        return ModelParams(
            config=self.config,
            matrices={name: array.copy() for name, array in self.matrices.items()},
            trainable=dict(self.trainable),
        )

    def all_finite(self) -> bool:
        return all(bool(np.isfinite(array).all()) for array in self.matrices.values())

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for name in MATRIX_NAMES:
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(self.matrices[name]).tobytes())
        return digest.hexdigest()


class DropoutMasks(BaseModel):
    """Inverted-dropout multipliers, one row per example (0 or 1/(1-rate))."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    global_mask: np.ndarray
    aspect_mask: np.ndarray


class ForwardTrace(BaseModel):
    """Intermediate values of one (user, item) scoring."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    score: float
    user_mask: np.ndarray
    item_mask: np.ndarray
    c_user: np.ndarray | None = None
    c_item: np.ndarray | None = None
    beta: np.ndarray | None = None
    alpha: np.ndarray | None = None
    h: np.ndarray | None = None
    y_aspect: np.ndarray | None = None
    y_global: np.ndarray | None = None
    dropout: DropoutMasks | None = None
    shared_mask: np.ndarray | None = None
