import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


def aspect_token(aspect: str) -> str:
    """Atomic corpus token for an aspect phrase: ``battery life`` -> ``battery_life``."""
    return "_".join(aspect.lower().split())


class EmbeddingTable(BaseModel):
    """Token vectors, one row per token."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dim: int = Field(..., description="Vector length (d_a)")
    tokens: list[str] = Field(..., description="Row-ordered tokens")
    vectors: np.ndarray = Field(..., description="(len(tokens), dim) float matrix")

    @model_validator(mode="after")
    def validate_shape(self) -> "EmbeddingTable":
        if self.vectors.shape != (len(self.tokens), self.dim):
            raise ValueError(f"Vector matrix shape {self.vectors.shape} does not match ({len(self.tokens)}, {self.dim})")
        return self

    def index(self) -> dict[str, int]:
        return {token: row for row, token in enumerate(self.tokens)}

    def vector(self, token: str) -> np.ndarray:
        return self.vectors[self.index()[token]]
