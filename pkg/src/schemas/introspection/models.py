from pydantic import BaseModel, Field, field_serializer
from src.schemas.corpus.models import DatasetStatistics

FLOAT_DECIMALS = 6


class UserAspectAttention(BaseModel):
    aspect: str
    alpha: float = Field(..., description="User-level attention weight")
    shared: bool = Field(..., description="Aspect also appears in the product's aspect set")

    @field_serializer("alpha")
    def round_alpha(self, value: float) -> float:
        return round(value, FLOAT_DECIMALS)

    @property
    def display(self) -> str:
        return f"{self.alpha:.4f}"


class AttentionDump(BaseModel):
    """Labelled attention distributions of one (user, product) pair."""

    user_id: str
    item_id: str
    variant: str
    score: float
    user_aspects: list[str] = Field(default_factory=list, description="Non-PAD user aspects (beta rows)")
    item_aspects: list[str] = Field(default_factory=list, description="Non-PAD product aspects (beta columns)")
    user_attention: list[UserAspectAttention] | None = None
    beta: list[list[float]] | None = None

    @field_serializer("score")
    def round_score(self, value: float) -> float:
        return round(value, FLOAT_DECIMALS)

    @field_serializer("beta")
    def round_beta(self, value: list[list[float]] | None) -> list[list[float]] | None:
        if value is None:
            return None
        return [[round(cell, FLOAT_DECIMALS) for cell in row] for row in value]


class SharedAspectHistogram(BaseModel):
    """Distribution of the number of shared aspects over user x product pairs."""

    buckets: list[str] = Field(default_factory=lambda: ["0", "1", "2", "3", "4", "5", ">5"])
    counts: list[int]
    ratios: list[float] = Field(..., description="Fractions per bucket, summing to 1")
    n_pairs: int
    mode: str = Field(..., description="'exact' traversal or 'sampled'")
    truncated: bool = Field(..., description="Counted on truncated (model) sets instead of raw sets")

    @property
    def percent(self) -> dict[str, float]:
        return {bucket: round(100.0 * ratio, 3) for bucket, ratio in zip(self.buckets, self.ratios, strict=True)}


class StatsReport(BaseModel):
    """Output document of the ``stats`` command."""

    dataset: DatasetStatistics
    shared_aspects: SharedAspectHistogram | None = None
