from pydantic import BaseModel, Field, computed_field


class UserMetrics(BaseModel):
    user_id: str
    n_truth: int = Field(..., description="Number of ground-truth items")
    recall: float
    precision: float
    ndcg: float
    hit: int = Field(..., description="1 if any ground-truth item is recommended")


class EvalReport(BaseModel):
    """Top-N measures averaged over every user with at least one ground-truth item."""

    n: int = Field(..., description="List length N")
    n_users: int = Field(..., description="Users averaged over")
    recall: float
    precision: float
    ndcg: float
    hit_ratio: float
    users: list[UserMetrics] = Field(default_factory=list)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def percent(self) -> dict[str, float]:
        """Averages in percent, 3 decimals."""
        return {name: round(100.0 * value, 3) for name, value in self.measures().items()}

    def measures(self) -> dict[str, float]:
        return {"recall": self.recall, "precision": self.precision, "ndcg": self.ndcg, "hit_ratio": self.hit_ratio}
