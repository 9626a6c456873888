from pydantic import BaseModel, Field


class ValidationMetrics(BaseModel):
    """The four top-N measures on the validation set at one checkpoint."""

    epoch: int = Field(..., description="Epoch after which the checkpoint was taken")
    recall: float
    precision: float
    ndcg: float
    hit_ratio: float

    def measures(self) -> dict[str, float]:
        return {"recall": self.recall, "precision": self.precision, "ndcg": self.ndcg, "hit_ratio": self.hit_ratio}


class EpochLog(BaseModel):
    """One line of the JSON-lines training log."""

    epoch: int
    loss: float = Field(..., description="Mean batch objective over the epoch")
    n_batches: int
    checkpoint: ValidationMetrics | None = None
    early_stop: bool = False


class TrainHistory(BaseModel):
    losses: list[float] = Field(default_factory=list, description="Mean loss per completed epoch")
    checkpoints: list[ValidationMetrics] = Field(default_factory=list)
    stopped_epoch: int = Field(0, description="Last completed epoch")
    best_epoch: int | None = Field(None, description="Epoch of the returned (best validation NDCG) checkpoint")
    early_stopped: bool = False

