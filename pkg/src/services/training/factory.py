from pathlib import Path

from src.config import Settings, get_settings
from src.schemas.model.models import ModelParams
from src.services.corpus.bundle import DatasetBundle

from .trainer import Trainer


def make_trainer(
    bundle: DatasetBundle,
    params: ModelParams,
    settings: Settings | None = None,
    out_dir: str | Path | None = None,
) -> Trainer:
    """Factory function to create a trainer.

    :param bundle: Prepared dataset
    :param params: Initialized parameters, updated in place during training
    :param settings: Optional settings instance
    :param out_dir: Checkpoint directory; nothing is written when omitted
    :returns: Trainer instance
    """
    if settings is None:
        settings = get_settings()
    return Trainer(bundle, params, settings=settings, out_dir=out_dir)
