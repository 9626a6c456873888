import logging
from pathlib import Path

import numpy as np
from src.config import Settings, get_settings
from src.exceptions import TrainingException
from src.schemas.model.models import ModelParams
from src.schemas.training.models import EpochLog, TrainHistory, ValidationMetrics
from src.services.corpus.bundle import DatasetBundle
from src.services.evaluation.evaluator import evaluate_validation, make_evaluator
from src.services.model.checkpoint import read_checkpoint, save_checkpoint
from src.services.model.factory import make_engine

from .early_stopping import should_stop
from .gradients import TrainingBatch, compute_gradients
from .optimizer import Adam
from .sampler import NegativeSampler

logger = logging.getLogger(__name__)

BEST_CHECKPOINT = "best.ckpt"
LAST_CHECKPOINT = "last.ckpt"
TRAIN_LOG = "train_log.jsonl"
HISTORY_FILE = "history.json"


class Trainer:
    """Mini-batch BPR training with Adam, periodic validation and early stopping.

    Each epoch shuffles the training positives (validation hold-outs excluded), draws one
    fresh negative per positive and applies one Adam step per batch. Every ``eval_every``
    epochs the four validation measures are computed; the parameters with the best
    validation NDCG are returned.
    """

    def __init__(
        self,
        bundle: DatasetBundle,
        params: ModelParams,
        settings: Settings | None = None,
        out_dir: str | Path | None = None,
    ):
        self.bundle = bundle
        self.params = params
        self.settings = settings or get_settings()
        self.config = self.settings.train
        self.out_dir = Path(out_dir) if out_dir is not None else None

        self.engine = make_engine(params, bundle)
        self.sampler = NegativeSampler(bundle.positives_by_user, bundle.n_items)
        self.optimizer = Adam(
            lr=self.config.learning_rate, beta1=self.config.beta1, beta2=self.config.beta2, eps=self.config.eps
        )
        self.rng = np.random.default_rng(self.config.seed)
        self.history = TrainHistory()
        self.best_params = params.copy()
        self.start_epoch = 0

    def _path(self, name: str) -> Path | None:
        return self.out_dir / name if self.out_dir is not None else None

    def run_epoch(self) -> tuple[float, int]:
        """One pass over the shuffled training positives; returns (mean loss, batch count)."""
        pairs = self.bundle.training_pairs
        if not len(pairs):
            raise TrainingException("No training pairs left after removing validation hold-outs")

        order = self.rng.permutation(len(pairs))
        users = pairs[order, 0]
        positives = pairs[order, 1]
        negatives = self.sampler.sample(users, self.rng)

        batch_size = self.config.batch_size
        losses: list[float] = []
        for start in range(0, len(pairs), batch_size):
            stop = start + batch_size
            batch = TrainingBatch(users=users[start:stop], pos_items=positives[start:stop], neg_items=negatives[start:stop])
            masks = self.engine.dropout_masks(2 * len(batch), self.rng)
            loss, grads = compute_gradients(self.engine, batch, self.config.l2, masks)
            self.optimizer.step(self.params, grads)
            losses.append(loss)
        return float(np.mean(losses)), len(losses)

    def validate(self, epoch: int) -> ValidationMetrics | None:
        if not self.bundle.validation_truth:
            return None
        evaluator = make_evaluator(self.params, self.bundle, n=self.config.top_n, threads=self.settings.evaluation.threads)
        report = evaluate_validation(evaluator, self.bundle)
        return ValidationMetrics(
            epoch=epoch, recall=report.recall, precision=report.precision, ndcg=report.ndcg, hit_ratio=report.hit_ratio
        )

    def train(self, resume: bool = False) -> tuple[ModelParams, TrainHistory]:
        """Run up to ``max_epochs`` epochs.

        :param resume: Continue from ``last.ckpt`` in the output directory when present
        :returns: Best-validation parameters and the training history
        """
        if resume:
            self._resume()

        log_path = self._path(TRAIN_LOG)
        if log_path is not None:
            log_path.parent.mkdir(parents=True, exist_ok=True)
            if self.start_epoch == 0:
                log_path.write_text("", encoding="utf-8")

        max_epochs = self.config.max_epochs
        logger.info(
            f"Training {self.params.config.variant} ({self.params.config.strategy}) for up to {max_epochs} epochs: "
            f"{len(self.bundle.training_pairs)} positives, batch {self.config.batch_size}, "
            f"lr {self.config.learning_rate}, l2 {self.config.l2}"
        )

        for epoch in range(self.start_epoch + 1, max_epochs + 1):
            loss, n_batches = self.run_epoch()
            self.history.losses.append(loss)
            self.history.stopped_epoch = epoch
            entry = EpochLog(epoch=epoch, loss=loss, n_batches=n_batches)

            if epoch % self.config.eval_every == 0:
                metrics = self.validate(epoch)
                if metrics is not None:
                    entry.checkpoint = metrics
                    self._record_checkpoint(metrics)
                    entry.early_stop = should_stop(
                        self.history.checkpoints, self.config.patience_checkpoints, self.config.min_failing_measures
                    )
                self._save_last(epoch)
                logger.info(
                    f"Epoch {epoch}: loss={loss:.5f}"
                    + (f", validation ndcg={metrics.ndcg:.5f} hit={metrics.hit_ratio:.5f}" if metrics else "")
                )
            else:
                logger.debug(f"Epoch {epoch}: loss={loss:.5f}")

            self._append_log(entry)
            if entry.early_stop:
                self.history.early_stopped = True
                logger.info(f"Early stopping after epoch {epoch}")
                break

        if not self.history.checkpoints and self.history.stopped_epoch > 0:
            # Nothing validated: the final parameters are the result
            self.best_params = self.params.copy()
            self.history.best_epoch = self.history.stopped_epoch
            self._save_best()

        history_path = self._path(HISTORY_FILE)
        if history_path is not None:
            history_path.write_text(self.history.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return self.best_params, self.history

    def _record_checkpoint(self, metrics: ValidationMetrics) -> None:
        previous = [c.ndcg for c in self.history.checkpoints]
        self.history.checkpoints.append(metrics)
        if not previous or metrics.ndcg > max(previous):
            self.best_params = self.params.copy()
            self.history.best_epoch = metrics.epoch
            self._save_best()

    def _save_best(self) -> None:
        path = self._path(BEST_CHECKPOINT)
        if path is not None:
            save_checkpoint(path, self.best_params, meta={"epoch": self.history.best_epoch})

    def _save_last(self, epoch: int) -> None:
        path = self._path(LAST_CHECKPOINT)
        if path is None:
            return
        extra = self.optimizer.state_arrays()
        extra.update({f"best.{name}": array for name, array in self.best_params.matrices.items()})
        save_checkpoint(
            path,
            self.params,
            extra=extra,
            meta={
                "epoch": epoch,
                "adam_t": self.optimizer.t,
                "rng_state": self.rng.bit_generator.state,
                "history": self.history.model_dump(),
            },
        )

    def _resume(self) -> None:
        path = self._path(LAST_CHECKPOINT)
        if path is None or not path.exists():
            logger.info("No checkpoint to resume from; starting fresh")
            return

        checkpoint = read_checkpoint(path)
        if checkpoint.params.config != self.params.config:
            raise TrainingException(f"Cannot resume: {path} was trained with a different model configuration")

        for name, array in checkpoint.params.matrices.items():
            self.params.matrices[name][...] = array
        best = {key.removeprefix("best."): value for key, value in checkpoint.extra.items() if key.startswith("best.")}
        self.best_params = self.params.copy()
        for name, array in best.items():
            self.best_params.matrices[name][...] = array

        meta = checkpoint.meta
        self.optimizer.load_state(checkpoint.extra, int(meta["adam_t"]))
        self.rng.bit_generator.state = meta["rng_state"]
        self.history = TrainHistory.model_validate(meta["history"])
        self.start_epoch = int(meta["epoch"])

        log_path = self._path(TRAIN_LOG)
        if log_path is not None and log_path.exists():
            kept = [
                line
                for line in log_path.read_text(encoding="utf-8").splitlines()
                if line and EpochLog.model_validate_json(line).epoch <= self.start_epoch
            ]
            log_path.write_text("".join(line + "\n" for line in kept), encoding="utf-8")
        logger.info(f"Resumed from {path} at epoch {self.start_epoch}")

    def _append_log(self, entry: EpochLog) -> None:
        path = self._path(TRAIN_LOG)
        if path is not None:
            with path.open("a", encoding="utf-8") as handle:
                handle.write(entry.model_dump_json() + "\n")


def train(
    bundle: DatasetBundle,
    params: ModelParams,
    settings: Settings | None = None,
    out_dir: str | Path | None = None,
    resume: bool = False,
) -> tuple[ModelParams, TrainHistory]:
    return Trainer(bundle, params, settings=settings, out_dir=out_dir).train(resume=resume)
