import logging
from collections import Counter
from collections.abc import Iterator
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from src.exceptions import EmptyTrainingCorpusError
from src.schemas.pretrain.models import EmbeddingTable

logger = logging.getLogger(__name__)


def context_pairs(sentence: list[int], window: int) -> tuple[np.ndarray, np.ndarray]:
    """All (center, context) pairs within a fixed symmetric window.

    A sentence of length L yields sum_t |context(t)| pairs, context(t) being the positions
    within ``window`` of t other than t itself.
    """
    centers: list[int] = []
    contexts: list[int] = []
    length = len(sentence)
    for t, center in enumerate(sentence):
        for c in range(max(0, t - window), min(length, t + window + 1)):
            if c != t:
                centers.append(center)
                contexts.append(sentence[c])
    return np.array(centers, dtype=np.int64), np.array(contexts, dtype=np.int64)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class SkipGramTrainer:
    """Skip-gram with negative sampling over a tokenized review corpus.

    Noise words follow the unigram distribution raised to 0.75; subsampling is disabled;
    the learning rate decays linearly from ``alpha`` to ``min_alpha`` over all epochs.
    Updates are applied per mini-batch of center-context pairs. With ``threads > 1`` the
    corpus is sharded across threads that update the shared matrices without locking.
    """

    def __init__(
        self,
        dim: int = 128,
        window: int = 5,
        negatives: int = 5,
        epochs: int = 5,
        alpha: float = 0.025,
        min_alpha: float = 0.0001,
        min_count: int = 5,
        aspect_min_count: int = 1,
        batch_pairs: int = 1024,
        seed: int = 2019,
        threads: int = 1,
    ):
        self.dim = dim
        self.window = window
        self.negatives = negatives
        self.epochs = epochs
        self.alpha = alpha
        self.min_alpha = min_alpha
        self.min_count = min_count
        self.aspect_min_count = aspect_min_count
        self.batch_pairs = batch_pairs
        self.seed = seed
        self.threads = max(1, threads)

        self.tokens: list[str] = []
        self.w_in: np.ndarray | None = None
        self.w_out: np.ndarray | None = None
        self.noise_cdf: np.ndarray | None = None

    def build_vocab(self, corpus: list[list[str]], aspect_tokens: set[str]) -> dict[str, int]:
        """Keep frequent tokens plus every aspect token, ordered by (-count, token)."""
        counts = Counter(token for sentence in corpus for token in sentence)
        kept = [
            token
            for token, count in counts.items()
            if count >= self.min_count or (token in aspect_tokens and count >= self.aspect_min_count)
        ]
        # Aspects absent from the text still get a (random) vector
        kept.extend(token for token in aspect_tokens if token not in counts)
        kept.sort(key=lambda token: (-counts.get(token, 0), token))
        self.tokens = kept

        frequencies = np.array([max(counts.get(token, 0), 1) for token in kept], dtype=np.float64) ** 0.75
        self.noise_cdf = np.cumsum(frequencies / frequencies.sum())
        return {token: row for row, token in enumerate(kept)}

    def _encode(self, corpus: list[list[str]], index: dict[str, int]) -> list[list[int]]:
        encoded = [[index[token] for token in sentence if token in index] for sentence in corpus]
        return [sentence for sentence in encoded if len(sentence) > 1]

    def _batches(self, sentences: list[list[int]]) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        centers: list[np.ndarray] = []
        contexts: list[np.ndarray] = []
        pending = 0
        for sentence in sentences:
            c, o = context_pairs(sentence, self.window)
            centers.append(c)
            contexts.append(o)
            pending += len(c)
            while pending >= self.batch_pairs:
                all_c = np.concatenate(centers)
                all_o = np.concatenate(contexts)
                yield all_c[: self.batch_pairs], all_o[: self.batch_pairs]
                centers, contexts = [all_c[self.batch_pairs :]], [all_o[self.batch_pairs :]]
                pending -= self.batch_pairs
        if pending:
            yield np.concatenate(centers), np.concatenate(contexts)

    def _update(self, centers: np.ndarray, contexts: np.ndarray, lr: float, rng: np.random.Generator) -> float:
        """One SGD step on a batch of pairs; returns the mean negative log-likelihood."""
        assert self.w_in is not None and self.w_out is not None and self.noise_cdf is not None
        noise = np.searchsorted(self.noise_cdf, rng.random((len(centers), self.negatives)), side="right")
        noise = np.minimum(noise, len(self.tokens) - 1)

        v = self.w_in[centers]
        u_pos = self.w_out[contexts]
        u_neg = self.w_out[noise]

        s_pos = _sigmoid(np.einsum("bd,bd->b", v, u_pos))
        s_neg = _sigmoid(np.einsum("bkd,bd->bk", u_neg, v))

        g_pos = (1.0 - s_pos) * lr
        g_neg = -s_neg * lr

        grad_v = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
        np.add.at(self.w_out, contexts, g_pos[:, None] * v)
        np.add.at(self.w_out, noise, g_neg[:, :, None] * v[:, None, :])
        np.add.at(self.w_in, centers, grad_v)

        eps = 1e-12
        return float(-(np.log(s_pos + eps).sum() + np.log(1.0 - s_neg + eps).sum()) / len(centers))

    def _run_shard(self, sentences: list[list[int]], total_pairs: int, done_before: int, seed: int) -> tuple[int, float]:
        rng = np.random.default_rng(seed)
        done = done_before
        loss_sum = 0.0
        batches = 0
        span = max(total_pairs * self.epochs, 1)
        for centers, contexts in self._batches(sentences):
            progress = min(done / span, 1.0)
            lr = self.alpha - (self.alpha - self.min_alpha) * progress
            loss_sum += self._update(centers, contexts, lr, rng)
            done += len(centers)
            batches += 1
        return done - done_before, loss_sum / max(batches, 1)

    def train(self, corpus: list[list[str]], aspect_tokens: set[str] | None = None) -> EmbeddingTable:
        """Train input vectors for every kept token.

        :param corpus: Tokenized sentences
        :param aspect_tokens: Tokens exempt from the frequency floor
        :returns: Input-vector embedding table
        """
        if not corpus or not any(corpus):
            raise EmptyTrainingCorpusError("Cannot train skip-gram embeddings on an empty corpus")

        index = self.build_vocab(corpus, aspect_tokens or set())
        sentences = self._encode(corpus, index)
        total_pairs = sum(len(context_pairs(s, self.window)[0]) for s in sentences)

        rng = np.random.default_rng(self.seed)
        bound = 0.5 / self.dim
        self.w_in = rng.uniform(-bound, bound, size=(len(self.tokens), self.dim))
        self.w_out = np.zeros((len(self.tokens), self.dim))

        logger.info(
            f"Skip-gram training: {len(self.tokens)} tokens, {len(sentences)} sentences, {total_pairs} pairs/epoch, "
            f"dim={self.dim}, window={self.window}, negatives={self.negatives}, threads={self.threads}"
        )

        done = 0
        for epoch in range(self.epochs):
            order = rng.permutation(len(sentences))
            shuffled = [sentences[k] for k in order]
            if self.threads == 1:
                processed, loss = self._run_shard(shuffled, total_pairs, done, self.seed + epoch + 1)
            else:
                shards = [shuffled[k :: self.threads] for k in range(self.threads)]
                with ThreadPoolExecutor(max_workers=self.threads) as pool:
                    futures = [
                        pool.submit(self._run_shard, shard, total_pairs, done, self.seed + 1000 * (epoch + 1) + k)
                        for k, shard in enumerate(shards)
                    ]
                    results = [future.result() for future in futures]
                processed = sum(r[0] for r in results)
                loss = float(np.mean([r[1] for r in results]))
            done += processed
            logger.info(f"Skip-gram epoch {epoch + 1}/{self.epochs}: loss={loss:.4f}")

        return EmbeddingTable(dim=self.dim, tokens=list(self.tokens), vectors=self.w_in.copy())


def train_sgns(
    corpus: list[list[str]],
    dim: int = 128,
    window: int = 5,
    negatives: int = 5,
    epochs: int = 5,
    seed: int = 2019,
    aspect_tokens: set[str] | None = None,
    **kwargs,
) -> EmbeddingTable:
    trainer = SkipGramTrainer(dim=dim, window=window, negatives=negatives, epochs=epochs, seed=seed, **kwargs)
    return trainer.train(corpus, aspect_tokens=aspect_tokens)
