import logging
from pathlib import Path

import numpy as np
from src.exceptions import EmbeddingDimensionMismatch, EmbeddingFormatError, MissingAspectEmbeddings
from src.schemas.corpus.models import AspectVocabulary
from src.schemas.pretrain.models import EmbeddingTable, aspect_token

logger = logging.getLogger(__name__)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> Path:
    """Write vectors in word2vec text format: ``<count> <dim>`` then ``token v1 ... vd``."""
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)
    with output.open("w", encoding="utf-8") as handle:
        handle.write(f"{len(table.tokens)} {table.dim}\n")
        for token, vector in zip(table.tokens, table.vectors, strict=True):
            handle.write(token + " " + " ".join(f"{value:.9g}" for value in vector) + "\n")
    logger.info(f"Saved {len(table.tokens)} vectors (dim={table.dim}) to {output}")
    return output


def load_embeddings(
    path: str | Path,
    expected_dim: int | None = None,
    vocab: AspectVocabulary | None = None,
) -> EmbeddingTable:
    """Read word2vec text vectors, validating dimension and aspect coverage.

    :param path: Vector file
    :param expected_dim: Configured d_a; a different file dimension is an error
    :param vocab: When given, every aspect must have a vector
    :returns: Embedding table
    """
    input_path = Path(path)
    if not input_path.exists():
        raise FileNotFoundError(f"Embedding file not found: {input_path}")

    with input_path.open(encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 2:
            raise EmbeddingFormatError(f"{input_path.name}: first line must be '<count> <dim>'")
        count, dim = int(header[0]), int(header[1])
        if expected_dim is not None and dim != expected_dim:
            raise EmbeddingDimensionMismatch(f"dimension mismatch: file has {dim}, config d_a is {expected_dim}")

        tokens: list[str] = []
        rows: list[list[float]] = []
        for lineno, line in enumerate(handle, start=2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise EmbeddingFormatError(f"{input_path.name} line {lineno}: expected token and {dim} values")
            tokens.append(parts[0])
            try:
                rows.append([float(value) for value in parts[1:]])
            except ValueError as e:
                raise EmbeddingFormatError(f"{input_path.name} line {lineno}: {e}") from e

    if len(tokens) != count:
        raise EmbeddingFormatError(f"{input_path.name}: header announces {count} vectors, found {len(tokens)}")

    table = EmbeddingTable(dim=dim, tokens=tokens, vectors=np.array(rows, dtype=np.float64).reshape(-1, dim))
    if vocab is not None:
        check_coverage(table, vocab)
    logger.info(f"Loaded {count} vectors (dim={dim}) from {input_path}")
    return table


def check_coverage(table: EmbeddingTable, vocab: AspectVocabulary) -> None:
    known = set(table.tokens)
    missing = [aspect for aspect in vocab.aspects[1:] if aspect_token(aspect) not in known]
    if missing:
        raise MissingAspectEmbeddings(missing)


def aspect_matrix(table: EmbeddingTable, vocab: AspectVocabulary) -> np.ndarray:
    """W_A rows in vocabulary order; row 0 (PAD) is zero."""
    check_coverage(table, vocab)
    index = table.index()
    matrix = np.zeros((vocab.size, table.dim), dtype=np.float64)
    for row, aspect in enumerate(vocab.aspects[1:], start=1):
        matrix[row] = table.vectors[index[aspect_token(aspect)]]
    return matrix
