import hashlib
import json
import logging
from functools import cached_property
from pathlib import Path

import numpy as np
from src.exceptions import DatasetBundleError
from src.schemas.corpus.models import (
    PAD_INDEX,
    PAD_TOKEN,
    AspectSets,
    AspectVocabulary,
    DatasetStatistics,
    InteractionRecord,
    InteractionTable,
    SplitLabel,
    ValidationSet,
)

from .splitter import binarize
from .validation import held_out_pairs

logger = logging.getLogger(__name__)

BUNDLE_HEADER = "AARM-DATA v1"
HEADER_FILE = "HEADER"
INTERACTIONS_FILE = "interactions.jsonl"
VOCAB_FILE = "vocab.txt"
ASPECT_SETS_FILE = "aspect_sets.tsv"
VALIDATION_FILE = "validation.json"


class DatasetBundle:
    """Prepared dataset: split table, vocabulary, aspect sets and validation set."""

    def __init__(
        self,
        table: InteractionTable,
        vocab: AspectVocabulary,
        aspect_sets: AspectSets,
        validation: ValidationSet,
    ):
        if not table.is_split:
            raise DatasetBundleError("Dataset bundle requires a split interaction table")
        if aspect_sets.user_indices.shape[0] != table.n_users or aspect_sets.item_indices.shape[0] != table.n_items:
            raise DatasetBundleError("Aspect set rows do not match the table's users/items")
        self.table = table
        self.vocab = vocab
        self.aspect_sets = aspect_sets
        self.validation = validation

    @property
    def n_users(self) -> int:
        return self.table.n_users

    @property
    def n_items(self) -> int:
        return self.table.n_items

    @cached_property
    def positives(self) -> set[tuple[int, int]]:
        """All distinct train (user, item) pairs, validation hold-outs included."""
        return binarize(self.table)

    @cached_property
    def held_out(self) -> set[tuple[int, int]]:
        return held_out_pairs(self.table, self.validation)

    @cached_property
    def training_pairs(self) -> np.ndarray:
        """(n, 2) positive pairs used in training batches, sorted, hold-outs removed."""
        pairs = sorted(self.positives - self.held_out)
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)

    @cached_property
    def positives_by_user(self) -> list[np.ndarray]:
        grouped: list[list[int]] = [[] for _ in range(self.n_users)]
        for uid, iid in self.positives:
            grouped[uid].append(iid)
        return [np.array(sorted(items), dtype=np.int64) for items in grouped]

    @cached_property
    def test_items_by_user(self) -> dict[int, set[int]]:
        return self.table.test_items_by_user()

    @cached_property
    def validation_truth(self) -> dict[int, set[int]]:
        truth: dict[int, set[int]] = {}
        for uid, iid in self.held_out:
            truth.setdefault(uid, set()).add(iid)
        return truth

    def user_id_to_index(self, user_id: str) -> int | None:
        return self.table.user_index.get(user_id)

    def item_id_to_index(self, item_id: str) -> int | None:
        return self.table.item_index.get(item_id)

    def statistics(self) -> DatasetStatistics:
        """Interaction counts plus aspect counts per user and per product (raw sets)."""
        sets = self.aspect_sets
        return DatasetStatistics(
            n_users=self.n_users,
            n_items=self.n_items,
            n_records=self.table.n_records,
            n_train_records=len(self.table.train_records()),
            n_test_records=len(self.table.test_records()),
            n_train_pairs=len(self.positives),
            n_aspects=self.vocab.n_aspects,
            mean_aspects_per_user=float(np.mean([len(s) for s in sets.user_raw])) if sets.user_raw else 0.0,
            mean_aspects_per_item=float(np.mean([len(s) for s in sets.item_raw])) if sets.item_raw else 0.0,
            m_u=sets.m_u,
            m_v=sets.m_v,
        )


def _join(values) -> str:
    return ",".join(str(int(v)) for v in values)


def _split_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",")] if text else []


def save_bundle(bundle: DatasetBundle, out_dir: str | Path) -> Path:
    """Write the bundle directory; output bytes depend only on the bundle contents."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)

    (directory / HEADER_FILE).write_text(BUNDLE_HEADER + "\n", encoding="utf-8")

    with (directory / INTERACTIONS_FILE).open("w", encoding="utf-8") as handle:
        for record, label in zip(bundle.table.records, bundle.table.split or [], strict=True):
            payload = record.model_dump()
            payload["split"] = label.value
            handle.write(json.dumps(payload, sort_keys=True, ensure_ascii=False) + "\n")

    (directory / VOCAB_FILE).write_text("\n".join(bundle.vocab.aspects) + "\n", encoding="utf-8")

    sets = bundle.aspect_sets
    lines = [BUNDLE_HEADER, f"M_u\t{sets.m_u}\tM_v\t{sets.m_v}"]
    for uid in range(sets.user_indices.shape[0]):
        lines.append(f"U\t{uid}\t{_join(sets.user_indices[uid])}\t{_join(sets.user_raw[uid])}")
    for iid in range(sets.item_indices.shape[0]):
        lines.append(f"V\t{iid}\t{_join(sets.item_indices[iid])}\t{_join(sets.item_raw[iid])}")
    (directory / ASPECT_SETS_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")

    (directory / VALIDATION_FILE).write_text(bundle.validation.model_dump_json(indent=2) + "\n", encoding="utf-8")

    logger.info(f"Dataset bundle written to {directory}")
    return directory


def _read_aspect_sets(path: Path) -> AspectSets:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != BUNDLE_HEADER:
        raise DatasetBundleError(f"{path.name}: expected header '{BUNDLE_HEADER}'")

    try:
        _, m_u, _, m_v = lines[1].split("\t")
        user_rows: list[list[int]] = []
        item_rows: list[list[int]] = []
        user_raw: list[list[int]] = []
        item_raw: list[list[int]] = []
        for line in lines[2:]:
            side, _, padded, raw = line.split("\t")
            (user_rows if side == "U" else item_rows).append(_split_ints(padded))
            (user_raw if side == "U" else item_raw).append(_split_ints(raw))
    except ValueError as e:
        raise DatasetBundleError(f"{path.name}: malformed aspect set table ({e})") from e

    user_indices = np.array(user_rows, dtype=np.int64).reshape(-1, int(m_u))
    item_indices = np.array(item_rows, dtype=np.int64).reshape(-1, int(m_v))
    return AspectSets(
        user_indices=user_indices,
        user_mask=user_indices != PAD_INDEX,
        item_indices=item_indices,
        item_mask=item_indices != PAD_INDEX,
        user_raw=user_raw,
        item_raw=item_raw,
    )


def load_bundle(data_dir: str | Path) -> DatasetBundle:
    """Load a bundle written by :func:`save_bundle`.

    :param data_dir: Bundle directory
    :returns: Dataset bundle with identical indices to the one saved
    """
    directory = Path(data_dir)
    header_path = directory / HEADER_FILE
    if not header_path.exists():
        raise DatasetBundleError(f"Not a dataset bundle (missing {HEADER_FILE}): {directory}")
    header = header_path.read_text(encoding="utf-8").strip()
    if header != BUNDLE_HEADER:
        raise DatasetBundleError(f"Unsupported bundle version '{header}', expected '{BUNDLE_HEADER}'")

    for name in (INTERACTIONS_FILE, VOCAB_FILE, ASPECT_SETS_FILE, VALIDATION_FILE):
        if not (directory / name).exists():
            raise DatasetBundleError(f"Dataset bundle is missing {name}: {directory}")

    records: list[InteractionRecord] = []
    labels: list[SplitLabel] = []
    with (directory / INTERACTIONS_FILE).open(encoding="utf-8") as handle:
        for line in handle:
            payload = json.loads(line)
            labels.append(SplitLabel(payload.pop("split")))
            records.append(InteractionRecord(**payload))
    table = InteractionTable.from_records(records).model_copy(update={"split": labels})

    aspects = (directory / VOCAB_FILE).read_text(encoding="utf-8").splitlines()
    if not aspects or aspects[0] != PAD_TOKEN:
        raise DatasetBundleError(f"{VOCAB_FILE}: line 0 must be {PAD_TOKEN}")
    vocab = AspectVocabulary(aspects=aspects)

    aspect_sets = _read_aspect_sets(directory / ASPECT_SETS_FILE)
    validation = ValidationSet.model_validate_json((directory / VALIDATION_FILE).read_text(encoding="utf-8"))

    logger.info(f"Loaded dataset bundle from {directory}: {table.n_users} users, {table.n_items} items")
    return DatasetBundle(table=table, vocab=vocab, aspect_sets=aspect_sets, validation=validation)


def bundle_digest(data_dir: str | Path) -> str:
    """SHA-256 over the bundle's data files in a fixed order."""
    directory = Path(data_dir)
    digest = hashlib.sha256()
    for name in (HEADER_FILE, INTERACTIONS_FILE, VOCAB_FILE, ASPECT_SETS_FILE, VALIDATION_FILE):
        digest.update(name.encode("utf-8"))
        digest.update((directory / name).read_bytes())
    return digest.hexdigest()
