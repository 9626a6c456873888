from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator

PAD_TOKEN = "<PAD>"
PAD_INDEX = 0


class SplitLabel(str, Enum):
    """Split assignment of an interaction record."""

    TRAIN = "train"
    TEST = "test"


class InteractionRecord(BaseModel):
    """One review: a user, a product, its rating and the aspects it mentions."""

    user_id: str = Field(..., description="Opaque user identifier")
    item_id: str = Field(..., description="Opaque product identifier")
    rating: float = Field(..., description="Star rating, only used for binarization")
    review_tokens: list[str] | None = Field(None, description="Pre-tokenized review text")
    aspects: list[str] = Field(default_factory=list, description="Aspects mentioned in the review")

    @field_validator("user_id", "item_id")
    @classmethod
    def validate_identifier(cls, v: str) -> str:
        if not v:
            raise ValueError("Identifier must be non-empty")
        return v


class InteractionTable(BaseModel):
    """Interaction records with contiguous user/item indices and optional split labels."""

    model_config = ConfigDict(frozen=True)

    records: list[InteractionRecord]
    user_index: dict[str, int]
    item_index: dict[str, int]
    split: list[SplitLabel] | None = None

    @classmethod
    def from_records(cls, records: list[InteractionRecord]) -> "InteractionTable":
        """Build a table; indices follow first appearance order."""
        user_index: dict[str, int] = {}
        item_index: dict[str, int] = {}
        for record in records:
            user_index.setdefault(record.user_id, len(user_index))
            item_index.setdefault(record.item_id, len(item_index))
        return cls(records=records, user_index=user_index, item_index=item_index)

    @property
    def n_users(self) -> int:
        return len(self.user_index)

    @property
    def n_items(self) -> int:
        return len(self.item_index)

    @property
    def n_records(self) -> int:
        return len(self.records)

    @property
    def user_ids(self) -> list[str]:
        return list(self.user_index)

    @property
    def item_ids(self) -> list[str]:
        return list(self.item_index)

    @property
    def is_split(self) -> bool:
        return self.split is not None

    def labelled(self, label: SplitLabel) -> list[InteractionRecord]:
        if self.split is None:
            raise ValueError("Table has not been split into train/test")
        return [record for record, tag in zip(self.records, self.split, strict=True) if tag == label]

    def train_records(self) -> list[InteractionRecord]:
        return self.labelled(SplitLabel.TRAIN)

    def test_records(self) -> list[InteractionRecord]:
        return self.labelled(SplitLabel.TEST)

    def records_by_user(self, label: SplitLabel | None = None) -> dict[int, list[InteractionRecord]]:
        """Group records by internal user index, optionally restricted to one split."""
        grouped: dict[int, list[InteractionRecord]] = {uid: [] for uid in range(self.n_users)}
        labels = self.split if self.split is not None else [None] * len(self.records)
        for record, tag in zip(self.records, labels, strict=True):
            if label is None or tag == label:
                grouped[self.user_index[record.user_id]].append(record)
        return grouped

    def test_items_by_user(self) -> dict[int, set[int]]:
        truth: dict[int, set[int]] = {}
        for record in self.test_records():
            truth.setdefault(self.user_index[record.user_id], set()).add(self.item_index[record.item_id])
        return truth


class AspectVocabulary(BaseModel):
    """Aspect string <-> index map; index 0 is the PAD sentinel."""

    model_config = ConfigDict(frozen=True)

    aspects: list[str] = Field(..., description="Index-ordered aspects, aspects[0] is <PAD>")
    _lookup: dict[str, int] | None = PrivateAttr(default=None)

    @field_validator("aspects")
    @classmethod
    def validate_pad(cls, v: list[str]) -> list[str]:
        if not v or v[0] != PAD_TOKEN:
            raise ValueError("Vocabulary must start with the <PAD> entry")
        if PAD_TOKEN in v[1:]:
            raise ValueError("<PAD> must not appear as a real aspect")
        if len(set(v)) != len(v):
            raise ValueError("Vocabulary aspects must be distinct")
        return v

    @classmethod
    def from_aspects(cls, aspects: set[str] | list[str]) -> "AspectVocabulary":
        """Sorted order keeps the index map independent of record order."""
        return cls(aspects=[PAD_TOKEN, *sorted(set(aspects))])

    @property
    def size(self) -> int:
        return len(self.aspects)

    @property
    def n_aspects(self) -> int:
        return len(self.aspects) - 1

    def lookup(self, aspect: str) -> int:
        return self._index()[aspect]

    def get(self, aspect: str) -> int | None:
        return self._index().get(aspect)

    def __contains__(self, aspect: str) -> bool:
        return aspect in self._index()

    def _index(self) -> dict[str, int]:
        if self._lookup is None:
            self._lookup = {aspect: idx for idx, aspect in enumerate(self.aspects) if idx != PAD_INDEX}
        return self._lookup


class AspectSets(BaseModel):
    """Padded, TF-IDF truncated aspect index lists for every user and item."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    user_indices: np.ndarray = Field(..., description="(|U|, M_u) aspect indices, 0 = PAD")
    user_mask: np.ndarray = Field(..., description="(|U|, M_u) boolean mask, False at PAD")
    item_indices: np.ndarray = Field(..., description="(|V|, M_v) aspect indices, 0 = PAD")
    item_mask: np.ndarray = Field(..., description="(|V|, M_v) boolean mask, False at PAD")
    user_raw: list[list[int]] = Field(..., description="Untruncated per-user aspect index sets")
    item_raw: list[list[int]] = Field(..., description="Untruncated per-item aspect index sets")

    @property
    def m_u(self) -> int:
        return int(self.user_indices.shape[1])

    @property
    def m_v(self) -> int:
        return int(self.item_indices.shape[1])


class ValidationEntry(BaseModel):
    user_id: str = Field(..., description="Validation user")
    item_id: str = Field(..., description="Train item held out as ground truth")


class ValidationSet(BaseModel):
    entries: list[ValidationEntry] = Field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.entries)


class DatasetStatistics(BaseModel):
    """Interaction and aspect statistics of a prepared dataset."""

    n_users: int
    n_items: int
    n_records: int
    n_train_records: int
    n_test_records: int
    n_train_pairs: int
    n_aspects: int
    mean_aspects_per_user: float
    mean_aspects_per_item: float
    m_u: int
    m_v: int
