from pathlib import Path

import pytest
from src.config import Settings, get_settings
from src.schemas.corpus.models import InteractionRecord, InteractionTable
from src.services.corpus.bundle import DatasetBundle
from src.services.corpus.factory import make_dataset_bundle
from src.services.corpus.synthetic import generate_synthetic_dataset, write_interactions

from tests.factories import record


@pytest.fixture
def tiny_records() -> list[InteractionRecord]:
    return [
        record("alice", "phone", ["battery life", "screen"], "the battery life is great and the screen too".split()),
        record("alice", "case", ["grip"], "nice grip".split()),
        record("alice", "charger", ["battery life", "cable"], "charges battery life fast with a long cable".split()),
        record("bob", "phone", ["screen", "price"], "screen is sharp for the price".split()),
        record("bob", "earbuds", ["sound", "price"], "sound is fine at this price".split()),
        record("bob", "case", ["grip", "price"], None),
        record("carol", "earbuds", ["sound"], "sound sound sound".split()),
        record("carol", "charger", ["cable"], "short cable".split()),
    ]


@pytest.fixture
def tiny_table(tiny_records: list[InteractionRecord]) -> InteractionTable:
    return InteractionTable.from_records(tiny_records)


@pytest.fixture(scope="session")
def synthetic_records() -> list[InteractionRecord]:
    return generate_synthetic_dataset(
        n_users=40,
        n_items=40,
        n_aspects=12,
        aspects_per_user=4,
        aspects_per_item=4,
        interactions_per_user=8,
        seed=0,
    )


@pytest.fixture(scope="session")
def interactions_file(tmp_path_factory: pytest.TempPathFactory, synthetic_records: list[InteractionRecord]) -> Path:
    return write_interactions(synthetic_records, tmp_path_factory.mktemp("corpus") / "interactions.jsonl")


@pytest.fixture(scope="session")
def small_settings() -> Settings:
    return get_settings(
        corpus={"validation_users": 10},
        pretrain={"dim": 8, "epochs": 1, "min_count": 1, "batch_pairs": 256},
        model={"d_a": 8, "d_g": 8, "strategy": "random_tune", "dropout": 0.2},
        train={"batch_size": 64, "max_epochs": 4, "eval_every": 2, "learning_rate": 0.01},
    )


@pytest.fixture(scope="session")
def synthetic_bundle(interactions_file: Path, small_settings: Settings) -> DatasetBundle:
    return make_dataset_bundle(interactions_file, small_settings)
