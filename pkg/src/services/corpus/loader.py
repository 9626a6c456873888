import json
import logging
from pathlib import Path

from pydantic import ValidationError
from src.exceptions import EmptyCorpusError, InteractionParseError
from src.schemas.corpus.models import PAD_TOKEN, InteractionRecord, InteractionTable

logger = logging.getLogger(__name__)


def parse_interaction_line(line: str, lineno: int) -> InteractionRecord:
    """Parse one JSON-lines record.

    :param line: Raw JSON text
    :param lineno: 1-based line number used in error messages
    :returns: Validated interaction record
    """
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as e:
        raise InteractionParseError(lineno, f"invalid JSON ({e.msg})") from e

    if not isinstance(payload, dict):
        raise InteractionParseError(lineno, "expected a JSON object")

    try:
        record = InteractionRecord(**payload)
    except ValidationError as e:
        fields = ", ".join(".".join(str(p) for p in err["loc"]) for err in e.errors())
        raise InteractionParseError(lineno, f"schema mismatch in fields: {fields}") from e

    if PAD_TOKEN in record.aspects:
        raise InteractionParseError(lineno, f"reserved aspect {PAD_TOKEN} in annotations")
    return record


def load_interactions(path: str | Path, format: str = "jsonl") -> InteractionTable:
    """Load a JSON-lines interaction file into a table with contiguous indices.

    Duplicate (user, item) reviews are kept as separate records.

    :param path: Path to the interaction file
    :param format: Input format, only ``jsonl`` is supported
    :returns: Unsplit interaction table
    """
    if format != "jsonl":
        raise ValueError(f"Unsupported interaction format: {format}")

    input_path = Path(path)
    if not input_path.exists():
        raise FileNotFoundError(f"Interaction file not found: {input_path}")

    records: list[InteractionRecord] = []
    with input_path.open("rb") as handle:
        for lineno, raw in enumerate(handle, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise InteractionParseError(lineno, f"invalid UTF-8 at byte {e.start}") from e
            if not line.strip():
                continue
            records.append(parse_interaction_line(line, lineno))

    if not records:
        raise EmptyCorpusError(f"no records in {input_path}")

    table = InteractionTable.from_records(records)
    logger.info(f"Loaded {table.n_records} records: {table.n_users} users, {table.n_items} items from {input_path.name}")
    return table
