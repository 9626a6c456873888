import csv
import logging
from pathlib import Path

import numpy as np
from src.exceptions import AttentionUnavailableError, UnknownEntityError
from src.schemas.introspection.models import AttentionDump, UserAspectAttention
from src.schemas.model.models import ModelParams
from src.services.corpus.bundle import DatasetBundle
from src.services.model.factory import make_engine

logger = logging.getLogger(__name__)


def resolve_pair(bundle: DatasetBundle, user_id: str, item_id: str) -> tuple[int, int]:
    user = bundle.user_id_to_index(user_id)
    if user is None:
        raise UnknownEntityError(f"Unknown user id '{user_id}'")
    item = bundle.item_id_to_index(item_id)
    if item is None:
        raise UnknownEntityError(f"Unknown item id '{item_id}'")
    return user, item


def attention_dump(
    params: ModelParams,
    bundle: DatasetBundle,
    user_id: str,
    item_id: str,
    include_alpha: bool = True,
    include_beta: bool = True,
) -> AttentionDump:
    """Labelled alpha and/or beta of one pair, PAD positions omitted."""
    user, item = resolve_pair(bundle, user_id, item_id)
    trace = make_engine(params, bundle).trace(user, item)

    sets = bundle.aspect_sets
    aspects = bundle.vocab.aspects
    user_positions = np.flatnonzero(sets.user_mask[user])
    item_positions = np.flatnonzero(sets.item_mask[item])
    user_aspects = [aspects[int(i)] for i in sets.user_indices[user, user_positions]]
    item_aspects = [aspects[int(j)] for j in sets.item_indices[item, item_positions]]

    dump = AttentionDump(
        user_id=user_id,
        item_id=item_id,
        variant=params.config.variant,
        score=trace.score,
        user_aspects=user_aspects,
        item_aspects=item_aspects,
    )

    if include_alpha:
        if trace.alpha is None:
            raise AttentionUnavailableError(f"Variant '{params.config.variant}' has no user-level attention")
        item_set = set(item_aspects)
        dump.user_attention = [
            UserAspectAttention(aspect=aspect, alpha=float(trace.alpha[position]), shared=aspect in item_set)
            for aspect, position in zip(user_aspects, user_positions, strict=True)
        ]

    if include_beta:
        if trace.beta is None:
            raise AttentionUnavailableError(f"Variant '{params.config.variant}' has no aspect-level attention")
        dump.beta = trace.beta[np.ix_(user_positions, item_positions)].tolist()

    return dump


def user_attention_trace(params: ModelParams, bundle: DatasetBundle, user_id: str, item_id: str) -> AttentionDump:
    """User-level attention per non-PAD user aspect, shared aspects flagged."""
    return attention_dump(params, bundle, user_id, item_id, include_alpha=True, include_beta=False)


def aspect_attention_heatmap(params: ModelParams, bundle: DatasetBundle, user_id: str, item_id: str) -> AttentionDump:
    """Aspect-level attention, rows = user aspects, columns = product aspects."""
    return attention_dump(params, bundle, user_id, item_id, include_alpha=False, include_beta=True)


def write_dump(dump: AttentionDump, path: str | Path) -> Path:
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(dump.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return output


def write_heatmap_csv(dump: AttentionDump, path: str | Path) -> Path:
    """Companion CSV: header row of product aspects, one row per user aspect."""
    if dump.beta is None:
        raise AttentionUnavailableError("Dump carries no aspect-level attention")
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)
    with output.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["user_aspect", *dump.item_aspects])
        for aspect, row in zip(dump.user_aspects, dump.beta, strict=True):
            writer.writerow([aspect, *(f"{value:.6f}" for value in row)])
    return output


def format_user_attention(dump: AttentionDump) -> str:
    """Plain-text table with 4-decimal weights, shared aspects starred."""
    if not dump.user_attention:
        return ""
    width = max(len(entry.aspect) for entry in dump.user_attention)
    lines = [f"user {dump.user_id} / product {dump.item_id}"]
    for entry in sorted(dump.user_attention, key=lambda e: -e.alpha):
        marker = "*" if entry.shared else " "
        lines.append(f"{marker} {entry.aspect:<{width}}  {entry.display}")
    return "\n".join(lines)
