import logging

from src.schemas.corpus.models import AspectVocabulary, InteractionTable
from src.schemas.pretrain.models import aspect_token
from src.services.corpus.aspects import AspectSource, source_records

logger = logging.getLogger(__name__)


class AspectPhraseMerger:
    """Leftmost-longest merge of multi-word aspect phrases into single tokens."""

    def __init__(self, aspects: list[str]):
        self.phrases = {tuple(aspect.lower().split()) for aspect in aspects if aspect.split()}
        self.max_length = max((len(p) for p in self.phrases), default=1)

    def merge(self, tokens: list[str]) -> list[str]:
        lowered = [token.lower() for token in tokens]
        merged: list[str] = []
        position = 0
        while position < len(lowered):
            match = 0
            for length in range(min(self.max_length, len(lowered) - position), 1, -1):
                if tuple(lowered[position : position + length]) in self.phrases:
                    match = length
                    break
            if match:
                merged.append("_".join(lowered[position : position + match]))
                position += match
            else:
                merged.append(lowered[position])
                position += 1
        return merged


def tokenize_reviews(
    table: InteractionTable,
    vocab: AspectVocabulary,
    aspects_from: AspectSource = "train",
) -> list[list[str]]:
    """Segment reviews into word/phrase tokens according to the aspect dictionary.

    Reviews without tokens contribute the sentence formed by their aspect annotations.

    :param table: Split interaction table
    :param vocab: Aspect vocabulary
    :param aspects_from: Review source, train reviews by default
    :returns: Token corpus, one sentence per review
    """
    merger = AspectPhraseMerger(vocab.aspects[1:])
    corpus: list[list[str]] = []
    fallback = 0
    for record in source_records(table, aspects_from):
        if record.review_tokens:
            corpus.append(merger.merge(record.review_tokens))
        elif record.aspects:
            corpus.append([aspect_token(aspect) for aspect in record.aspects])
            fallback += 1

    if fallback:
        logger.debug(f"{fallback} reviews without tokens contributed their aspect annotations")
    logger.info(f"Tokenized {len(corpus)} reviews ({sum(len(s) for s in corpus)} tokens)")
    return corpus
