"""Token sequences: vocabularies, tokenizers and byte-pair encoding."""

from .bpe import BpeModel, bpe_apply, bpe_decode, bpe_train, length_reduction
from .tokenizer import TokenSequence, detokenize, sequence_record, tokenize
from .vocab import BOS, EOS, PAD, QuantSpec, Scheme, Vocabulary, build_vocabulary

__all__ = [
    "BOS", "EOS", "PAD", "BpeModel", "QuantSpec", "Scheme", "TokenSequence", "Vocabulary",
    "bpe_apply", "bpe_decode", "bpe_train", "build_vocabulary", "detokenize", "length_reduction",
    "sequence_record", "tokenize",
]
