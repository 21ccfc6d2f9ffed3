"""
Word-level vocabulary for the structured-text decoder
"""

from typing import Any, Dict, Iterable, List, Sequence

from ..error import DynoframeError

PAD = "<pad>"
BOS = "<bos>"
EOS = "<eos>"
PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
RESERVED = (PAD, BOS, EOS)


class Vocabulary:
    """Bijective token <-> id table with PAD/BOS/EOS fixed at 0, 1, 2."""

    def __init__(self, tokens: Iterable[str]):
        self._tokens: List[str] = list(RESERVED)
        for token in sorted(set(tokens) - set(RESERVED)):
            self._tokens.append(token)
        self._ids: Dict[str, int] = {token: i for i, token in enumerate(self._tokens)}

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocabulary":
        tokens = set()
        for text in texts:
            tokens.update(text.split())
        return cls(tokens)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: object) -> bool:
        return token in self._ids

    def __repr__(self) -> str:
        return f"Vocabulary({len(self)} tokens)"

    def token_id(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise DynoframeError(f"token '{token}' is not in the vocabulary", code="UNKNOWN_TOKEN")

    def token(self, token_id: int) -> str:
        return self._tokens[token_id]

    def encode(self, text: str, add_eos: bool = True) -> List[int]:
        ids = [self.token_id(token) for token in text.split()]
        if add_eos:
            ids.append(EOS_ID)
        return ids

    def decode(self, ids: Sequence[int]) -> str:
        """Text up to the first EOS; PAD and BOS are skipped."""
        words = []
        for token_id in ids:
            if token_id == EOS_ID:
                break
            if token_id in (PAD_ID, BOS_ID):
                continue
            words.append(self._tokens[token_id])
        return " ".join(words)

    def to_json(self) -> List[str]:
        return list(self._tokens)

    @classmethod
    def from_json(cls, tokens: Any) -> "Vocabulary":
        if not isinstance(tokens, list) or tuple(tokens[:3]) != RESERVED:
            raise DynoframeError(
                "vocabulary must be a token list starting with <pad>, <bos>, <eos>",
                code="BAD_MODEL_FILE",
            )
        if len(set(tokens)) != len(tokens):
            raise DynoframeError("vocabulary contains duplicate tokens", code="BAD_MODEL_FILE")
        vocab = cls(())
        vocab._tokens = list(tokens)
        vocab._ids = {token: i for i, token in enumerate(tokens)}
        return vocab
