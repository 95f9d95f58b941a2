"""Token/id bijection with four reserved ids."""

from __future__ import annotations

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3

PAD_TOKEN = "<pad>"
BOS_TOKEN = "<s>"
EOS_TOKEN = "</s>"
UNK_TOKEN = "<unk>"

RESERVED = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN)


class Vocabulary:
    """Maps content tokens to ids 4 and up; ids 0-3 are reserved markers."""

    def __init__(self, tokens):
        tokens = list(tokens)
        self.id_to_token = list(RESERVED) + tokens
        self.token_to_id = {}
        for i, tok in enumerate(self.id_to_token):
            if tok in self.token_to_id:
                raise ValueError(f"duplicate token {tok!r}")
            self.token_to_id[tok] = i

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def content_tokens(self) -> list:
        return self.id_to_token[len(RESERVED):]

    def encode(self, tokens) -> list:
        """Content tokens to ids; anything unrecognized maps to the unknown id."""
        return [self.token_to_id.get(t, UNK_ID) for t in tokens]

    def decode(self, ids) -> list:
        """Ids to printable tokens, dropping structural markers.

        Padding, begin-of-sequence, and end-of-sequence disappear; the
        unknown id keeps its printable marker so the information loss stays
        visible.
        """
        out = []
        for i in ids:
            i = int(i)
            if not 0 <= i < len(self.id_to_token):
                raise ValueError(f"id {i} out of range [0, {len(self.id_to_token)})")
            if i in (PAD_ID, BOS_ID, EOS_ID):
                continue
            out.append(self.id_to_token[i])
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.id_to_token == other.id_to_token
