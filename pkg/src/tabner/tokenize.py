"""Cell text tokenization.

Whitespace split, punctuation split off, and letter/digit boundaries split
("DN50" -> "DN", "50").  Decimal numbers such as ``12.5`` stay one token so
values keep their surface form.  Case is preserved; lookup code lowercases
through :func:`normalize`.
"""
import re

_TOKEN_RE = re.compile(r"\d+(?:[.,]\d+)*|[^\W\d_]+|[^\w\s]|_")


def tokenize(text):
    return _TOKEN_RE.findall(text)


def normalize(token):
    return token.lower()


def normalize_phrase(text):
    """Lowercase and collapse internal whitespace."""
    return " ".join(text.lower().split())
