"""Term extraction for the contract-similarity index.

Lowercases, splits on non-alphanumeric boundaries, and drops comments and
string-literal contents before splitting. Kept independent from the full
Solidity lexer so the two views cannot drift together.
"""

from __future__ import annotations

import re

_TERM_RE = re.compile(r"[a-z0-9]+")


def _strip_comments_and_strings(text: str) -> str:
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j == -1 else j
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            i = n if j == -1 else j + 2
            out.append(" ")
            continue
        if ch in "\"'":
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    j += 2
                    continue
                if text[j] == ch or text[j] == "\n":
                    break
                j += 1
            i = min(j + 1, n)
            out.append(" ")
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def tokenize_for_tfidf(source: str) -> list[str]:
    """Lowercased alphanumeric terms of ``source``, comments and string
    contents excluded."""
    return _TERM_RE.findall(_strip_comments_and_strings(source).lower())
