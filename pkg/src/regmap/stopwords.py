"""Versioned English stopword list used by the preprocessing pipeline.

The list is frozen in code so that every model snapshot can record the
exact version it was preprocessed with and reproduce tokenization later.
Entries are plain lowercase words only: tokenization splits on punctuation,
so contracted forms ("isn't") can never appear as tokens and are omitted.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class StopwordList:
    """A versioned set of lowercase words removed during preprocessing."""

    words: frozenset[str]
    version: str

    def __contains__(self, token: str) -> bool:
        return token in self.words


_EN_BASE_WORDS = frozenset(
    """
    a about above after again against all also am an and any are as at
    be because been before being below between both but by
    can cannot could
    did do does doing down during
    each either few for from further
    had has have having he her here hers herself him himself his how
    i if in into is it its itself just
    may me might more most must my myself
    no nor not now
    of off on once only or other our ours ourselves out over own
    same shall she should so some such
    than that the their theirs them themselves then there these they
    this those through to too
    under until up upon
    very
    was we were what when where which while who whom why will with would
    you your yours yourself yourselves
    """.split()
)

EN_BASE_VERSION = "en-base-1"

DEFAULT_STOPWORDS = StopwordList(words=_EN_BASE_WORDS, version=EN_BASE_VERSION)

_REGISTRY = {EN_BASE_VERSION: DEFAULT_STOPWORDS}


def stopwords_for_version(version: str) -> StopwordList:
    """Resolve a stopword list by its recorded version string."""
    try:
        return _REGISTRY[version]
    except KeyError:
        raise KeyError(f"unknown stopword list version {version!r}") from None
