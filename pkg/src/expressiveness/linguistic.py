"""Word-count and category-percentage signals from transcripts.

Implements the generic mechanism behind dictionary-based text measures: a
lexicon maps category names to patterns (literal words or prefix patterns
ending in `*`), and each category's signal is the percentage of transcript
tokens matching any of its patterns. A token may count toward several
categories. The four proprietary summary dimensions (Analytical Thinking,
Clout, Authentic, Emotional Tone) have unpublished formulas, so they are
accepted as externally supplied per-participant scores and passed through.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass

import numpy as np

from .core import FeatureTable
from .errors import (
    EmptyTokenListError,
    EmptyTranscriptError,
    InvalidPatternError,
    MissingParticipantError,
    ParseError,
)

EXTERNAL_DIMENSIONS = (
    "Analytical Thinking",
    "Clout",
    "Authentic",
    "Emotional Tone",
)

# Letters or digits, with apostrophes kept inside a token ("don't").
_TOKEN = re.compile(r"[^\W_]+(?:'[^\W_]+)*", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on whitespace and punctuation.

    Internal apostrophes stay inside their token; digit-only tokens count
    as words. Empty text gives an empty list.
    """
    return _TOKEN.findall(text.lower().replace("’", "'"))


@dataclass(frozen=True, eq=False)
class Transcript:
    """One participant's ordered utterances."""

    participant_id: str
    utterances: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))
        if not self.utterances:
            raise EmptyTranscriptError(
                f"transcript for {self.participant_id!r} has no utterances"
            )
        for u in self.utterances:
            if not u.strip():
                raise EmptyTranscriptError(
                    f"transcript for {self.participant_id!r} has a blank utterance"
                )

    def tokens(self) -> list[str]:
        out = []
        for u in self.utterances:
            out.extend(tokenize(u))
        return out


@dataclass(frozen=True, eq=False)
class Lexicon:
    """Category name -> patterns; `friend*` matches any token it prefixes.

    Patterns must be lowercase and non-empty, with `*` allowed only as the
    final character (and not alone).
    """

    categories: dict[str, tuple[str, ...]]

    def __post_init__(self):
        normalized = {}
        for category, patterns in self.categories.items():
            patterns = tuple(patterns)
            for pat in patterns:
                stem = pat[:-1] if pat.endswith("*") else pat
                if not stem:
                    raise InvalidPatternError(
                        f"empty pattern in category {category!r}"
                    )
                if "*" in stem:
                    raise InvalidPatternError(
                        f"pattern {pat!r} in category {category!r}: "
                        "'*' allowed only in final position"
                    )
                if pat != pat.lower():
                    raise InvalidPatternError(
                        f"pattern {pat!r} in category {category!r} must be lowercase"
                    )
            normalized[str(category)] = patterns
        object.__setattr__(self, "categories", normalized)
        literals, prefixes = {}, {}
        for category, patterns in normalized.items():
            literals[category] = frozenset(
                p for p in patterns if not p.endswith("*")
            )
            prefixes[category] = tuple(
                p[:-1] for p in patterns if p.endswith("*")
            )
        object.__setattr__(self, "_literals", literals)
        object.__setattr__(self, "_prefixes", prefixes)

    @property
    def category_names(self) -> tuple[str, ...]:
        return tuple(self.categories)

    def matches(self, token: str, category: str) -> bool:
        if token in self._literals[category]:
            return True
        return any(token.startswith(p) for p in self._prefixes[category])


def load_lexicon(path) -> Lexicon:
    """Read a JSON object mapping category names to pattern arrays.

    Patterns are lowercased on load; structural problems raise ParseError,
    ill-formed patterns InvalidPattern.
    """
    path = str(path)
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc), path=path, line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError("lexicon must be a JSON object", path=path)
    categories = {}
    for category, patterns in data.items():
        if not isinstance(patterns, list) or not all(
            isinstance(p, str) for p in patterns
        ):
            raise ParseError(
                f"category {category!r} must map to an array of strings",
                path=path,
            )
        categories[category] = tuple(p.lower() for p in patterns)
    return Lexicon(categories)


def save_lexicon(lexicon: Lexicon, path) -> None:
    with open(path, "w") as fh:
        json.dump(
            {c: list(p) for c, p in lexicon.categories.items()}, fh, indent=2
        )
        fh.write("\n")


def category_percentages(tokens, lexicon: Lexicon) -> dict[str, float]:
    """Percent of tokens matching each category (multi-category allowed)."""
    tokens = list(tokens)
    if not tokens:
        raise EmptyTokenListError("no tokens to classify")
    out = {}
    for category in lexicon.category_names:
        hits = sum(1 for t in tokens if lexicon.matches(t, category))
        out[category] = 100.0 * hits / len(tokens)
    return out


def _letter_length(token: str) -> int:
    return sum(1 for ch in token if ch.isalpha())


def linguistic_signals(
    transcript: Transcript,
    lexicon: Lexicon,
    external_dims: dict[str, float] | None = None,
) -> dict[str, float]:
    """Word Count, long-word percentage, category percentages, external dims.

    Word Count is the raw token count over all utterances; Words > 6
    Letters counts alphabetic characters only, so apostrophes and digits
    do not contribute to a token's length.
    """
    external_dims = dict(external_dims or {})
    unknown = set(external_dims) - set(EXTERNAL_DIMENSIONS)
    if unknown:
        raise ValueError(
            f"unknown external dimensions: {sorted(unknown)}; "
            f"allowed: {list(EXTERNAL_DIMENSIONS)}"
        )
    tokens = transcript.tokens()
    if not tokens:
        raise EmptyTranscriptError(
            f"transcript for {transcript.participant_id!r} has no words"
        )
    long_words = sum(1 for t in tokens if _letter_length(t) > 6)
    out = {
        "Word Count": float(len(tokens)),
        "Words > 6 Letters": 100.0 * long_words / len(tokens),
    }
    out.update(category_percentages(tokens, lexicon))
    for dim in EXTERNAL_DIMENSIONS:
        if dim in external_dims:
            out[dim] = float(external_dims[dim])
    return out


def load_transcripts(path) -> dict[str, Transcript]:
    """Read `participant_id,utterance` rows, preserving utterance order."""
    path = str(path)
    utterances: dict[str, list[str]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != [
            "participant_id", "utterance",
        ]:
            raise ParseError(
                "expected header 'participant_id,utterance'", path=path, line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ParseError("expected 2 fields", path=path, line=lineno)
            utterances.setdefault(row[0], []).append(row[1])
    if not utterances:
        raise ParseError("no transcript rows", path=path)
    return {
        pid: Transcript(pid, tuple(rows)) for pid, rows in utterances.items()
    }


def load_external_dimensions(path) -> dict[str, dict[str, float]]:
    """Read `participant_id,analytic,clout,authentic,tone` scores."""
    path = str(path)
    columns = ("analytic", "clout", "authentic", "tone")
    out: dict[str, dict[str, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != [
            "participant_id", *columns,
        ]:
            raise ParseError(
                "expected header 'participant_id,analytic,clout,authentic,tone'",
                path=path, line=1,
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError("expected 5 fields", path=path, line=lineno)
            try:
                scores = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from None
            out[row[0]] = dict(zip(EXTERNAL_DIMENSIONS, scores))
    if not out:
        raise ParseError("no dimension rows", path=path)
    return out


def linguistic_feature_table(
    transcripts: dict[str, Transcript],
    lexicon: Lexicon,
    external_dims: dict[str, dict[str, float]] | None = None,
) -> FeatureTable:
    """One row of linguistic signals per participant.

    When external dimension scores are supplied, every participant must
    have them (rows are rectangular); without them the four columns are
    omitted entirely.
    """
    ids = tuple(sorted(transcripts))
    if not ids:
        raise EmptyTranscriptError("no transcripts given")
    if external_dims is not None:
        for pid in ids:
            if pid not in external_dims:
                raise MissingParticipantError(pid, "external dimensions")
    names = ["Word Count", "Words > 6 Letters", *lexicon.category_names]
    if external_dims is not None:
        names.extend(EXTERNAL_DIMENSIONS)
    rows = []
    for pid in ids:
        dims = external_dims[pid] if external_dims is not None else None
        signals = linguistic_signals(transcripts[pid], lexicon, dims)
        rows.append([signals[name] for name in names])
    return FeatureTable(
        participant_ids=ids,
        feature_names=tuple(names),
        modalities=("linguistic",) * len(names),
        values=np.asarray(rows, dtype=float),
    )


DEMO_LEXICON = Lexicon({
    "Social Processes": (
        "friend*", "talk*", "they", "them", "we", "us", "our", "buddy",
        "chat*", "share*", "together",
    ),
    "Positive Emotion": (
        "happ*", "love*", "nice", "great", "good", "laugh*", "excit*",
        "enjoy*", "fun",
    ),
    "Negative Emotion": (
        "sad*", "angr*", "hate*", "awful", "terribl*", "worr*", "cry*",
        "annoy*", "fear*",
    ),
    "Cognitive Processes": (
        "think*", "know*", "becaus*", "reason*", "consider*", "wonder*",
        "realiz*", "understand*",
    ),
    "Perceptual Processes": (
        "see*", "hear*", "feel*", "look*", "watch*", "listen*", "touch*",
    ),
})
