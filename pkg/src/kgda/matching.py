"""Token-aligned multi-pattern gazetteer matching.

An Aho-Corasick automaton over *tokens* (not characters): each pattern is the
normalized token sequence of a surface form, so every reported occurrence is
token-aligned by construction. The automaton is built once per gazetteer and
is read-only afterwards, safe to share across threads.

Overlap resolution is leftmost-longest; a span that several entities claim is
resolved in favor of coarse-KG sources, then the lexicographically smallest
entity id.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Sentence
from .kg import KnowledgeGraph, normalize_surface

SOURCE_KG = "coarse_kg"
SOURCE_DISCOVERED = "discovered"

# Tie-break rank; lower wins.
_SOURCE_RANK = {SOURCE_KG: 0, SOURCE_DISCOVERED: 1}


@dataclass(frozen=True, slots=True)
class MatchSpan:
    """Token span [start, end) matched to one entity."""

    start: int
    end: int
    entity_id: str
    etype: str
    source: str


class TokenAutomaton:
    """Aho-Corasick over interned token ids.

    States store goto transitions as small dicts; failure links and the merged
    output sets are precomputed so the match loop never walks suffix chains to
    collect results.
    """

    def __init__(self, patterns: Iterable[tuple[str, ...]]):
        self._vocab: dict[str, int] = {}
        self._goto: list[dict[int, int]] = [{}]
        self._fail: list[int] = [0]
        # out[state] -> tuple of (pattern length, pattern index)
        self._out: list[tuple[tuple[int, int], ...]] = [()]
        self.patterns: list[tuple[str, ...]] = []
        self._index: dict[tuple[str, ...], int] = {}
        for pattern in patterns:
            self._add(pattern)
        self._link()

    def _intern(self, token: str) -> int:
        tid = self._vocab.get(token)
        if tid is None:
            tid = len(self._vocab)
            self._vocab[token] = tid
        return tid

    def _add(self, pattern: tuple[str, ...]) -> None:
        if not pattern:
            return
        if pattern in self._index:
            return
        pid = len(self.patterns)
        self.patterns.append(pattern)
        self._index[pattern] = pid
        state = 0
        for token in pattern:
            tid = self._intern(token)
            nxt = self._goto[state].get(tid)
            if nxt is None:
                nxt = len(self._goto)
                self._goto.append({})
                self._fail.append(0)
                self._out.append(())
                self._goto[state][tid] = nxt
            state = nxt
        self._out[state] = self._out[state] + ((len(pattern), pid),)

    def _link(self) -> None:
        queue: deque[int] = deque()
        for state in self._goto[0].values():
            self._fail[state] = 0
            queue.append(state)
        while queue:
            state = queue.popleft()
            for tid, nxt in self._goto[state].items():
                queue.append(nxt)
                f = self._fail[state]
                while f and tid not in self._goto[f]:
                    f = self._fail[f]
                target = self._goto[f].get(tid, 0)
                self._fail[nxt] = target
                if self._out[target]:
                    self._out[nxt] = self._out[nxt] + self._out[target]

    def pattern_id(self, pattern: tuple[str, ...]) -> int | None:
        return self._index.get(pattern)

    def scan(self, tokens: Sequence[str]) -> list[tuple[int, int, int]]:
        """All occurrences as (start, end, pattern id), unresolved."""
        vocab = self._vocab
        goto = self._goto
        fail = self._fail
        out = self._out
        state = 0
        hits: list[tuple[int, int, int]] = []
        for i, token in enumerate(tokens):
            tid = vocab.get(token)
            if tid is None:
                state = 0
                continue
            while state and tid not in goto[state]:
                state = fail[state]
            state = goto[state].get(tid, 0)
            if out[state]:
                end = i + 1
                for length, pid in out[state]:
                    hits.append((end - length, end, pid))
        return hits


def resolve_leftmost_longest(
    hits: list[tuple[int, int, int]],
) -> list[tuple[int, int, int]]:
    """Greedy non-overlapping selection: earliest start wins, then longest."""
    chosen: list[tuple[int, int, int]] = []
    cursor = 0
    for start, end, pid in sorted(hits, key=lambda h: (h[0], h[0] - h[1])):
        if start >= cursor:
            chosen.append((start, end, pid))
            cursor = end
    return chosen


class GazetteerMatcher:
    """Surface-form matcher over a knowledge graph plus discovered candidates.

    Build once per iteration; `match` normalizes sentence tokens (case-fold)
    and returns non-overlapping, sorted MatchSpans.
    """

    def __init__(self, kg: KnowledgeGraph, e_conf: Iterable = ()):
        candidates: dict[tuple[str, ...], list[tuple[int, str, str, str]]] = {}
        for eid in sorted(kg.entities):
            rec = kg.entities[eid]
            for surface in rec.surfaces:
                key = normalize_surface(surface)
                if not key:
                    continue
                pattern = tuple(key.split(" "))
                candidates.setdefault(pattern, []).append(
                    (_SOURCE_RANK[SOURCE_KG], eid, rec.etype, SOURCE_KG)
                )
        for cand in sorted(e_conf, key=lambda c: (c.surface, c.etype)):
            pattern = tuple(cand.surface.split(" "))
            if not pattern or pattern == ("",):
                continue
            candidates.setdefault(pattern, []).append(
                (_SOURCE_RANK[SOURCE_DISCOVERED], f"new:{cand.surface}",
                 cand.etype, SOURCE_DISCOVERED)
            )
        self._automaton = TokenAutomaton(candidates)
        # One winning payload per pattern, picked by (source rank, entity id).
        self._best: list[tuple[str, str, str]] = [("", "", "")] * len(
            self._automaton.patterns
        )
        for pattern, cands in candidates.items():
            pid = self._automaton.pattern_id(pattern)
            _, eid, etype, source = min(cands)
            self._best[pid] = (eid, etype, source)

    def match_tokens(self, tokens: Sequence[str]) -> list[MatchSpan]:
        normalized = [t.casefold() for t in tokens]
        hits = self._automaton.scan(normalized)
        best = self._best
        spans = []
        for start, end, pid in resolve_leftmost_longest(hits):
            eid, etype, source = best[pid]
            spans.append(MatchSpan(start, end, eid, etype, source))
        return spans

    def match(self, sent: Sentence) -> list[MatchSpan]:
        return self.match_tokens(sent.token_strings())
