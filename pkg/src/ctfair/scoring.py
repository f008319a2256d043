"""Sentence scorers, the persistent score cache, and counterfactual-set scoring.

Two scorer backends satisfy the same contract: the built-in n-gram model, and
an external child process speaking line-delimited JSON on stdin/stdout
(request {"id", "text"}; response {"id", "logprob"} or {"id", "error"};
responses may arrive in any order; EOF on stdin tells the child to exit).
"""
from __future__ import annotations

import hashlib
import json
import shlex
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from .counterfactual import CounterfactualSet
from .data import ValidationError
from .ngram import NgramModel, score_sequence


class ScorerError(RuntimeError):
    """The scorer failed: protocol violation, child error, or missing response."""


def text_key(tokens: Sequence[str]) -> str:
    """Wire/cache form of a token sequence: tokens joined by single spaces."""
    return " ".join(tokens)


def cache_key(tokens: Sequence[str]) -> str:
    return hashlib.sha256(text_key(tokens).encode("utf-8")).hexdigest()


class Scorer(Protocol):
    def score_many(self, requests: Sequence[tuple[str, str]]) -> dict[str, float]:
        """Score (request id, text) pairs; returns id -> total log-likelihood."""
        ...


class NgramScorer:
    def __init__(self, model: NgramModel) -> None:
        self.model = model

    def score_many(self, requests: Sequence[tuple[str, str]]) -> dict[str, float]:
        return {rid: score_sequence(self.model, text.split(" ")) for rid, text in requests}


class ExternalScorer:
    """Drives a user-supplied scoring command over line-delimited JSON.

    The child is spawned lazily and kept alive across batches; requests are
    written from a helper thread so a child that streams responses early can
    never deadlock against a full pipe.
    """

    def __init__(self, command: str) -> None:
        self.command = command
        self._proc: subprocess.Popen | None = None

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    shlex.split(self.command),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise ScorerError(f"cannot launch external scorer {self.command!r}: {exc}") from exc
        return self._proc

    def score_many(self, requests: Sequence[tuple[str, str]]) -> dict[str, float]:
        if not requests:
            return {}
        ids = [rid for rid, _ in requests]
        if len(set(ids)) != len(ids):
            raise ScorerError("duplicate request ids in one batch")
        proc = self._ensure_started()
        assert proc.stdin is not None and proc.stdout is not None

        def _write() -> None:
            try:
                for rid, text in requests:
                    proc.stdin.write(json.dumps({"id": rid, "text": text}) + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError):
                pass  # the reader reports the failure with context

        writer = threading.Thread(target=_write, daemon=True)
        writer.start()
        pending = set(ids)
        results: dict[str, float] = {}
        while pending:
            line = proc.stdout.readline()
            if not line:
                writer.join()
                raise ScorerError(
                    f"external scorer exited before answering {len(pending)} request(s), "
                    f"e.g. {sorted(pending)[0]!r}"
                )
            line = line.strip()
            if not line:
                continue
            try:
                response = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScorerError(f"external scorer sent invalid JSON: {line!r}") from exc
            rid = response.get("id")
            if rid not in pending:
                raise ScorerError(f"external scorer answered unknown or duplicate id {rid!r}")
            if "error" in response:
                raise ScorerError(f"external scorer failed on {rid!r}: {response['error']}")
            if "logprob" not in response:
                raise ScorerError(f"external scorer response for {rid!r} has no logprob")
            results[rid] = float(response["logprob"])
            pending.discard(rid)
        writer.join()
        return results

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin is not None:
                try:
                    self._proc.stdin.close()
                except OSError:
                    pass
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
            self._proc = None

    def __enter__(self) -> "ExternalScorer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class ScoreCache:
    """TSV-backed map from sha256(text) to log-likelihood.

    Rows are appended as soon as they are inserted, so a crashed run loses
    nothing; on reload, later rows win. Pass path=None for a purely in-memory
    cache.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, float] = {}
        self._fh = None
        if self.path is not None:
            if self.path.exists():
                for lineno, line in enumerate(
                    self.path.read_text(encoding="utf-8").splitlines(), start=1
                ):
                    if not line.strip():
                        continue
                    parts = line.split("\t")
                    if len(parts) != 2:
                        raise ValidationError(f"{self.path}:{lineno}: malformed cache row")
                    self._entries[parts[0]] = float(parts[1])
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("a", encoding="utf-8")

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, tokens: Sequence[str]) -> float | None:
        return self._entries.get(cache_key(tokens))

    def put(self, tokens: Sequence[str], value: float) -> None:
        key = cache_key(tokens)
        self._entries[key] = value
        if self._fh is not None:
            self._fh.write(f"{key}\t{value!r}\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "ScoreCache":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


@dataclass(frozen=True)
class ScoredSet:
    """A counterfactual set with log-likelihoods aligned to its variants."""

    cfset: CounterfactualSet
    original_ll: float
    variant_lls: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.variant_lls) != len(self.cfset.variants):
            raise ValidationError(
                f"{len(self.variant_lls)} scores for {len(self.cfset.variants)} variants"
            )


def score_set(
    scorer: Scorer, cfset: CounterfactualSet, cache: ScoreCache | None = None
) -> ScoredSet:
    """Score the original and every variant, consulting the cache first.

    Either every sequence scores or the whole set fails; no partial output.
    """
    doc = cfset.original
    items: list[tuple[str, tuple[str, ...]]] = [(f"{doc.id}/orig", doc.tokens)]
    items += [(f"{doc.id}/v{v.entry_id}", v.tokens) for v in cfset.variants]

    values: dict[str, float] = {}
    misses: list[tuple[str, str]] = []
    miss_tokens: dict[str, tuple[str, ...]] = {}
    for rid, tokens in items:
        hit = cache.get(tokens) if cache is not None else None
        if hit is not None:
            values[rid] = hit
        else:
            misses.append((rid, text_key(tokens)))
            miss_tokens[rid] = tokens
    if misses:
        scored = scorer.score_many(misses)
        for rid, _ in misses:
            if rid not in scored:
                raise ScorerError(f"scorer returned no value for {rid!r}")
            values[rid] = scored[rid]
            if cache is not None:
                cache.put(miss_tokens[rid], scored[rid])
    return ScoredSet(
        cfset=cfset,
        original_ll=values[f"{doc.id}/orig"],
        variant_lls=tuple(values[f"{doc.id}/v{v.entry_id}"] for v in cfset.variants),
    )
