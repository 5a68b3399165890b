"""Corpus records, task schema, and the labeled/unlabeled pool.

On-disk format is JSONL, one sentence per line:

    {"id": ..., "tokens": [...],
     "candidates": [{"start": s, "end": e, "pos": "noun|verb|adj"}, ...],
     "labels": {"triggers": [...], "arguments": [[...], ...]}}

`labels` is optional. A schema sidecar lists event types (index 0 is
always "NA") and role names; argument rows use BIO indices in the order
O, B-r0, I-r0, B-r1, I-r1, ...
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels

POS_TAGS = ("noun", "verb", "adj")


class CorpusError(ValueError):
    pass


@dataclass
class TaskSchema:
    event_types: list[str]
    roles: list[str]

    def __post_init__(self):
        if not self.event_types or self.event_types[0] != "NA":
            raise CorpusError("event_types[0] must be 'NA'")
        if len(set(self.event_types)) != len(self.event_types):
            raise CorpusError("duplicate event types")
        if not self.roles or len(set(self.roles)) != len(self.roles):
            raise CorpusError("roles must be non-empty and unique")

    @property
    def n_types(self) -> int:
        return len(self.event_types)

    @property
    def n_roles(self) -> int:
        return len(self.roles)

    @property
    def n_bio(self) -> int:
        return 2 * len(self.roles) + 1

    def bio_names(self) -> list[str]:
        out = ["O"]
        for r in self.roles:
            out += [f"B-{r}", f"I-{r}"]
        return out

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(
            {"event_types": self.event_types, "roles": self.roles}, indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "TaskSchema":
        d = json.loads(Path(path).read_text())
        return cls(event_types=list(d["event_types"]), roles=list(d["roles"]))


@dataclass
class TriggerCandidate:
    start: int
    end: int
    pos: str

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "pos": self.pos}


@dataclass
class LabelSet:
    triggers: list[int]
    arguments: list[list[int]]

    def to_dict(self) -> dict:
        return {"triggers": list(self.triggers),
                "arguments": [list(r) for r in self.arguments]}


@dataclass
class Sentence:
    id: str
    tokens: list[str]
    candidates: list[TriggerCandidate]
    labels: LabelSet | None = None

    @property
    def n(self) -> int:
        return len(self.tokens)

    @property
    def k(self) -> int:
        return len(self.candidates)

    def to_dict(self) -> dict:
        d = {"id": self.id, "tokens": list(self.tokens),
             "candidates": [c.to_dict() for c in self.candidates]}
        if self.labels is not None:
            d["labels"] = self.labels.to_dict()
        return d

    def without_labels(self) -> "Sentence":
        return dataclasses.replace(self, labels=None)


def _bio_row_valid(row: np.ndarray, n_roles: int) -> bool:
    return bool(np.array_equal(kernels.repair_bio(row), row))


def validate_sentence(sent: Sentence, schema: TaskSchema, where: str = ""):
    """Raise CorpusError on any structural problem."""
    pre = f"{where}: " if where else ""
    if not sent.id or not isinstance(sent.id, str):
        raise CorpusError(f"{pre}missing or non-string id")
    if not sent.tokens or any(not isinstance(t, str) or not t for t in sent.tokens):
        raise CorpusError(f"{pre}tokens must be non-empty strings")
    n = sent.n
    for c in sent.candidates:
        if not (0 <= c.start < c.end <= n):
            raise CorpusError(f"{pre}candidate span ({c.start},{c.end}) out of range")
        if c.pos not in POS_TAGS:
            raise CorpusError(f"{pre}candidate pos {c.pos!r} not in {POS_TAGS}")
    spans = [(c.start, c.end) for c in sent.candidates]
    if len(set(spans)) != len(spans):
        raise CorpusError(f"{pre}duplicate candidate spans")
    if sent.labels is None:
        return
    lab = sent.labels
    k = sent.k
    if len(lab.triggers) != k:
        raise CorpusError(f"{pre}expected {k} trigger labels, got {len(lab.triggers)}")
    if len(lab.arguments) != k:
        raise CorpusError(f"{pre}expected {k} argument rows, got {len(lab.arguments)}")
    for i, t in enumerate(lab.triggers):
        if not (0 <= t < schema.n_types):
            raise CorpusError(f"{pre}trigger label {t} out of range")
        row = np.asarray(lab.arguments[i], dtype=np.int64)
        if row.shape != (n,):
            raise CorpusError(f"{pre}argument row {i} length {row.shape} != {n}")
        if row.min(initial=0) < 0 or row.max(initial=0) >= schema.n_bio:
            raise CorpusError(f"{pre}argument label out of range in row {i}")
        if t == 0 and row.any():
            raise CorpusError(f"{pre}NA trigger {i} must have an all-O argument row")
        if not _bio_row_valid(row, schema.n_roles):
            raise CorpusError(f"{pre}argument row {i} is not valid BIO")


def _parse_record(d: dict, schema: TaskSchema, where: str) -> Sentence:
    try:
        cands = [TriggerCandidate(int(c["start"]), int(c["end"]), c["pos"])
                 for c in d.get("candidates", [])]
        labels = None
        if d.get("labels") is not None:
            labels = LabelSet(
                triggers=[int(t) for t in d["labels"]["triggers"]],
                arguments=[[int(x) for x in row] for row in d["labels"]["arguments"]])
        sent = Sentence(id=d["id"], tokens=list(d["tokens"]),
                        candidates=cands, labels=labels)
    except (KeyError, TypeError, ValueError) as e:
        raise CorpusError(f"{where}: malformed record ({e})") from e
    validate_sentence(sent, schema, where)
    return sent


def load_corpus(path: str | Path, schema: TaskSchema,
                require_labels: bool = False) -> list[Sentence]:
    sents = []
    ids = set()
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{where}: invalid JSON ({e})") from e
            sent = _parse_record(d, schema, where)
            if sent.id in ids:
                raise CorpusError(f"{where}: duplicate id {sent.id!r}")
            ids.add(sent.id)
            if require_labels and sent.labels is None:
                raise CorpusError(f"{where}: missing labels")
            sents.append(sent)
    return sents


def save_corpus(path: str | Path, sentences: list[Sentence]):
    with open(path, "w") as f:
        for s in sentences:
            f.write(json.dumps(s.to_dict()) + "\n")


class Oracle:
    """Holds the fully labeled corpus and answers label queries."""

    def __init__(self, sentences: list[Sentence]):
        for s in sentences:
            if s.labels is None:
                raise CorpusError(f"oracle sentence {s.id!r} lacks labels")
        self._sents = sentences
        self.queries = 0

    def label(self, indices: list[int]) -> dict[int, LabelSet]:
        out = {}
        for i in indices:
            out[i] = self._sents[i].labels
        self.queries += len(indices)
        return out


@dataclass
class PoolState:
    """Index bookkeeping over a fixed sentence list.

    `labeled` is in commit order; `unlabeled` order is the current
    shuffle and defines the batch partition used by selection.
    """

    sentences: list[Sentence]
    labeled: list[int] = field(default_factory=list)
    unlabeled: list[int] = field(default_factory=list)

    def labeled_sentences(self) -> list[Sentence]:
        return [self.sentences[i] for i in self.labeled]

    def unlabeled_sentences(self) -> list[Sentence]:
        return [self.sentences[i] for i in self.unlabeled]

    def commit(self, selected: list[int], labels: dict[int, LabelSet],
               rng: np.random.Generator):
        """Attach labels, move ids to the labeled side, reshuffle the rest."""
        pending = set(self.unlabeled)
        if len(set(selected)) != len(selected):
            raise ValueError("duplicate ids in selection")
        for i in selected:
            if i not in pending:
                raise ValueError(f"id {i} is not in the unlabeled pool")
            if i not in labels:
                raise ValueError(f"no label supplied for id {i}")
        for i in selected:
            self.sentences[i] = dataclasses.replace(self.sentences[i],
                                                    labels=labels[i])
            self.labeled.append(i)
        remaining = [i for i in self.unlabeled if i not in set(selected)]
        rng.shuffle(remaining)
        self.unlabeled = remaining

    def snapshot(self) -> dict:
        return {"labeled": list(self.labeled), "unlabeled": list(self.unlabeled)}

    def restore(self, snap: dict, labels: dict[int, LabelSet] | None = None):
        self.labeled = list(snap["labeled"])
        self.unlabeled = list(snap["unlabeled"])
        if labels:
            for i, lab in labels.items():
                self.sentences[i] = dataclasses.replace(self.sentences[i], labels=lab)


def split_pool(sentences: list[Sentence], initial: int,
               rng: np.random.Generator) -> PoolState:
    """Random initial labeled set; unlabeled copies have labels stripped."""
    n = len(sentences)
    if not (0 <= initial <= n):
        raise ValueError(f"initial={initial} outside [0, {n}]")
    order = rng.permutation(n)
    labeled = sorted(int(i) for i in order[:initial])
    unlabeled = [int(i) for i in order[initial:]]
    rng.shuffle(unlabeled)
    pool_sents = list(sentences)
    for i in unlabeled:
        pool_sents[i] = pool_sents[i].without_labels()
    return PoolState(sentences=pool_sents, labeled=labeled, unlabeled=unlabeled)


def commit_round(pool: PoolState, selected: list[int], oracle: Oracle,
                 rng: np.random.Generator):
    pool.commit(selected, oracle.label(selected), rng)
