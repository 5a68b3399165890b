"""REST service exposing the live annotation loop.

A single background worker owns all training: on startup it fits the
initial model and publishes the first batch of tasks; whenever the
last open task of a round is labeled it commits the round, retrains,
evaluates, selects the next batch and publishes it. Request handlers
only stage labels under a lock, so concurrent posts can never commit
a round twice.

Accepted labels are appended (and fsynced) to `journal.jsonl` before
the request is acknowledged. After each round advance the service
writes `model.npz` plus `snapshot.json` (pool indices, pending ids,
rng state, journal offset); on boot it restores the snapshot and
re-stages any journal lines written after it, so no accepted label is
ever lost to a restart.

Endpoints (all JSON; bearer auth when env ALEE_TOKEN is set):
  GET  /api/status          round, pool sizes, open/done counts, F1
  GET  /api/tasks?limit=k   open tasks, importance-descending
  POST /api/labels          {id, trigger_labels, argument_labels}
"""

from __future__ import annotations

import dataclasses
import json
import os
import queue
import threading
from contextlib import asynccontextmanager
from pathlib import Path

import numpy as np
from fastapi import Depends, FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .config import Config
from .corpus import (CorpusError, LabelSet, PoolState, Sentence, TaskSchema,
                     split_pool, validate_sentence)
from .encoder import Vocab
from .harness import f1_eval, run_selection
from .model import JointModel
from .trainer import train_round


class LabelsIn(BaseModel):
    id: str
    trigger_labels: list[int]
    argument_labels: list[list[int]]


class Service:
    """Owns the pool, the model and the labeling session."""

    def __init__(self, cfg: Config, schema: TaskSchema,
                 train_sents: list[Sentence],
                 eval_sents: list[Sentence] | None = None,
                 state_dir: str | Path | None = None):
        self.cfg = cfg
        self.schema = schema
        self.train_sents = train_sents
        self.eval_sents = eval_sents or []
        self.state_dir = Path(state_dir) if state_dir else None
        if self.state_dir:
            self.state_dir.mkdir(parents=True, exist_ok=True)

        self.lock = threading.Lock()
        self.jobs: queue.Queue = queue.Queue()
        self.worker: threading.Thread | None = None

        self.ready = False
        self.training = True
        self.round = 0
        self.model_version = 0
        self.completed_total = 0
        self.last_f1: dict | None = None
        self.error: str | None = None
        self.pending: list[int] = []      # pool ids, selection order
        self.scores: dict[int, float] = {}
        self.staged: dict[int, LabelSet] = {}
        self.by_sent_id: dict[str, int] = {}
        self.journal_lines = 0

        self.rng = np.random.default_rng(cfg.experiment.seed)
        self.pool: PoolState | None = None
        self.model: JointModel | None = None

    # -- lifecycle ---------------------------------------------------

    def start(self):
        self.worker = threading.Thread(target=self._loop, daemon=True)
        self.worker.start()
        self.jobs.put("init")

    def stop(self):
        self.jobs.put(None)
        if self.worker:
            self.worker.join(timeout=30)

    def _loop(self):
        while True:
            job = self.jobs.get()
            if job is None:
                return
            try:
                if job == "init":
                    self._init()
                else:
                    self._advance()
            except Exception as e:  # surface boot/training failures via status
                with self.lock:
                    self.error = f"{type(e).__name__}: {e}"
                    self.training = False
                return

    # -- worker side -------------------------------------------------

    def _init(self):
        snap = self.state_dir / "snapshot.json" if self.state_dir else None
        if snap and snap.exists():
            self._restore(json.loads(snap.read_text()))
        else:
            self.pool = split_pool(self.train_sents,
                                   self.cfg.experiment.initial, self.rng)
            vocab = Vocab.from_sentences(self.pool.sentences)
            kind, _ = _strategy_kind(self.cfg.select.strategy)
            self.model = JointModel(self.cfg, self.schema, vocab,
                                    seed=self.cfg.experiment.seed,
                                    predictor_kind=kind)
            self._train_and_publish()
        with self.lock:
            self.ready = True
            self.training = False

    def _restore(self, snap: dict):
        self.pool = split_pool(self.train_sents,
                               self.cfg.experiment.initial,
                               np.random.default_rng(self.cfg.experiment.seed))
        labels = {int(i): LabelSet(v["triggers"],
                                   [list(r) for r in v["arguments"]])
                  for i, v in snap["labels"].items()}
        self.pool.restore(snap["pool"], labels)
        self.model = JointModel.load(self.state_dir / "model.npz")
        self.rng.bit_generator.state = snap["rng_state"]
        self.round = snap["round"]
        self.model_version = snap["model_version"]
        self.completed_total = snap["completed_total"]
        self.last_f1 = snap["last_f1"]
        self.pending = list(snap["pending"])
        self.scores = {int(i): s for i, s in snap["scores"].items()}
        self.journal_lines = snap["journal_lines"]
        self.by_sent_id = {self.pool.sentences[i].id: i for i in self.pending}
        # labels accepted after the snapshot live only in the journal
        tail = self._read_journal()[self.journal_lines:]
        for rec in tail:
            pid = rec["pool_id"]
            if pid not in self.by_sent_id.values() or pid in self.staged:
                raise CorpusError(f"journal entry {rec['id']!r} does not "
                                  "match the snapshot")
            self.staged[pid] = LabelSet(rec["labels"]["triggers"],
                                        rec["labels"]["arguments"])
            self.journal_lines += 1
        if self.pending and len(self.staged) == len(self.pending):
            self._advance()

    def _read_journal(self) -> list[dict]:
        path = self.state_dir / "journal.jsonl"
        if not path.exists():
            return []
        return [json.loads(l) for l in
                path.read_text().strip().split("\n") if l]

    def _train_and_publish(self):
        cfg = self.cfg
        train_round(self.model, self.pool.labeled_sentences(), cfg, self.rng,
                    round_idx=self.round)
        f1 = f1_eval(self.model, self.eval_sents, self.schema) \
            if self.eval_sents else None
        q = min(cfg.select.query_size, len(self.pool.unlabeled))
        plan = None
        if q > 0:
            plan = run_selection(cfg.select.strategy, self.model, self.pool,
                                 q, cfg.select.m, self.rng)
        with self.lock:
            self.last_f1 = f1
            self.model_version += 1
            self.pending = list(plan.selected) if plan else []
            self.scores = dict(plan.scores) if plan else {}
            self.staged = {}
            self.by_sent_id = {self.pool.sentences[i].id: i
                               for i in self.pending}
            self.training = False
        self._save_snapshot()

    def _advance(self):
        with self.lock:
            selected = list(self.pending)
            labels = dict(self.staged)
            self.pool.commit(selected, labels, self.rng)
            self.completed_total += len(selected)
            self.round += 1
        self._train_and_publish()

    def _save_snapshot(self):
        if not self.state_dir:
            return
        self.model.save(self.state_dir / "model.npz")
        labels = {str(i): self.pool.sentences[i].labels.to_dict()
                  for i in self.pool.labeled}
        snap = {"round": self.round, "pool": self.pool.snapshot(),
                "labels": labels, "pending": self.pending,
                "scores": {str(i): s for i, s in self.scores.items()},
                "rng_state": _jsonable(self.rng.bit_generator.state),
                "journal_lines": self.journal_lines,
                "model_version": self.model_version,
                "completed_total": self.completed_total,
                "last_f1": self.last_f1}
        tmp = self.state_dir / "snapshot.json.tmp"
        tmp.write_text(json.dumps(snap))
        tmp.replace(self.state_dir / "snapshot.json")

    # -- request side ------------------------------------------------

    def status(self) -> dict:
        with self.lock:
            if self.error:
                raise HTTPException(500, f"worker failed: {self.error}")
            if not self.ready:
                raise HTTPException(503, "initializing")
            return {"round": self.round,
                    "labeled": len(self.pool.labeled),
                    "unlabeled": len(self.pool.unlabeled),
                    "pending": len(self.pending) - len(self.staged),
                    "completed": len(self.staged),
                    "completed_total": self.completed_total,
                    "training": self.training,
                    "model_version": self.model_version,
                    "strategy": self.cfg.select.strategy,
                    "query_size": self.cfg.select.query_size,
                    "f1": self.last_f1}

    def tasks(self, limit: int | None) -> list[dict]:
        with self.lock:
            if self.error:
                raise HTTPException(500, f"worker failed: {self.error}")
            if not self.ready:
                raise HTTPException(503, "initializing")
            open_ids = [i for i in self.pending if i not in self.staged]
            open_ids.sort(key=lambda i: (-self.scores.get(i, 0.0), i))
            if limit is not None:
                open_ids = open_ids[:limit]
            out = []
            for i in open_ids:
                s = self.pool.sentences[i]
                out.append({"id": s.id, "tokens": list(s.tokens),
                            "candidates": [c.to_dict() for c in s.candidates],
                            "schema": {"event_types": self.schema.event_types,
                                       "roles": self.schema.roles},
                            "importance": self.scores.get(i, 0.0),
                            "round": self.round})
            return out

    def submit(self, body: LabelsIn) -> dict:
        with self.lock:
            if self.error:
                raise HTTPException(500, f"worker failed: {self.error}")
            if not self.ready:
                raise HTTPException(503, "initializing")
            pid = self.by_sent_id.get(body.id)
            if pid is None:
                if any(self.pool.sentences[i].id == body.id
                       for i in self.pool.labeled):
                    raise HTTPException(409, f"{body.id!r} already labeled")
                raise HTTPException(404, f"no open task {body.id!r}")
            if pid in self.staged:
                raise HTTPException(409, f"{body.id!r} already labeled")
            labels = LabelSet(list(body.trigger_labels),
                              [list(r) for r in body.argument_labels])
            probe = dataclasses.replace(self.pool.sentences[pid],
                                        labels=labels)
            try:
                validate_sentence(probe, self.schema, where=body.id)
            except CorpusError as e:
                raise HTTPException(422, str(e))
            self._journal({"id": body.id, "pool_id": pid,
                           "round": self.round,
                           "labels": labels.to_dict()})
            self.staged[pid] = labels
            done = len(self.staged)
            advanced = done == len(self.pending)
            if advanced:
                self.training = True
                self.jobs.put("advance")
            return {"ok": True, "completed": done,
                    "round_advanced": advanced}

    def _journal(self, rec: dict):
        if not self.state_dir:
            self.journal_lines += 1
            return
        path = self.state_dir / "journal.jsonl"
        with open(path, "a") as f:
            f.write(json.dumps(rec) + "\n")
            f.flush()
            os.fsync(f.fileno())
        self.journal_lines += 1


def _strategy_kind(strategy: str):
    from .harness import STRATEGIES
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    return STRATEGIES[strategy]


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


def _auth(request: Request):
    token = os.environ.get("ALEE_TOKEN")
    if not token:
        return
    got = request.headers.get("authorization", "")
    if got != f"Bearer {token}":
        raise HTTPException(401, "missing or wrong bearer token")


def build_app(cfg: Config, schema: TaskSchema, train_sents: list[Sentence],
              eval_sents: list[Sentence] | None = None,
              state_dir: str | Path | None = None) -> FastAPI:
    svc = Service(cfg, schema, train_sents, eval_sents, state_dir)

    @asynccontextmanager
    async def lifespan(app):
        svc.start()
        yield
        svc.stop()

    app = FastAPI(title="alee annotation service", lifespan=lifespan)
    app.state.svc = svc
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.get("/api/status", dependencies=[Depends(_auth)])
    def status():
        return svc.status()

    @app.get("/api/tasks", dependencies=[Depends(_auth)])
    def tasks(limit: int | None = None):
        out = svc.tasks(limit)
        if not out:
            return Response(status_code=204)
        return out

    @app.post("/api/labels", dependencies=[Depends(_auth)])
    def labels(body: LabelsIn):
        return svc.submit(body)

    return app
