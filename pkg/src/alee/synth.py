"""Synthetic event-extraction corpus generator.

Each sentence embeds zero or more events. A trigger word picks the
event type almost deterministically; a small ambiguous lexicon flips a
coin between two types, so a loss floor survives any amount of
training. Type and lexeme frequencies follow 1/rank, which keeps rare
words undersampled under random selection. Argument spans come from
per-role vocabularies with some words shared between roles.

With noise=0 no NA candidates are emitted anywhere (and eventless
sentences are skipped, since they would only carry NA distractors).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import LabelSet, Sentence, TaskSchema, TriggerCandidate, save_corpus

_TYPE_NAMES = ["conflict", "transfer", "movement", "contact", "life",
               "justice", "business", "personnel", "transaction", "nature"]
_ROLE_NAMES = ["agent", "patient", "instrument", "place", "time",
               "origin", "destination", "beneficiary"]
_CONS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass
class SynthSpec:
    n: int
    n_types: int = 8  # including NA
    n_roles: int = 6
    seed: int = 0
    noise: float = 0.1        # chance of an NA distractor candidate
    ambiguity: float = 0.05   # chance a trigger comes from the coin-flip lexicon
    eventless: float = 0.05
    multi_event: float = 0.15
    fill_prob: float = 0.8    # chance each signature role is realized
    lexemes: int = 8          # trigger words per type, 1/rank weighted


def _new_word(rnd: random.Random, used: set, syllables: int) -> str:
    while True:
        w = "".join(rnd.choice(_CONS) + rnd.choice(_VOWELS)
                    for _ in range(syllables))
        if w not in used:
            used.add(w)
            return w


class _World:
    """Fixed vocabularies and type structure for one corpus."""

    def __init__(self, spec: SynthSpec, rnd: random.Random):
        if spec.n_types < 2:
            raise ValueError("need at least one non-NA event type")
        if spec.n_roles < 1:
            raise ValueError("need at least one role")
        m_real = spec.n_types - 1
        types = ["NA"] + [_TYPE_NAMES[j] if j < len(_TYPE_NAMES) else f"event{j}"
                          for j in range(m_real)]
        roles = [_ROLE_NAMES[r] if r < len(_ROLE_NAMES) else f"role{r}"
                 for r in range(spec.n_roles)]
        self.schema = TaskSchema(event_types=types, roles=roles)

        used: set[str] = set()
        self.fillers = [_new_word(rnd, used, rnd.choice((2, 3)))
                        for _ in range(120)]
        # per-type trigger lexicons, 1/rank weighted within a type
        self.trigger_words = [[_new_word(rnd, used, 2)
                               for _ in range(spec.lexemes)]
                              for _ in range(m_real)]
        self.lexeme_weights = [1.0 / (i + 1) for i in range(spec.lexemes)]
        self.type_weights = [1.0 / (j + 1) for j in range(m_real)]
        # ambiguous triggers map to a pair of adjacent types
        self.ambiguous = []
        for a in range(max(1, m_real // 2)):
            pair = (1 + a % m_real, 1 + (a + 1) % m_real)
            self.ambiguous.append((_new_word(rnd, used, 2), pair))
        # role vocabularies with one word borrowed from the next role
        base = [[_new_word(rnd, used, rnd.choice((2, 3))) for _ in range(8)]
                for _ in range(spec.n_roles)]
        self.role_words = [base[r] + [base[(r + 1) % spec.n_roles][0]]
                           for r in range(spec.n_roles)]
        # role signatures are shared within groups of types, so argument
        # context narrows the type down but only the trigger word decides
        self.signatures = []
        for j in range(m_real):
            size = 2 + j % 3
            off = j % 3
            self.signatures.append([(off + t) % spec.n_roles
                                    for t in range(size)])


def _event_block(world: _World, spec: SynthSpec, rnd: random.Random,
                 type_id: int, lexeme: int | None, force_fill: bool):
    """Token list for one event plus relative candidate/argument positions."""
    m_real = spec.n_types - 1
    if lexeme is None:
        lexeme = rnd.choices(range(spec.lexemes),
                             weights=world.lexeme_weights)[0]
    trig_word = world.trigger_words[type_id - 1][lexeme]
    sig = world.signatures[type_id - 1]
    filled = [r for r in sig
              if force_fill or rnd.random() < spec.fill_prob]

    toks: list[str] = []
    args: list[tuple[int, int, int]] = []  # (start, end, role)

    def add_role_span(role):
        start = len(toks)
        for _ in range(rnd.choice((1, 1, 2))):
            toks.append(rnd.choice(world.role_words[role]))
        args.append((start, len(toks), role))

    if filled and rnd.random() < 0.7:
        add_role_span(filled[0])
        rest = filled[1:]
    else:
        rest = filled
    if rnd.random() < 0.5:
        toks.append(rnd.choice(world.fillers))
    trig_pos = len(toks)
    toks.append(trig_word)
    for role in rest:
        if rnd.random() < 0.4:
            toks.append(rnd.choice(world.fillers))
        add_role_span(role)
    return toks, trig_pos, args


def _make_sentence(idx: int, world: _World, spec: SynthSpec,
                   rnd: random.Random) -> Sentence:
    m_real = spec.n_types - 1
    cov = m_real * spec.lexemes
    events: list[tuple[int, int | None, bool]] = []  # (type, lexeme, force_fill)
    if idx < cov:
        # deterministic block: every (type, lexeme) pair with all roles filled
        events.append((1 + idx % m_real, idx // m_real, True))
    elif spec.noise > 0 and rnd.random() < spec.eventless:
        pass
    else:
        def draw_type():
            if world.ambiguous and rnd.random() < spec.ambiguity:
                word, pair = rnd.choice(world.ambiguous)
                return rnd.choice(pair), word
            return rnd.choices(range(1, m_real + 1),
                               weights=world.type_weights)[0], None
        t, amb_word = draw_type()
        events.append((t, None, False) if amb_word is None
                      else (t, amb_word, False))
        if rnd.random() < spec.multi_event:
            t2, amb2 = draw_type()
            events.append((t2, None, False) if amb2 is None
                          else (t2, amb2, False))

    tokens: list[str] = [rnd.choice(world.fillers)
                         for _ in range(rnd.choice((1, 1, 2)))]
    cands: list[tuple[int, int, str, int, list]] = []  # start,end,pos,type,args
    for t, lex, force in events:
        if isinstance(lex, str):  # ambiguous word replaces the lexeme draw
            blk, tp, args = _event_block(world, spec, rnd, t, 0, force)
            blk[tp] = lex
        else:
            blk, tp, args = _event_block(world, spec, rnd, t, lex, force)
        off = len(tokens)
        tokens.extend(blk)
        pos = "verb" if rnd.random() < 0.8 else "noun"
        cands.append((off + tp, off + tp + 1, pos, t,
                      [(off + s, off + e, r) for s, e, r in args]))
        tokens.append(rnd.choice(world.fillers))
    while len(tokens) < 4:
        tokens.append(rnd.choice(world.fillers))

    # NA distractor on a token that is not already a candidate start
    if spec.noise > 0 and (not events or rnd.random() < spec.noise):
        starts = {c[0] for c in cands}
        free = [i for i in range(len(tokens)) if i not in starts]
        if free:
            i = rnd.choice(free)
            cands.append((i, i + 1, rnd.choice(("noun", "adj")), 0, []))

    cands.sort(key=lambda c: c[0])
    n = len(tokens)
    triggers, rows = [], []
    for s, e, pos, t, args in cands:
        triggers.append(t)
        row = [0] * n
        for a_s, a_e, r in args:
            row[a_s] = 1 + 2 * r
            for q in range(a_s + 1, a_e):
                row[q] = 2 + 2 * r
        rows.append(row)
    return Sentence(
        id=f"s{idx:06d}",
        tokens=tokens,
        candidates=[TriggerCandidate(s, e, pos) for s, e, pos, _, _ in cands],
        labels=LabelSet(triggers=triggers, arguments=rows))


def generate(spec: SynthSpec) -> tuple[TaskSchema, list[Sentence]]:
    rnd = random.Random(spec.seed)
    world = _World(spec, rnd)
    sents = [_make_sentence(i, world, spec, rnd) for i in range(spec.n)]
    return world.schema, sents


def write_corpus(spec: SynthSpec, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schema, sents = generate(spec)
    schema_path = out / "schema.json"
    corpus_path = out / "corpus.jsonl"
    schema.save(schema_path)
    save_corpus(corpus_path, sents)
    return schema_path, corpus_path
