"""Template-grammar corpus generator and recognizer.

Sentences are drawn from topic-specific slot lexicons filled into shared
templates, so topic, template and slot choices are global properties a
sentence-level latent variable can capture, while the surface function
words stay identical across topics.  Content vocabularies must be
disjoint between topics; function words are shared.

Grammar specs are plain dicts (JSON-compatible)::

    {
      "templates": [["the", "<subject>", "<verb>", "the", "<object>", "."], ...],
      "topics": {"machines": {"subject": [...], "verb": [...], "object": [...]},
                 "garden":   {...}}
    }

Slot names appear in angle brackets; a trailing digit ("<object2>") draws
another word from the same lexicon.
"""

from __future__ import annotations

import json
import re

from .util import substream

_SLOT_RE = re.compile(r"^<([a-z]+?)([0-9]*)>$")

DEFAULT_GRAMMAR: dict = {
    "templates": [
        ["the", "<subject>", "<verb>", "the", "<object>", "."],
        ["the", "<subject>", "quietly", "<verb>", "the", "<object>", "."],
        ["a", "<subject>", "<verb>", "the", "<object>", "near", "the", "<object2>", "."],
        ["the", "<subject>", "and", "the", "<subject2>", "<verb>", "the", "<object>", "."],
        ["then", "the", "<subject>", "<verb>", "a", "<object>", "."],
    ],
    "topics": {
        "machines": {
            "subject": ["robot", "engine", "drone", "crane", "turbine", "piston", "welder", "gearbox"],
            "verb": ["welds", "rotates", "ignites", "assembles", "drills", "lifts", "powers", "calibrates"],
            "object": ["bolt", "chassis", "circuit", "panel", "valve", "rotor", "bracket", "coil"],
        },
        "garden": {
            "subject": ["gardener", "sparrow", "beetle", "rabbit", "squirrel", "finch", "toad", "heron"],
            "verb": ["waters", "prunes", "plants", "harvests", "rakes", "trims", "sows", "gathers"],
            "object": ["tulip", "fern", "shrub", "clover", "moss", "orchid", "ivy", "basil"],
        },
    },
}


def _slot_name(token: str) -> str | None:
    m = _SLOT_RE.match(token)
    return m.group(1) if m else None


def validate_grammar(spec: dict) -> None:
    """Reject malformed specs: structural errors, unknown slots, topic overlap."""
    if not isinstance(spec, dict) or "templates" not in spec or "topics" not in spec:
        raise ValueError("grammar spec needs 'templates' and 'topics' entries")
    topics = spec["topics"]
    if not isinstance(topics, dict) or len(topics) < 2:
        raise ValueError("grammar spec needs at least two topics")
    templates = spec["templates"]
    if not isinstance(templates, list) or not templates:
        raise ValueError("grammar spec needs a non-empty template list")
    slot_names = set()
    for template in templates:
        if not isinstance(template, list) or not template:
            raise ValueError("each template must be a non-empty token list")
        for tok in template:
            name = _slot_name(tok)
            if name is not None:
                slot_names.add(name)
            elif tok.startswith("<"):
                raise ValueError(f"malformed slot token {tok!r}")
    content_seen: dict[str, str] = {}
    for topic, lexicon in topics.items():
        if not isinstance(lexicon, dict):
            raise ValueError(f"topic {topic!r} lexicon must be a mapping")
        for slot in slot_names:
            words = lexicon.get(slot)
            if not words:
                raise ValueError(f"topic {topic!r} is missing words for slot {slot!r}")
        for words in lexicon.values():
            for w in words:
                owner = content_seen.setdefault(w, topic)
                if owner != topic:
                    raise ValueError(
                        f"content word {w!r} appears in topics {owner!r} and {topic!r}"
                    )


def load_grammar(path) -> dict:
    with open(path, encoding="utf-8") as f:
        spec = json.load(f)
    validate_grammar(spec)
    return spec


def grammar_vocabulary(spec: dict) -> set[str]:
    """Every surface token the grammar can emit."""
    words: set[str] = set()
    for template in spec["templates"]:
        words.update(tok for tok in template if _slot_name(tok) is None)
    for lexicon in spec["topics"].values():
        for slot_words in lexicon.values():
            words.update(slot_words)
    return words


def generate_sentence(spec: dict, rng) -> str:
    topic_names = sorted(spec["topics"])
    topic = spec["topics"][topic_names[rng.integers(len(topic_names))]]
    template = spec["templates"][rng.integers(len(spec["templates"]))]
    out = []
    for tok in template:
        slot = _slot_name(tok)
        if slot is None:
            out.append(tok)
        else:
            words = topic[slot]
            out.append(words[rng.integers(len(words))])
    return " ".join(out)


def generate_corpus(spec: dict, count: int, seed: int) -> list[str]:
    """Deterministic list of sentences; same seed, same lines."""
    validate_grammar(spec)
    rng = substream(seed, "synth")
    return [generate_sentence(spec, rng) for _ in range(count)]


def gen_synthetic(spec: dict, count: int, seed: int, path) -> None:
    """Write a corpus file, one sentence per line (byte-deterministic)."""
    lines = generate_corpus(spec, count, seed)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")


def sentence_topic(spec: dict, tokens: list[str]) -> str | None:
    """Name of the topic whose lexicon generated `tokens`, or None."""
    for topic_name in sorted(spec["topics"]):
        lexicon = spec["topics"][topic_name]
        for template in spec["templates"]:
            if len(template) != len(tokens):
                continue
            ok = True
            for pattern, word in zip(template, tokens):
                slot = _slot_name(pattern)
                if slot is None:
                    if pattern != word:
                        ok = False
                        break
                elif word not in lexicon[slot]:
                    ok = False
                    break
            if ok:
                return topic_name
    return None


def is_grammatical(spec: dict, sentence: str | list[str]) -> bool:
    """True when some (topic, template) pair generates the sentence."""
    tokens = sentence.split() if isinstance(sentence, str) else list(sentence)
    return sentence_topic(spec, tokens) is not None
