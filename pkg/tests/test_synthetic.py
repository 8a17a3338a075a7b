import copy

import pytest

from sentvae.synthetic import (
    DEFAULT_GRAMMAR,
    gen_synthetic,
    generate_corpus,
    grammar_vocabulary,
    is_grammatical,
    sentence_topic,
    validate_grammar,
)


def test_default_grammar_is_valid():
    validate_grammar(DEFAULT_GRAMMAR)


def test_topics_balanced():
    lines = generate_corpus(DEFAULT_GRAMMAR, 1000, seed=0)
    topics = [sentence_topic(DEFAULT_GRAMMAR, line.split()) for line in lines]
    assert None not in topics
    share = topics.count("machines") / len(topics)
    assert 0.45 <= share <= 0.55


def test_generation_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    gen_synthetic(DEFAULT_GRAMMAR, 200, seed=7, path=a)
    gen_synthetic(DEFAULT_GRAMMAR, 200, seed=7, path=b)
    assert a.read_bytes() == b.read_bytes()
    gen_synthetic(DEFAULT_GRAMMAR, 200, seed=8, path=b)
    assert a.read_bytes() != b.read_bytes()


def test_output_vocabulary_within_spec():
    allowed = grammar_vocabulary(DEFAULT_GRAMMAR)
    for line in generate_corpus(DEFAULT_GRAMMAR, 500, seed=1):
        assert set(line.split()) <= allowed


def test_recognizer_accepts_generated_rejects_mixed():
    lines = generate_corpus(DEFAULT_GRAMMAR, 50, seed=2)
    for line in lines:
        assert is_grammatical(DEFAULT_GRAMMAR, line)
    assert not is_grammatical(DEFAULT_GRAMMAR, "the robot waters the tulip .")  # cross-topic
    assert not is_grammatical(DEFAULT_GRAMMAR, "robot the welds bolt the .")


def test_malformed_specs_rejected():
    with pytest.raises(ValueError):
        validate_grammar({"templates": []})
    one_topic = copy.deepcopy(DEFAULT_GRAMMAR)
    one_topic["topics"] = {"machines": one_topic["topics"]["machines"]}
    with pytest.raises(ValueError, match="two topics"):
        validate_grammar(one_topic)
    overlap = copy.deepcopy(DEFAULT_GRAMMAR)
    overlap["topics"]["garden"]["object"][0] = "bolt"
    with pytest.raises(ValueError, match="bolt"):
        validate_grammar(overlap)
    missing = copy.deepcopy(DEFAULT_GRAMMAR)
    del missing["topics"]["garden"]["verb"]
    with pytest.raises(ValueError, match="missing"):
        validate_grammar(missing)
    badslot = copy.deepcopy(DEFAULT_GRAMMAR)
    badslot["templates"][0][1] = "<sub ject>"
    with pytest.raises(ValueError, match="malformed"):
        validate_grammar(badslot)
