import numpy as np
import pytest

from guessgame.grammar import GrammarSpec, build_grammar
from guessgame.oracle import (
    Answer,
    OracleConfig,
    answer,
    answer_all,
    truth_answer,
)
from guessgame.world import GenConfig, Scene, SceneObject, generate_scene


def _obj(oid, category="dog", attributes=None, box=(0.1, 0.1, 0.5, 0.5)):
    return SceneObject(id=oid, category=category, attributes=attributes or {}, box=box)


@pytest.fixture(scope="module")
def grammar():
    return build_grammar(GenConfig(), GrammarSpec())


def q(grammar, text):
    return grammar.parse(tuple(text.split()))


def test_attribute_predicate_yes(grammar):
    obj = _obj(0, attributes={"color": "red"})
    assert truth_answer(q(grammar, "is it red ?"), obj) is Answer.YES


def test_attribute_predicate_absent_gives_na(grammar):
    obj = _obj(0, attributes={"size": "small"})
    assert truth_answer(q(grammar, "is it red ?"), obj) is Answer.NA


def test_attribute_predicate_mismatch_gives_no(grammar):
    obj = _obj(0, attributes={"color": "blue"})
    assert truth_answer(q(grammar, "is it red ?"), obj) is Answer.NO


def test_spatial_halves_are_complementary(grammar):
    obj = _obj(0, box=(0.2, 0.2, 0.4, 0.4))  # center x = 0.3
    assert truth_answer(q(grammar, "is it in the left half ?"), obj) is Answer.YES
    assert truth_answer(q(grammar, "is it in the right half ?"), obj) is Answer.NO


def test_category_predicate_always_applicable(grammar):
    assert truth_answer(q(grammar, "is it a dog ?"), _obj(0, category="dog")) is Answer.YES
    assert truth_answer(q(grammar, "is it a cat ?"), _obj(0, category="dog")) is Answer.NO


def test_answer_noiseless_equals_truth(grammar):
    cfg = OracleConfig(epsilon=0.0)
    rng = np.random.default_rng(0)
    scene = generate_scene(GenConfig(), seed=3)
    for pred_idx in range(grammar.n_predicates):
        question = grammar.question_for(pred_idx)
        for obj in scene.objects:
            assert answer(question, obj, cfg, rng) == truth_answer(question, obj)


def test_answer_noise_frequencies(grammar):
    cfg = OracleConfig(epsilon=0.3)
    obj = _obj(0, attributes={"color": "red"})
    question = q(grammar, "is it red ?")
    rng = np.random.default_rng(42)
    n = 100_000
    counts = {a: 0 for a in Answer}
    for _ in range(n):
        counts[answer(question, obj, cfg, rng)] += 1
    assert abs(counts[Answer.YES] / n - 0.700) < 0.01
    assert abs(counts[Answer.NO] / n - 0.150) < 0.01
    assert abs(counts[Answer.NA] / n - 0.150) < 0.01


def test_answer_deterministic_under_seed(grammar):
    cfg = OracleConfig(epsilon=0.5)
    obj = _obj(0, attributes={"color": "red"})
    question = q(grammar, "is it red ?")
    got = [answer(question, obj, cfg, 123) for _ in range(20)]
    assert len(set(got)) == 1


def test_answer_all_matches_per_object_truth(grammar):
    for seed in range(30):
        scene = generate_scene(GenConfig(), seed=seed)
        for pred_idx in range(grammar.n_predicates):
            question = grammar.question_for(pred_idx)
            got = answer_all(question, scene)
            expected = [truth_answer(question, obj) for obj in scene.objects]
            assert got == expected


def test_answer_all_example(grammar):
    objs = tuple(
        _obj(i, attributes={"color": c}) for i, c in enumerate(["red", "blue", "red"])
    )
    scene = Scene(id=0, objects=objs)
    got = answer_all(q(grammar, "is it red ?"), scene)
    assert got == [Answer.YES, Answer.NO, Answer.YES]


def test_answer_all_uniform_scene(grammar):
    objs = tuple(_obj(i, attributes={"color": "red"}) for i in range(3))
    scene = Scene(id=0, objects=objs)
    assert answer_all(q(grammar, "is it red ?"), scene) == [Answer.YES] * 3


def test_three_valued_partition(grammar):
    # every object maps to exactly one answer value
    scene = generate_scene(GenConfig(), seed=11)
    for pred_idx in range(grammar.n_predicates):
        for a in answer_all(grammar.question_for(pred_idx), scene):
            assert a in (Answer.YES, Answer.NO, Answer.NA)


def test_oracle_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(epsilon=1.0)
    with pytest.raises(ValueError):
        OracleConfig(epsilon=-0.1)
