import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bifurclab.errors import ConfigError
from bifurclab.walk import (StepMeasure, Word, letters_array, letters_to_slots, make_rng,
                            measure_from_config, parse_word, reversed_measure, sample_indices,
                            sample_letter_block, sample_word, uniform_symmetric)


def test_rng_streams_are_deterministic_and_distinct():
    a = make_rng(7, "walk", 3).random(5)
    b = make_rng(7, "walk", 3).random(5)
    c = make_rng(7, "walk", 4).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_word_text_round_trip():
    w = parse_word("a b A B b", ("a", "b"))
    assert w.letters == (1, 2, -1, -2, 2)
    assert w.to_text(("a", "b")) == "a b A B b"
    assert w.inverse().letters == (-2, 2, 1, -2, -1)
    with pytest.raises(ConfigError):
        parse_word("a c", ("a", "b"))


def test_sample_word_orders():
    mu = StepMeasure((Word((1,)), Word((2, 2))), (0.5, 0.5))
    w = sample_word(mu, 6, 3, "x")
    incs = w.increments
    left = [x for inc in reversed(incs) for x in inc.letters]
    right = [x for inc in incs for x in inc.letters]
    assert list(w.letters) == left
    assert list(w.ordered("right").letters) == right
    assert w.ordered("left").letters == w.letters


def test_letters_array_pads_on_the_left_with_identity():
    arr = letters_array([Word((1, 2)), Word((3,))])
    assert arr.tolist() == [[1, 2], [0, 3]]
    assert letters_to_slots(arr).tolist() == [[0, 2], [-1, 4]]
    assert letters_to_slots(np.array([-1, -3])).tolist() == [1, 5]


def test_letter_block_matches_sample_indices():
    mu = uniform_symmetric(2)
    block = sample_letter_block(mu, 10, 4, 11, "walk")
    for t in range(4):
        idx = sample_indices(mu, 10, 11, "walk", t)
        letters = [mu.atoms[i].letters[0] for i in idx]
        assert block[t].tolist() == letters[::-1]


def test_measure_validation_and_symmetry():
    assert uniform_symmetric(2).symmetric
    biased = StepMeasure((Word((1,)), Word((-1,))), (0.75, 0.25))
    assert not biased.symmetric
    assert reversed_measure(biased).atoms[0].letters == (-1,)
    with pytest.raises(ConfigError):
        StepMeasure((Word((1,)),), (0.5,))
    with pytest.raises(ConfigError):
        StepMeasure((Word((1,)), Word((-1,))), (1.5, -0.5))
    m = measure_from_config({"measure": [{"word": "a b", "p": 0.5}, {"word": "B A", "p": 0.5}]}, ("a", "b"))
    assert m.symmetric


@given(st.lists(st.floats(0.05, 1.0), min_size=2, max_size=5), st.integers(0, 2 ** 32))
def test_empirical_frequencies(weights, seed):
    w = np.array(weights) / np.sum(weights)
    mu = StepMeasure(tuple(Word((k + 1,)) for k in range(len(w))), tuple(w))
    n = 4000
    idx = sample_indices(mu, n, seed)
    freq = np.bincount(idx, minlength=len(w)) / n
    assert np.all(np.abs(freq - w) <= 5 * np.sqrt(w * (1 - w) / n) + 1e-12)


def test_support_heuristic_warns_about_missing_generators():
    from bifurclab.walk import measure_from_config, reaches_all_generators, uniform_symmetric
    assert reaches_all_generators(uniform_symmetric(3), 3)
    with pytest.warns(RuntimeWarning):
        mu = measure_from_config({"measure": [{"word": "a", "p": 1.0}]}, ["a", "b"])
    assert not reaches_all_generators(mu, 2)
