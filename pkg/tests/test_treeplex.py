import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from efgsolve.games import build_kuhn
from efgsolve.treeplex import (
    TreeplexError,
    behavioral_from_sequence,
    build_treeplex,
    format_treeplex,
    minimize_linear,
    parse_treeplex,
    product,
    realize,
    sequence_from_behavioral,
    uniform_strategy,
    validate_sequence,
)

from oracles import pure_plans, random_interior_point, random_treeplex_specs

BRANCH = [(2, 0), (2, 1)]  # 2-simplex with a 2-simplex child under its first index


def test_single_simplex():
    t = build_treeplex([(3, 0)])
    assert t.dim == 3 and t.num_simplexes == 1
    assert all(t.is_terminal(i) for i in range(3))


def test_kuhn_x_structure():
    t = build_treeplex([(2, 0), (2, 2), (2, 0), (2, 6), (2, 0), (2, 10)])
    assert t.dim == 12
    assert t.num_sequences == 13
    assert t.children_of_index[1] == (1,)
    assert [t.is_terminal(i) for i in range(4)] == [True, False, True, True]


def test_children_and_topo_order():
    # declared child-first, still valid
    t = build_treeplex([(2, 3), (3, 0)])
    assert t.topo_order == (1, 0)
    assert t.children_of_index[2] == (0,)


@pytest.mark.parametrize(
    "specs, msg",
    [
        ([(2, 0), (2, 4)], "cycle"),
        ([(2, 3), (2, 1)], "cycle"),
        ([(2, 0), (2, 7)], "out of range"),
        ([(2, 0), (0, 1)], "empty simplex"),
        ([], "at least one"),
    ],
)
def test_build_errors(specs, msg):
    with pytest.raises(TreeplexError, match=msg):
        build_treeplex(specs)


def test_validate_examples():
    assert validate_sequence(build_treeplex([(3, 0)]), [1 / 3] * 3)
    report = validate_sequence(build_treeplex([(2, 0)]), [0.6, 0.6])
    assert not report
    assert report.violated[0][0] == 0
    assert report.violated[0][1] == pytest.approx(0.2)
    neg = validate_sequence(build_treeplex([(2, 0)]), [1.5, -0.5])
    assert neg.negative == (1,)
    with pytest.raises(TreeplexError, match="dimension"):
        validate_sequence(build_treeplex([(2, 0)]), [1.0])


def test_behavioral_examples():
    t = build_treeplex(BRANCH)
    q = behavioral_from_sequence(t, [0.5, 0.5, 0.125, 0.375])
    np.testing.assert_allclose(q, [0.5, 0.5, 0.25, 0.75])
    q = behavioral_from_sequence(t, [0.0, 1.0, 0.0, 0.0])
    np.testing.assert_allclose(q[2:], [0.5, 0.5])
    s = build_treeplex([(3, 0)])
    np.testing.assert_array_equal(behavioral_from_sequence(s, [0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])


def test_uniform_examples():
    np.testing.assert_allclose(uniform_strategy(build_treeplex([(3, 0)])), [1 / 3] * 3)
    np.testing.assert_allclose(uniform_strategy(build_treeplex(BRANCH)), [0.5, 0.5, 0.25, 0.25])


def test_kuhn_uniform_depths():
    g = build_kuhn()
    for t in (g.x, g.y):
        z = sequence_from_behavioral(t, np.full(t.dim, 0.5))
        assert validate_sequence(t, z)
        depth = np.zeros(t.dim, dtype=int)
        for h in t.topo_order:
            p = t.parents[h]
            for i in t.simplex_indices(h):
                depth[i] = 1 if p == t.dim else depth[p] + 1
        np.testing.assert_allclose(z, 2.0 ** -depth)


def test_sequence_from_behavioral_rejects_bad_rows():
    with pytest.raises(TreeplexError, match="sum to 1"):
        sequence_from_behavioral(build_treeplex(BRANCH), [0.5, 0.5, 0.5, 0.6])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_round_trip_and_flow(seed):
    rng = np.random.default_rng(seed)
    t = build_treeplex(random_treeplex_specs(rng, max_indices=12))
    z = random_interior_point(rng, t)
    q = behavioral_from_sequence(t, z)
    back = sequence_from_behavioral(t, q)
    np.testing.assert_allclose(back, z, rtol=0, atol=1e-12)
    assert validate_sequence(t, back)
    assert validate_sequence(t, uniform_strategy(t))


def test_text_round_trip():
    t = build_kuhn().y
    text = format_treeplex(t)
    again = parse_treeplex(("# y treeplex\n" + text + "\n").splitlines())
    assert again.specs() == t.specs()
    with pytest.raises(TreeplexError, match="line 2"):
        parse_treeplex(["2 0", "3"])


def test_product_offsets():
    t = product(build_treeplex(BRANCH), build_treeplex([(3, 0), (2, 2)]))
    assert t.specs() == [(2, 0), (2, 1), (3, 0), (2, 6)]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_minimize_linear_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    t = build_treeplex(random_treeplex_specs(rng, max_indices=8))
    c = rng.normal(size=t.dim)
    value, plan = minimize_linear(t, c)
    plans = pure_plans(t)
    assert value == pytest.approx((plans @ c).min(), abs=1e-12)
    assert plan @ c == pytest.approx(value, abs=1e-12)
    assert validate_sequence(t, plan)


def test_realize_top_down():
    t = build_treeplex(BRANCH)
    np.testing.assert_allclose(realize(t, np.array([0.3, 0.7, 0.1, 0.9])), [0.3, 0.7, 0.03, 0.27])
