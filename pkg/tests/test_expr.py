import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lbp_discovery.expr import (
    BASELINE,
    Equation,
    GrammarError,
    InvalidUnaryOperator,
    LengthMismatch,
    apply_operators,
    enumerate_mutations,
    evaluate,
    load_corpus,
    mutation_count,
    parse_equation,
    parse_structure,
    validate,
)

from conftest import BEST_EQUATIONS


def squash(text):
    return text.replace(" ", "")


def oracle(text, Z, C, a=0.01):
    """Straight Python evaluation with numpy scalars (inf/nan instead of exceptions)."""
    env = {"Z": np.float64(Z), "C": np.float64(C), "a": np.float64(a)}
    with np.errstate(all="ignore"):
        return float(eval(text, {"__builtins__": {}}, env))


# -- parsing -----------------------------------------------------------------


def test_minimal_structure():
    s = parse_structure("(Z o C) o a")
    assert s.placeholder_count == 2
    assert s.n_binary == 2 and s.n_unary == 0


def test_unbalanced_paren_offset():
    with pytest.raises(GrammarError) as err:
        parse_structure("(Z o C")
    assert err.value.offset == 6


@pytest.mark.parametrize("text", ["", "o o Z", "Z o", "Z C", "(Z o C))", "Z o (o a o C)", "Z + C", "(* C)", "Z o b"])
def test_invalid_structures(text):
    assert not validate(text)


def test_validate_never_raises():
    for junk in [None, 3, b"Z o C", "\x00", "((((", ")"]:
        assert validate(junk) is False


@pytest.mark.parametrize("scene,structure,_eq", BEST_EQUATIONS)
def test_reference_structures_round_trip(scene, structure, _eq):
    s = parse_structure(structure)
    assert parse_structure(s.text).text == s.text
    assert squash(s.text) == squash(structure)
    assert s.placeholder_count == structure.count("o")


def test_reference_placeholder_counts():
    counts = [parse_structure(s).placeholder_count for _, s, _ in BEST_EQUATIONS]
    assert counts == [8, 11, 13, 10, 8, 10]
    fall = parse_structure(BEST_EQUATIONS[-1][1])
    assert fall.n_unary == 1


def test_skating_structure_is_valid():
    assert validate("Z o C o ((Z o C) o (Z o C) o (Z o C)) o a")


def test_whitespace_normalised():
    assert parse_structure("  (Z   o C)o a ").text == "(Z o C) o a"


def test_typographic_minus_accepted():
    assert parse_equation("Z − C + a").text == "Z - C + a"


# -- mutation ----------------------------------------------------------------


def test_mutation_order_and_ends():
    eqs = enumerate_mutations(parse_structure("(Z o C) o a"), 1024)
    assert len(eqs) == 16
    assert eqs[0].text == "(Z + C) + a"
    assert eqs[-1].text == "(Z / C) / a"
    assert len({e.text for e in eqs}) == 16


def test_cap_truncates_prefix():
    s = parse_structure("(Z o C) o a")
    assert [e.text for e in enumerate_mutations(s, 5)] == [e.text for e in enumerate_mutations(s, 1024)[:5]]


def test_cap_1024_on_six_binary_placeholders():
    s = parse_structure("Z o C o Z o C o Z o C o a")
    assert mutation_count(s) == 4**6
    assert len(enumerate_mutations(s, 1024)) == 1024


def test_no_placeholder_structure():
    eqs = enumerate_mutations(parse_structure("Z"), 10)
    assert [e.text for e in eqs] == ["Z"]


def test_counts_with_unary():
    s = parse_structure("(o C) o Z o (o Z)")
    assert (s.n_binary, s.n_unary) == (2, 2)
    assert mutation_count(s) == 4**2 * 2**2
    assert len(enumerate_mutations(s, 10**6)) == 64


def test_apply_operators_simple():
    assert apply_operators(parse_structure("(Z o C) o a"), [1, 0]).text == "(Z - C) + a"


@pytest.mark.parametrize("scene,structure,equation", BEST_EQUATIONS)
def test_reference_substitutions(scene, structure, equation):
    target = parse_equation(equation)
    s = parse_structure(structure)
    got = apply_operators(s, target.operators)
    assert squash(got.text) == squash(equation)
    assert target.source_structure.text == s.text


def test_people_in_shade_vector():
    s = parse_structure(BEST_EQUATIONS[0][1])
    v = ["-", "/", "-", "*", "/", "/", "+", "+"]
    got = apply_operators(s, ["+-*/".index(c) for c in v])
    assert got.text == "(Z - C) / (a - C) * (Z / C) / (Z + C) + a"


def test_fall_unary_slot():
    s = parse_structure(BEST_EQUATIONS[-1][1])
    v = [0] * s.placeholder_count
    v[s.unary_slots[0]] = 1
    assert "(-C)" in apply_operators(s, v).text


def test_apply_errors():
    s = parse_structure("(o C) o a")
    with pytest.raises(LengthMismatch):
        apply_operators(s, [0])
    with pytest.raises(InvalidUnaryOperator):
        apply_operators(s, [2, 0])


def test_substitution_locality():
    s = parse_structure(BEST_EQUATIONS[2][1])
    for e in enumerate_mutations(s, 50):
        before = s.text.split(" ")
        after = e.text.split(" ")
        assert len(before) == len(after)
        for x, y in zip(before, after):
            if x != y:
                assert x == "o" and y in "+-*/"


def test_corpus_round_trip():
    corpus = load_corpus()
    assert len(corpus) == 305
    assert len(set(corpus)) == 305
    for text in corpus:
        s = parse_structure(text)
        assert s.text == text
        for e in enumerate_mutations(s, 8):
            assert Equation(e.text).text == e.text
    held_out = {parse_structure(s).text for _, s, _ in BEST_EQUATIONS}
    assert not held_out & set(corpus)


def test_determinism():
    s = parse_structure(BEST_EQUATIONS[1][1])
    assert [e.text for e in enumerate_mutations(s, 64)] == [e.text for e in enumerate_mutations(s, 64)]


# -- evaluation --------------------------------------------------------------


def test_baseline_flat():
    assert evaluate(BASELINE, 0.5, 0.5) == pytest.approx(0.01)


def test_zero_over_zero():
    e = parse_equation("(Z - C) / (a - C) * (Z / C) / (Z + C) + a")
    assert not np.isfinite(evaluate(e, 0.0, 0.0))


def test_refreshed_equation_against_oracle():
    text = "(Z/C)/(Z/C)/(Z*(Z/C)-(Z+C))-a"
    e = parse_equation(text)
    assert evaluate(e, 0.6, 0.3) == pytest.approx(oracle(text, 0.6, 0.3), rel=1e-12)


def test_precedence_left_associative():
    assert evaluate(parse_equation("Z - C - a"), 1.0, 0.5, 0.25) == pytest.approx(0.25)
    assert evaluate(parse_equation("Z / C / a"), 8.0, 2.0, 2.0) == pytest.approx(2.0)
    assert evaluate(parse_equation("Z + C * a"), 1.0, 2.0, 3.0) == pytest.approx(7.0)


@pytest.mark.parametrize("scene,_s,equation", BEST_EQUATIONS)
def test_reference_equations_against_oracle(scene, _s, equation, rng):
    e = parse_equation(equation)
    for Z, C in rng.uniform(0.05, 1.0, size=(20, 2)):
        assert evaluate(e, Z, C) == pytest.approx(oracle(e.text, Z, C), rel=1e-12, abs=1e-12)


def test_array_evaluation_matches_scalar(rng):
    e = parse_equation(BEST_EQUATIONS[3][2])
    Z = rng.uniform(0, 1, 50)
    C = rng.uniform(0, 1, 50)
    vec = evaluate(e, Z, C)
    assert np.allclose(vec, [evaluate(e, z, c) for z, c in zip(Z, C)], equal_nan=True)


_term = st.deferred(
    lambda: st.sampled_from(["Z", "C", "a"])
    | st.builds(lambda op, v: f"({op}{v})", st.sampled_from("+-"), st.sampled_from(["Z", "C", "a"]))
    | st.builds(lambda e: f"({e})", _expr)
)
_expr = st.deferred(
    lambda: st.builds(
        lambda first, rest: " ".join([first] + [f"{op} {t}" for op, t in rest]),
        _term,
        st.lists(st.tuples(st.sampled_from("+-*/"), _term), max_size=4),
    )
)


@settings(max_examples=200, deadline=None)
@given(_expr, st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_random_equations_match_python(text, Z, C):
    e = parse_equation(text)
    got = evaluate(e, Z, C)
    want = oracle(text, Z, C)
    if np.isfinite(want):
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)
    else:
        assert not np.isfinite(got) or abs(got) > 1e300
    assert parse_equation(e.text).text == e.text
    s = e.source_structure
    assert apply_operators(s, e.operators).text == e.text
