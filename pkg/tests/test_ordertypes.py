import pytest

from chainspec.epsgraph import RefinementSchedule
from chainspec.errors import DomainError
from chainspec.nesting import stabilized_order
from chainspec.ordertypes import (Eta, Fin, Omega, OmegaStar, Prod, Sum, Zeta, birth_levels, classify_sequence,
                                  detect_signature, equal_normalized, format_term, invariants, label, normalize,
                                  parse, realize)
from chainspec.spectrum import recipes


# ── Syntax ────────────────────────────────────────────────────────
@pytest.mark.parametrize("text", ["z.w+z", "(w+fin:1).w", "w*+e", "fin:12"])
def test_format_reproduces_the_parsed_text(text):
    assert format_term(parse(text)) == text


def test_parser_builds_left_nested_products():
    assert parse("z.w+z") == Sum((Prod(Zeta(), Omega()), Zeta()))
    assert parse("w . w . w") == Prod(Prod(Omega(), Omega()), Omega())


@pytest.mark.parametrize("text", ["q", "fin:", "(w", "w)", "w+"])
def test_parser_rejects_bad_terms(text):
    with pytest.raises(DomainError):
        parse(text)


def test_labels_use_greek_letters():
    assert label(parse("z.w+z")) == "ζ·ω+ζ"
    assert label(Fin(0)) == "∅"
    assert label(parse("w*+fin:3")) == "ω*+3"


def test_negative_finite_type_is_rejected():
    with pytest.raises(DomainError):
        Fin(-1)


# ── Normalization ─────────────────────────────────────────────────
@pytest.mark.parametrize("text, expected", [
    ("fin:2+w", Omega()),
    ("w*+fin:5", OmegaStar()),
    ("w*+w", Zeta()),
    ("e+e", Eta()),
    ("e+fin:1+e", Eta()),
    ("fin:2+fin:3", Fin(5)),
    ("fin:2.fin:3", Fin(6)),
    ("fin:0.w", Fin(0)),
    ("fin:0+z", Zeta()),
])
def test_normalize_applies_the_identities(text, expected):
    assert normalize(parse(text)) == expected


def test_normalize_leaves_non_absorbing_sums_alone():
    assert normalize(parse("w+fin:1")) == Sum((Omega(), Fin(1)))
    assert normalize(parse("z.fin:2")) == Sum((Zeta(), Zeta()))


def test_equal_normalized_is_one_sided():
    assert equal_normalized(parse("fin:1+w"), Omega())
    assert not equal_normalized(parse("w+fin:1"), Omega())


# ── Models ────────────────────────────────────────────────────────
def test_invariants_separate_common_types():
    assert invariants(parse("w+fin:1")).has_max
    assert not invariants(Omega()).has_max
    assert not invariants(parse("z.w")).has_min
    assert not invariants(Eta()).scattered
    assert invariants(parse("fin:2.fin:3")).size == 6


def test_realize_orders_finite_models_lexicographically():
    model = realize(parse("fin:1+fin:2.fin:2"))
    assert model == [(0, 0), (1, 0, 0), (1, 0, 1), (1, 1, 0), (1, 1, 1)]
    with pytest.raises(DomainError):
        realize(Omega())


# ── Signatures ────────────────────────────────────────────────────
@pytest.mark.parametrize("births, newest, expected", [
    ([0, 1, 2, 3], 3, Omega()),
    ([3, 2, 1, 0], 3, OmegaStar()),
    ([3, 1, 0, 1, 3], 3, Zeta()),
    ([0, 0, 0], 3, Fin(3)),
    ([5, 0, 6, 5, 1, 6, 5, 2, 6, 5, 3, 6], 6, Prod(Zeta(), Omega())),
])
def test_classify_sequence(births, newest, expected):
    assert classify_sequence(births, newest) == expected


def test_orbit_prefix_family_reads_as_omega(halving):
    fam = recipes.orbit_prefix(halving, RefinementSchedule.default(1.0, depth=8), 1.0, 0.0)
    assert birth_levels(fam)[(0.5,)] == 2
    sig = detect_signature(fam, stabilized_order(fam, 3))
    assert sig.terms == [Omega()]
    assert sig.right_growth == "unbounded-prefix"
    assert sig.left_growth == "none"
    assert sig.interior_densification == "none"


def test_short_families_are_inconclusive(halving):
    fam = recipes.orbit_prefix(halving, RefinementSchedule.default(1.0, depth=3), 1.0, 0.0)
    sig = detect_signature(fam, stabilized_order(fam, 3))
    assert sig.inconclusive
    assert sig.verdict == []


# ── Random terms ──────────────────────────────────────────────────
def _random_term(rng, depth, finite=False):
    roll = rng.random()
    if depth == 0 or roll < 0.3:
        if finite or rng.random() < 0.4:
            return Fin(int(rng.integers(0, 4)))
        return [Omega(), OmegaStar(), Zeta(), Eta()][int(rng.integers(0, 4))]
    if roll < 0.7:
        return Sum(tuple(_random_term(rng, depth - 1, finite) for _ in range(int(rng.integers(2, 4)))))
    return Prod(_random_term(rng, depth - 1, finite), _random_term(rng, 0, finite))


def test_normalize_is_idempotent_on_random_terms(rng):
    for _ in range(10_000):
        once = normalize(_random_term(rng, 5))
        assert normalize(once) == once


def test_normalized_finite_terms_keep_their_model_size(rng):
    checked = 0
    while checked < 500:
        t = _random_term(rng, 5, finite=True)
        size = invariants(t).size
        if size > 200:
            continue
        checked += 1
        model = realize(t)
        assert len(model) == size
        assert normalize(t) == Fin(size)
        assert len(realize(normalize(t))) == len(model)


def test_equal_normalized_finite_terms_have_models_of_equal_size(rng):
    terms = [_random_term(rng, 3, finite=True) for _ in range(300)]
    terms = [t for t in terms if invariants(t).size <= 200]
    for a, b in zip(terms, terms[1:]):
        if equal_normalized(a, b):
            assert len(realize(a)) == len(realize(b))
