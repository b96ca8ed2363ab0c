import math

import pytest
from hypothesis import given, settings, strategies as st

# Utils
from utils.log_utils import LogUtil

# Exceptions
from exceptions.sle_exception import SLEBudgetException, SLEValidationException

# Services
from services.pattern_service import PatternService

patterns = PatternService(log_util=LogUtil(console=False))


def catalan(n: int) -> int:
    return math.comb(2 * n, n) // (n + 1)


def test_lp_validate_examples(pattern_service):
    assert pattern_service.lp_validate([(1, 4), (2, 3)])
    assert not pattern_service.lp_validate([(1, 3), (2, 4)])
    assert pattern_service.lp_validate([(1, 6), (2, 5), (3, 4)])


@pytest.mark.parametrize("candidate", [
    [(1, 2), (2, 3)],
    [(1, 5), (2, 3)],
    [(0, 1)],
    [(1, 2, 3)],
    [],
])
def test_lp_validate_rejects_malformed_input(pattern_service, candidate):
    with pytest.raises(SLEValidationException):
        pattern_service.lp_validate(candidate)


@pytest.mark.parametrize("n_links", range(1, 9))
def test_lp_enumerate_counts_are_catalan(pattern_service, n_links):
    listed = pattern_service.lp_enumerate(n_links)
    assert len(listed) == catalan(n_links)
    assert [p.links for p in listed] == sorted(p.links for p in listed)
    assert all(pattern_service.lp_validate(p.links) for p in listed)


def test_lp_enumerate_small_cases(pattern_service):
    assert [str(p) for p in pattern_service.lp_enumerate(1)] == ["1-2"]
    assert [str(p) for p in pattern_service.lp_enumerate(2)] == ["1-2,3-4", "1-4,2-3"]
    assert len(pattern_service.lp_enumerate(6)) == 132


@pytest.mark.parametrize("n_links", [0, 11])
def test_lp_enumerate_guard(pattern_service, n_links):
    with pytest.raises(SLEBudgetException):
        pattern_service.lp_enumerate(n_links)


def test_lp_split_examples(pattern_service):
    inner, outer = pattern_service.lp_split(pattern_service.parse_lp("1-6,2-5,3-4"), (1, 6))
    assert str(inner) == "1-4,2-3"
    assert outer is None

    inner, outer = pattern_service.lp_split(pattern_service.parse_lp("1-4,2-3"), (2, 3))
    assert inner is None
    assert str(outer) == "1-2"

    assert pattern_service.lp_split(pattern_service.parse_lp("1-2"), (1, 2)) == (None, None)


def test_lp_split_rejects_missing_link(pattern_service):
    with pytest.raises(SLEValidationException):
        pattern_service.lp_split(pattern_service.parse_lp("1-4,2-3"), (1, 2))


def test_lp_rotate_examples(pattern_service):
    alpha = pattern_service.parse_lp("1-4,2-3")
    assert str(pattern_service.lp_rotate(alpha, 1)) == "1-2,3-4"
    assert pattern_service.lp_rotate(alpha, 0) == alpha
    assert pattern_service.lp_rotate(alpha, 4) == alpha


@pytest.mark.parametrize("text, sizes", [
    ("1-6,2-5,3-4", (2, 4, 4, 2)),
    ("1-6,2-3,4-5", (2, 6, 2, 2)),
    ("1-2", (2, 2)),
])
def test_lp_faces_sizes(pattern_service, text, sizes):
    assert pattern_service.lp_faces(pattern_service.parse_lp(text)).sizes() == sizes


def test_lp_outermost(pattern_service):
    assert pattern_service.lp_outermost(pattern_service.parse_lp("1-2,3-6,4-5")) == (1, 2)


def test_clp_examples(pattern_service):
    assert pattern_service.clp_validate((1, 2, 3, 4, 0))
    assert not pattern_service.clp_validate((0, 2, 1))
    dropped = pattern_service.clp_drop_first(pattern_service.to_curve_link_pattern((1, 2, 3, 4, 0)))
    assert dropped.n == 4
    assert dropped.order == (1, 2, 3, 0)
    assert pattern_service.clp_drop_first(pattern_service.to_curve_link_pattern((0,))) is None


def test_clp_rejects_non_permutation(pattern_service):
    with pytest.raises(SLEValidationException):
        pattern_service.clp_validate((0, 0, 1))
    with pytest.raises(SLEValidationException):
        pattern_service.to_curve_link_pattern((0, 2, 1))


def test_text_forms(pattern_service):
    assert str(pattern_service.parse_lp(" 2-3, 1-4 ")) == "1-4,2-3"
    assert pattern_service.format_clp(pattern_service.parse_clp("1,2,3,4,0")) == "1,2,3,4,0"
    assert pattern_service.format_lp(None) == ""
    with pytest.raises(SLEValidationException):
        pattern_service.parse_lp("1-4-2")
    with pytest.raises(SLEValidationException):
        pattern_service.parse_lp("1-3,2-4")


@settings(max_examples=60, deadline=None)
@given(n_links=st.integers(1, 5), index=st.integers(0, 10**6), a=st.integers(-12, 12), b=st.integers(-12, 12))
def test_lp_rotate_composes_additively(n_links, index, a, b):
    listed = patterns.lp_enumerate(n_links)
    alpha = listed[index % len(listed)]
    assert patterns.lp_rotate(patterns.lp_rotate(alpha, a), b) == patterns.lp_rotate(alpha, a + b)
    assert patterns.lp_validate(patterns.lp_rotate(alpha, a).links)


@settings(max_examples=60, deadline=None)
@given(n_links=st.integers(1, 5), index=st.integers(0, 10**6), choice=st.integers(0, 4))
def test_lp_split_then_merge_is_identity(n_links, index, choice):
    listed = patterns.lp_enumerate(n_links)
    alpha = listed[index % len(listed)]
    link = alpha.links[choice % n_links]
    inner, outer = patterns.lp_split(alpha, link)
    assert patterns.lp_merge(inner, outer, link) == alpha


@settings(max_examples=60, deadline=None)
@given(n_links=st.integers(1, 6), index=st.integers(0, 10**6))
def test_lp_faces_account_for_every_interface(n_links, index):
    listed = patterns.lp_enumerate(n_links)
    alpha = listed[index % len(listed)]
    faces = patterns.lp_faces(alpha).faces
    assert len(faces) == n_links + 1
    appearances = [k for face in faces for k in face.interfaces]
    assert all(appearances.count(k) == 2 for k in range(n_links))
    assert sum(face.marked_points for face in faces) == 4 * n_links


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 7).flatmap(lambda n: st.permutations(list(range(n)))))
def test_clp_validate_is_mirror_symmetric(order):
    n = len(order)
    assert patterns.clp_validate(order) == patterns.clp_validate([n - 1 - i for i in order])
