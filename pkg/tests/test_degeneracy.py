import numpy as np
import pytest
from hypothesis import given, strategies as st

from asced import gf2
from asced.degeneracy import (DecodeOutcome, DegeneracySetId, OutcomeKind, classify, classify_batch,
                              enumerate_degeneracy_set, logically_equivalent, verify_splitting)
from asced.codes import build_toric, syndrome
from asced.pauli import symplectic_gram


def _random_member(code, rng):
    return gf2.matmul(rng.integers(0, 2, code.stabilizer_basis.shape[0]), code.stabilizer_basis)


def test_logical_equivalence_examples(toric2, rng):
    e = rng.integers(0, 2, 16, dtype=np.uint8)
    assert logically_equivalent(toric2, e, e)
    assert logically_equivalent(toric2, e, e ^ toric2.h[2])
    assert not logically_equivalent(toric2, e, e ^ toric2.logical_basis[0])
    with pytest.raises(ValueError):
        logically_equivalent(toric2, e, e[:-1])


def test_cross_check_catches_a_wrong_logical_basis(toric2, rng):
    broken = build_toric(2)
    # stabilizers in place of the logicals: every logical now "commutes", yet is not in S
    bad = broken.h[:4].copy()
    object.__setattr__(broken, "logical_basis", bad)
    e = rng.integers(0, 2, 16, dtype=np.uint8)
    with pytest.raises(AssertionError):
        logically_equivalent(broken, e, e ^ toric2.logical_basis[0])


@pytest.mark.parametrize("fixture", ["toric2", "toric3", "gb46"])
def test_rank_and_commutation_tests_agree(fixture, request, rng):
    code = request.getfixturevalue(fixture)
    for _ in range(1000):
        e = rng.integers(0, 2, 2 * code.n, dtype=np.uint8)
        lam = gf2.matmul(rng.integers(0, 2, 2 * code.k), code.logical_basis)
        e_hat = e ^ _random_member(code, rng) ^ lam
        # the cross check inside raises on disagreement
        assert logically_equivalent(code, e, e_hat) == (not lam.any())


def test_equivalence_relation(toric3, rng):
    for _ in range(200):
        e = rng.integers(0, 2, 36, dtype=np.uint8)
        f = e ^ _random_member(toric3, rng) ^ (toric3.logical_basis[0] if rng.random() < 0.5 else 0)
        g = f ^ _random_member(toric3, rng) ^ (toric3.logical_basis[1] if rng.random() < 0.5 else 0)
        assert logically_equivalent(toric3, e, e)
        assert logically_equivalent(toric3, e, f) == logically_equivalent(toric3, f, e)
        if logically_equivalent(toric3, e, f) and logically_equivalent(toric3, f, g):
            assert logically_equivalent(toric3, e, g)


def test_classify_examples(toric2, rng):
    e = rng.integers(0, 2, 16, dtype=np.uint8)
    assert classify(toric2, e, e).kind == OutcomeKind.T1S
    assert classify(toric2, e, e ^ toric2.h[0]).kind == OutcomeKind.T2S
    out = classify(toric2, e, e ^ toric2.logical_basis[1], winning_path=3)
    assert out.kind == OutcomeKind.T2F and out.winning_path == 3
    fail = classify(toric2, e, None)
    assert fail.kind == OutcomeKind.T1F and fail.estimate is None
    with pytest.raises(ValueError):
        classify(toric2, np.zeros(16, dtype=np.uint8), toric2.logical_basis[0] ^ np.eye(16, dtype=np.uint8)[0])


def test_outcome_invariant():
    with pytest.raises(ValueError):
        DecodeOutcome(OutcomeKind.T1F, np.zeros(4, dtype=np.uint8))
    with pytest.raises(ValueError):
        DecodeOutcome(OutcomeKind.T1S, None)
    assert OutcomeKind.T2S.is_success and not OutcomeKind.T2F.is_success


def test_classify_batch_matches_scalar(gb46, rng):
    e = rng.integers(0, 2, (300, 92), dtype=np.uint8)
    choice = rng.integers(0, 4, 300)
    est = e.copy()
    for i, c in enumerate(choice):
        if c == 1:
            est[i] ^= _random_member(gb46, rng) | 0
            est[i] ^= gb46.h[int(rng.integers(gb46.m))]
        elif c == 3:
            est[i] ^= gb46.logical_basis[int(rng.integers(4))]
    found = choice != 2
    kinds = classify_batch(gb46, e, est, found)
    for i in range(300):
        expect = classify(gb46, e[i], est[i] if found[i] else None).kind
        assert kinds[i] == expect
    with pytest.raises(ValueError):
        classify_batch(gb46, e[:2], est[:2] ^ np.eye(92, dtype=np.uint8)[:2], [True, True])


def test_enumerate_examples(toric2, rng):
    zero = DegeneracySetId(np.zeros(16, dtype=np.uint8), np.zeros(16, dtype=np.uint8))
    members = enumerate_degeneracy_set(toric2, zero)
    assert len(members) == 64 == len({m.tobytes() for m in members})
    assert all(gf2.in_rowspace(toric2.h, m) for m in members)
    sid = DegeneracySetId.random(toric2, rng)
    members = enumerate_degeneracy_set(toric2, sid)
    synd = symplectic_gram(members, toric2.h)
    assert (synd == synd[0]).all()
    assert all(logically_equivalent(toric2, members[0], m) for m in members[1:])
    other = DegeneracySetId(sid.lam ^ toric2.logical_basis[0], sid.eps)
    assert not {m.tobytes() for m in members} & {m.tobytes() for m in enumerate_degeneracy_set(toric2, other)}
    with pytest.raises(ValueError):
        enumerate_degeneracy_set(build_toric(3), sid)


def test_random_set_ids_lie_in_their_subspaces(toric2, rng):
    for _ in range(50):
        sid = DegeneracySetId.random(toric2, rng)
        assert gf2.in_rowspace(toric2.logical_basis, sid.lam)
        assert gf2.in_rowspace(toric2.e_basis, sid.eps)


def _classify_by_enumeration(code, e, e_hat):
    """Oracle: e_hat's outcome from membership of e's degeneracy set."""
    if np.array_equal(e, e_hat):
        return OutcomeKind.T1S
    from asced.codes import decompose_error
    eps, _, lam = decompose_error(code, e)
    members = {m.tobytes() for m in enumerate_degeneracy_set(code, DegeneracySetId(lam, eps))}
    return OutcomeKind.T2S if e_hat.tobytes() in members else OutcomeKind.T2F


def test_classify_agrees_with_enumeration(toric2, rng):
    for _ in range(300):
        e = rng.integers(0, 2, 16, dtype=np.uint8)
        lam = gf2.matmul(rng.integers(0, 2, 4), toric2.logical_basis)
        e_hat = e ^ _random_member(toric2, rng) ^ lam if rng.random() < 0.9 else e.copy()
        assert classify(toric2, e, e_hat).kind == _classify_by_enumeration(toric2, e, e_hat)


def test_splitting_examples(toric2, rng):
    sid = DegeneracySetId.random(toric2, rng)
    t = np.zeros((1, 16), dtype=np.uint8)
    t[0, [0, 1, 4, 5]] = 1
    assert gf2.rank(np.vstack([toric2.h, toric2.logical_basis, t])) == 11
    rep = verify_splitting(toric2, t, sid)
    assert rep.ok and sorted(rep.counts.values()) == [32, 32]
    # a "splitter" inside rowspace(H) cannot split anything
    rep = verify_splitting(toric2, toric2.h[:1], sid)
    assert not rep.ok and sorted(rep.counts.values()) == [0, 64]
    # a logical operator as splitter commutes with all of S, so no split either
    assert not verify_splitting(toric2, toric2.logical_basis[:1], sid).ok


def test_theorem_exhaustive_single_splitters(toric2, rng):
    """For any t outside rowspace(S, L), exactly half of S has <t, sigma> = g for each g."""
    stabilizers = enumerate_degeneracy_set(toric2, DegeneracySetId(np.zeros(16, np.uint8), np.zeros(16, np.uint8)))
    tested = 0
    while tested < 100:
        t = rng.integers(0, 2, 16, dtype=np.uint8)
        if gf2.in_rowspace(np.vstack([toric2.h, toric2.logical_basis]), t):
            continue
        products = symplectic_gram(stabilizers, t[None])[:, 0]
        assert np.bincount(products, minlength=2).tolist() == [32, 32]
        tested += 1
