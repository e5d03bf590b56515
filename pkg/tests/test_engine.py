import random

import pytest

from conftest import base_as_names
from tnbpa.base import DecompositionBase, base_equal, initial_base
from tnbpa.engine import (
    CandidateMode,
    EngineInternalError,
    ExhaustiveGuardError,
    VerdictKind,
    _PartialBase,
    candidates_for,
    check_equivalence,
    compute_bisimilarity_base,
    lpftest,
    lpftest_realtime,
    refine,
    select_decreasing_rules,
)
from tnbpa.model import parse_system
from tnbpa.normalization import standardize
from tnbpa.oracle import GenParams, expansion_holds, random_system, verify_base_generators
from tnbpa.strings import NormedString


def test_select_decreasing_rules_tie_break(ex1_std):
    fixed = select_decreasing_rules(ex1_std)
    x = ex1_std.sys.constant_id("X")
    # X has decreasing rules b->eps, tau->X', a->eps; visible first, then 'a' < 'b'.
    assert fixed[x].label == "a" and fixed[x].rhs == ()
    yp = ex1_std.sys.constant_id("Y'")
    assert fixed[yp].label == "a"  # single decreasing rule is picked
    assert select_decreasing_rules(ex1_std) == fixed  # pure function


def test_first_iteration_candidates_sysb(sysb_std):
    fixed = select_decreasing_rules(sysb_std)
    base = initial_base(sysb_std)
    partial = _PartialBase(sysb_std.norms)
    partial.primes.add(0)  # B settled prime
    partial.primes.add(1)  # Y settled prime (as iteration 1 decides)
    a = sysb_std.sys.constant_id("A")
    cands = list(candidates_for(sysb_std, base, partial, a, fixed))
    # lpf is B; Y is a new prime between lpf and A, but norm boundaries keep
    # both candidates single constants of norm 1.
    assert [[sysb_std.sys.name(c) for c in d.ids] for d in cands] == [["B"], ["Y"]]


def test_candidate_skipped_without_norm_boundary():
    # M's fixed decreasing rule rewrites to Z of norm 2; testing head Z needs
    # a suffix of norm 1 inside the one-constant string Z, which has no cut.
    std = standardize(parse_system("constants: P Z M\nP -a-> eps\nZ -a-> P\nM -a-> Z\n"))
    fixed = select_decreasing_rules(std)
    base = DecompositionBase(
        3, [0, 1], {2: NormedString((1, 0), std.norms)}, std.norms
    )
    partial = _PartialBase(std.norms)
    partial.primes.update({0, 1})
    m = std.sys.constant_id("M")
    assert list(candidates_for(std, base, partial, m, fixed)) == []


def test_exhaustive_enumeration_is_lexicographic():
    std = standardize(parse_system(
        "constants: B Y N\nB -a-> eps\nY -b-> eps\nN -a-> Y\n"
    ))
    partial = _PartialBase(std.norms)
    partial.primes.update({0, 1})
    n = std.sys.constant_id("N")
    cands = list(candidates_for(std, initial_base(std), partial, n, None, CandidateMode.EXHAUSTIVE))
    names = [[std.sys.name(c) for c in d.ids] for d in cands]
    assert names == [["B", "B"], ["B", "Y"], ["Y", "B"], ["Y", "Y"]]


def test_exhaustive_guard():
    std = standardize(parse_system(
        "constants: B Y N\nB -a-> eps\nY -b-> eps\nN -a-> Y\n"
    ))
    partial = _PartialBase(std.norms)
    partial.primes.update({0, 1})
    with pytest.raises(ExhaustiveGuardError):
        list(candidates_for(
            std, initial_base(std), partial, 2, None, CandidateMode.EXHAUSTIVE, max_exhaustive=3
        ))


def test_lpftest_sysb_accepts_a_equals_b_at_step_four(sysb_std):
    base = initial_base(sysb_std)
    partial = _PartialBase(sysb_std.norms)
    partial.primes.update({0, 1})  # B prime, Y prime
    a = sysb_std.sys.constant_id("A")
    delta = NormedString((0,), sysb_std.norms)  # B
    res = lpftest(sysb_std, base, partial, a, delta)
    # A's silent decreasing step lands exactly on B, so the early accept fires.
    assert res.accepted and res.step == 4


def test_lpftest_example_one_rejects_y_equals_x_at_step_five(ex1_std):
    base = initial_base(ex1_std)
    partial = _PartialBase(ex1_std.norms)
    partial.primes.add(0)  # X'
    partial.equations[1] = NormedString((0,), ex1_std.norms)  # Y' = X'
    partial.primes.add(2)  # X became prime earlier in the pass
    y = ex1_std.sys.constant_id("Y")
    delta = NormedString((2,), ex1_std.norms)  # X
    res = lpftest(ex1_std, base, partial, y, delta)
    # X's a->eps has no decreasing answer from Y with the same decomposition.
    assert not res.accepted and res.step == 5


def test_partial_base_rejects_unsettled_lookup(ex1_std):
    partial = _PartialBase(ex1_std.norms)
    with pytest.raises(EngineInternalError, match="unsettled"):
        partial.dcmp((3,))


def test_refine_is_identity_on_final_base(ex1_std):
    fixed = select_decreasing_rules(ex1_std)
    final, _ = compute_bisimilarity_base(ex1_std)
    again, record = refine(ex1_std, final, fixed)
    assert base_equal(again, final)
    assert record.new_primes == ()


def test_final_base_example_one(ex1_std):
    base, trace = compute_bisimilarity_base(ex1_std)
    primes, equations = base_as_names(ex1_std, base)
    assert primes == {"X'", "X", "Y"}
    assert equations == {"Y'": ("X'",)}
    assert len(trace) == 2


def test_final_base_sysb(sysb_std):
    base, trace = compute_bisimilarity_base(sysb_std)
    primes, equations = base_as_names(sysb_std, base)
    assert primes == {"B", "Y"}
    assert equations == {"A": ("B",), "X": ("B", "Y")}


def test_single_constant_converges_immediately():
    std = standardize(parse_system("constants: K\nK -a-> eps\n"))
    base, trace = compute_bisimilarity_base(std)
    assert base_equal(base, initial_base(std))
    assert len(trace) == 1


def test_iteration_bound_and_monotone_primes():
    for seed in range(30):
        std = standardize(random_system(GenParams(constants=8, silent_prob=0.35, seed=seed)))
        base, trace = compute_bisimilarity_base(std)
        assert len(trace) <= std.n
        for rec in trace:
            assert set(rec.primes_before) <= set(rec.primes_after)
        for earlier, later in zip(trace, trace[1:]):
            assert earlier.primes_after == later.primes_before


def _bases_along_run(std, trace):
    out = [initial_base(std)]
    for rec in trace:
        eqs = {
            c.constant: NormedString(c.equation, std.norms)
            for c in rec.constants
            if c.equation is not None
        }
        out.append(DecompositionBase(std.n, set(rec.primes_after), eqs, std.norms))
    return out


def test_refinement_shrinks_the_congruence():
    rng = random.Random(21)
    for seed in range(8):
        std = standardize(random_system(GenParams(constants=7, silent_prob=0.3, seed=seed)))
        _, trace = compute_bisimilarity_base(std)
        bases = _bases_along_run(std, trace)
        for before, after in zip(bases, bases[1:]):
            for _ in range(40):
                p = tuple(rng.randrange(std.n) for _ in range(rng.randint(0, 3)))
                q = tuple(rng.randrange(std.n) for _ in range(rng.randint(0, 3)))
                if after.equivalent(p, q):
                    assert before.equivalent(p, q)


def test_prime_set_equality_implies_base_equality():
    for seed in range(10):
        std = standardize(random_system(GenParams(constants=7, silent_prob=0.3, seed=seed)))
        _, trace = compute_bisimilarity_base(std)
        bases = _bases_along_run(std, trace)
        for b1, b2 in zip(bases, bases[1:]):
            if b1.primes == b2.primes:
                assert base_equal(b1, b2)


def test_check_equivalence_verdicts(ex1_std):
    base, _ = compute_bisimilarity_base(ex1_std)
    x, y = ex1_std.parse_process("X"), ex1_std.parse_process("Y")
    xp, yp = ex1_std.parse_process("X'"), ex1_std.parse_process("Y'")
    assert check_equivalence(ex1_std, x, y, base=base).kind is VerdictKind.NOT_BISIMILAR
    assert check_equivalence(ex1_std, xp, yp, base=base).kind is VerdictKind.BISIMILAR
    assert check_equivalence(ex1_std, x, x, base=base).kind is VerdictKind.BISIMILAR
    assert check_equivalence(ex1_std, x, y, base=base).base is base


def test_mode_agreement():
    for seed in range(20):
        std = standardize(random_system(GenParams(constants=7, norm_cap=4, seed=seed)))
        pruned, _ = compute_bisimilarity_base(std, CandidateMode.PRUNED)
        exhaustive, _ = compute_bisimilarity_base(std, CandidateMode.EXHAUSTIVE)
        assert base_equal(pruned, exhaustive)


def test_realtime_decisions_match_figure_transcription():
    diverging = 0
    for seed in range(20):
        std = standardize(random_system(GenParams(constants=7, silent_prob=0.0, seed=seed)))
        assert std.is_realtime
        _, trace = compute_bisimilarity_base(std, compare_realtime=True)
        diverging += sum(rec.divergences for rec in trace)
        for rec in trace:
            for outcome in rec.constants:
                for cand in outcome.candidates:
                    assert cand.realtime_accepted == cand.accepted
    assert diverging == 0


def test_realtime_comparison_requires_silent_free(ex1_std):
    with pytest.raises(AssertionError):
        compute_bisimilarity_base(ex1_std, compare_realtime=True)


def test_lpftest_matches_realtime_directly():
    std = standardize(parse_system(
        "constants: B Y N\nB -a-> eps\nY -b-> eps\nN -a-> Y\nN -a-> B\n"
    ))
    base = initial_base(std)
    partial = _PartialBase(std.norms)
    partial.primes.update({0, 1})
    n = std.sys.constant_id("N")
    for ids in [(0, 0), (0, 1), (1, 0), (1, 1)]:
        delta = NormedString(ids, std.norms)
        assert lpftest(std, base, partial, n, delta).accepted == \
            lpftest_realtime(std, base, partial, n, delta).accepted


def test_equations_satisfy_branching_expansion():
    # Every equation of a final base passes one full game round in which
    # relatedness is decomposition equality and silent matching sequences are
    # enumerated exactly.
    for seed in range(10):
        std = standardize(random_system(GenParams(constants=7, silent_prob=0.35, seed=seed)))
        base, _ = compute_bisimilarity_base(std)
        relate = base.equivalent
        for i, rhs in base.equations.items():
            assert expansion_holds(std, relate, (i,), rhs.ids)


def test_lpftest_step_one_rejects_old_base_mismatch(ex1_std):
    final, _ = compute_bisimilarity_base(ex1_std)
    partial = _PartialBase(ex1_std.norms)
    partial.primes.add(0)
    yp = ex1_std.sys.constant_id("Y'")
    delta = NormedString((ex1_std.sys.constant_id("X"),), ex1_std.norms)
    res = lpftest(ex1_std, final, partial, yp, delta)
    assert not res.accepted and res.step == 1


def test_skipping_step_five_accepts_asymmetric_candidate():
    # P has an extra b-move that Q cannot match; only step 5 notices, and the
    # oracle refutes the wrong equation the mutated engine then produces.
    std = standardize(parse_system("constants: P Q\nP -a-> eps\nP -b-> eps\nQ -a-> eps\n"))
    good, _ = compute_bisimilarity_base(std)
    assert good.equations == {}
    bad, _ = compute_bisimilarity_base(std, skip_steps=frozenset({5}))
    q = std.sys.constant_id("Q")
    assert q in bad.equations
    report = verify_base_generators(std, bad, k_max=4, sample_budget=0)
    assert not report.ok


def test_mutated_engine_is_caught_by_the_oracle(sysb_std):
    # Skipping the increasing-transition check wrongly merges Y with B; the
    # oracle refutes the resulting base with a replayable certificate.
    good, _ = compute_bisimilarity_base(sysb_std)
    bad, _ = compute_bisimilarity_base(sysb_std, skip_steps=frozenset({3}))
    assert not base_equal(good, bad)
    report = verify_base_generators(sysb_std, bad, k_max=8, sample_budget=5)
    assert not report.ok
    assert any(c.kind == "equation" and c.distinction is not None for c in report.failures)


def test_trace_records_candidate_steps(ex1_std):
    _, trace = compute_bisimilarity_base(ex1_std)
    first = trace[0]
    y = ex1_std.sys.constant_id("Y")
    rec = next(c for c in first.constants if c.constant == y)
    assert rec.outcome == "prime"
    assert [cand.step for cand in rec.candidates] == [2, 5]


def test_empty_system():
    std = standardize(parse_system("constants:\n"))
    base, trace = compute_bisimilarity_base(std)
    assert base.primes == frozenset() and trace == []
    assert check_equivalence(std, (), (), base=base).kind is VerdictKind.BISIMILAR


def test_verdict_is_three_valued():
    kinds = {k.value for k in VerdictKind}
    assert kinds == {"bisimilar", "not-bisimilar", "unknown-at-bound"}
