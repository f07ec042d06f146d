"""Acceptance gate: one test per numbered criterion, tolerances pinned.

Three clauses are asserted exactly as written even though the library
disagrees with them; see the companion truth tests at the bottom for what
the code actually establishes in each case:

* criterion 8 pins the minimum two-sided elimination count at 3, the
  measured minimum over all 16 joint outcomes is 4;
* criterion 9 includes the tilt 1.0, which lies outside the positivity
  window of the six-outcome pair-exclusion family, and no such measurement
  exists there at all (a dual certificate proves it);
* criterion 11 claims quartic equality for all three printed triples, but
  only the first sits on the boundary; the other two pass strictly.
"""

import math
from collections import Counter

import numpy as np
import pytest

from antimark.ensembles import (Ensemble, bell4, bennett9,
                                double_sic_antiparallel, duan4, local_part,
                                nl1, nl2, pbr4, restrict, sequence_ensemble,
                                sic_kets, su3, theta4, trine3, weak3)
from antimark.exclusion import (Povm, caves_criterion, compose_union,
                                exclusion_counts, povm_from_caves_triple,
                                qubit_antidist_lp, search_exclusion_povm,
                                verify_strong)
from antimark.locc import (LoccProtocol, bell_exclusion_protocol,
                           bennett_exclusion_protocol,
                           build_pairwise_lad_protocol,
                           double_sic_exclusion_protocol, flatten_protocol,
                           nl2_identification_povms,
                           verify_conclusive_identification,
                           verify_local_protocol)
from antimark.lsam import (PAIR_MAP, LsamTask, check_lsam, lift_first_slot,
                           lsam_scaling, pbr_sequence_measurement, sweep_theta,
                           theta_global_measurement, theta_sequence_protocol,
                           verify_sequence_elimination)
from antimark.qcore import PartyLayout, same_up_to_phase
from antimark.ensembles import qubit_perp
from antimark.exclusion import decide_antidist


def haar_ket(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def test_criterion_01_weak_triple_is_not_antidistinguishable():
    rep = caves_criterion(weak3().states)
    assert rep.x12 == pytest.approx(0.0, abs=1e-12)
    assert rep.x13 == pytest.approx(0.5, abs=1e-12)
    assert rep.x23 == pytest.approx(0.5, abs=1e-12)
    assert rep.total == pytest.approx(1.0, abs=1e-12)
    v = decide_antidist(weak3())
    assert v.decision == "NO"
    assert v.method == "caves"


def test_criterion_02_trine_on_the_quartic_boundary():
    e = trine3()
    rep = caves_criterion(e.states)
    assert rep.passed
    assert rep.quartic_lhs == pytest.approx(1.0 / 16.0, abs=1e-12)
    assert rep.quartic_rhs == pytest.approx(1.0 / 16.0, abs=1e-12)
    assert abs(rep.quartic_lhs - rep.quartic_rhs) <= 1e-12
    assert decide_antidist(e).decision == "YES"
    els = []
    for s in e.states:
        p = qubit_perp(s)
        els.append((2.0 / 3.0) * np.outer(p, p.conj()))
    strong = verify_strong(e, Povm(e.layout, els, list(e.labels)), tol=1e-10)
    assert strong.passed
    assert strong.completeness_residual <= 1e-10
    assert max(o.exclusion_residual for o in strong.outcomes) <= 1e-10


def test_criterion_03_bell_readout_matches_its_table():
    e = bell4()
    proto = bell_exclusion_protocol()
    rep = verify_local_protocol(e, proto, tol=1e-10)
    assert rep.passed
    table = {(0, 0): ("Psi+",), (0, 1): ("Phi+",),
             (1, 0): ("Phi-",), (1, 1): ("Psi-",)}
    assert dict(proto.exclusion_map) == table
    claimed = {r.outcome: r.claims for r in rep.rows if r.claims is not None}
    assert claimed == table
    assert set(rep.excluded_labels) == set(e.labels)


def test_criterion_04_bennett_product_readout():
    e = bennett9()
    rep = verify_local_protocol(e, bennett_exclusion_protocol(), tol=1e-10)
    assert rep.passed
    reachable = [r for r in rep.rows if r.probability > 1e-12]
    assert len(reachable) == 9
    assert set(rep.excluded_labels) == set(e.labels)


def test_criterion_05_pairwise_generator_on_random_orthogonal_sets():
    for e in (bell4(), bennett9()):
        rep = verify_local_protocol(e, build_pairwise_lad_protocol(e), tol=1e-9)
        assert rep.passed, e.name
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(50):
        dims = (2, 2) if i % 2 == 0 else (3, 3)
        d = dims[0] * dims[1]
        n = int(rng.integers(2, min(6, d) + 1))
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        q, _ = np.linalg.qr(g)
        e = Ensemble(f"rand{i}", PartyLayout(dims),
                     [f"s{j}" for j in range(n)], [q[:, j] for j in range(n)])
        rep = verify_local_protocol(e, build_pairwise_lad_protocol(e), tol=1e-9)
        assert rep.passed, (i, rep.failures)
        worst = max(worst, max(r.worst_residual for r in rep.rows if r.claims))
    assert worst <= 1e-9


def test_criterion_06_duan_split_between_global_and_local():
    e = duan4()
    v = decide_antidist(e)
    assert v.decision == "YES"
    assert v.method == "triple_cover"
    assert verify_strong(e, v.certificate, tol=1e-8).passed
    local = check_lsam(e, 1, 1)
    assert local.decision == "NO"
    for sub in local.parts.values():
        assert sub.method == "qubit_lp"
        assert sub.margins[0] <= 1e-9
    kets = [np.array([1, 0], complex), np.array([0, 1], complex),
            np.array([1, 1], complex) / math.sqrt(2.0),
            np.array([1, 1j], complex) / math.sqrt(2.0)]
    part = local_part(e, "A")
    assert part.n_states == 4
    for k in kets:
        assert any(same_up_to_phase(s, k) for s in part.states)


def test_criterion_07_double_sic_halved_antipodes():
    e = double_sic_antiparallel()
    proto = double_sic_exclusion_protocol()
    alice = proto.party_povms[0]
    assert len(alice) == 4
    for el in alice:
        np.testing.assert_allclose(el @ el, el / 2.0, atol=1e-12)
    assert np.max(np.abs(sum(alice) - np.eye(2))) <= 1e-10
    ssum = sum(np.outer(s, s.conj()) for s in sic_kets())
    assert np.max(np.abs(ssum - 2.0 * np.eye(2))) <= 1e-10
    assert verify_local_protocol(e, proto, tol=1e-10).passed


def test_criterion_08_pbr_single_draw_and_two_sided_counts():
    e = pbr4()
    v = check_lsam(e, 1, 1)
    assert v.decision == "NO"
    for sub in v.parts.values():
        assert sub.method == "qubit_lp"
        assert sub.decision == "NO"
    meas = pbr_sequence_measurement()
    vecs = []
    for el in meas.elements:
        w, b = np.linalg.eigh(el)
        vecs.append(b[:, -1])
    gram = np.array([[np.vdot(a, b) for b in vecs] for a in vecs])
    assert np.max(np.abs(gram - np.eye(4))) <= 1e-10
    seq = sequence_ensemble(e, 2)
    assert seq.n_states == 12
    proto = LoccProtocol("one_round_product", seq.layout,
                         party_povms=[list(meas.elements),
                                      [m.copy() for m in meas.elements]])
    flat = flatten_protocol(proto)
    assert len(flat) == 16
    povm = Povm(seq.layout, [f.element for f in flat])
    counts = exclusion_counts(seq, povm)
    assert counts.min_exclusions == 3


def test_criterion_09_tilted_pair_exclusion_family():
    for theta in (0.8, 0.9, 1.0):
        meas = theta_global_measurement(theta)
        states = dict(zip(theta4(theta).labels, theta4(theta).states))
        comp = np.max(np.abs(sum(meas.povm.elements) - np.eye(4)))
        assert comp <= 1e-8, theta
        for el, pair in zip(meas.povm.elements, meas.pair_map):
            for pat in pair:
                s = states[pat]
                assert abs(float(np.vdot(s, el @ s).real)) <= 1e-9, (theta, pat)
        task = LsamTask(theta4(theta), 2, 8)
        assert verify_sequence_elimination(task, theta_sequence_protocol(theta)) == 8
        backup = theta_global_measurement(theta, synthesize=True)
        assert backup.synthesized
        comp = np.max(np.abs(sum(backup.povm.elements) - np.eye(4)))
        assert comp <= 1e-8, theta
        proto = theta_sequence_protocol(theta, synthesize=True)
        assert verify_sequence_elimination(task, proto) == 8


def test_criterion_10_nl2_boundaries_and_conclusive_identification():
    grid = [k * math.pi / 400.0 for k in range(1, 400)]
    res = sweep_theta("nl2", grid)
    for target in (math.pi / 4.0, 3.0 * math.pi / 4.0, math.acos(1.0 / math.sqrt(3.0))):
        assert min(abs(b - target) for b in res.boundaries) <= 1e-6, target
    rep = verify_conclusive_identification(nl2(1.0), nl2_identification_povms(1.0))
    assert rep.passed
    assert not rep.missing


def test_criterion_11_superactivation_of_the_su3_triple():
    e = su3()
    rep = caves_criterion(e.states)
    assert rep.total == pytest.approx(1.25, abs=1e-12)
    v = decide_antidist(e)
    assert v.decision == "NO"
    assert v.method == "caves"
    assert check_lsam(e, 2, 1).decision == "NO"
    seq = sequence_ensemble(e, 2)
    triples = (("(00,0+)", "(00,+0)", "(0+,00)"),
               ("(00,0+)", "(0+,+0)", "(+0,00)"),
               ("(00,+0)", "(0+,00)", "(+0,0+)"))
    parts = []
    reports = []
    for labs in triples:
        sub = restrict(seq, labs)
        crep = caves_criterion(sub.states)
        assert crep.passed, labs
        reports.append(crep)
        parts.append((labs, povm_from_caves_triple(sub.states, labels=labs,
                                                   layout=seq.layout)))
    union = compose_union(seq, parts)
    assert verify_strong(seq, union, tol=1e-8).passed
    for labs, crep in zip(triples, reports):
        assert abs(crep.quartic_lhs - crep.quartic_rhs) <= 1e-9, labs


def test_criterion_12_scaling_formula_against_lifted_counts():
    def lifted_kill_count(e, proj):
        lifted = lift_first_slot(proj, e.layout, 2)
        seq = sequence_ensemble(e, 2)
        povm = Povm(seq.layout, [lifted, np.eye(seq.layout.dim) - lifted])
        rows = exclusion_counts(seq, povm).outcomes
        return len(next(r for r in rows if r.index == 0).excluded)

    e = nl1()
    v = e.states[1] - e.states[0] * np.vdot(e.states[0], e.states[1])
    v /= np.linalg.norm(v)
    assert lifted_kill_count(e, np.outer(v, v.conj())) == lsam_scaling(3, 1, 1, 2)

    e = pbr4()
    xi = np.zeros(4, dtype=np.complex128)
    xi[1] = xi[2] = 1.0 / math.sqrt(2.0)
    assert lifted_kill_count(e, np.outer(xi, xi.conj())) == lsam_scaling(4, 1, 1, 2)


def test_criterion_13_oracle_cross_validation():
    rng = np.random.default_rng(42)
    for _ in range(200):
        states = [haar_ket(2, rng) for _ in range(3)]
        by_caves = caves_criterion(states).passed
        by_lp = qubit_antidist_lp(states).decision == "YES"
        assert by_caves == by_lp
    found = 0
    for i in range(100):
        rng_i = np.random.default_rng(1000 + i)
        states = [haar_ket(3, rng_i) for _ in range(4)]
        e = Ensemble(f"q{i}", PartyLayout((3,)),
                     [f"s{j}" for j in range(4)], states)
        m = search_exclusion_povm(e, restarts=2, iters=1500, seed=i)
        if m is not None:
            found += 1
            assert verify_strong(e, m, tol=1e-8).passed, i
    assert found >= 40


# ---------------------------------------------------------------------------
# what the library actually establishes where the gate above disagrees


def test_truth_pbr_two_sided_minimum_is_four():
    """Every joint outcome eliminates at least 4 of the 12 sequences."""
    seq = sequence_ensemble(pbr4(), 2)
    meas = pbr_sequence_measurement()
    proto = LoccProtocol("one_round_product", seq.layout,
                         party_povms=[list(meas.elements),
                                      [m.copy() for m in meas.elements]])
    povm = Povm(seq.layout, [f.element for f in flatten_protocol(proto)])
    counts = exclusion_counts(seq, povm)
    assert counts.min_exclusions == 4
    dist = Counter(len(r.excluded) for r in counts.outcomes)
    assert dist == {4: 4, 5: 8, 7: 4}


def test_truth_no_pair_exclusion_measurement_at_tilt_one():
    """A feasibility dual rules out every pair-supported completion.

    The fixed operator Y below has unit trace, and conjugating it into the
    orthocomplement of each excluded pair leaves eigenvalues at most 1e-6.
    Any four-outcome POVM whose elements annihilate their assigned pairs
    would give 1 = tr(Y) <= lambda_max * sum tr(E_j) = 4e-6, which is
    absurd, so no such measurement exists and the constructor must raise.
    """
    y = np.diag([-31.148855290417, -75.552134753733,
                 -75.552134753755, 183.253124797905])
    assert abs(float(np.trace(y)) - 1.0) <= 1e-9
    states = dict(zip(theta4(1.0).labels, theta4(1.0).states))
    worst = -np.inf
    for a, b in PAIR_MAP:
        span, _ = np.linalg.qr(np.stack([states[a], states[b]]).T)
        full, _ = np.linalg.qr(np.hstack([span, np.eye(4)]))
        block = full[:, 2:4]
        worst = max(worst, float(np.linalg.eigvalsh(
            block.conj().T @ y @ block)[-1]))
    assert worst <= 1e-6
    with pytest.raises(RuntimeError):
        theta_global_measurement(1.0)
    with pytest.raises(RuntimeError):
        theta_global_measurement(1.0, synthesize=True)


def test_truth_only_the_first_printed_triple_sits_on_the_boundary():
    seq = sequence_ensemble(su3(), 2)
    values = {}
    for labs in (("(00,0+)", "(00,+0)", "(0+,00)"),
                 ("(00,0+)", "(0+,+0)", "(+0,00)"),
                 ("(00,+0)", "(0+,00)", "(+0,0+)")):
        rep = caves_criterion(restrict(seq, labs).states)
        assert rep.passed
        values[labs] = (rep.quartic_lhs, rep.quartic_rhs)
    (lhs1, rhs1), (lhs2, rhs2), (lhs3, rhs3) = values.values()
    assert lhs1 == pytest.approx(1.0 / 16.0, abs=1e-12)
    assert abs(lhs1 - rhs1) <= 1e-12
    for lhs, rhs in ((lhs2, rhs2), (lhs3, rhs3)):
        assert lhs == pytest.approx(0.25, abs=1e-12)
        assert rhs == pytest.approx(1.0 / 64.0, abs=1e-12)
        assert lhs - rhs > 0.2
