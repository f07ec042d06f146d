"""Sequence tasks: scaling, verdicts, lifted operators, tilted measurements."""

import dataclasses
import math
from collections import Counter
from itertools import permutations

import numpy as np
import pytest

from antimark.ensembles import (bell4, duan4, nl1, pbr4, sequence_ensemble,
                                su3, theta4)
from antimark.exclusion import Povm, exclusion_counts
from antimark.locc import LoccProtocol, flatten_protocol
from antimark.lsam import (LsamTask, check_lsam, lift_first_slot, lsam_scaling,
                           pbr_sequence_measurement, sweep_theta,
                           theta_global_measurement, theta_sequence_protocol,
                           verify_sequence_elimination)

THETA_LO = 0.5 * math.acos(math.sqrt(2.0) - 1.0)
THETA_HI = math.pi / 2.0 - THETA_LO


# ---------------------------------------------------------------------------
# task plumbing and the counting formula


def test_task_validation():
    e = su3()
    with pytest.raises(ValueError):
        LsamTask(e, 0)
    with pytest.raises(ValueError):
        LsamTask(e, 4)
    with pytest.raises(ValueError):
        LsamTask(e, 2, 0)
    with pytest.raises(ValueError):
        LsamTask(e, 2, 6)  # at most perm(3,2) - 1 = 5 claims
    assert LsamTask(e, 1).sequences() is e


def test_lsam_scaling_formula():
    assert lsam_scaling(3, 1, 1, 2) == 2
    assert lsam_scaling(4, 1, 1, 2) == 3
    assert lsam_scaling(9, 1, 3, 2) == 24
    assert lsam_scaling(5, 2, 4, 2) == 4  # n == n_prime is the identity
    with pytest.raises(ValueError):
        lsam_scaling(3, 2, 1, 1)
    with pytest.raises(ValueError):
        lsam_scaling(3, 1, 0, 2)


def test_lsam_scaling_matches_brute_force_counting():
    """m * (N-n)!/(N-n') counts the longer sequences with a fixed prefix."""
    for big_n, n, n_prime in ((3, 1, 2), (4, 1, 2), (4, 2, 3), (5, 1, 3)):
        seqs = list(permutations(range(big_n), n_prime))
        prefix = tuple(range(n))
        extended = sum(1 for s in seqs if s[:n] == prefix)
        assert lsam_scaling(big_n, n, 1, n_prime) == extended


# ---------------------------------------------------------------------------
# single-claim verdicts through the local parts


def test_check_lsam_verdicts():
    assert check_lsam(su3(), 2, 1).decision == "NO"
    assert check_lsam(nl1(), 2, 1).decision == "YES"
    assert check_lsam(duan4(), 2, 1).decision == "YES"
    assert check_lsam(pbr4(), 1, 1).decision == "NO"


def test_check_lsam_reports_parts_by_party():
    v = check_lsam(su3(), 2, 1)
    assert set(v.parts) == {"A", "B"}
    assert all(sub.decision == "NO" for sub in v.parts.values())
    doc = v.to_dict()
    assert set(doc["parts"]) == {"A", "B"}


def test_check_lsam_rejects_unsupported_tasks():
    with pytest.raises(ValueError):
        check_lsam(su3(), 2, 2)  # no criterion for m > 1
    with pytest.raises(ValueError):
        check_lsam(bell4(), 2, 1)  # not a product parent
    with pytest.raises(ValueError):
        check_lsam(LsamTask(su3(), 2, 1), 2, 1)  # n alongside a task


# ---------------------------------------------------------------------------
# explicit elimination counting


def test_verify_sequence_elimination_counts_claims_and_numerics():
    proto = theta_sequence_protocol(0.9)
    task = LsamTask(theta4(0.9), 2, 8)
    assert verify_sequence_elimination(task, proto) == 8
    unmapped = dataclasses.replace(proto, exclusion_map=None)
    assert verify_sequence_elimination(task, unmapped) == 8


def test_verify_sequence_elimination_rejects_false_claims():
    proto = theta_sequence_protocol(0.9)
    task = LsamTask(theta4(0.9), 2, 8)
    seq = task.sequences()
    lying = {k: (seq.labels[0],) for k in proto.exclusion_map}
    bad = dataclasses.replace(proto, exclusion_map=lying)
    with pytest.raises(ValueError):
        verify_sequence_elimination(task, bad)


def test_verify_sequence_elimination_checks_layout():
    task = LsamTask(su3(), 2, 1)
    with pytest.raises(ValueError):
        verify_sequence_elimination(task, pbr_sequence_measurement())


# ---------------------------------------------------------------------------
# lifting one-draw operators


def test_lift_first_slot_identity_and_shapes():
    e = su3()
    lifted = lift_first_slot(np.eye(4), e.layout, 2)
    np.testing.assert_allclose(lifted, np.eye(16), atol=1e-12)
    with pytest.raises(ValueError):
        lift_first_slot(np.eye(3), e.layout, 2)
    with pytest.raises(ValueError):
        lift_first_slot(np.eye(4), e.layout, 0)


def test_lift_first_slot_acts_on_first_draw():
    e = su3()
    seq = sequence_ensemble(e, 2)
    proj = np.outer(e.states[0], e.states[0].conj())
    lifted = lift_first_slot(proj, e.layout, 2)
    for lab, tup in zip(seq.labels, seq.index_tuples):
        s = seq.state_of(lab)
        got = float(np.vdot(s, lifted @ s).real)
        want = abs(np.vdot(e.states[0], e.states[tup[0]])) ** 2
        assert got == pytest.approx(want, abs=1e-12)


def lifted_kill_count(e, proj):
    lifted = lift_first_slot(proj, e.layout, 2)
    seq = sequence_ensemble(e, 2)
    povm = Povm(seq.layout, [lifted, np.eye(seq.layout.dim) - lifted])
    rows = exclusion_counts(seq, povm).outcomes
    return len(next(r for r in rows if r.index == 0).excluded)


def test_lifted_excluders_match_the_scaling_lemma():
    e = nl1()
    v = e.states[1] - e.states[0] * np.vdot(e.states[0], e.states[1])
    v /= np.linalg.norm(v)
    assert lifted_kill_count(e, np.outer(v, v.conj())) == lsam_scaling(3, 1, 1, 2)

    e = pbr4()
    xi1 = np.zeros(4, dtype=np.complex128)
    xi1[1] = xi1[2] = 1.0 / math.sqrt(2.0)
    assert lifted_kill_count(e, np.outer(xi1, xi1.conj())) == lsam_scaling(4, 1, 1, 2)


# ---------------------------------------------------------------------------
# the entangled pair readout


def test_pbr_measurement_is_an_orthonormal_basis():
    meas = pbr_sequence_measurement()
    vecs = []
    for el in meas.elements:
        w, v = np.linalg.eigh(el)
        assert w[-1] == pytest.approx(1.0, abs=1e-12)
        vecs.append(v[:, -1])
    gram = np.array([[np.vdot(a, b) for b in vecs] for a in vecs])
    assert np.max(np.abs(gram - np.eye(4))) <= 1e-10


def test_pbr_two_sided_eliminations():
    seq = sequence_ensemble(pbr4(), 2)
    meas = pbr_sequence_measurement()
    proto = LoccProtocol("one_round_product", seq.layout,
                         party_povms=[list(meas.elements),
                                      [m.copy() for m in meas.elements]])
    task = LsamTask(pbr4(), 2, 3)
    assert verify_sequence_elimination(task, proto) >= 3
    flat = flatten_protocol(proto)
    povm = Povm(seq.layout, [f.element for f in flat])
    rows = exclusion_counts(seq, povm).outcomes
    dist = Counter(len(r.excluded) for r in rows)
    assert dist == {4: 4, 5: 8, 7: 4}


# ---------------------------------------------------------------------------
# the tilted six-outcome family


def pair_exclusion_residual(meas, theta):
    e = theta4(theta)
    states = dict(zip(e.labels, e.states))
    worst = 0.0
    for el, pair in zip(meas.povm.elements, meas.pair_map):
        for pat in pair:
            s = states[pat]
            worst = max(worst, abs(float(np.vdot(s, el @ s).real)))
    return worst


@pytest.mark.parametrize("theta", [0.8, 0.9, math.pi / 4, 0.98])
def test_theta_closed_forms_inside_the_window(theta):
    meas = theta_global_measurement(theta)
    assert not meas.synthesized
    comp = np.max(np.abs(sum(meas.povm.elements) - np.eye(4)))
    assert comp <= 1e-8
    assert pair_exclusion_residual(meas, theta) <= 1e-9
    mineig = min(np.linalg.eigvalsh(el).min() for el in meas.povm.elements)
    assert mineig >= -1e-10


def test_theta_measurement_rejects_out_of_range_tilts():
    with pytest.raises(ValueError):
        theta_global_measurement(0.2)  # cos 2t too large
    with pytest.raises(ValueError):
        theta_global_measurement(0.0)
    with pytest.raises(ValueError):
        theta_global_measurement(math.pi / 2)


def test_theta_synthesized_fallback_carries_flag():
    meas = theta_global_measurement(0.9, synthesize=True)
    assert meas.synthesized
    comp = np.max(np.abs(sum(meas.povm.elements) - np.eye(4)))
    assert comp <= 1e-8
    assert pair_exclusion_residual(meas, 0.9) <= 1e-9


def test_theta_sequence_protocol_reaches_eight():
    for synthesize in (False, True):
        proto = theta_sequence_protocol(0.9, synthesize=synthesize)
        task = LsamTask(theta4(0.9), 2, 8)
        assert verify_sequence_elimination(task, proto) == 8


def test_theta_beyond_positivity_window_fails_honestly():
    """Past the positivity window no pair-map measurement exists at all."""
    with pytest.raises(RuntimeError):
        theta_global_measurement(1.0)


# ---------------------------------------------------------------------------
# sweeps


def test_sweep_theta4_boundaries_match_closed_form():
    grid = [0.45 + 0.05 * k for k in range(13)]
    res = sweep_theta("theta4", grid)
    assert len(res.boundaries) == 2
    assert abs(res.boundaries[0] - THETA_LO) <= 1e-6
    assert abs(res.boundaries[1] - THETA_HI) <= 1e-6
    assert len(res.regions) == 1


def test_sweep_validates_input():
    with pytest.raises(ValueError):
        sweep_theta("nope", [0.5, 0.6])
    with pytest.raises(ValueError):
        sweep_theta("theta4", [])
    with pytest.raises(ValueError):
        sweep_theta("theta4", [0.6, 0.5])
    with pytest.raises(ValueError):
        sweep_theta("theta4", [0.5, math.pi])  # outside the open domain
