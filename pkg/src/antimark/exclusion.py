"""Strong exclusion measurements: certificates, exact criteria, search, decision.

The decision routine prefers exact criteria (the three-state overlap test and
the single-qubit weight program), then tries to cover the ensemble with
certified three-state measurements, then runs a direct feasibility search.  A
NO only ever comes from an exact criterion; a failed search leaves UNKNOWN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .ensembles import Ensemble, restrict
from .qcore import (DEFAULT_TOL, PartyLayout, is_hermitian, min_eigenvalue,
                    same_up_to_phase)
from .simplex import simplex_maximize

BOUNDARY_TOL = 1e-9


def _ket(s) -> np.ndarray:
    v = s.amps if hasattr(s, "amps") else s
    return np.asarray(v, dtype=np.complex128).reshape(-1)


def _density(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


def _tr(rho: np.ndarray, e: np.ndarray) -> float:
    # Tr(rho e) for Hermitian factors
    return float(np.vdot(e, rho).real)


def _mat_to_pairs(m: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


# ---------------------------------------------------------------------------
# measurements


@dataclass
class Povm:
    """A labeled measurement: positive elements summing to the identity.

    ``labels[i]`` names the state element ``i`` is dedicated to excluding, or
    is None for bystander outcomes.
    """

    layout: PartyLayout
    elements: list[np.ndarray]
    labels: list[str | None] | None = None
    name: str = ""

    def __post_init__(self):
        if not self.elements:
            raise ValueError("a POVM needs at least one element")
        d = self.layout.dim
        mats = []
        for i, m in enumerate(self.elements):
            m = np.asarray(m, dtype=np.complex128)
            if m.shape != (d, d):
                raise ValueError(f"element {i}: expected shape {(d, d)}, got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise ValueError(f"element {i} has non-finite entries")
            mats.append(m)
        self.elements = mats
        if self.labels is None:
            self.labels = [None] * len(mats)
        else:
            self.labels = list(self.labels)
        if len(self.labels) != len(mats):
            raise ValueError("labels and elements must have equal length")

    @property
    def n_outcomes(self) -> int:
        return len(self.elements)

    def completeness_residual(self) -> float:
        total = np.zeros((self.layout.dim,) * 2, dtype=np.complex128)
        for m in self.elements:
            total = total + m
        return float(np.max(np.abs(total - np.eye(self.layout.dim))))

    def hermiticity_residual(self) -> float:
        return max(float(np.max(np.abs(m - m.conj().T))) for m in self.elements)

    def min_eigenvalue(self) -> float:
        return min(min_eigenvalue((m + m.conj().T) / 2) for m in self.elements)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dims": list(self.layout.dims),
            "labels": list(self.labels),
            "elements": [_mat_to_pairs(m) for m in self.elements],
        }


# ---------------------------------------------------------------------------
# strong-exclusion certificate checking


@dataclass
class OutcomeReport:
    index: int
    label: str | None
    firing: float
    exclusion_residual: float | None
    excluded: tuple[str, ...]
    zero: bool
    redundant: bool


@dataclass
class StrongReport:
    passed: bool
    povm_ok: bool
    condition1_ok: bool
    condition2_ok: bool
    completeness_residual: float
    min_eigenvalue: float
    outcomes: list[OutcomeReport]
    failures: list[str]
    tol: float


def verify_strong(e: Ensemble, m: Povm, tol: float = DEFAULT_TOL) -> StrongReport:
    """Check that a labeled POVM strongly excludes every state of the ensemble.

    Requirements: valid POVM (PSD within tol, sums to identity within tol),
    every labeled element annihilates its state (condition 1), and for every
    state some element dedicated to it fires under the uniform mixture
    (condition 2).  Unlabeled elements may ride along; numerically zero ones
    are flagged redundant, nonzero ones must fire.

    Structural defects raise ValueError: mismatched layouts, labels naming no
    state, states with no dedicated element, non-Hermitian elements.
    """
    if m.layout.dims != e.layout.dims:
        raise ValueError("POVM layout does not match the ensemble layout")
    known = set(e.labels)
    for lab in m.labels:
        if lab is not None and lab not in known:
            raise ValueError(f"POVM label {lab!r} names no ensemble state")
    carried = {lab for lab in m.labels if lab is not None}
    missing = [lab for lab in e.labels if lab not in carried]
    if missing:
        raise ValueError(f"no element is dedicated to excluding: {missing}")
    for i, mat in enumerate(m.elements):
        if not is_hermitian(mat, tol):
            raise ValueError(f"element {i} is not Hermitian")

    rhos = {lab: _density(s) for lab, s in zip(e.labels, e.states)}
    failures: list[str] = []
    comp = m.completeness_residual()
    mineig = m.min_eigenvalue()
    povm_ok = comp <= tol and mineig >= -tol
    if comp > tol:
        failures.append(f"completeness residual {comp:.3e} exceeds tol")
    if mineig < -tol:
        failures.append(f"minimum eigenvalue {mineig:.3e} below -tol")

    rows: list[OutcomeReport] = []
    fired = {lab: False for lab in e.labels}
    cond1 = True
    for i, (mat, lab) in enumerate(zip(m.elements, m.labels)):
        zero = float(np.max(np.abs(mat))) <= tol
        per = {x: _tr(rhos[x], mat) for x in e.labels}
        firing = float(sum(per.values()))
        excluded = tuple(x for x in e.labels if per[x] <= tol)
        resid = per[lab] if lab is not None else None
        if lab is not None and resid > tol:
            cond1 = False
            failures.append(f"element {i} does not exclude {lab!r}: residual {resid:.3e}")
        if lab is not None and firing > tol:
            fired[lab] = True
        redundant = zero or (lab is None and len(excluded) == 0)
        rows.append(OutcomeReport(i, lab, firing, resid, excluded, zero, redundant))

    cond2 = True
    for lab in e.labels:
        if not fired[lab]:
            cond2 = False
            failures.append(f"no firing element is dedicated to {lab!r}")
    for row in rows:
        if row.label is None and not row.zero and row.firing <= tol:
            cond2 = False
            failures.append(f"unlabeled element {row.index} never fires")

    passed = povm_ok and cond1 and cond2
    return StrongReport(passed, povm_ok, cond1, cond2, comp, mineig, rows, failures, tol)


# ---------------------------------------------------------------------------
# three-state overlap criterion


@dataclass
class CavesReport:
    x12: float
    x13: float
    x23: float
    total: float
    quartic_lhs: float
    quartic_rhs: float
    sum_ok: bool
    quartic_ok: bool
    boundary_tol: float

    @property
    def passed(self) -> bool:
        return self.sum_ok and self.quartic_ok

    def to_dict(self) -> dict:
        return {
            "x12": self.x12, "x13": self.x13, "x23": self.x23,
            "total": self.total,
            "quartic_lhs": self.quartic_lhs, "quartic_rhs": self.quartic_rhs,
            "sum_ok": self.sum_ok, "quartic_ok": self.quartic_ok,
            "passed": self.passed, "boundary_tol": self.boundary_tol,
        }


def caves_criterion(states, boundary_tol: float = BOUNDARY_TOL) -> CavesReport:
    """Exact antidistinguishability test for exactly three pure states.

    With x_ij the squared overlaps, the triple passes iff x12+x13+x23 < 1 and
    (1 - sum)^2 >= 4 x12 x13 x23.  The boundary tolerance widens the quartic
    inequality (equality instances pass) and tightens the strict sum.
    """
    vecs = [_ket(s) for s in states]
    if len(vecs) != 3:
        raise ValueError(f"the three-state criterion needs exactly 3 states, got {len(vecs)}")
    if len({v.size for v in vecs}) != 1:
        raise ValueError("states must share a dimension")
    x12 = abs(np.vdot(vecs[0], vecs[1])) ** 2
    x13 = abs(np.vdot(vecs[0], vecs[2])) ** 2
    x23 = abs(np.vdot(vecs[1], vecs[2])) ** 2
    total = x12 + x13 + x23
    lhs = (1.0 - total) ** 2
    rhs = 4.0 * x12 * x13 * x23
    sum_ok = bool(total < 1.0 - boundary_tol)
    quartic_ok = bool(lhs >= rhs - boundary_tol)
    return CavesReport(float(x12), float(x13), float(x23), float(total),
                       float(lhs), float(rhs), sum_ok, quartic_ok, boundary_tol)


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class Verdict:
    decision: str  # "YES" | "NO" | "UNKNOWN"
    method: str
    margins: list[float] = field(default_factory=list)
    certificate: Povm | None = None
    alphas: list[float] | None = None
    triples: list[tuple[str, str, str]] | None = None
    caves: CavesReport | None = None
    parts: dict[str, "Verdict"] | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        def num(x):
            return float(x) if x is not None and math.isfinite(x) else None
        return {
            "decision": self.decision,
            "method": self.method,
            "margins": [num(x) for x in self.margins],
            "alphas": None if self.alphas is None else [num(a) for a in self.alphas],
            "triples": None if self.triples is None else [list(t) for t in self.triples],
            "caves": None if self.caves is None else self.caves.to_dict(),
            "parts": None if self.parts is None else
                     {k: v.to_dict() for k, v in self.parts.items()},
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "detail": self.detail,
        }


# ---------------------------------------------------------------------------
# single-qubit weight program


def _vec4(h: np.ndarray) -> np.ndarray:
    # Hermitian 2x2 -> R^4 coordinates
    return np.array([h[0, 0].real, h[1, 1].real, h[0, 1].real, h[0, 1].imag])


def _min_weight_completion(projs: list[np.ndarray]):
    """Maximize the smallest weight t with sum_i (s_i + t) P_i = I, s_i >= 0.

    Returns (status, weights, t) where weights are s_i + t; status is
    "optimal" or "infeasible".
    """
    r = len(projs)
    A = np.zeros((4, r + 2))
    for i, p in enumerate(projs):
        A[:, i] = _vec4(p)
    total = _vec4(sum(projs))
    A[:, r] = total
    A[:, r + 1] = -total
    b = np.array([1.0, 1.0, 0.0, 0.0])
    c = np.zeros(r + 2)
    c[r] = 1.0
    c[r + 1] = -1.0
    res = simplex_maximize(c, A, b)
    if res.status == "infeasible":
        return "infeasible", None, None
    if res.status != "optimal":
        raise RuntimeError(f"weight program ended with status {res.status!r}")
    t = float(res.value)
    weights = [float(res.x[i]) + t for i in range(r)]
    return "optimal", weights, t


def qubit_antidist_lp(states, labels=None, tol: float = DEFAULT_TOL) -> Verdict:
    """Exact decision for any number of single-qubit pure states.

    Looks for weights alpha_i > 0 with sum_i alpha_i |psi_i><psi_i| = I by
    maximizing the smallest weight.  YES iff the optimum exceeds tol; the
    witness measurement sends each state to its antipodal projector scaled by
    its weight.  States equal up to phase are merged before solving and the
    merged weight is split evenly across them.
    """
    vecs = [_ket(s) for s in states]
    if len(vecs) < 2:
        raise ValueError("need at least two states")
    if any(v.size != 2 for v in vecs):
        raise ValueError("the weight program applies to single-qubit states only")
    if labels is None:
        labels = [f"s{i}" for i in range(len(vecs))]
    labels = list(labels)
    if len(labels) != len(vecs):
        raise ValueError("labels and states must have equal length")

    reps: list[int] = []
    owner: list[int] = []
    for i, v in enumerate(vecs):
        for r, j in enumerate(reps):
            if same_up_to_phase(v, vecs[j]):
                owner.append(r)
                break
        else:
            owner.append(len(reps))
            reps.append(i)
    mult = [owner.count(r) for r in range(len(reps))]
    projs = [_density(vecs[j]) for j in reps]

    status, weights, t = _min_weight_completion(projs)
    if status == "infeasible":
        return Verdict("NO", "qubit_lp", margins=[],
                       detail="identity is outside the cone of the state projectors")
    alphas = [weights[owner[i]] / mult[owner[i]] for i in range(len(vecs))]
    if t <= tol:
        return Verdict("NO", "qubit_lp", margins=[t], alphas=alphas,
                       detail=f"best smallest weight {t:.3e} is not positive")

    elements = [a * (np.eye(2) - _density(v)) for a, v in zip(alphas, vecs)]
    povm = Povm(PartyLayout((2,)), elements, labels, name="antipode witness")
    check = Ensemble("qubit set", PartyLayout((2,)), labels, vecs)
    rep = verify_strong(check, povm, tol=max(tol, 1e-10))
    if not rep.passed:
        raise RuntimeError(f"witness verification failed: {rep.failures[:2]}")
    return Verdict("YES", "qubit_lp", margins=[t], alphas=alphas, certificate=povm,
                   detail=f"smallest completion weight {t:.6g}")


# ---------------------------------------------------------------------------
# union composition


def compose_union(e: Ensemble, parts, tol: float = DEFAULT_TOL) -> Povm:
    """Merge per-subset exclusion measurements into one for the whole ensemble.

    ``parts`` is a list of (labels, Povm) pairs whose label sets must jointly
    cover every state.  Each sub-measurement is re-verified on its restricted
    ensemble, scaled by 1/len(parts), and concatenated with labels kept, so
    the result passes verify_strong on the full ensemble by construction.
    """
    parts = list(parts)
    if not parts:
        raise ValueError("need at least one subset")
    covered: set[str] = set()
    for labs, _ in parts:
        covered.update(labs)
    missing = [lab for lab in e.labels if lab not in covered]
    if missing:
        raise ValueError(f"subsets do not cover: {missing}")
    k = len(parts)
    elements: list[np.ndarray] = []
    labels: list[str | None] = []
    for labs, sub in parts:
        sub_e = restrict(e, labs)
        rep = verify_strong(sub_e, sub, tol=tol)
        if not rep.passed:
            raise ValueError(f"subset {list(labs)} fails verification: {rep.failures[:1]}")
        for mat, lab in zip(sub.elements, sub.labels):
            elements.append(mat / k)
            labels.append(lab)
    return Povm(e.layout, elements, labels, name=f"union of {k} subsets")


# ---------------------------------------------------------------------------
# alternating-projection feasibility search


class _AffineProjector:
    """Orthogonal projector onto {(E_j): sum E_j = I, Tr(rho E_j) = 0 for the
    listed densities}, in the Frobenius geometry of Hermitian tuples."""

    def __init__(self, forbidden: list[list[np.ndarray]], dim: int):
        self.k = len(forbidden)
        self.dim = dim
        self.pairs = [(j, np.asarray(r, dtype=np.complex128))
                      for j, group in enumerate(forbidden) for r in group]
        n = len(self.pairs)
        m = np.zeros((n, n))
        for a, (j, ra) in enumerate(self.pairs):
            for b, (i, rb) in enumerate(self.pairs):
                ip = float(np.vdot(ra, rb).real)
                m[a, b] = (ip if i == j else 0.0) - ip / self.k
        self.solver = np.linalg.pinv(m, rcond=1e-12)

    def project(self, stack: np.ndarray) -> np.ndarray:
        # stack has shape (k, dim, dim)
        resid = np.eye(self.dim) - stack.sum(axis=0)
        rhs = np.empty(len(self.pairs))
        for a, (j, r) in enumerate(self.pairs):
            rhs[a] = -float(np.vdot(r, stack[j]).real) - float(np.vdot(r, resid).real) / self.k
        mu = self.solver @ rhs
        shift = np.zeros_like(stack)
        for a, (j, r) in enumerate(self.pairs):
            shift[j] += mu[a] * r
        lam = (resid - shift.sum(axis=0)) / self.k
        return stack + lam[None, :, :] + shift

    def residual(self, stack: np.ndarray) -> float:
        comp = float(np.max(np.abs(stack.sum(axis=0) - np.eye(self.dim))))
        excl = max((abs(float(np.vdot(r, stack[j]).real)) for j, r in self.pairs),
                   default=0.0)
        return max(comp, excl)


def _psd_clip(stack: np.ndarray) -> np.ndarray:
    h = (stack + np.conj(np.swapaxes(stack, 1, 2))) / 2
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    return (v * w[:, None, :]) @ np.conj(np.swapaxes(v, 1, 2))


def _dr_run(proj: _AffineProjector, iters: int, tol: float,
            rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Douglas-Rachford splitting between the PSD cone and the affine set.

    Returns the best PSD iterate seen together with its constraint residual;
    callers decide whether that residual is small enough.  Stops early once
    the residual drops below tol or stalls for 400 consecutive checks.
    """
    k, d = proj.k, proj.dim
    g = rng.normal(size=(k, d, d)) + 1j * rng.normal(size=(k, d, d))
    x = np.einsum("jab,jcb->jac", g, g.conj())
    x *= d / max(float(np.einsum("jaa->", x).real), 1e-12)

    best = np.inf
    best_stack = _psd_clip(x)
    since_best = 0
    for _ in range(iters):
        y = _psd_clip(x)
        res = proj.residual(y)
        if res < best * 0.99:
            best = res
            best_stack = y
            since_best = 0
        else:
            since_best += 1
        if res < tol:
            return y, res
        if since_best > 400:
            break
        x = x + proj.project(2.0 * y - x) - y
    return best_stack, best


def _dr_feasible(forbidden: list[list[np.ndarray]], dim: int, restarts: int,
                 iters: int, tol: float, seed: int):
    """Yield feasible PSD tuples from successive deterministic restarts."""
    proj = _AffineProjector(forbidden, dim)
    for r in range(restarts):
        rng = np.random.default_rng(seed + 7919 * r)
        cand, res = _dr_run(proj, iters, tol, rng)
        if res < tol:
            yield [cand[j] for j in range(proj.k)]


def _orthocomplement(vectors: list[np.ndarray], dim: int) -> np.ndarray:
    """Columns form an orthonormal basis of the joint orthocomplement."""
    m = np.column_stack([np.asarray(v, dtype=np.complex128) for v in vectors])
    u, s, _ = np.linalg.svd(m, full_matrices=True)
    rank = int(np.sum(s > 1e-12))
    return u[:, rank:]


def _support_feasible(groups: list[list[np.ndarray]], dim: int,
                      restarts: int = 3, iters: int = 4000,
                      tol: float = 1e-12, seed: int = 0
                      ) -> list[np.ndarray] | None:
    """POVM whose j-th element is supported on the orthocomplement of the
    j-th ket group, so the group exclusions hold exactly by construction.

    Works in the reduced coordinates of one Hermitian block per support and
    runs Douglas-Rachford between the per-block PSD cones and the affine
    completeness constraint.  Because exclusion is structural, tangency of
    the exclusion equalities with the PSD cone cannot slow the iteration;
    a stall here means the completeness target is out of reach.  Returns
    the full-dimension elements, or None when no restart closes the gap.
    """
    bases = [_orthocomplement(g, dim) for g in groups]
    blocks = [_hermitian_basis(b.shape[1]) for b in bases]
    cols = []
    for b, basis in zip(bases, blocks):
        for g in basis:
            m = b @ g @ b.conj().T
            cols.append(np.concatenate([m.real.ravel(), m.imag.ravel()]))
    lin = np.column_stack(cols)
    target = np.concatenate([np.eye(dim).ravel(), np.zeros(dim * dim)])
    pinv = np.linalg.pinv(lin, rcond=1e-12)

    def to_blocks(svec: np.ndarray) -> list[np.ndarray]:
        out, i = [], 0
        for basis in blocks:
            m = np.zeros_like(basis[0])
            for g in basis:
                m = m + svec[i] * g
                i += 1
            out.append(m)
        return out

    def from_blocks(ms: list[np.ndarray]) -> np.ndarray:
        return np.array([float(np.vdot(g, m).real)
                         for m, basis in zip(ms, blocks) for g in basis])

    for r in range(restarts):
        rng = np.random.default_rng(seed + 7919 * r)
        x = rng.normal(size=lin.shape[1])
        best = np.inf
        since_best = 0
        for _ in range(iters):
            clipped = []
            for m in to_blocks(x):
                w, v = np.linalg.eigh(m)
                clipped.append((v * np.clip(w, 0.0, None)) @ v.conj().T)
            y = from_blocks(clipped)
            res = float(np.max(np.abs(lin @ y - target)))
            if res < tol:
                return [b @ m @ b.conj().T for b, m in zip(bases, clipped)]
            if res < best * 0.99:
                best = res
                since_best = 0
            else:
                since_best += 1
                if since_best > 400:
                    break
            refl = 2.0 * y - x
            x = x + refl - pinv @ (lin @ refl - target) - y
    return None


def _hermitian_basis(d: int) -> list[np.ndarray]:
    out = []
    for a in range(d):
        m = np.zeros((d, d), dtype=np.complex128)
        m[a, a] = 1.0
        out.append(m)
    rt = 1.0 / math.sqrt(2.0)
    for a in range(d):
        for b in range(a + 1, d):
            m = np.zeros((d, d), dtype=np.complex128)
            m[a, b] = m[b, a] = rt
            out.append(m)
            m = np.zeros((d, d), dtype=np.complex128)
            m[a, b] = -1j * rt
            m[b, a] = 1j * rt
            out.append(m)
    return out


def _unitary_exp(k: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(k)
    return (v * np.exp(1j * w)) @ v.conj().T


def _projective_polish(cand: np.ndarray, states: list[np.ndarray],
                       warmup: int = 60, newton_iters: int = 40
                       ) -> list[np.ndarray] | None:
    """Round a near-feasible stack to an exact antidistinguishing basis.

    Applies when the state count equals the dimension, so a feasible point
    can be a projective measurement: rows of a unitary with the j-th row
    orthogonal to state j.  First alternates exact per-row exclusion with
    closest-unitary rounding, then drives the remaining overlaps to machine
    zero with damped Gauss-Newton steps along the unitary group.  The result
    is exactly complete by construction; returns None if the overlaps do not
    collapse, which signals no projective solution near the candidate.
    """
    d = len(states)
    w = np.stack([np.linalg.eigh(cand[j])[1][:, -1] for j in range(d)])
    for _ in range(warmup):
        for j in range(d):
            w[j] -= states[j] * np.vdot(states[j], w[j])
        u, _, vt = np.linalg.svd(w)
        w = u @ vt

    basis = _hermitian_basis(d)
    jac = np.zeros((2 * d, len(basis)))
    for _ in range(newton_iters):
        f = np.array([np.vdot(states[j], w[j]) for j in range(d)])
        off = float(np.max(np.abs(f)))
        if off < 1e-13:
            break
        for p, b in enumerate(basis):
            dv = np.array([1j * np.vdot(states[j], b @ w[j]) for j in range(d)])
            jac[:d, p] = dv.real
            jac[d:, p] = dv.imag
        theta = np.linalg.lstsq(jac, np.concatenate([-f.real, -f.imag]),
                                rcond=None)[0]
        gen = np.zeros((d, d), dtype=np.complex128)
        for t, b in zip(theta, basis):
            gen += t * b
        step = 1.0
        for _ in range(6):
            trial = (_unitary_exp(step * gen) @ w.T).T
            if max(abs(np.vdot(states[j], trial[j])) for j in range(d)) < off:
                w = trial
                break
            step *= 0.5
        else:
            break
    if max(abs(np.vdot(states[j], w[j])) for j in range(d)) >= 1e-9:
        return None
    return [np.outer(w[j], np.conj(w[j])) for j in range(d)]


def search_exclusion_povm(e: Ensemble, restarts: int = 64, iters: int = 5000,
                          tol: float = 1e-10, seed: int = 0,
                          verify_tol: float = 1e-8) -> Povm | None:
    """Numerical search for a strong exclusion measurement on the ensemble.

    First pass: each element is parameterized inside the orthogonal
    complement of its target state, so the exclusions hold by construction
    and only completeness remains affine; that solves the well-conditioned
    instances in a few iterations.  Fallback: Douglas-Rachford splitting in
    the full space between the affine set (completeness plus the per-state
    exclusion equalities) and the PSD cone, restarting from deterministic
    seeds.  When the state count equals the dimension and the splitting
    stalls short of tol, a projective polish is attempted, which rescues
    instances whose only solutions are exclusion bases touching the cone
    tangentially.  Candidates count only if verify_strong passes at
    verify_tol; returns None when no restart certifies.
    """
    dim = e.layout.dim
    states = [np.asarray(s, dtype=np.complex128) for s in e.states]
    quick = _support_feasible([[s] for s in states], dim,
                              restarts=min(3, restarts), iters=min(4000, iters),
                              seed=seed)
    if quick is not None:
        povm = Povm(e.layout, quick, list(e.labels), name="search certificate")
        if verify_strong(e, povm, tol=verify_tol).passed:
            return povm
    forbidden = [[_density(s)] for s in e.states]
    proj = _AffineProjector(forbidden, dim)
    for r in range(restarts):
        rng = np.random.default_rng(seed + 7919 * r)
        cand, res = _dr_run(proj, iters, tol, rng)
        elements: list[np.ndarray] | None = None
        if res < tol:
            elements = [cand[j] for j in range(proj.k)]
        elif len(states) == dim and res < 1e-4:
            elements = _projective_polish(cand, states)
        if elements is None:
            continue
        povm = Povm(e.layout, elements, list(e.labels), name="search certificate")
        rep = verify_strong(e, povm, tol=verify_tol)
        if rep.passed:
            return povm
    return None


# ---------------------------------------------------------------------------
# certified measurement for a passing triple


def _orthonormal_complement(y: np.ndarray) -> np.ndarray:
    """Columns form an orthonormal basis of the orthogonal complement of y."""
    d = y.size
    full = np.linalg.qr(np.column_stack([y] + [np.eye(d)[:, i] for i in range(d)]),
                        mode="reduced")[0]
    return full[:, 1:d]


def _conj_cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # orthogonal (Hermitian inner product) to both a and b in C^3
    return np.conj(np.cross(a, b))


def _triad_candidate(t: float, phi: float, u1: np.ndarray, u2: np.ndarray,
                     y2: np.ndarray, y3: np.ndarray):
    w1 = math.cos(t) * u1 + math.sin(t) * np.exp(1j * phi) * u2
    c2 = _conj_cross(y2, w1)
    n2 = np.linalg.norm(c2)
    if n2 < 1e-10:
        return None
    w2 = c2 / n2
    c3 = _conj_cross(w1, w2)
    w3 = c3 / np.linalg.norm(c3)
    return w1, w2, w3, abs(np.vdot(y3, w3))


def _search_triad(ys: list[np.ndarray], grid: int = 72):
    """Orthonormal triad (w1, w2, w3) in C^3 with <y_j|w_j> = 0 for all j."""
    y1, y2, y3 = ys
    comp = _orthonormal_complement(y1)
    u1, u2 = comp[:, 0], comp[:, 1]
    ts = np.linspace(0.0, math.pi / 2, grid)
    phis = np.linspace(0.0, 2 * math.pi, grid, endpoint=False)
    seeds = []
    for t in ts:
        for phi in phis:
            cand = _triad_candidate(t, phi, u1, u2, y2, y3)
            if cand is not None:
                seeds.append((cand[3], t, phi))
    seeds.sort(key=lambda s: s[0])
    for _, t0, phi0 in seeds[:8]:
        t, phi = t0, phi0
        val = _triad_candidate(t, phi, u1, u2, y2, y3)[3]
        h = math.pi / grid
        budget = 4000  # bounds the descent on plateaus with no exact zero
        while h > 1e-13 and val > 1e-13 and budget > 0:
            budget -= 1
            moved = False
            for dt, dphi in ((h, 0), (-h, 0), (0, h), (0, -h)):
                cand = _triad_candidate(t + dt, phi + dphi, u1, u2, y2, y3)
                if cand is not None and cand[3] < val:
                    t, phi, val = t + dt, phi + dphi, cand[3]
                    moved = True
                    break
            if not moved:
                h /= 2
        if val <= 1e-11:
            w1, w2, w3, _ = _triad_candidate(t, phi, u1, u2, y2, y3)
            return [w1, w2, w3]
    return None


def povm_from_caves_triple(states, labels=None, layout: PartyLayout | None = None,
                           tol: float = DEFAULT_TOL, seed: int = 0) -> Povm:
    """Certified three-outcome exclusion measurement for a triple that passes
    the three-state criterion.

    The problem is solved inside the span of the states: a two-dimensional
    span reduces to the single-qubit weight program, a three-dimensional one
    to a feasibility solve with each element confined to its state's
    orthogonal complement, falling back to an orthonormal-triad search for
    instances whose only solutions are projective.  The orthogonal complement
    of the span is split evenly across the elements; the result must pass
    verify_strong or a RuntimeError reports the failure.
    """
    vecs = [_ket(s) for s in states]
    rep = caves_criterion(vecs)
    if not rep.passed:
        raise ValueError("the triple fails the three-state criterion")
    if labels is None:
        labels = [f"s{i}" for i in range(3)]
    labels = list(labels)
    d = vecs[0].size
    if layout is None:
        layout = PartyLayout((d,))

    stack = np.stack(vecs)
    _, svals, vh = np.linalg.svd(stack)
    r = int(np.sum(svals > 1e-9))
    basis = vh[:r].T  # d x r, orthonormal columns
    ys = [basis.conj().T @ v for v in vecs]
    ys = [y / np.linalg.norm(y) for y in ys]

    small: list[np.ndarray] | None = None
    if r == 2:
        status, weights, _ = _min_weight_completion([_density(y) for y in ys])
        if status == "optimal" and min(weights) > -tol:
            small = [max(w, 0.0) * (np.eye(2) - _density(y))
                     for w, y in zip(weights, ys)]
    else:
        small = _support_feasible([[y] for y in ys], r, restarts=3,
                                  iters=4000, seed=seed)
        if small is None:
            triad = _search_triad(ys)
            if triad is not None:
                small = [_density(w) for w in triad]
    if small is None:
        # last resort: full-space feasibility search inside the span
        forbidden = [[_density(y)] for y in ys]
        for cand in _dr_feasible(forbidden, r, restarts=4, iters=3000,
                                 tol=1e-11, seed=seed):
            small = cand
            break
    if small is None:
        raise RuntimeError("no exclusion measurement found inside the span")

    rest = (np.eye(d) - basis @ basis.conj().T) / 3.0
    elements = [basis @ f @ basis.conj().T + rest for f in small]
    povm = Povm(layout, elements, labels, name="triple exclusion")
    check = Ensemble("triple", layout, labels, vecs)
    report = verify_strong(check, povm, tol=max(tol, 1e-10))
    if not report.passed:
        raise RuntimeError(f"triple certificate failed verification: {report.failures[:2]}")
    return povm


# ---------------------------------------------------------------------------
# per-outcome exclusion bookkeeping


@dataclass
class OutcomeExclusions:
    index: int
    label: str | None
    firing: float
    excluded: tuple[str, ...]


@dataclass
class ExclusionCounts:
    outcomes: list[OutcomeExclusions]
    min_exclusions: int
    tol: float


def exclusion_counts(e: Ensemble, m: Povm, tol: float = DEFAULT_TOL) -> ExclusionCounts:
    """Which states each firing outcome excludes, and the worst-case count.

    An outcome fires when its total probability under the uniform mixture
    exceeds tol; the summary value is the smallest exclusion set over firing
    outcomes.  Raises on an invalid POVM or if nothing fires.
    """
    if m.layout.dims != e.layout.dims:
        raise ValueError("POVM layout does not match the ensemble layout")
    if m.hermiticity_residual() > 1e-8:
        raise ValueError("POVM elements must be Hermitian")
    if m.completeness_residual() > 1e-8 or m.min_eigenvalue() < -1e-8:
        raise ValueError("not a POVM: completeness or positivity fails")
    rhos = [_density(s) for s in e.states]
    rows: list[OutcomeExclusions] = []
    for i, (mat, lab) in enumerate(zip(m.elements, m.labels)):
        per = [_tr(r, mat) for r in rhos]
        firing = float(sum(per))
        if firing <= tol:
            continue
        excluded = tuple(lab for lab, p in zip(e.labels, per) if p <= tol)
        rows.append(OutcomeExclusions(i, lab, firing, excluded))
    if not rows:
        raise ValueError("no outcome fires under the uniform mixture")
    return ExclusionCounts(rows, min(len(r.excluded) for r in rows), tol)


# ---------------------------------------------------------------------------
# decision routine


def _cover_search(n: int, triples: list[tuple[int, int, int]]):
    """Yield covers of range(n) by the given triples, depth first.

    Each step extends with a triple containing the smallest uncovered index,
    largest fresh coverage first.  Overlaps are allowed.
    """

    def rec(covered: frozenset, chosen: tuple):
        if len(covered) == n:
            yield list(chosen)
            return
        u = min(i for i in range(n) if i not in covered)
        options = [t for t in triples if u in t and t not in chosen]
        options.sort(key=lambda t: -len(set(t) - covered))
        for t in options:
            yield from rec(covered | set(t), chosen + (t,))

    yield from rec(frozenset(), ())


def _as_ensemble(obj) -> Ensemble:
    if isinstance(obj, Ensemble):
        return obj
    vecs = [_ket(s) for s in obj]
    if len(vecs) < 2:
        raise ValueError("need at least two states")
    layout = getattr(obj[0], "layout", None) or PartyLayout((vecs[0].size,))
    return Ensemble("states", layout, [f"s{i}" for i in range(len(vecs))], vecs)


def decide_antidist(ensemble, tol: float = DEFAULT_TOL, seed: int = 0,
                    restarts: int = 16, iters: int = 4000,
                    max_covers: int = 32) -> Verdict:
    """Decide strong antidistinguishability of an ensemble of pure states.

    Route order: (1) exactly three states, the exact overlap criterion with a
    certified measurement on YES; (2) single-qubit states, the exact weight
    program; (3) four or more states, covers by passing triples composed into
    a union certificate; (4) direct feasibility search; (5) UNKNOWN.  Only
    the exact routes ever answer NO.
    """
    e = _as_ensemble(ensemble)
    k = e.n_states

    if k == 3:
        rep = caves_criterion(e.states, boundary_tol=tol)
        margins = [1.0 - rep.total, rep.quartic_lhs - rep.quartic_rhs]
        if not rep.passed:
            which = "overlap sum" if not rep.sum_ok else "quartic inequality"
            return Verdict("NO", "caves", margins=margins, caves=rep,
                           detail=f"{which} fails")
        cert = povm_from_caves_triple(e.states, e.labels, layout=e.layout,
                                      tol=tol, seed=seed)
        return Verdict("YES", "caves", margins=margins, caves=rep, certificate=cert)

    if e.layout.dim == 2:
        return qubit_antidist_lp(e.states, e.labels, tol=tol)

    if k >= 4:
        yes_triples = []
        reports = {}
        for t in combinations(range(k), 3):
            rep = caves_criterion([e.states[i] for i in t], boundary_tol=tol)
            if rep.passed:
                yes_triples.append(t)
                reports[t] = rep
        cache: dict[tuple[int, int, int], Povm | None] = {}

        def build(t):
            if t not in cache:
                try:
                    cache[t] = povm_from_caves_triple(
                        [e.states[i] for i in t], [e.labels[i] for i in t],
                        layout=e.layout, tol=tol, seed=seed)
                except (ValueError, RuntimeError):
                    cache[t] = None
            return cache[t]

        count = 0
        for cover in _cover_search(k, yes_triples):
            count += 1
            if count > max_covers:
                break
            parts = []
            for t in cover:
                sub = build(t)
                if sub is None:
                    break
                parts.append(([e.labels[i] for i in t], sub))
            else:
                union = compose_union(e, parts, tol=max(tol, 1e-9))
                margins = [min(1.0 - reports[t].total for t in cover),
                           min(reports[t].quartic_lhs - reports[t].quartic_rhs
                               for t in cover)]
                return Verdict("YES", "triple_cover", margins=margins,
                               certificate=union,
                               triples=[tuple(e.labels[i] for i in t) for t in cover],
                               detail=f"{len(cover)} certified triples")

    found = search_exclusion_povm(e, restarts=restarts, iters=iters, seed=seed,
                                  verify_tol=max(tol, 1e-8))
    if found is not None:
        return Verdict("YES", "search", margins=[], certificate=found,
                       detail="feasibility search certificate")

    return Verdict("UNKNOWN", "exhausted", margins=[],
                   detail="exact criteria do not apply and the search budget "
                          "found no certificate")
