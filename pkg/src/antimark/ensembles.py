"""Ensemble containers, the built-in catalog, sequence ensembles, and the
ensemble file format.

An :class:`Ensemble` is an ordered, labeled list of normalized pure states on
a common party layout.  Product ensembles additionally carry per-party factor
kets for every state; those factors are what local parts and sequence
repartitioning are computed from.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .qcore import DataError, PartyLayout, canonical_phase, same_up_to_phase

# ---------------------------------------------------------------------------
# single-qubit kets used by the catalog

KET0 = np.array([1.0, 0.0], dtype=np.complex128)
KET1 = np.array([0.0, 1.0], dtype=np.complex128)
PLUS = np.array([1.0, 1.0], dtype=np.complex128) / np.sqrt(2.0)
MINUS = np.array([1.0, -1.0], dtype=np.complex128) / np.sqrt(2.0)
IPLUS = np.array([1.0, 1.0j], dtype=np.complex128) / np.sqrt(2.0)
IMINUS = np.array([1.0, -1.0j], dtype=np.complex128) / np.sqrt(2.0)


def qubit_perp(v: np.ndarray) -> np.ndarray:
    """The state orthogonal to a qubit ket (phase convention: (b*, -a*))."""
    v = np.asarray(v, dtype=np.complex128)
    return np.array([v[1].conj(), -v[0].conj()])


def angle_ket(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)], dtype=np.complex128)


def qutrit_sum(p: int, q: int, sign: int = 1) -> np.ndarray:
    """(|p> + sign |q>)/sqrt(2) on a qutrit."""
    v = np.zeros(3, dtype=np.complex128)
    v[p] = 1.0
    v[q] = float(sign)
    return v / np.sqrt(2.0)


def _kron_all(factors) -> np.ndarray:
    out = np.asarray(factors[0], dtype=np.complex128)
    for f in factors[1:]:
        out = np.kron(out, np.asarray(f, dtype=np.complex128))
    return out


# ---------------------------------------------------------------------------
# containers


@dataclass
class Ensemble:
    """Labeled pure-state ensemble on a fixed party layout."""

    name: str
    layout: PartyLayout
    labels: list[str]
    states: list[np.ndarray]
    factors: dict[str, tuple[np.ndarray, ...]] | None = None

    def __post_init__(self):
        if len(self.labels) != len(self.states):
            raise ValueError("one label per state required")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("state labels must be distinct")
        if len(self.states) < 2:
            raise ValueError("an ensemble needs at least two states")
        clean = []
        for lab, v in zip(self.labels, self.states):
            v = np.asarray(v, dtype=np.complex128).reshape(-1)
            if v.size != self.layout.dim:
                raise ValueError(f"state {lab}: size {v.size} != layout dim {self.layout.dim}")
            nrm = float(np.linalg.norm(v))
            if abs(nrm - 1.0) > 1e-9:
                raise ValueError(f"state {lab} not normalized (|v| = {nrm!r})")
            clean.append(v / nrm)
        self.states = clean
        if self.factors is not None:
            for lab in self.labels:
                if lab not in self.factors:
                    raise ValueError(f"product ensemble missing factors for {lab}")
            for lab, fs in self.factors.items():
                fs = tuple(np.asarray(f, dtype=np.complex128).reshape(-1) for f in fs)
                if len(fs) != self.layout.n_parties:
                    raise ValueError(f"state {lab}: factor count != party count")
                for f, d in zip(fs, self.layout.dims):
                    if f.size != d:
                        raise ValueError(f"state {lab}: factor dim mismatch")
                self.factors[lab] = fs
                full = _kron_all(fs)
                target = self.states[self.labels.index(lab)]
                if np.max(np.abs(full - target)) > 1e-10:
                    raise ValueError(f"state {lab}: factor tensor does not reproduce the state")

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def is_product(self) -> bool:
        return self.factors is not None

    def state_of(self, label: str) -> np.ndarray:
        return self.states[self.labels.index(label)]

    def density(self, label: str) -> np.ndarray:
        v = self.state_of(label)
        return np.outer(v, v.conj())


def product_ensemble(name, layout, labels, factor_rows) -> Ensemble:
    """Build a product ensemble from per-state tuples of party factors."""
    factor_rows = [
        tuple(np.asarray(f, dtype=np.complex128) / np.linalg.norm(f) for f in row)
        for row in factor_rows
    ]
    states = [_kron_all(row) for row in factor_rows]
    return Ensemble(name, layout, list(labels), states,
                    factors={lab: row for lab, row in zip(labels, factor_rows)})


@dataclass
class SequenceEnsemble(Ensemble):
    """All non-repetitive length-n index sequences of a parent ensemble,
    repartitioned so each party holds its n local factors contiguously."""

    parent: Ensemble | None = None
    n: int = 1
    index_tuples: list[tuple[int, ...]] = field(default_factory=list)


def _repartition(parent: Ensemble, tup: tuple[int, ...]) -> np.ndarray:
    """Tensor the chosen parent states slot-by-slot, then regroup legs party-major."""
    n, k = len(tup), parent.layout.n_parties
    full = _kron_all([parent.states[i] for i in tup])
    slot_major_dims = list(parent.layout.dims) * n
    perm = [s * k + p for p in range(k) for s in range(n)]
    return full.reshape(slot_major_dims).transpose(perm).reshape(-1)


def sequence_ensemble(parent: Ensemble, n: int) -> SequenceEnsemble:
    """The ensemble of all N!/(N-n)! non-repetitive index sequences of length n."""
    if not 1 <= n <= parent.n_states:
        raise ValueError(f"sequence length must be in 1..{parent.n_states}")
    dim = max(parent.layout.dims) ** n
    if parent.layout.dim ** n > 4096 or dim > 4096:
        raise ValueError("sequence ensemble too large to materialize")
    tuples = list(permutations(range(parent.n_states), n))
    labels = ["(" + ",".join(parent.labels[i] for i in tup) + ")" for tup in tuples]
    states = [_repartition(parent, tup) for tup in tuples]
    layout = PartyLayout(tuple(d ** n for d in parent.layout.dims), parent.layout.names)
    factors = None
    if parent.is_product:
        factors = {}
        for lab, tup in zip(labels, tuples):
            factors[lab] = tuple(
                _kron_all([parent.factors[parent.labels[i]][p] for i in tup])
                for p in range(parent.layout.n_parties)
            )
    return SequenceEnsemble(f"{parent.name}^[{n}]", layout, labels, states, factors,
                            parent=parent, n=n, index_tuples=tuples)


def local_part(e: Ensemble, party, deduplicate: bool = True) -> Ensemble:
    """The named party's local ensemble of a product ensemble.

    Deduplication merges states equal up to a global phase (tolerance 1e-9);
    the first contributing label is kept.
    """
    if not e.is_product:
        raise ValueError("local_part requires a product ensemble")
    p = party if isinstance(party, int) else e.layout.index_of(party)
    name = e.layout.names[p]
    labels, kets = [], []
    for lab in e.labels:
        f = e.factors[lab][p]
        if deduplicate and any(same_up_to_phase(f, g) for g in kets):
            continue
        labels.append(lab)
        kets.append(f)
    if len(kets) < 2:
        raise ValueError(f"local part of party {name} has fewer than 2 distinct states")
    return Ensemble(f"{e.name}|{name}", PartyLayout((e.layout.dims[p],), (name,)),
                    labels, [canonical_phase(v) for v in kets])


def restrict(e: Ensemble, labels) -> Ensemble:
    """Sub-ensemble holding only the given labels, in the given order."""
    labels = list(labels)
    unknown = [lab for lab in labels if lab not in e.labels]
    if unknown:
        raise ValueError(f"labels not in ensemble: {unknown}")
    if len(set(labels)) != len(labels):
        raise ValueError("restriction labels must be distinct")
    factors = None
    if e.is_product:
        factors = {lab: e.factors[lab] for lab in labels}
    return Ensemble(f"{e.name}|{{{','.join(labels)}}}", e.layout, labels,
                    [e.state_of(lab) for lab in labels], factors=factors)


# ---------------------------------------------------------------------------
# catalog


def weak3() -> Ensemble:
    lay = PartyLayout((2,))
    return product_ensemble("weak3", lay, ["0", "1", "+"], [(KET0,), (KET1,), (PLUS,)])


def trine3() -> Ensemble:
    lay = PartyLayout((2,))
    rows = [(angle_ket(2.0 * math.pi * k / 3.0),) for k in range(3)]
    return product_ensemble("trine3", lay, ["T1", "T2", "T3"], rows)


def bell4() -> Ensemble:
    lay = PartyLayout((2, 2))
    s = 1.0 / np.sqrt(2.0)
    states = {
        "Phi+": np.array([s, 0, 0, s]),
        "Phi-": np.array([s, 0, 0, -s]),
        "Psi+": np.array([0, s, s, 0]),
        "Psi-": np.array([0, s, -s, 0]),
    }
    return Ensemble("bell4", lay, list(states), list(states.values()))


def bennett9() -> Ensemble:
    lay = PartyLayout((3, 3))
    e = [np.eye(3, dtype=np.complex128)[i] for i in range(3)]
    rows = [
        (e[1], e[1]),                      # b1
        (e[0], qutrit_sum(0, 1, +1)),      # b2
        (e[0], qutrit_sum(0, 1, -1)),      # b3
        (e[2], qutrit_sum(1, 2, +1)),      # b4
        (e[2], qutrit_sum(1, 2, -1)),      # b5
        (qutrit_sum(1, 2, +1), e[0]),      # b6
        (qutrit_sum(1, 2, -1), e[0]),      # b7
        (qutrit_sum(0, 1, +1), e[2]),      # b8
        (qutrit_sum(0, 1, -1), e[2]),      # b9
    ]
    return product_ensemble("bennett9", lay, [f"b{i}" for i in range(1, 10)], rows)


def duan4() -> Ensemble:
    lay = PartyLayout((2, 2))
    rows = [(KET0, KET0), (KET1, KET1), (PLUS, PLUS), (IPLUS, IMINUS)]
    return product_ensemble("duan4", lay, ["D1", "D2", "D3", "D4"], rows)


def nl1() -> Ensemble:
    lay = PartyLayout((2, 2))
    rows = [(KET0, PLUS), (PLUS, KET0), (IPLUS, IPLUS)]
    return product_ensemble("nl1", lay, ["0+", "+0", "i+i+"], rows)


def sic_kets() -> list[np.ndarray]:
    kets = [KET0.copy()]
    for j in range(3):
        w = np.exp(2j * np.pi * j / 3.0)
        kets.append(np.array([1.0, np.sqrt(2.0) * w]) / np.sqrt(3.0))
    return kets


def sic4() -> Ensemble:
    lay = PartyLayout((2,))
    return product_ensemble("sic4", lay, [f"s{i}" for i in range(1, 5)],
                            [(v,) for v in sic_kets()])


def double_sic_antiparallel() -> Ensemble:
    lay = PartyLayout((2, 2))
    rows = [(v, qubit_perp(v)) for v in sic_kets()]
    return product_ensemble("double_sic_antiparallel", lay,
                            [f"g{i}" for i in range(1, 5)], rows)


def pbr4() -> Ensemble:
    lay = PartyLayout((2, 2))
    rows = [(KET0, KET0), (KET0, PLUS), (PLUS, KET0), (PLUS, PLUS)]
    return product_ensemble("pbr4", lay, ["00", "0+", "+0", "++"], rows)


def theta4(theta: float) -> Ensemble:
    """Four two-qubit products of cos(t)|0> +- sin(t)|1>, t strictly inside (0, pi/2)."""
    if not 0.0 < theta < math.pi / 2.0:
        raise ValueError("theta4 requires 0 < theta < pi/2")
    up = np.array([math.cos(theta), math.sin(theta)], dtype=np.complex128)
    dn = np.array([math.cos(theta), -math.sin(theta)], dtype=np.complex128)
    lay = PartyLayout((2, 2))
    rows = [(up, up), (up, dn), (dn, up), (dn, dn)]
    return product_ensemble("theta4", lay, ["++", "+-", "-+", "--"], rows)


def nl2(theta: float) -> Ensemble:
    """Three tripartite products of |0> and cos(t)|0> + sin(t)|1>."""
    if not 0.0 < theta < math.pi:
        raise ValueError("nl2 requires 0 < theta < pi")
    t = angle_ket(theta)
    lay = PartyLayout((2, 2, 2))
    rows = [(KET0, KET0, KET0), (KET0, t, t), (t, KET0, t)]
    return product_ensemble("nl2", lay, ["000", "0tt", "t0t"], rows)


def su3() -> Ensemble:
    lay = PartyLayout((2, 2))
    rows = [(KET0, KET0), (KET0, PLUS), (PLUS, KET0)]
    return product_ensemble("su3", lay, ["00", "0+", "+0"], rows)


CATALOG: dict[str, dict] = {
    "weak3": {"build": lambda **kw: weak3(), "dims": (2,), "params": (),
              "blurb": "|0>,|1>,|+>: every two excludable, no strong measurement"},
    "trine3": {"build": lambda **kw: trine3(), "dims": (2,), "params": (),
               "blurb": "equiangular qubit trine, strongly antidistinguishable"},
    "bell4": {"build": lambda **kw: bell4(), "dims": (2, 2), "params": (),
              "blurb": "the four Bell states"},
    "bennett9": {"build": lambda **kw: bennett9(), "dims": (3, 3), "params": (),
                 "blurb": "nine orthogonal two-qutrit product states"},
    "duan4": {"build": lambda **kw: duan4(), "dims": (2, 2), "params": (),
              "blurb": "globally antidistinguishable, locally not"},
    "nl1": {"build": lambda **kw: nl1(), "dims": (2, 2), "params": (),
            "blurb": "three products: global yes, local no, conclusively discriminable"},
    "sic4": {"build": lambda **kw: sic4(), "dims": (2,), "params": (),
             "blurb": "qubit SIC quadruple"},
    "double_sic_antiparallel": {"build": lambda **kw: double_sic_antiparallel(),
                                "dims": (2, 2), "params": (),
                                "blurb": "SIC states paired with their antipodes"},
    "pbr4": {"build": lambda **kw: pbr4(), "dims": (2, 2), "params": (),
             "blurb": "products of |0>,|+>: not antidistinguishable, sequences are"},
    "theta4": {"build": lambda theta, **kw: theta4(theta), "dims": (2, 2),
               "params": ("theta",),
               "blurb": "products of cos(t)|0> +- sin(t)|1>"},
    "nl2": {"build": lambda theta, **kw: nl2(theta), "dims": (2, 2, 2),
            "params": ("theta",),
            "blurb": "tripartite family with a global-yes/local-no window"},
    "su3": {"build": lambda **kw: su3(), "dims": (2, 2), "params": (),
            "blurb": "|00>,|0+>,|+0>: antimarking activated by two copies"},
}


def catalog() -> dict[str, dict]:
    return CATALOG


def build_catalog(name: str, **params) -> Ensemble:
    if name not in CATALOG:
        raise KeyError(f"unknown catalog ensemble {name!r}")
    entry = CATALOG[name]
    missing = [p for p in entry["params"] if p not in params]
    if missing:
        raise ValueError(f"{name} requires parameter(s): {', '.join(missing)}")
    return entry["build"](**params)


# ---------------------------------------------------------------------------
# ensemble file format


def _parse_complex_list(raw, what: str) -> np.ndarray:
    try:
        vals = [complex(float(re), float(im)) for re, im in raw]
    except (TypeError, ValueError) as exc:
        raise DataError(f"{what}: entries must be [re, im] pairs") from exc
    return np.array(vals, dtype=np.complex128)


def _normalized(v: np.ndarray, what: str) -> np.ndarray:
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > 1e-6:
        raise DataError(f"{what}: norm {nrm!r} deviates from 1 by more than 1e-6")
    return v / nrm


def parse_ensemble(text: str) -> Ensemble:
    """Parse the ensemble file format (JSON).

    Expected shape::

        {"name": str, "dims": [int, ...],
         "states": [{"label": str, "amplitudes": [[re, im], ...]}
                    | {"label": str, "factors": [[[re, im], ...], ...]}, ...]}
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"ensemble file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError("ensemble file must be a JSON object")
    for key in ("name", "dims", "states"):
        if key not in doc:
            raise DataError(f"ensemble file missing key {key!r}")
    try:
        layout = PartyLayout(tuple(int(d) for d in doc["dims"]))
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad dims: {exc}") from exc
    if not isinstance(doc["states"], list) or len(doc["states"]) < 2:
        raise DataError("states must be a list of at least two entries")

    labels, states, factors, all_product = [], [], {}, True
    for i, entry in enumerate(doc["states"]):
        if not isinstance(entry, dict) or "label" not in entry:
            raise DataError(f"state #{i}: missing label")
        lab = str(entry["label"])
        if "amplitudes" in entry:
            v = _parse_complex_list(entry["amplitudes"], f"state {lab}")
            if v.size != layout.dim:
                raise DataError(f"state {lab}: expected {layout.dim} amplitudes, got {v.size}")
            states.append(_normalized(v, f"state {lab}"))
            all_product = False
        elif "factors" in entry:
            raw = entry["factors"]
            if not isinstance(raw, list) or len(raw) != layout.n_parties:
                raise DataError(f"state {lab}: expected {layout.n_parties} factors")
            fs = []
            for p, fraw in enumerate(raw):
                f = _parse_complex_list(fraw, f"state {lab} factor {p}")
                if f.size != layout.dims[p]:
                    raise DataError(f"state {lab} factor {p}: wrong dimension")
                fs.append(_normalized(f, f"state {lab} factor {p}"))
            factors[lab] = tuple(fs)
            states.append(_kron_all(fs))
        else:
            raise DataError(f"state {lab}: needs either amplitudes or factors")
        labels.append(lab)
    if len(set(labels)) != len(labels):
        raise DataError("state labels must be distinct")
    try:
        return Ensemble(str(doc["name"]), layout, labels, states,
                        factors=factors if all_product and factors else None)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
