"""Steering functionals, Bell functionals and the Charlie-Dani self-test expression.

A steering functional assigns a Hermitian matrix F_abxy to every
(a, b, x, y); its value on an assemblage is sum tr(F_abxy sigma_ab|xy).
``decompose_to_bell`` rewrites each F_abxy in the Pauli-eigenprojector
family so the same numbers act as coefficients f_abdxyw of a four-party
Bell functional.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import matkernel as mk
from .assemblage import (
    Assemblage,
    AssemblageParseError,
    CheckResult,
    ValidationReport,
    decode_matrix,
    encode_matrix,
)
from .quantum import I2, PAULIS, QuantumModel, model_probabilities, pauli_steered_elements, phi_plus, tensor_pauli_basis

SQRT2 = math.sqrt(2.0)
RESIDUE_TOL = 1e-10


class FunctionalError(ValueError):
    pass


# ---------------------------------------------------------------------------
# correlation tables


@dataclass(frozen=True, eq=False)
class CorrelationTable:
    """Conditional distribution p(outputs | inputs).

    ``probs`` has one output axis per party followed by one input axis per
    party, in the order given by ``parties`` (e.g. ``"abcd"``). ``star`` is
    the index of Charlie's joint-measurement setting, when present.
    """

    probs: np.ndarray
    parties: str
    star: int | None = None

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 * len(self.parties):
            raise FunctionalError(f"table for parties {self.parties!r} needs {2 * len(self.parties)} axes, got {p.ndim}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def marginal(self, keep: str) -> "CorrelationTable":
        """Sum out parties not in ``keep``; their inputs are fixed to 0."""
        k = len(self.parties)
        p = self.probs
        drop = [j for j, s in enumerate(self.parties) if s not in keep]
        p = p.sum(axis=tuple(drop), keepdims=True)
        idx = tuple(0 if (j - k) in drop else slice(None) for j in range(k, 2 * k))
        p = p[(slice(None),) * k + idx]
        p = p.reshape([s for j, s in enumerate(p.shape[:k]) if j not in drop] + list(p.shape[k:]))
        kept = "".join(s for s in self.parties if s in keep)
        star = self.star if "c" in kept else None
        return CorrelationTable(p, kept, star)

    def validate(self, tol: float = mk.FEASIBILITY_TOL) -> ValidationReport:
        p = self.probs
        k = len(self.parties)
        checks = []
        neg = max(0.0, -float(p.min()))
        checks.append(CheckResult("nonnegative", neg <= tol, neg))
        norm = float(np.max(np.abs(p.sum(axis=tuple(range(k))) - 1.0)))
        checks.append(CheckResult("normalization", norm <= tol, norm))
        for j, s in enumerate(self.parties):
            summed = p.sum(axis=j)
            axis = k - 1 + j
            dev = 0.0
            if summed.shape[axis] > 1:
                dev = float(np.max(np.abs(summed - np.take(summed, [0], axis=axis))))
            checks.append(CheckResult(f"no_signalling_{s}", dev <= tol, dev))
        return ValidationReport(tuple(checks), tol)

    def to_document(self) -> dict:
        return {
            "kind": "correlation_table",
            "parties": self.parties,
            "star": self.star,
            "shape": list(self.probs.shape),
            "values": self.probs.reshape(-1).tolist(),
        }

    @classmethod
    def from_document(cls, doc, source="<document>"):
        try:
            p = np.asarray(doc["values"], dtype=float).reshape(doc["shape"])
            return cls(p, doc["parties"], doc.get("star"))
        except (KeyError, ValueError, TypeError) as exc:
            raise AssemblageParseError(f"bad correlation table: {exc}", source) from None


def table_from_model(model: QuantumModel, parties: str) -> CorrelationTable:
    return CorrelationTable(model_probabilities(model), parties)


# ---------------------------------------------------------------------------
# steering functionals


@dataclass(frozen=True, eq=False)
class SteeringFunctional:
    coefficients: np.ndarray
    quantum_bound: float = 0.0
    name: str = ""

    def __post_init__(self):
        F = np.array(self.coefficients, dtype=complex)
        if F.ndim != 6 or F.shape[-1] != F.shape[-2]:
            raise FunctionalError(f"coefficients need shape (nA, nB, nX, nY, D, D), got {F.shape}")
        herm = float(np.max(np.abs(F - mk.dagger(F))))
        if herm > mk.IDENTITY_TOL:
            raise FunctionalError(f"coefficients are not Hermitian (max |F - F^dag| = {herm:.3e})")
        F.setflags(write=False)
        object.__setattr__(self, "coefficients", F)

    @property
    def dim(self):
        return self.coefficients.shape[-1]

    def digest(self):
        from .assemblage import array_digest

        return array_digest(self.coefficients)

    def to_document(self) -> dict:
        F = self.coefficients
        nA, nB, nX, nY = F.shape[:4]
        coeffs = []
        for idx in np.ndindex(nA, nB, nX, nY):
            entry = dict(zip("abxy", map(int, idx)))
            entry["matrix"] = encode_matrix(F[idx])
            coeffs.append(entry)
        return {
            "kind": "steering_functional",
            "name": self.name,
            "quantum_bound": self.quantum_bound,
            "scenario": {"nA": nA, "nB": nB, "nX": nX, "nY": nY, "dC": int(F.shape[-1])},
            "coefficients": coeffs,
        }

    @classmethod
    def from_document(cls, doc, source="<document>"):
        try:
            sc = doc["scenario"]
            shape = (sc["nA"], sc["nB"], sc["nX"], sc["nY"], sc["dC"], sc["dC"])
            F = np.zeros(shape, dtype=complex)
            seen = set()
            for n, e in enumerate(doc["coefficients"]):
                key = tuple(int(e[k]) for k in "abxy")
                F[key] = decode_matrix(e["matrix"], f"{source}.coefficients[{n}]")
                seen.add(key)
        except (KeyError, IndexError, ValueError, TypeError) as exc:
            raise AssemblageParseError(f"bad steering functional: {exc!r}", source) from None
        if len(seen) != int(np.prod(shape[:4])):
            raise AssemblageParseError("steering functional is missing coefficient entries", source)
        try:
            return cls(F, float(doc.get("quantum_bound", 0.0)), doc.get("name", ""))
        except FunctionalError as exc:
            raise AssemblageParseError(str(exc), source) from None


def save_functional(F: SteeringFunctional, path):
    Path(path).write_text(json.dumps(F.to_document(), indent=1))


def load_functional(path) -> SteeringFunctional:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise AssemblageParseError(f"invalid JSON: {exc.msg}", f"{path}:{exc.lineno}:{exc.colno}") from None
    return SteeringFunctional.from_document(doc, str(path))


def evaluate_steering(F: SteeringFunctional, asm: Assemblage, return_residue: bool = False):
    """sum_abxy tr(F_abxy sigma_ab|xy).

    With ``return_residue`` the discarded imaginary part is returned too.
    """
    Fc = F.coefficients
    el = np.asarray(asm.elements)
    if Fc.shape != el.shape:
        raise FunctionalError(f"functional shape {Fc.shape} does not match assemblage shape {el.shape}")
    D = el.shape[-1]
    total = mk.kernel.batched_trace_product(Fc.reshape(-1, D, D), el.reshape(-1, D, D))
    residue = abs(total.imag)
    if residue > RESIDUE_TOL:
        import logging

        logging.getLogger(__name__).warning("steering value has imaginary residue %.3e", residue)
    if return_residue:
        return total.real, residue
    return total.real


def chsh_signs() -> np.ndarray:
    """(-1)^(a xor b xor xy) indexed (a, b, x, y)."""
    s = np.empty((2, 2, 2, 2))
    for a, b, x, y in np.ndindex(2, 2, 2, 2):
        s[a, b, x, y] = (-1) ** (a ^ b ^ (x * y))
    return s


def chsh_value(p) -> float:
    return float(np.sum(chsh_signs() * np.asarray(p)))


def shifted_chsh_functional(dC: int = 2) -> SteeringFunctional:
    """F_abxy = (sqrt2/2 - (-1)^(a+b+xy)) I, valued 2 sqrt2 - CHSH."""
    coeff = SQRT2 / 2 - chsh_signs()
    F = np.einsum("abxy,ij->abxyij", coeff, np.eye(dC))
    return SteeringFunctional(F, 0.0, "shifted_chsh")


# ---------------------------------------------------------------------------
# Bell coefficients


@dataclass(frozen=True, eq=False)
class BellCoefficients:
    """Real coefficients f[a, b, d, x, y, w] for ``n`` Dani qubits."""

    coefficients: np.ndarray
    n: int = 1

    def __post_init__(self):
        f = np.array(self.coefficients, dtype=float)
        if f.ndim != 6:
            raise FunctionalError(f"Bell coefficients need 6 axes (a, b, d, x, y, w), got {f.ndim}")
        if not np.all(np.isfinite(f)):
            raise FunctionalError("Bell coefficients must be finite")
        f.setflags(write=False)
        object.__setattr__(self, "coefficients", f)

    def reconstruct(self) -> np.ndarray:
        """sum_dw f_abdxyw S_d|w, the steering matrices these coefficients encode."""
        S = pauli_steered_elements(self.n)
        return np.einsum("abdxyw,dwij->abxyij", self.coefficients, S)

    def to_document(self) -> dict:
        return {
            "kind": "bell_coefficients",
            "n": self.n,
            "index_order": ["a", "b", "d", "x", "y", "w"],
            "shape": list(self.coefficients.shape),
            "values": self.coefficients.reshape(-1).tolist(),
        }

    @classmethod
    def from_document(cls, doc, source="<document>"):
        try:
            if doc.get("index_order", ["a", "b", "d", "x", "y", "w"]) != ["a", "b", "d", "x", "y", "w"]:
                raise ValueError("index_order must be a, b, d, x, y, w")
            f = np.asarray(doc["values"], dtype=float).reshape(doc["shape"])
            return cls(f, int(doc.get("n", 1)))
        except (KeyError, ValueError, TypeError) as exc:
            raise AssemblageParseError(f"bad Bell coefficients: {exc}", source) from None


# one-qubit rule: I -> 1/3 on every (d, w); P_w -> (-1)^d on its own w
_SINGLE_RULE = np.zeros((4, 2, 3))
_SINGLE_RULE[0] = 1.0 / 3.0
for _w in range(3):
    _SINGLE_RULE[_w + 1, 0, _w] = 1.0
    _SINGLE_RULE[_w + 1, 1, _w] = -1.0


def decompose_to_bell(F: SteeringFunctional, n: int | None = None) -> BellCoefficients:
    """Coefficients f with sum_dw f_abdxyw S_d|w = F_abxy exactly.

    Each F_abxy is expanded in tensor Paulis, then every single-qubit
    factor is spread over the six projectors by the fixed one-qubit rule.
    """
    Fc = F.coefficients
    D = Fc.shape[-1]
    if n is None:
        n = int(round(math.log2(D))) if D > 1 else 0
    if n < 1 or 2 ** n != D:
        raise FunctionalError(f"dimension {D} is not 2**{n}; embed the functional first")
    basis = np.stack(tensor_pauli_basis(n))
    c = np.einsum("abxyij,sji->abxys", Fc, basis) / D
    if np.max(np.abs(c.imag), initial=0.0) > 1e-9:
        raise FunctionalError("Pauli coefficients are not real; functional is not Hermitian")
    c = c.real
    lead = c.shape[:4]
    t = c.reshape(lead + (4,) * n)
    # apply the one-qubit rule along every qubit axis: axis (4,) -> (2, 3)
    for q in range(n):
        axis = 4 + 2 * q
        t = np.moveaxis(np.tensordot(t, _SINGLE_RULE, axes=([axis], [0])), [-2, -1], [axis, axis + 1])
    # axes now (a, b, x, y, d1, w1, ..., dn, wn)
    order = list(range(4)) + [4 + 2 * q for q in range(n)] + [5 + 2 * q for q in range(n)]
    t = t.transpose(order).reshape(lead + (2 ** n, 3 ** n))
    f = np.moveaxis(t, 4, 2)  # a b d x y w
    return BellCoefficients(f, n)


def evaluate_bell(f: BellCoefficients, corr: CorrelationTable) -> float:
    """Activated Bell value nD * sum f_abdxyw p(a b 0 d | x y star w).

    The factor nD (the number of Dani outcomes) evaluates the functional
    against Charlie's states conditioned on Dani's outcome, whose prior is
    uniform once the self-test succeeds. It is a fixed positive scale and
    does not affect the sign.
    """
    if corr.parties != "abcd":
        raise FunctionalError(f"need a table over parties 'abcd', got {corr.parties!r}")
    if corr.star is None:
        raise FunctionalError("table has no star setting for Charlie")
    p = corr.probs[:, :, 0, :, :, :, corr.star, :]
    fc = f.coefficients
    if fc.shape != p.shape:
        raise FunctionalError(f"coefficient shape {fc.shape} does not match table slice {p.shape}")
    return float(fc.shape[2] * np.sum(fc * p))


# ---------------------------------------------------------------------------
# Charlie-Dani self-test

# (z, w, sign), 0-based; Charlie has six settings, Dani three
ICD_TERMS = (
    (0, 0, 1), (0, 1, 1), (1, 0, -1), (1, 1, 1), (2, 0, 1), (3, 0, 1),
    (2, 2, 1), (3, 2, -1), (4, 1, 1), (5, 1, 1), (4, 2, 1), (5, 2, -1),
)
ICD_CLASSICAL = 6.0
ICD_QUANTUM = 6 * SQRT2


def icd_matrix() -> np.ndarray:
    M = np.zeros((6, 3))
    for z, w, s in ICD_TERMS:
        M[z, w] = s
    return M


def correlators(p) -> np.ndarray:
    """E[z, w] = sum_cd (-1)^(c+d) p[c, d, z, w] for binary outcomes."""
    p = np.asarray(p)
    sign = np.array([[1, -1], [-1, 1]])
    return np.einsum("cd,cdzw->zw", sign, p[:2, :2])


def icd_value(corr) -> float:
    """The twelve-term correlator sum over Charlie's first six settings."""
    if isinstance(corr, CorrelationTable):
        if corr.parties != "cd":
            corr = corr.marginal("cd")
        p = corr.probs
    else:
        p = np.asarray(corr)
    if p.ndim != 4 or p.shape[0] != 2 or p.shape[1] != 2 or p.shape[2] < 6 or p.shape[3] < 3:
        raise FunctionalError(f"need p[c, d, z, w] with binary outcomes, z >= 6, w >= 3; got shape {p.shape}")
    E = correlators(p[:, :, :6, :3])
    return float(np.sum(icd_matrix() * E))


# observables for Charlie on his half of |Phi+>; Dani measures X, Y, Z
_H = 1 / SQRT2
X, Yp, Zp = PAULIS
SELFTEST_OBSERVABLES = (
    _H * (X - Yp),
    -_H * (X + Yp),
    _H * (X + Zp),
    _H * (X - Zp),
    _H * (Zp - Yp),
    -_H * (Yp + Zp),
)


def _projectors(obs) -> np.ndarray:
    return np.stack([(I2 + obs) / 2, (I2 - obs) / 2])


def selftest_charlie_effects(flagged: bool = False) -> np.ndarray:
    """Charlie's self-test effects, shape (6, 2, k, k).

    With ``flagged`` they act on qubit (x) flag and use the conjugate
    observable on the flag-0 branch, so both branches of the reference
    assemblage reach the maximal score.
    """
    eff = np.stack([_projectors(C) for C in SELFTEST_OBSERVABLES])
    if not flagged:
        return eff
    P0 = np.diag([1.0, 0.0]).astype(complex)
    P1 = np.diag([0.0, 1.0]).astype(complex)
    return np.einsum("zcij,kl->zcikjl", np.conj(eff), P0).reshape(6, 2, 4, 4) + np.einsum(
        "zcij,kl->zcikjl", eff, P1
    ).reshape(6, 2, 4, 4)


def dani_pauli_effects() -> np.ndarray:
    return np.stack([_projectors(P) for P in PAULIS])


def optimal_selftest_model() -> QuantumModel:
    """|Phi+> shared by (Charlie, Dani) with the optimal measurement set."""
    return QuantumModel(phi_plus(2), (2, 2), (selftest_charlie_effects(), dani_pauli_effects()))


# ---------------------------------------------------------------------------
# Bell expressions for optimization


@dataclass(frozen=True, eq=False)
class BellExpression:
    """Full-probability coefficients, axes (outputs..., inputs...)."""

    coefficients: np.ndarray
    name: str = ""

    @property
    def n_parties(self):
        return self.coefficients.ndim // 2

    @property
    def outcomes(self):
        return self.coefficients.shape[: self.n_parties]

    @property
    def settings(self):
        return self.coefficients.shape[self.n_parties:]

    def value(self, p) -> float:
        return float(np.sum(self.coefficients * np.asarray(p)))


def chsh_expression() -> BellExpression:
    return BellExpression(chsh_signs(), "chsh")


def icd_expression() -> BellExpression:
    sign = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return BellExpression(np.einsum("cd,zw->cdzw", sign, icd_matrix()), "icd")
