"""Quantum models and the assemblages they generate.

Party order in a model's state is the order of ``model.dims``; for the
tripartite steering scenario it is (A, B, C) with Charlie last. Pauli
settings are indexed 0, 1, 2 for X, Y, Z. For ``n`` qubits a Dani outcome
``d`` and setting ``w`` are flattened big-endian: ``d = sum d_i 2**(n-1-i)``
and ``w = sum w_i 3**(n-1-i)``.
"""
from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from . import matkernel as mk
from .assemblage import (
    Assemblage,
    AssemblageError,
    AssemblageParseError,
    BipartiteAssemblage,
    CheckResult,
    ValidationReport,
    decode_matrix,
    encode_matrix,
    require_valid,
)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (X, Y, Z)
KET0 = np.array([[1, 0], [0, 0]], dtype=complex)
KET1 = np.array([[0, 0], [0, 1]], dtype=complex)


class QuantumModelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuantumModel:
    """A shared density matrix plus local measurements.

    ``measurements[j]`` is an array of shape ``(settings, outcomes, d_j, d_j)``
    or ``None`` for a party that is not measured (the steered party).
    """

    state: np.ndarray
    dims: tuple[int, ...]
    measurements: tuple = field(default=())

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        state = np.array(self.state, dtype=complex)
        if state.shape != (int(np.prod(dims)),) * 2:
            raise QuantumModelError(f"state shape {state.shape} does not match dims {dims}")
        meas = tuple(self.measurements) or (None,) * len(dims)
        if len(meas) != len(dims):
            raise QuantumModelError(f"{len(meas)} measurement entries for {len(dims)} parties")
        fixed = []
        for j, m in enumerate(meas):
            if m is None:
                fixed.append(None)
                continue
            m = np.array(m, dtype=complex)
            if m.ndim != 4 or m.shape[2:] != (dims[j], dims[j]):
                raise QuantumModelError(f"party {j} effects must have shape (s, o, {dims[j]}, {dims[j]}), got {m.shape}")
            m.setflags(write=False)
            fixed.append(m)
        state.setflags(write=False)
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "measurements", tuple(fixed))

    def validate(self, tol: float = mk.FEASIBILITY_TOL) -> ValidationReport:
        checks = []
        rho = self.state
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        checks.append(CheckResult("state_hermitian", herm <= tol, herm))
        min_eig = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0])
        checks.append(CheckResult("state_psd", min_eig >= -tol, max(0.0, -min_eig)))
        tr_err = abs(np.trace(rho).real - 1.0)
        checks.append(CheckResult("state_trace", tr_err <= tol, tr_err))
        for j, m in enumerate(self.measurements):
            if m is None:
                continue
            herm = float(np.max(np.abs(m - mk.dagger(m))))
            min_eig = float(np.min(np.linalg.eigvalsh((m + mk.dagger(m)) / 2)))
            complete = float(np.max(np.abs(m.sum(axis=1) - np.eye(self.dims[j]))))
            checks.append(CheckResult(f"party{j}_hermitian", herm <= tol, herm))
            checks.append(CheckResult(f"party{j}_psd", min_eig >= -tol, max(0.0, -min_eig)))
            checks.append(CheckResult(f"party{j}_complete", complete <= tol, complete))
        return ValidationReport(tuple(checks), tol)

    def require_valid(self, tol=mk.FEASIBILITY_TOL):
        rep = self.validate(tol)
        if not rep.passed:
            names = ", ".join(f"{c.name} ({c.worst:.2e})" for c in rep.failed())
            raise QuantumModelError(f"invalid quantum model: {names}")
        return rep


# ---------------------------------------------------------------------------
# contraction of a model against its measurements


def _contract(model: QuantumModel, measured: Sequence[int]):
    """Apply measurements of ``measured`` parties, keep the rest as operators.

    Result axes: outcomes of measured parties, settings of measured parties,
    then the row and column index of the remaining parties (grouped).
    """
    n = len(model.dims)
    letters = iter(string.ascii_letters)
    rows = [next(letters) for _ in range(n)]
    cols = [next(letters) for _ in range(n)]
    terms, operands = [], []
    outs, ins = [], []
    for j in measured:
        s, o = next(letters), next(letters)
        # E[s, o, i, p] contracts row p and column i of party j
        terms.append(s + o + cols[j] + rows[j])
        operands.append(model.measurements[j])
        outs.append(o)
        ins.append(s)
    keep = [j for j in range(n) if j not in measured]
    out = "".join(outs + ins + [rows[j] for j in keep] + [cols[j] for j in keep])
    expr = ",".join(terms + ["".join(rows + cols)]) + "->" + out
    tensor = model.state.reshape(model.dims + model.dims)
    res = np.einsum(expr, *operands, tensor, optimize=True)
    dk = int(np.prod([model.dims[j] for j in keep])) if keep else 1
    return res.reshape(res.shape[: 2 * len(measured)] + (dk, dk))


def assemblage_from_model(model: QuantumModel, steered_party: int = -1, check: bool = True):
    """Assemblage on ``steered_party`` given the other parties' measurements.

    Two measured parties give an ``Assemblage`` indexed (a, b, x, y); one
    gives a ``BipartiteAssemblage`` indexed (d, w).
    """
    n = len(model.dims)
    steered = steered_party % n
    # effects listed for the steered party are ignored
    measured = [j for j in range(n) if j != steered]
    if any(model.measurements[j] is None for j in measured):
        raise QuantumModelError("every non-steered party needs measurements")
    if check:
        model.require_valid()
    el = _contract(model, measured)
    if len(measured) == 2:
        return Assemblage(el)
    if len(measured) == 1:
        return BipartiteAssemblage(el)
    raise QuantumModelError(f"need 2 or 3 parties, model has {n}")


def model_probabilities(model: QuantumModel) -> np.ndarray:
    """p(outcomes | settings) with axes (o_1..o_n, s_1..s_n)."""
    el = _contract(model, list(range(len(model.dims))))
    return np.real(el[..., 0, 0])


def conjugate_model(model: QuantumModel) -> QuantumModel:
    """Entrywise complex conjugate of state and effects.

    Its assemblage is the elementwise transpose of the original's.
    """
    meas = tuple(None if m is None else np.conj(m) for m in model.measurements)
    return QuantumModel(np.conj(model.state), model.dims, meas)


# ---------------------------------------------------------------------------
# Pauli structures


def tensor_pauli_basis(n: int) -> list[np.ndarray]:
    """All 4**n tensor products of I, X, Y, Z in lexicographic order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    singles = (I2, X, Y, Z)
    basis = [np.ones((1, 1), dtype=complex)]
    for _ in range(n):
        basis = [np.kron(b, s) for b in basis for s in singles]
    return basis


def pauli_steered_elements(n: int) -> np.ndarray:
    """Products of Pauli eigenprojectors (I + (-1)^d P_w)/2, shape (2^n, 3^n, 2^n, 2^n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    single = np.empty((2, 3, 2, 2), dtype=complex)
    for w, P in enumerate(PAULIS):
        for d in range(2):
            single[d, w] = (I2 + (-1) ** d * P) / 2
    out = single
    for _ in range(n - 1):
        D, W, k, _ = out.shape
        out = np.einsum("dwij,evkl->dewvikjl", out, single).reshape(D * 2, W * 3, k * 2, k * 2)
    return out


def split_outcome(d: int, n: int) -> tuple[int, ...]:
    return tuple((d >> (n - 1 - i)) & 1 for i in range(n))


def split_setting(w: int, n: int) -> tuple[int, ...]:
    return tuple((w // 3 ** (n - 1 - i)) % 3 for i in range(n))


def join_outcome(bits) -> int:
    return int(sum(b << (len(bits) - 1 - i) for i, b in enumerate(bits)))


def join_setting(digits) -> int:
    return int(sum(t * 3 ** (len(digits) - 1 - i) for i, t in enumerate(digits)))


@dataclass(frozen=True, eq=False)
class ReferenceAssemblage(BipartiteAssemblage):
    """Self-tested Pauli assemblage on ``n`` qubits plus a flag qubit.

    ``elements`` is the normalized assemblage Dani prepares (outcomes are
    uniform, p(d|w) = 2**-n). ``conditional_elements`` are Charlie's states
    given (d, w): r * S (x) |0><0| + (1 - r) * S^T (x) |1><1|.
    """

    n: int = 1
    r: float = 0.0

    @property
    def conditional_elements(self) -> np.ndarray:
        return np.asarray(self.elements) * 2 ** self.n

    def _replace(self, elements, **kw):
        return BipartiteAssemblage(elements, **kw)


def reference_assemblage(n: int = 1, r: float = 0.0) -> ReferenceAssemblage:
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")
    # products with subnormal weights round, which would break the exact
    # equality of the reduced states across settings
    r = 0.0 if r < np.finfo(float).tiny else float(r)
    s = pauli_steered_elements(n)
    st = np.swapaxes(s, -1, -2)
    cond = r * np.einsum("dwij,kl->dwikjl", s, KET0) + (1 - r) * np.einsum("dwij,kl->dwikjl", st, KET1)
    D, W, k, _ = s.shape
    cond = cond.reshape(D, W, 2 * k, 2 * k)
    return ReferenceAssemblage(cond / 2 ** n, n=n, r=float(r))


def pr_box_assemblage(dC: int = 2) -> Assemblage:
    """PR-box correlations attached to the maximally mixed state of Charlie."""
    el = np.zeros((2, 2, 2, 2, dC, dC), dtype=complex)
    for a in range(2):
        for b in range(2):
            for x in range(2):
                for y in range(2):
                    if a ^ b == x * y:
                        el[a, b, x, y] = np.eye(dC) / (2 * dC)
    return Assemblage(el)


def phi_plus(dim: int = 2) -> np.ndarray:
    # entries set directly so they are exactly 1/dim
    P = np.zeros((dim * dim, dim * dim), dtype=complex)
    idx = [k * dim + k for k in range(dim)]
    P[np.ix_(idx, idx)] = 1.0 / dim
    return P


# ---------------------------------------------------------------------------
# GHJW


def ghjw_realization(asm: BipartiteAssemblage, tol: float = mk.FEASIBILITY_TOL,
                     cutoff: float = mk.RANK_CUTOFF) -> QuantumModel:
    """Quantum model (Dani, Charlie) reproducing a bipartite assemblage.

    Purifies rho = sum_d sigma_{d|w} on its support and sets Dani's effects
    to (rho^-1/2 sigma_{d|w} rho^-1/2)^T in rho's eigenbasis.
    """
    require_valid(asm, tol)
    el = np.asarray(asm.elements)
    reduced = el.sum(axis=0)
    spread = float(np.max(np.abs(reduced - reduced[0])))
    if spread > tol:
        raise AssemblageError(f"reduced state differs across settings by {spread:.3e}")
    rho = reduced.mean(axis=0)
    vals, vecs = mk.hermitian_eig((rho + rho.conj().T) / 2)
    keep = vals >= cutoff * vals[0]
    lam, V = vals[keep], vecs[:, keep]
    k = lam.size
    # |psi> = sum_i sqrt(lam_i) |i>_D |e_i>_C
    psi = np.einsum("i,ci->ic", np.sqrt(lam), V).reshape(-1)
    state = np.outer(psi, psi.conj())
    inv_sqrt = 1 / np.sqrt(lam)
    # S_ij = <e_i| rho^-1/2 sigma rho^-1/2 |e_j>, effect = S^T
    S = np.einsum("ci,dwce,ej->dwij", V.conj(), el, V) * inv_sqrt[:, None] * inv_sqrt[None, :]
    effects = np.swapaxes(S, -1, -2)
    effects = (effects + mk.dagger(effects)) / 2
    # axes (w, d) as (setting, outcome)
    effects = np.swapaxes(effects, 0, 1)
    return QuantumModel(state, (k, asm.dim), (effects, None))


def reconstruction_error(asm: BipartiteAssemblage, model: QuantumModel) -> float:
    back = assemblage_from_model(model, steered_party=1)
    return float(np.max(np.abs(np.asarray(back.elements) - np.asarray(asm.elements))))


# ---------------------------------------------------------------------------
# random sampling


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def haar_unitary(dim: int, seed=None) -> np.ndarray:
    if dim == 1:
        phase = _rng(seed).uniform(0, 2 * np.pi)
        return np.array([[np.exp(1j * phase)]])
    return unitary_group.rvs(dim, random_state=_rng(seed))


def haar_pure_state(dim: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_povm(dim: int, outcomes: int, seed=None) -> np.ndarray:
    """Full-rank POVM compressed from a Haar unitary on ``dim * outcomes``."""
    U = haar_unitary(dim * outcomes, seed)
    V = U[:, :dim].reshape(outcomes, dim, dim)
    effects = mk.dagger(V) @ V
    return (effects + mk.dagger(effects)) / 2


def random_projective(dim: int, outcomes: int = 2, seed=None) -> np.ndarray:
    """Projective measurement in a Haar basis with a random rank split."""
    rng = _rng(seed)
    U = haar_unitary(dim, rng)
    labels = rng.integers(0, outcomes, size=dim)
    effects = np.zeros((outcomes, dim, dim), dtype=complex)
    for o in range(outcomes):
        cols = U[:, labels == o]
        effects[o] = cols @ cols.conj().T
    return effects


def random_effect(dim: int, seed=None, projective: bool = False) -> np.ndarray:
    """Random 0 <= E <= I (a projector when ``projective``)."""
    rng = _rng(seed)
    U = haar_unitary(dim, rng)
    lam = rng.integers(0, 2, size=dim).astype(float) if projective else rng.uniform(0, 1, size=dim)
    E = (U * lam) @ U.conj().T
    return (E + E.conj().T) / 2


def random_density(dim: int, rank: int | None = None, seed=None) -> np.ndarray:
    rng = _rng(seed)
    rank = dim if rank is None else rank
    G = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def sample_quantum_model(settings: Sequence[int], outcomes: Sequence[int], dims: Sequence[int],
                         seed=None, steered_last: bool = True) -> QuantumModel:
    """Haar pure global state and random full-rank POVMs for all but the last party."""
    rng = _rng(seed)
    dims = tuple(int(d) for d in dims)
    psi = haar_pure_state(int(np.prod(dims)), rng)
    meas = []
    n_measured = len(dims) - 1 if steered_last else len(dims)
    for j in range(n_measured):
        meas.append(np.stack([random_povm(dims[j], outcomes[j], rng) for _ in range(settings[j])]))
    if steered_last:
        meas.append(None)
    return QuantumModel(np.outer(psi, psi.conj()), dims, tuple(meas))


def sample_quantum_assemblage(scenario, dims: Sequence[int], seed=None) -> Assemblage:
    """Assemblage of a random tripartite model; ``dims = (dA, dB, dC)``."""
    model = sample_quantum_model((scenario.nX, scenario.nY), (scenario.nA, scenario.nB), dims, seed)
    return assemblage_from_model(model, steered_party=2)


# ---------------------------------------------------------------------------
# JSON


def model_to_document(model: QuantumModel) -> dict:
    meas = []
    for m in model.measurements:
        meas.append(None if m is None else [[encode_matrix(e) for e in setting] for setting in m])
    return {"kind": "quantum_model", "dims": list(model.dims), "state": encode_matrix(model.state), "measurements": meas}


def model_from_document(doc: dict, source: str = "<document>") -> QuantumModel:
    try:
        dims = [int(d) for d in doc["dims"]]
        state = decode_matrix(doc["state"], f"{source}.state")
        meas = []
        for j, m in enumerate(doc.get("measurements") or [None] * len(dims)):
            if m is None:
                meas.append(None)
                continue
            meas.append(np.array([[decode_matrix(e, f"{source}.measurements[{j}]") for e in s] for s in m]))
    except KeyError as exc:
        raise AssemblageParseError(f"quantum model missing field {exc.args[0]!r}", source) from None
    except QuantumModelError as exc:
        raise AssemblageParseError(str(exc), source) from None
    try:
        return QuantumModel(state, tuple(dims), tuple(meas))
    except QuantumModelError as exc:
        raise AssemblageParseError(str(exc), source) from None


def save_model(model: QuantumModel, path):
    Path(path).write_text(json.dumps(model_to_document(model), indent=1))


def load_model(path) -> QuantumModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise AssemblageParseError(f"invalid JSON: {exc.msg}", f"{path}:{exc.lineno}:{exc.colno}") from None
    return model_from_document(doc, str(path))
