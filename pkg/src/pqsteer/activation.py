"""Activation of post-quantum steering in the four-party network.

Charlie holds the tripartite assemblage on system C and the self-tested
reference assemblage on C' (x) flag. His joint setting ``star`` measures
the maximally entangled projector on C (x) C' (identity on the flag); the
resulting correlations feed the Bell functional built from the steering
functional's Pauli decomposition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matkernel as mk
from .assemblage import Assemblage, AssemblageError, require_valid, tensor
from .functionals import (
    BellCoefficients,
    CorrelationTable,
    FunctionalError,
    SteeringFunctional,
    decompose_to_bell,
    evaluate_bell,
    evaluate_steering,
    icd_value,
    selftest_charlie_effects,
)
from .quantum import ReferenceAssemblage, pauli_steered_elements, phi_plus, reference_assemblage

DEFAULT_TOL = 1e-6
POST_QUANTUM = "post-quantum"
INCONCLUSIVE = "inconclusive"


def max_entangled_projector(n: int) -> np.ndarray:
    """|Psi_n><Psi_n| with |Psi_n> = 2^(-n/2) sum_k |kk> on 2^n (x) 2^n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return phi_plus(2 ** n)


def entangled_readout(xi, A) -> float:
    """tr[M0 (xi (x) A)] computed from the explicit projector."""
    xi = np.asarray(xi, dtype=complex)
    A = np.asarray(A, dtype=complex)
    if xi.shape != A.shape or xi.ndim != 2 or xi.shape[0] != xi.shape[1]:
        raise mk.DimensionError(f"xi {xi.shape} and A {A.shape} must be equal square shapes")
    D = xi.shape[0]
    n = int(round(math.log2(D))) if D > 1 else 0
    if n < 1 or 2 ** n != D:
        raise mk.DimensionError(f"dimension {D} is not a power of two")
    return mk.trace_product(max_entangled_projector(n), mk.kron(xi, A)).real


def star_effect(n: int) -> np.ndarray:
    """Default joint effect M0 (x) I_flag."""
    return mk.kron(max_entangled_projector(n), np.eye(2))


def default_charlie_povms(dC: int, ref: ReferenceAssemblage, star: np.ndarray | None = None):
    """Charlie's settings: the six self-test settings (one qubit only), then star."""
    K = ref.dim
    D = dC * K
    if star is None:
        if dC != 2 ** ref.n:
            raise AssemblageError(f"default star effect needs dC = 2**n = {2 ** ref.n}, got {dC}")
        star = star_effect(ref.n)
    star = np.asarray(star, dtype=complex)
    if star.shape != (D, D):
        raise mk.DimensionError(f"star effect must be {D}x{D}, got {star.shape}")
    settings = []
    if ref.n == 1:
        for eff in selftest_charlie_effects(flagged=True):
            settings.append([np.kron(np.eye(dC), e) for e in eff])
    settings.append([star, np.eye(D) - star])
    return np.array(settings), len(settings) - 1


def _check_povms(povms, tol=mk.FEASIBILITY_TOL):
    D = povms.shape[-1]
    complete = float(np.max(np.abs(povms.sum(axis=1) - np.eye(D))))
    if complete > tol:
        raise AssemblageError(f"Charlie's effects do not sum to identity (error {complete:.2e})")
    herm = (povms + mk.dagger(povms)) / 2
    min_eig = float(np.min(np.linalg.eigvalsh(herm)))
    if min_eig < -tol:
        raise AssemblageError(f"Charlie's effect has negative eigenvalue {min_eig:.2e}")


def build_network_correlations(asm: Assemblage, ref: ReferenceAssemblage, charlie_povms=None,
                               star: int | None = None, star_effect_override=None,
                               check: bool = True) -> CorrelationTable:
    """p(abcd|xyzw) = tr(M_c|z sigma_ab|xy (x) sigma_d|w).

    By default Charlie has the self-test settings (for one qubit) followed
    by the star setting; ``charlie_povms`` (shape (z, c, D, D)) replaces
    them, with ``star`` naming the joint setting.
    """
    net = tensor(asm, ref, check=check)
    if charlie_povms is None:
        povms, star = default_charlie_povms(asm.dim, ref, star_effect_override)
    else:
        povms = np.asarray(charlie_povms, dtype=complex)
        if povms.ndim != 4 or povms.shape[-1] != net.dim:
            raise mk.DimensionError(f"Charlie effects must have shape (z, c, {net.dim}, {net.dim}), got {povms.shape}")
    if check:
        _check_povms(povms)
    p = np.einsum("zcji,abdxywij->abcdxyzw", povms, np.asarray(net.elements), optimize=True)
    return CorrelationTable(p.real, "abcd", star)


def activated_bell_value(asm: Assemblage, f: BellCoefficients, r: float) -> float:
    """Closed form r/2^n sum f tr(S^T sigma) + (1-r)/2^n sum f tr(S sigma)."""
    S = pauli_steered_elements(f.n)
    el = np.asarray(asm.elements)
    plain = np.einsum("abdxyw,dwij,abxyji->", f.coefficients, S, el)
    transposed = np.einsum("abdxyw,dwji,abxyji->", f.coefficients, S, el)
    return float(((r * transposed + (1 - r) * plain) / 2 ** f.n).real)


@dataclass(frozen=True, eq=False)
class ActivationReport:
    assemblage_digest: str
    functional_digest: str
    n: int
    r: float
    coefficients: BellCoefficients
    steering_value: float
    bell_value: float
    closed_form_value: float
    verdict: str
    tolerance: float
    selftest_score: float | None = None
    embedded_from: int | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def post_quantum(self) -> bool:
        return self.verdict == POST_QUANTUM

    def scalars(self) -> dict:
        return {
            "assemblage_digest": self.assemblage_digest,
            "functional_digest": self.functional_digest,
            "n": self.n,
            "r": self.r,
            "steering_value": self.steering_value,
            "bell_value": self.bell_value,
            "closed_form_value": self.closed_form_value,
            "verdict": self.verdict,
            "tolerance": self.tolerance,
            "selftest_score": self.selftest_score,
            "embedded_from": self.embedded_from,
        }

    def to_dict(self) -> dict:
        d = self.scalars()
        d["coefficients"] = self.coefficients.to_document()
        d["notes"] = list(self.notes)
        return d


def activate(asm: Assemblage, F: SteeringFunctional, r: float = 0.0, tol: float = DEFAULT_TOL,
             assume_independence: bool = False, check: bool = True) -> ActivationReport:
    """Run the full pipeline for an assemblage on 2^n dimensions.

    The verdict is ``post-quantum`` iff the Bell value is below ``-tol``.
    For r strictly between 0 and 1 the product structure of Charlie's
    systems is not implied by the self-test, so a negative value only
    counts when ``assume_independence`` is set.
    """
    D = asm.dim
    n = int(round(math.log2(D))) if D > 1 else 0
    if n < 1 or 2 ** n != D:
        raise AssemblageError(f"assemblage dimension {D} is not a power of two; use activate_n")
    if F.coefficients.shape != np.asarray(asm.elements).shape:
        raise FunctionalError("functional and assemblage shapes differ")
    if F.quantum_bound != 0:
        raise FunctionalError("activation needs a functional normalized to quantum bound 0")
    if check:
        require_valid(asm)
    f = decompose_to_bell(F, n)
    ref = reference_assemblage(n, r)
    table = build_network_correlations(asm, ref, check=check)
    bell = evaluate_bell(f, table)
    steering = evaluate_steering(F, asm)
    closed = activated_bell_value(asm, f, r)
    score = icd_value(table.marginal("cd")) if n == 1 else None
    notes = []
    if r in (0.0, 1.0) or assume_independence:
        verdict = POST_QUANTUM if bell < -tol else INCONCLUSIVE
    else:
        verdict = INCONCLUSIVE
        if bell < -tol:
            notes.append("negative value at intermediate r; independence not established, pass assume_independence")
    return ActivationReport(
        assemblage_digest=asm.digest(),
        functional_digest=F.digest(),
        n=n,
        r=float(r),
        coefficients=f,
        steering_value=steering,
        bell_value=bell,
        closed_form_value=closed,
        verdict=verdict,
        tolerance=tol,
        selftest_score=score,
        notes=tuple(notes),
    )


def embed_assemblage(asm: Assemblage, D: int) -> Assemblage:
    """Zero-pad every element into the leading block of a D-dimensional space."""
    el = np.asarray(asm.elements)
    d = el.shape[-1]
    if D < d:
        raise mk.DimensionError(f"cannot embed dimension {d} into {D}")
    out = np.zeros(el.shape[:-2] + (D, D), dtype=complex)
    out[..., :d, :d] = el
    return Assemblage(out)


def embed_functional(F: SteeringFunctional, D: int) -> SteeringFunctional:
    Fc = F.coefficients
    d = Fc.shape[-1]
    if D < d:
        raise mk.DimensionError(f"cannot embed dimension {d} into {D}")
    out = np.zeros(Fc.shape[:-2] + (D, D), dtype=complex)
    out[..., :d, :d] = Fc
    return SteeringFunctional(out, F.quantum_bound, F.name)


def activate_n(asm: Assemblage, F: SteeringFunctional, r: float = 0.0, tol: float = DEFAULT_TOL,
               assume_independence: bool = False, check: bool = True) -> ActivationReport:
    """Embed a d-dimensional problem into n = ceil(log2 d) qubits and activate."""
    d = asm.dim
    if d < 2:
        raise mk.DimensionError("activate_n needs dimension >= 2")
    n = max(1, math.ceil(math.log2(d)))
    D = 2 ** n
    if D == d:
        return activate(asm, F, r, tol, assume_independence, check)
    rep = activate(embed_assemblage(asm, D), embed_functional(F, D), r, tol, assume_independence, check)
    return ActivationReport(**{**rep.__dict__, "embedded_from": d})
