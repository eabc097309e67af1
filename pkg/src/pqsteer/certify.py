"""Certificates: self-test score, classical bounds, extremality, independence
and randomized quantum non-negativity."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import matkernel as mk
from .activation import build_network_correlations, max_entangled_projector
from .assemblage import (
    Assemblage,
    BipartiteAssemblage,
    NetworkAssemblage,
    tensor,
    validate,
)
from .functionals import (
    ICD_QUANTUM,
    BellCoefficients,
    BellExpression,
    CorrelationTable,
    FunctionalError,
    evaluate_bell,
    icd_expression,
    icd_value,
)
from .quantum import (
    KET0,
    KET1,
    assemblage_from_model,
    pauli_steered_elements,
    random_effect,
    reference_assemblage,
    sample_quantum_model,
)

SELFTEST_EPS = 1e-6
EXTREMAL_SCORE_TOL = 1e-9
EXTREMAL_DIST_TOL = 1e-8
INDEPENDENCE_TOL = 1e-8
NONNEG_TOL = 1e-6
ENUMERATION_LIMIT = 1 << 22


@dataclass(frozen=True)
class Certificate:
    kind: str
    score: float
    threshold: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "score": self.score,
            "threshold": self.threshold,
            "pass": self.passed,
            "details": self.details,
        }


# ---------------------------------------------------------------------------
# self-test


def selftest_certificate(corr: CorrelationTable, epsilon: float = SELFTEST_EPS) -> Certificate:
    """Pass iff the I^CD score is within ``epsilon`` of 6 sqrt2."""
    if corr.parties != "cd":
        if "c" not in corr.parties or "d" not in corr.parties:
            raise FunctionalError(f"table over {corr.parties!r} has no Charlie/Dani parties")
        corr = corr.marginal("cd")
    report = corr.validate()
    score = icd_value(corr)
    gap = abs(score - ICD_QUANTUM)
    return Certificate(
        "selftest",
        score,
        ICD_QUANTUM,
        bool(gap <= epsilon and report.passed),
        {"gap": gap, "epsilon": epsilon, "table_valid": report.passed},
    )


# ---------------------------------------------------------------------------
# classical bound


def _correlator_matrix(expr: BellExpression):
    """Return M when coefficients are s(c, d) M[z, w] with s the parity sign."""
    c = expr.coefficients
    if c.ndim != 4 or c.shape[:2] != (2, 2):
        return None
    M = c[0, 0]
    sign = np.array([[1.0, -1.0], [-1.0, 1.0]])
    if np.allclose(c, np.einsum("cd,zw->cdzw", sign, M), atol=0, rtol=0):
        return M
    return None


def _strategies(outcomes: int, settings: int) -> np.ndarray:
    """One-hot deterministic strategies, shape (outcomes**settings, outcomes, settings)."""
    table = np.array(list(itertools.product(range(outcomes), repeat=settings)), dtype=int).reshape(-1, settings)
    D = np.zeros((table.shape[0], outcomes, settings))
    for s in range(settings):
        D[np.arange(table.shape[0]), table[:, s], s] = 1.0
    return D


def classical_bound(expr: BellExpression | None = None) -> float:
    """Exact maximum over every deterministic local strategy.

    Correlator-form two-party expressions go through the compiled
    enumerator; anything else is enumerated with numpy.
    """
    if expr is None:
        expr = icd_expression()
    k = expr.n_parties
    outs, sets = expr.outcomes, expr.settings
    total = int(np.prod([float(o) ** s for o, s in zip(outs, sets)]))
    if total > ENUMERATION_LIMIT:
        raise FunctionalError(f"{total} deterministic strategies exceed the enumeration limit")
    M = _correlator_matrix(expr)
    if M is not None:
        return mk.kernel.correlator_max(np.ascontiguousarray(M, dtype=float))
    values = np.asarray(expr.coefficients, dtype=float)
    # axes are (strategies done..., outputs left..., inputs left...)
    for j in range(k):
        D = _strategies(outs[j], sets[j])
        values = np.moveaxis(np.tensordot(values, D, axes=([j, k], [1, 2])), -1, j)
    return float(values.max())


# ---------------------------------------------------------------------------
# extremality


def sigma_star() -> BipartiteAssemblage:
    """The extremal target: half the Pauli eigenprojectors, on flag |0><0|."""
    return BipartiteAssemblage(np.asarray(reference_assemblage(1, 1.0).elements))


def extremality_witness() -> np.ndarray:
    """F_dw = 2 S_{d+1|w} (x) |0><0| + I (x) |1><1|, shape (2, 3, 4, 4).

    S are the unnormalized Pauli eigenprojectors; every F_dw is PSD and
    tr(F_dw sigma*_d|w) = 0.
    """
    S = pauli_steered_elements(1)
    F = np.empty((2, 3, 4, 4), dtype=complex)
    for d in range(2):
        for w in range(3):
            F[d, w] = 2 * np.kron(S[1 - d, w], KET0) + np.kron(np.eye(2), KET1)
    return F


def extremality_certificate(asm: BipartiteAssemblage, score_tol: float = EXTREMAL_SCORE_TOL,
                            dist_tol: float = EXTREMAL_DIST_TOL) -> Certificate:
    """Score sum tr(F_dw sigma_d|w); pass iff it vanishes and asm equals sigma*."""
    el = np.asarray(asm.elements)
    if el.shape != (2, 3, 4, 4):
        raise mk.DimensionError(f"need a (2 outcomes, 3 settings, 4x4) assemblage, got {el.shape}")
    F = extremality_witness()
    score = float(mk.kernel.batched_trace_product(F.reshape(-1, 4, 4), el.reshape(-1, 4, 4)).real)
    dist = float(np.max(np.abs(el - np.asarray(sigma_star().elements))))
    report = validate(asm)
    return Certificate(
        "extremality",
        score,
        0.0,
        bool(score <= score_tol and dist <= dist_tol),
        {"distance": dist, "score_tol": score_tol, "dist_tol": dist_tol, "valid": report.passed},
    )


# ---------------------------------------------------------------------------
# independence


def independence_check(net: NetworkAssemblage, ref: BipartiteAssemblage,
                       tol: float = INDEPENDENCE_TOL) -> Certificate:
    """Check the product-form theorem on a network assemblage.

    Hypotheses: (i) tr_C sum_ab sigma_abd|xyw = sigma_d|w and (ii)
    sum_ab sigma_abd|xyw = psi (x) sigma_d|w. Conclusion: sigma_abd|xyw =
    sigma_ab|xy (x) sigma_d|w with sigma_ab|xy = tr_C' sum_d sigma_abd|xyw.
    """
    el = np.asarray(net.elements)
    dC, dR = net.dims
    R = np.asarray(ref.elements)
    if R.shape[-1] != dR or el.shape[2] != R.shape[0] or el.shape[5] != R.shape[1]:
        raise mk.DimensionError(f"reference shape {R.shape} does not fit network shape {el.shape}")
    nA, nB, nD, nX, nY, nW = el.shape[:6]
    t = el.reshape(el.shape[:6] + (dC, dR, dC, dR))
    marg = el.sum(axis=(0, 1))  # (d, x, y, w, D, D)
    marg_t = t.sum(axis=(0, 1))
    dani = np.einsum("dxywcicj->dxywij", marg_t)
    dev_i = float(np.max(np.abs(dani - R[:, None, None, :])))
    psi = np.einsum("xywicjc->xywij", marg_t.sum(axis=0))[0, 0, 0]
    if abs(np.trace(psi)) > 0:
        psi = psi / np.trace(psi).real
    prod = np.einsum("ij,dwkl->dwikjl", psi, R).reshape(nD, nW, dC * dR, dC * dR)
    dev_ii = float(np.max(np.abs(marg - prod[:, None, None, :])))
    purity = float(np.trace(psi @ psi).real)

    details = {
        "tol": tol,
        "hypothesis_i_deviation": dev_i,
        "hypothesis_ii_deviation": dev_ii,
        "psi_purity": purity,
        "network_valid": validate(net).passed,
        "reference_valid": validate(ref).passed,
    }
    # candidate sigma_ab|xy read off at w = 0
    cand = np.einsum("abdxyicjc->abxyij", t[..., 0, :, :, :, :])
    probs = np.einsum("abxyii->abxy", cand).real
    live = probs > tol
    full = np.einsum("abxyij,dwkl->abdxywikjl", cand, R).reshape(el.shape)
    diff = np.abs(el - full).max(axis=(-1, -2))  # (a, b, d, x, y, w)
    mask = np.broadcast_to(live[:, :, None, :, :, None], diff.shape)
    deviation = float(diff[mask].max()) if mask.any() else 0.0
    details["conclusion_deviation"] = deviation
    details["skipped_cells"] = int((~live).sum())
    if dev_i > tol:
        details["failed"] = "hypothesis_i"
    elif dev_ii > tol:
        details["failed"] = "hypothesis_ii"
    elif deviation > tol:
        details["failed"] = "conclusion"
    score = max(dev_i, dev_ii, deviation)
    return Certificate("independence", score, tol, "failed" not in details, details)


def _deterministic_unsteered(a: int, b: int, dC: int = 2) -> Assemblage:
    el = np.zeros((2, 2, 2, 2, dC, dC), dtype=complex)
    el[a, b, :, :, 0, 0] = 1.0
    return Assemblage(el)


def swapped_counterexample(r: float = 1.0):
    """Product network with the ab=00 and ab=01 blocks exchanged for d=1.

    Dani's side is untouched, so both hypotheses hold while the product
    conclusion fails.
    """
    ref = reference_assemblage(1, r)
    net = tensor(_deterministic_unsteered(0, 0), ref)
    el = np.array(net.elements)
    el[0, 0, 1], el[0, 1, 1] = el[0, 1, 1].copy(), el[0, 0, 1].copy()
    return NetworkAssemblage(el, dims=net.dims), ref


def mixture_counterexample():
    """Half (p(00)=1) with the r=1 reference plus half (p(11)=1) with r=0.

    The Dani marginal is the non-extremal r=1/2 reference, and the AB
    outcome is correlated with the flag.
    """
    n1 = tensor(_deterministic_unsteered(0, 0), reference_assemblage(1, 1.0))
    n2 = tensor(_deterministic_unsteered(1, 1), reference_assemblage(1, 0.0))
    el = 0.5 * np.asarray(n1.elements) + 0.5 * np.asarray(n2.elements)
    return NetworkAssemblage(el, dims=n1.dims), reference_assemblage(1, 0.5)


# ---------------------------------------------------------------------------
# quantum non-negativity


def _sample_trial(f: BellCoefficients, rng: np.random.Generator, max_local_dim: int, max_charlie_dim: int):
    nA, nB, nD, nX, nY, nW = f.coefficients.shape
    dA = int(rng.integers(1, max_local_dim + 1))
    dB = int(rng.integers(1, max_local_dim + 1))
    dC = int(rng.integers(1, max_charlie_dim + 1))
    r = float(rng.choice([0.0, 1.0, rng.uniform()]))
    model = sample_quantum_model((nX, nY), (nA, nB), (dA, dB, dC), seed=rng)
    asm = assemblage_from_model(model, check=False)
    ref = reference_assemblage(f.n, r)
    D = dC * ref.dim
    mode = int(rng.integers(0, 4))
    entangled = mode == 0 and dC == 2 ** f.n
    if entangled:
        E = np.kron(max_entangled_projector(f.n), np.eye(2))
    else:
        E = random_effect(D, seed=rng, projective=(mode == 1))
    table = build_network_correlations(asm, ref, charlie_povms=np.array([[E, np.eye(D) - E]]), star=0, check=False)
    return evaluate_bell(f, table), {"dims": [dA, dB, dC], "r": r, "effect_mode": mode, "entangled_effect": entangled}


def quantum_nonnegativity_sweep(f: BellCoefficients, trials: int = 10_000, seed=0, tol: float = NONNEG_TOL,
                                max_local_dim: int = 4, max_charlie_dim: int = 8) -> Certificate:
    """Minimum activated Bell value over random quantum models and star effects.

    Each trial draws local dimensions for A and B up to ``max_local_dim``,
    Charlie's C-side dimension up to ``max_charlie_dim``, a mixing weight r
    and a joint effect on C (x) C' (x) flag.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    children = np.random.SeedSequence(seed).spawn(trials)
    worst, worst_info, worst_idx = np.inf, None, -1
    random_effects = 0
    for i, child in enumerate(children):
        value, info = _sample_trial(f, np.random.default_rng(child), max_local_dim, max_charlie_dim)
        random_effects += not info["entangled_effect"]
        if value < worst:
            worst, worst_info, worst_idx = value, info, i
    return Certificate(
        "nonnegativity",
        float(worst),
        -tol,
        bool(worst >= -tol),
        {"trials": trials, "seed": seed, "tol": tol, "worst_trial": worst_idx, "worst_sample": worst_info,
         "random_effects": random_effects},
    )
