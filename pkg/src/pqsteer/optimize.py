"""See-saw optimization of Bell functionals over quantum models.

Every step fixes all but one block (the state, or one party's binary
measurement) and solves for that block exactly: the state becomes an
extremal eigenvector of the Bell operator, an effect becomes the projector
onto the non-negative (maximize) or non-positive (minimize) eigenspace of
its local operator. The objective is therefore monotone and every iterate
is a valid quantum model, so the result is an attainable value.
"""
from __future__ import annotations

import string
from dataclasses import dataclass, field

import numpy as np

from .activation import build_network_correlations
from .assemblage import require_valid
from .functionals import BellCoefficients, BellExpression, evaluate_bell
from .quantum import QuantumModel, assemblage_from_model, haar_pure_state, random_projective, reference_assemblage

MAXIMIZE = "maximize"
MINIMIZE = "minimize"
EIG_TIE = 1e-12


@dataclass(frozen=True)
class SeesawConfig:
    dims: tuple
    max_iter: int = 300
    tol: float = 1e-10
    restarts: int = 8
    seed: int = 0
    direction: str = MAXIMIZE

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not self.dims or any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be >= 1, got {self.dims}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")
        if self.direction not in (MAXIMIZE, MINIMIZE):
            raise ValueError(f"direction must be {MAXIMIZE!r} or {MINIMIZE!r}")

    @property
    def maximize(self) -> bool:
        return self.direction == MAXIMIZE

    def to_dict(self):
        return {"dims": list(self.dims), "max_iter": self.max_iter, "tol": self.tol,
                "restarts": self.restarts, "seed": self.seed, "direction": self.direction}


@dataclass(frozen=True, eq=False)
class SeesawResult:
    value: float
    model: QuantumModel
    converged: bool
    iterations: int
    history: tuple
    seed: int | None = None
    charlie_effect: np.ndarray | None = None
    restart_values: tuple = field(default=())

    def to_dict(self):
        return {"value": self.value, "converged": self.converged, "iterations": self.iterations,
                "seed": self.seed, "restart_values": list(self.restart_values)}


def random_restart_schedule(cfg: SeesawConfig) -> list[int]:
    """Per-restart seeds derived deterministically from the master seed."""
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


# ---------------------------------------------------------------------------
# einsum engine: value = <psi| sum C[o, s] (x)_j M^j[s_j, o_j] (x) C_op |psi>


def _subscripts(k: int):
    letters = iter(string.ascii_letters)
    A = [next(letters) for _ in range(k)]
    B = [next(letters) for _ in range(k)]
    s = [next(letters) for _ in range(k)]
    o = [next(letters) for _ in range(k)]
    p, q = next(letters), next(letters)
    meas = [f"{s[j]}{o[j]}{A[j]}{B[j]}" for j in range(k)]
    coeff = "".join(o) + "".join(s) + p + q
    bra = "".join(A) + p
    ket = "".join(B) + q
    return A, B, s, o, p, q, meas, coeff, bra, ket


def _value(coeff, meas, psi) -> float:
    k = len(meas)
    *_, msub, csub, bra, ket = _subscripts(k)
    expr = ",".join([bra] + msub + [csub, ket]) + "->"
    return float(np.einsum(expr, psi.conj(), *meas, coeff, psi, optimize=True).real)


def _local(coeff, meas, psi, j):
    """L[s, o] with value = sum_so tr(M^j[s, o] L[s, o])."""
    k = len(meas)
    A, B, s, o, p, q, msub, csub, bra, ket = _subscripts(k)
    others = [m for i, m in enumerate(msub) if i != j]
    ops = [meas[i] for i in range(k) if i != j]
    expr = ",".join([bra] + others + [csub, ket]) + f"->{s[j]}{o[j]}{B[j]}{A[j]}"
    return np.einsum(expr, psi.conj(), *ops, coeff, psi, optimize=True)


def _operator(coeff, meas):
    k = len(meas)
    A, B, s, o, p, q, msub, csub, bra, ket = _subscripts(k)
    expr = ",".join(msub + [csub]) + f"->{bra}{ket}"
    W = np.einsum(expr, *meas, coeff, optimize=True)
    D = int(np.prod(W.shape[: k + 1]))
    return W.reshape(D, D)


def _best_state(W, maximize):
    W = (W + W.conj().T) / 2
    vals, vecs = np.linalg.eigh(W)
    return vecs[:, -1] if maximize else vecs[:, 0]


def _selector(H, maximize):
    """Projector onto the (non-negative | non-positive) eigenspace; ties go to outcome 0."""
    H = (H + H.conj().T) / 2
    vals, vecs = np.linalg.eigh(H)
    eps = EIG_TIE * max(1.0, float(np.max(np.abs(vals), initial=0.0)))
    sel = vals >= -eps if maximize else vals <= eps
    V = vecs[:, sel]
    return V @ V.conj().T


def _best_binary(L, maximize):
    S, O, d, _ = L.shape
    if O != 2:
        raise ValueError("see-saw effect updates need binary outcomes")
    out = np.empty((S, 2, d, d), dtype=complex)
    for s in range(S):
        P0 = _selector(L[s, 0] - L[s, 1], maximize)
        out[s, 0] = P0
        out[s, 1] = np.eye(d) - P0
    return out


def _init(dims, settings, rng):
    psi = haar_pure_state(int(np.prod(dims)), rng)
    meas = [np.stack([random_projective(dims[j], 2, rng) for _ in range(settings[j])]) for j in range(len(settings))]
    return psi, meas


def _improved(new, old, maximize, tol):
    return (new - old > tol) if maximize else (old - new > tol)


def _run_bell(coeff, cfg: SeesawConfig, seed):
    rng = np.random.default_rng(seed)
    k = len(cfg.dims)
    settings = coeff.shape[k:2 * k]
    psi, meas = _init(cfg.dims, settings, rng)
    shape = cfg.dims + (1,)
    psi_t = psi.reshape(shape)
    history = [_value(coeff, meas, psi_t)]
    converged = False
    for it in range(1, cfg.max_iter + 1):
        psi_t = _best_state(_operator(coeff, meas), cfg.maximize).reshape(shape)
        for j in range(k):
            meas[j] = _best_binary(_local(coeff, meas, psi_t, j), cfg.maximize)
        history.append(_value(coeff, meas, psi_t))
        if not _improved(history[-1], history[-2], cfg.maximize, cfg.tol):
            converged = True
            break
    psi = psi_t.reshape(-1)
    model = QuantumModel(np.outer(psi, psi.conj()), cfg.dims, tuple(meas))
    return history[-1], model, converged, it, tuple(history)


def seesaw_bell(expr, cfg: SeesawConfig, r: float = 0.0) -> SeesawResult:
    """Best value of a Bell expression over restarts at fixed local dims.

    ``expr`` is a BellExpression with binary outcomes and one party per
    entry of ``cfg.dims``. Activated coefficients (BellCoefficients) are
    handed to ``seesaw_activated``.
    """
    if isinstance(expr, BellCoefficients):
        return seesaw_activated(expr, cfg, r)
    if not isinstance(expr, BellExpression):
        raise TypeError("expected a BellExpression or BellCoefficients")
    if expr.n_parties != len(cfg.dims):
        raise ValueError(f"expression has {expr.n_parties} parties but dims has {len(cfg.dims)}")
    if any(o != 2 for o in expr.outcomes):
        raise ValueError("see-saw supports binary outcomes only")
    seeds = random_restart_schedule(cfg)
    if not seeds:
        raise ValueError("need at least one restart")
    coeff = np.asarray(expr.coefficients, dtype=complex)[..., None, None]
    best = None
    values = []
    for seed in seeds:
        run = _run_bell(coeff, cfg, seed)
        values.append(run[0])
        if best is None or _improved(run[0], best[0][0], cfg.maximize, 0.0):
            best = (run, seed)
    (value, model, converged, it, history), seed = best
    model.require_valid()
    return SeesawResult(value, model, converged, it, history, seed, None, tuple(values))


# ---------------------------------------------------------------------------
# activated functional: A, B measure psi_ABC; Charlie's star effect E acts on C (x) C' (x) flag


def _run_activated(f: BellCoefficients, ref, cfg: SeesawConfig, seed):
    rng = np.random.default_rng(seed)
    dA, dB, dC = cfg.dims
    nA, nB, nD, nX, nY, nW = f.coefficients.shape
    if nA != 2 or nB != 2:
        raise ValueError("see-saw supports binary outcomes only")
    R = np.asarray(ref.elements)
    K = R.shape[-1]
    G = nD * np.einsum("abdxyw,dwkl->abxykl", f.coefficients, R)
    psi, (MA, MB) = _init(cfg.dims, (nX, nY), rng)
    psi_t = psi.reshape(dA, dB, dC)
    E = random_projective(dC * K, 2, rng)[0]

    def charlie_ops(E):
        E4 = E.reshape(dC, K, dC, K)
        return np.einsum("ikjl,abxylk->abxyij", E4, G)

    def value(E, MA, MB, psi_t):
        return _value(charlie_ops(E), [MA, MB], psi_t[..., :])

    history = [value(E, MA, MB, psi_t)]
    converged = False
    for it in range(1, cfg.max_iter + 1):
        sigma = np.einsum("xaum,ybvn,mni,uvj->abxyij", MA, MB, psi_t, psi_t.conj(), optimize=True)
        LE = np.einsum("abxyij,abxykl->ikjl", sigma, G).reshape(dC * K, dC * K)
        E = _selector(LE, cfg.maximize)
        coeff = charlie_ops(E)
        MA = _best_binary(_local(coeff, [MA, MB], psi_t, 0), cfg.maximize)
        MB = _best_binary(_local(coeff, [MA, MB], psi_t, 1), cfg.maximize)
        psi_t = _best_state(_operator(coeff, [MA, MB]), cfg.maximize).reshape(dA, dB, dC)
        history.append(value(E, MA, MB, psi_t))
        if not _improved(history[-1], history[-2], cfg.maximize, cfg.tol):
            converged = True
            break
    psi = psi_t.reshape(-1)
    model = QuantumModel(np.outer(psi, psi.conj()), cfg.dims, (MA, MB, None))
    return history[-1], model, E, converged, it, tuple(history)


def activated_value(f: BellCoefficients, model: QuantumModel, E, r: float) -> float:
    """Evaluate the activated functional through the full network pipeline."""
    ref = reference_assemblage(f.n, r)
    asm = assemblage_from_model(model)
    D = E.shape[0]
    table = build_network_correlations(asm, ref, charlie_povms=np.array([[E, np.eye(D) - E]]), star=0)
    return evaluate_bell(f, table)


def seesaw_activated(f: BellCoefficients, cfg: SeesawConfig, r: float = 0.0) -> SeesawResult:
    """Optimize the activated functional over psi_ABC, A/B effects and Charlie's star effect.

    ``cfg.dims`` is (dA, dB, dC) with dC Charlie's share of psi_ABC; the
    reference assemblage is fixed at mixing weight ``r``.
    """
    if len(cfg.dims) != 3:
        raise ValueError("activated see-saw needs dims (dA, dB, dC)")
    seeds = random_restart_schedule(cfg)
    if not seeds:
        raise ValueError("need at least one restart")
    ref = reference_assemblage(f.n, r)
    best, values = None, []
    for seed in seeds:
        run = _run_activated(f, ref, cfg, seed)
        values.append(run[0])
        if best is None or _improved(run[0], best[0][0], cfg.maximize, 0.0):
            best = (run, seed)
    (value, model, E, converged, it, history), seed = best
    model.require_valid()
    require_valid(assemblage_from_model(model))
    return SeesawResult(value, model, converged, it, history, seed, E, tuple(values))
