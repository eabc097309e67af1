"""Assemblage data model, validity checks and JSON persistence.

Index conventions are fixed across the package and are 0-based:

* ``Assemblage``          elements[a, b, x, y]          on Charlie's system
* ``BipartiteAssemblage`` elements[d, w]                on Charlie's second system
* ``NetworkAssemblage``   elements[a, b, d, x, y, w]    on system (x) second system

The trailing two axes of ``elements`` hold the ``D x D`` matrix. When a
flag qubit is present it is the last tensor factor.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import ClassVar

import numpy as np

from . import matkernel as mk

log = logging.getLogger(__name__)

TOL = mk.FEASIBILITY_TOL


class AssemblageError(ValueError):
    pass


class AssemblageParseError(AssemblageError):
    """Malformed assemblage document; ``where`` points at the offending line or field."""

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{message} (at {where})" if where else message)


@dataclass(frozen=True)
class Scenario:
    nX: int = 1
    nY: int = 1
    nA: int = 1
    nB: int = 1
    dC: int = 1
    nW: int | None = None
    nD: int | None = None
    dCp: int | None = None

    def __post_init__(self):
        for name in ("nX", "nY", "nA", "nB", "dC", "nW", "nD", "dCp"):
            v = getattr(self, name)
            if v is not None and int(v) < 1:
                raise AssemblageError(f"scenario field {name} must be >= 1, got {v}")

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]
    tol: float = TOL

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "passed": self.passed,
            "tol": self.tol,
            "checks": [c.__dict__ for c in self.checks],
        }


def _freeze(arr):
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class _AssemblageBase:
    elements: np.ndarray
    warnings: tuple[str, ...] = field(default=(), compare=False)

    outputs: ClassVar[tuple[str, ...]] = ()
    inputs: ClassVar[tuple[str, ...]] = ()
    kind: ClassVar[str] = ""

    def __post_init__(self):
        arr = np.asarray(self.elements)
        nidx = len(self.outputs) + len(self.inputs)
        if arr.ndim != nidx + 2 or arr.shape[-1] != arr.shape[-2]:
            raise AssemblageError(
                f"{type(self).__name__} needs {nidx} index axes plus a square matrix, got shape {arr.shape}"
            )
        object.__setattr__(self, "elements", _freeze(arr))

    @property
    def dim(self) -> int:
        return self.elements.shape[-1]

    @property
    def index_shape(self) -> tuple[int, ...]:
        return self.elements.shape[:-2]

    @property
    def labels(self) -> tuple[str, ...]:
        return self.outputs + self.inputs

    def __getitem__(self, idx):
        return self.elements[idx]

    def keys(self):
        return product(*(range(n) for n in self.index_shape))

    def reduced_state(self) -> np.ndarray:
        """Sum over outputs at the all-zero input."""
        m = len(self.outputs)
        summed = self.elements.sum(axis=tuple(range(m)))
        return summed[(0,) * len(self.inputs)]

    def probabilities(self) -> np.ndarray:
        """Trace of every element, indexed like ``elements``."""
        return np.real(np.trace(self.elements, axis1=-2, axis2=-1))

    def digest(self) -> str:
        return array_digest(self.elements)

    def _replace(self, elements, **kw):
        return type(self)(elements, **kw)


def array_digest(arr) -> str:
    a = np.ascontiguousarray(np.asarray(arr, dtype=complex))
    h = hashlib.sha256()
    h.update(str(a.shape).encode())
    h.update(a.tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class Assemblage(_AssemblageBase):
    outputs: ClassVar = ("a", "b")
    inputs: ClassVar = ("x", "y")
    kind: ClassVar = "assemblage"

    @property
    def scenario(self) -> Scenario:
        nA, nB, nX, nY = self.index_shape
        return Scenario(nX=nX, nY=nY, nA=nA, nB=nB, dC=self.dim)


@dataclass(frozen=True, eq=False)
class BipartiteAssemblage(_AssemblageBase):
    outputs: ClassVar = ("d",)
    inputs: ClassVar = ("w",)
    kind: ClassVar = "bipartite"

    @property
    def scenario(self) -> Scenario:
        nD, nW = self.index_shape
        return Scenario(nW=nW, nD=nD, dC=self.dim)


@dataclass(frozen=True, eq=False)
class NetworkAssemblage(_AssemblageBase):
    """Elements on ``C (x) C'``; ``dims = (dC, dCp)`` records the split."""

    dims: tuple[int, int] | None = None

    outputs: ClassVar = ("a", "b", "d")
    inputs: ClassVar = ("x", "y", "w")
    kind: ClassVar = "network"

    def __post_init__(self):
        super().__post_init__()
        dims = self.dims if self.dims is not None else (self.dim, 1)
        dims = (int(dims[0]), int(dims[1]))
        if dims[0] * dims[1] != self.dim:
            raise AssemblageError(f"dims {dims} do not multiply to element dimension {self.dim}")
        object.__setattr__(self, "dims", dims)

    @property
    def scenario(self) -> Scenario:
        nA, nB, nD, nX, nY, nW = self.index_shape
        return Scenario(nX=nX, nY=nY, nA=nA, nB=nB, dC=self.dims[0], nW=nW, nD=nD, dCp=self.dims[1])

    def _replace(self, elements, **kw):
        return type(self)(elements, dims=self.dims, **kw)


# ---------------------------------------------------------------------------
# validation


def _max_spread(arr, axis):
    """Max entry-wise deviation along ``axis`` from its first slice."""
    if arr.shape[axis] <= 1:
        return 0.0
    first = np.take(arr, [0], axis=axis)
    return float(np.max(np.abs(arr - first)))


def validate(asm: _AssemblageBase, tol: float = TOL) -> ValidationReport:
    """Check Hermiticity, positivity, normalization and no-signalling.

    Violations are measured in max-entry norm. Shape problems come back as
    a failed ``structure`` check rather than an exception.
    """
    el = np.asarray(asm.elements)
    m = len(asm.outputs)
    k = len(asm.inputs)
    checks = []
    if el.ndim != m + k + 2 or el.shape[-1] != el.shape[-2] or 0 in el.shape:
        return ValidationReport((CheckResult("structure", False, np.inf, f"bad shape {el.shape}"),), tol)
    if not np.all(np.isfinite(el)):
        return ValidationReport((CheckResult("structure", False, np.inf, "non-finite entries"),), tol)
    checks.append(CheckResult("structure", True, 0.0))

    herm = float(np.max(np.abs(el - mk.dagger(el))))
    checks.append(CheckResult("hermitian", herm <= tol, herm))

    sym = (el + mk.dagger(el)) / 2
    min_eig = float(np.min(np.linalg.eigvalsh(sym)))
    neg = max(0.0, -min_eig)
    checks.append(CheckResult("psd", neg <= tol, neg, f"min eigenvalue {min_eig:.3e}"))

    out_axes = tuple(range(m))
    traces = np.real(np.trace(el, axis1=-2, axis2=-1))
    norm = float(np.max(np.abs(traces.sum(axis=out_axes) - 1.0)))
    checks.append(CheckResult("normalization", norm <= tol, norm))

    for j, (o, i) in enumerate(zip(asm.outputs, asm.inputs)):
        # summing party j's output must erase its input
        summed = el.sum(axis=j)
        input_axis = m - 1 + j
        dev = _max_spread(summed, input_axis)
        checks.append(CheckResult(f"no_signalling_{o}", dev <= tol, dev, f"sum over {o} independent of {i}"))

    reduced = el.sum(axis=out_axes).reshape((-1,) + el.shape[-2:])
    dev = float(np.max(np.abs(reduced - reduced[0])))
    checks.append(CheckResult("reduced_state", dev <= tol, dev))
    return ValidationReport(tuple(checks), tol)


def require_valid(asm, tol=TOL, what="assemblage"):
    report = validate(asm, tol)
    if not report.passed:
        names = ", ".join(f"{c.name} ({c.worst:.2e})" for c in report.failed())
        raise AssemblageError(f"invalid {what}: {names}")
    return report


# ---------------------------------------------------------------------------
# operations


def tensor(asm1: Assemblage, asm2: BipartiteAssemblage, check: bool = True) -> NetworkAssemblage:
    """Elementwise Kronecker product sigma_{ab|xy} (x) sigma_{d|w}."""
    if check:
        require_valid(asm1, what="first factor")
        require_valid(asm2, what="second factor")
    e1 = np.asarray(asm1.elements)
    e2 = np.asarray(asm2.elements)
    nA, nB, nX, nY, d1, _ = e1.shape
    nD, nW, d2, _ = e2.shape
    # a b d x y w (i k) (j l)
    big = np.einsum("abxyij,dwkl->abdxywikjl", e1, e2).reshape(nA, nB, nD, nX, nY, nW, d1 * d2, d1 * d2)
    return NetworkAssemblage(big, dims=(d1, d2))


def transpose_elements(asm):
    """Transpose every element (complex-conjugates the off-diagonal phases)."""
    return asm._replace(np.swapaxes(asm.elements, -1, -2))


# ---------------------------------------------------------------------------
# JSON persistence


def encode_matrix(m):
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def decode_matrix(raw, where=None):
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise AssemblageParseError(f"matrix is not a numeric array: {exc}", where) from None
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise AssemblageParseError(f"matrix must be a square array of [re, im] pairs, got shape {arr.shape}", where)
    return arr[..., 0] + 1j * arr[..., 1]


_KINDS = {cls.kind: cls for cls in (Assemblage, BipartiteAssemblage, NetworkAssemblage)}


def to_document(asm) -> dict:
    doc = {"kind": asm.kind, "scenario": asm.scenario.to_dict(), "elements": []}
    for key in asm.keys():
        entry = dict(zip(asm.labels, (int(i) for i in key)))
        entry["matrix"] = encode_matrix(asm.elements[key])
        doc["elements"].append(entry)
    return doc


def _index_sizes(cls, scen: dict, where):
    names = {"a": "nA", "b": "nB", "x": "nX", "y": "nY", "d": "nD", "w": "nW"}
    sizes = []
    for lab in cls.outputs + cls.inputs:
        key = names[lab]
        if key not in scen:
            raise AssemblageParseError(f"scenario is missing {key!r}", f"{where}.scenario")
        sizes.append(int(scen[key]))
    return sizes


def from_document(doc: dict, source: str = "<document>"):
    if not isinstance(doc, dict):
        raise AssemblageParseError("top level must be an object", source)
    if "elements" not in doc or not isinstance(doc["elements"], list) or not doc["elements"]:
        raise AssemblageParseError("missing or empty 'elements' list", source)
    kind = doc.get("kind")
    if kind is None:
        keys = set(doc["elements"][0]) - {"matrix"}
        kind = {frozenset("abxy"): "assemblage", frozenset("dw"): "bipartite", frozenset("abdxyw"): "network"}.get(
            frozenset(keys)
        )
        if kind is None:
            raise AssemblageParseError(f"cannot infer assemblage kind from index keys {sorted(keys)}", source)
    if kind not in _KINDS:
        raise AssemblageParseError(f"unknown kind {kind!r}", source)
    cls = _KINDS[kind]
    scen = doc.get("scenario")
    if not isinstance(scen, dict):
        raise AssemblageParseError("missing 'scenario' object", source)
    sizes = _index_sizes(cls, scen, source)
    if "dC" not in scen:
        raise AssemblageParseError("scenario is missing 'dC'", f"{source}.scenario")
    dim = int(scen["dC"]) * (int(scen.get("dCp", 1)) if cls is NetworkAssemblage else 1)
    elements = np.zeros(tuple(sizes) + (dim, dim), dtype=complex)
    seen = set()
    for n, entry in enumerate(doc["elements"]):
        where = f"{source}.elements[{n}]"
        try:
            key = tuple(int(entry[lab]) for lab in (cls.outputs + cls.inputs))
        except KeyError as exc:
            raise AssemblageParseError(f"element missing index {exc.args[0]!r}", where) from None
        except (TypeError, ValueError):
            raise AssemblageParseError("element indices must be integers", where) from None
        if any(not 0 <= i < s for i, s in zip(key, sizes)):
            raise AssemblageParseError(f"index {key} outside scenario ranges {sizes}", where)
        if key in seen:
            raise AssemblageParseError(f"duplicate element {key}", where)
        if "matrix" not in entry:
            raise AssemblageParseError("element missing 'matrix'", where)
        mat = decode_matrix(entry["matrix"], f"{where}.matrix")
        if mat.shape != (dim, dim):
            raise AssemblageParseError(f"matrix shape {mat.shape} does not match dimension {dim}", f"{where}.matrix")
        elements[key] = mat
        seen.add(key)
    expected = int(np.prod(sizes))
    if len(seen) != expected:
        missing = next(k for k in product(*(range(s) for s in sizes)) if k not in seen)
        raise AssemblageParseError(
            f"{expected - len(seen)} element(s) missing, first missing {dict(zip((cls.outputs + cls.inputs), missing))}", source
        )
    warnings = []
    herm = float(np.max(np.abs(elements - mk.dagger(elements))))
    if herm > TOL:
        warnings.append(f"non-Hermitian element(s): max |M - M^dag| = {herm:.3e}")
    for w in warnings:
        log.warning("%s: %s", source, w)
    kw = {"dims": (int(scen["dC"]), int(scen.get("dCp", 1)))} if cls is NetworkAssemblage else {}
    return cls(elements, warnings=tuple(warnings), **kw)


def save(asm, path):
    Path(path).write_text(json.dumps(to_document(asm), indent=1))


def loads(text: str, source: str = "<string>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AssemblageParseError(f"invalid JSON: {exc.msg}", f"{source}:{exc.lineno}:{exc.colno}") from None
    return from_document(doc, source)


def load(path):
    path = Path(path)
    return loads(path.read_text(), str(path))
