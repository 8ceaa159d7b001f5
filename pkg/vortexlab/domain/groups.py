"""Finite gauge groups, their unitary representations and the Higgs phase group."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from typing import Any, Mapping, Sequence

import numpy as np

from vortexlab.domain.lattice import Lattice, OrientedEdge
from vortexlab.exceptions import ConfigurationError, ValidationError

logger = logging.getLogger(__name__)

MATRIX_TOLERANCE = 1e-12
ASSOCIATIVITY_CHECK_MAX_ORDER = 64


@dataclass(frozen=True, slots=True, eq=False)
class FiniteGroup:
    name: str
    table: np.ndarray
    inverse: np.ndarray
    identity: int
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        n = self.table.shape[0]
        if self.table.shape != (n, n) or n == 0:
            raise ValidationError(f"Cayley table of {self.name} must be square and non-empty")
        if np.any(self.table < 0) or np.any(self.table >= n):
            raise ValidationError(f"Cayley table of {self.name} has out-of-range entries")
        if len(self.labels) != n:
            raise ValidationError(f"{self.name} needs {n} labels, got {len(self.labels)}")
        elements = np.arange(n)
        if not (np.array_equal(self.table[self.identity], elements)
                and np.array_equal(self.table[:, self.identity], elements)):
            raise ValidationError(f"element {self.identity} is not the identity of {self.name}")
        if np.any(self.table[elements, self.inverse] != self.identity):
            raise ValidationError(f"inverse table of {self.name} is wrong")
        if n <= ASSOCIATIVITY_CHECK_MAX_ORDER:
            left = self.table[self.table[:, :, None], elements[None, None, :]]
            right = self.table[elements[:, None, None], self.table[None, :, :]]
            if not np.array_equal(left, right):
                raise ValidationError(f"Cayley table of {self.name} is not associative")
        self.table.flags.writeable = False
        self.inverse.flags.writeable = False

    @property
    def order(self) -> int:
        return int(self.table.shape[0])

    @property
    def is_abelian(self) -> bool:
        return bool(np.array_equal(self.table, self.table.T))

    def multiply(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def invert(self, a: int) -> int:
        return int(self.inverse[a])

    def label_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ConfigurationError(f"{self.name} has no element labelled {label!r}") from None


def group_from_table(name: str, table: np.ndarray, labels: Sequence[str] | None = None) -> FiniteGroup:
    table = np.asarray(table, dtype=np.int64)
    n = table.shape[0]
    elements = np.arange(n)
    identity_rows = [g for g in range(n) if np.array_equal(table[g], elements)]
    if not identity_rows:
        raise ValidationError(f"Cayley table of {name} has no identity row")
    identity = identity_rows[0]
    hits = np.argwhere(table == identity)
    inverse = np.full(n, -1, dtype=np.int64)
    inverse[hits[:, 0]] = hits[:, 1]
    if np.any(inverse < 0):
        raise ValidationError(f"some element of {name} has no inverse")
    return FiniteGroup(
        name=name,
        table=table.copy(),
        inverse=inverse,
        identity=identity,
        labels=tuple(labels) if labels is not None else tuple(str(g) for g in range(n)),
    )


@dataclass(frozen=True, slots=True, eq=False)
class UnitaryRep:
    group: FiniteGroup
    matrices: np.ndarray
    name: str = "rep"
    traces: np.ndarray = field(init=False)
    re_traces: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        matrices = np.array(self.matrices, dtype=np.complex128)
        if matrices.ndim != 3 or matrices.shape[0] != self.group.order or matrices.shape[1] != matrices.shape[2]:
            raise ValidationError(
                f"representation {self.name} needs shape ({self.group.order}, D, D), got {matrices.shape}"
            )
        dim = matrices.shape[1]
        eye = np.eye(dim, dtype=np.complex128)
        if not np.allclose(matrices[self.group.identity], eye, atol=MATRIX_TOLERANCE, rtol=0.0):
            raise ValidationError(f"representation {self.name} does not send the identity to I")
        matrices[self.group.identity] = eye
        products = np.einsum("aij,bjk->abik", matrices, matrices)
        if not np.allclose(products, matrices[self.group.table], atol=MATRIX_TOLERANCE, rtol=0.0):
            raise ValidationError(f"representation {self.name} is not a homomorphism")
        gram = np.einsum("aij,akj->aik", matrices, matrices.conj())
        if not np.allclose(gram, eye[None], atol=MATRIX_TOLERANCE, rtol=0.0):
            raise ValidationError(f"representation {self.name} is not unitary")
        matrices.flags.writeable = False
        traces = np.trace(matrices, axis1=1, axis2=2)
        traces.flags.writeable = False
        re_traces = traces.real.copy()
        re_traces.flags.writeable = False
        object.__setattr__(self, "matrices", matrices)
        object.__setattr__(self, "traces", traces)
        object.__setattr__(self, "re_traces", re_traces)

    @property
    def dim(self) -> int:
        return int(self.matrices.shape[1])

    def scalar_value(self, g: int) -> complex | None:
        """Return c when rho(g) = c I, else None."""
        matrix = self.matrices[g]
        c = matrix[0, 0]
        if np.allclose(matrix, c * np.eye(self.dim), atol=1e-9, rtol=0.0):
            return complex(c)
        return None

    def kernel(self) -> np.ndarray:
        eye = np.eye(self.dim)
        return np.array(
            [g for g in range(self.group.order) if np.allclose(self.matrices[g], eye, atol=1e-9, rtol=0.0)],
            dtype=np.int64,
        )

    def max_excitation(self) -> float:
        """max over a != 1 of Re(Tr rho(a)) - D; 0 for a trivial group."""
        others = np.delete(self.re_traces, self.group.identity)
        if others.size == 0:
            return 0.0
        return float(others.max() - self.dim)


@dataclass(frozen=True, slots=True)
class HiggsGroup:
    """Cyclic subgroup of the unit circle; element j is the phase exp(2 pi i j / order)."""

    order: int

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError("Higgs group order must be positive")

    @property
    def elements(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(j, self.order) for j in range(self.order))

    @property
    def phases(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(self.order) / self.order)

    def phase(self, j: int) -> complex:
        return complex(np.exp(2j * np.pi * (j % self.order) / self.order))

    def multiply(self, a: int, b: int) -> int:
        return (a + b) % self.order

    def inverse(self, a: int) -> int:
        return (-a) % self.order

    def conjugate(self, a: int) -> int:
        return self.inverse(a)

    def index_of(self, rational_phase: Fraction) -> int | None:
        scaled = rational_phase * self.order
        if scaled.denominator != 1:
            return None
        return int(scaled.numerator) % self.order

    def contains(self, other: "HiggsGroup") -> bool:
        return self.order % other.order == 0


@dataclass(frozen=True, slots=True)
class HiggsQuotient:
    higgs: HiggsGroup
    subgroup: HiggsGroup
    representatives: tuple[int, ...]

    @property
    def order(self) -> int:
        return len(self.representatives)


def _cyclic(n: int, rep: str) -> tuple[FiniteGroup, UnitaryRep]:
    if n < 1:
        raise ConfigurationError(f"cyclic group order must be positive, got {n}")
    elements = np.arange(n)
    group = FiniteGroup(
        name=f"Z{n}",
        table=(elements[:, None] + elements[None, :]) % n,
        inverse=(-elements) % n,
        identity=0,
        labels=tuple(str(g) for g in range(n)),
    )
    if rep == "faithful":
        charge = 1
    elif rep == "trivial":
        charge = 0
    elif rep.startswith("chi:"):
        try:
            charge = int(rep.split(":", 1)[1])
        except ValueError:
            raise ConfigurationError(f"bad character selector {rep!r}") from None
    else:
        raise ConfigurationError(f"unknown representation {rep!r} for Z{n}")
    matrices = np.exp(2j * np.pi * charge * elements / n).reshape(n, 1, 1)
    return group, UnitaryRep(group=group, matrices=matrices, name=f"chi{charge % n}")


_QUATERNION_LABELS = ("1", "-1", "i", "-i", "j", "-j", "k", "-k")


def _quaternion8(rep: str) -> tuple[FiniteGroup, UnitaryRep]:
    one = np.eye(2, dtype=np.complex128)
    qi = np.diag([1j, -1j])
    qj = np.array([[0, 1], [-1, 0]], dtype=np.complex128)
    qk = np.array([[0, 1j], [1j, 0]], dtype=np.complex128)
    pauli = np.stack([one, -one, qi, -qi, qj, -qj, qk, -qk])
    products = np.einsum("aij,bjk->abik", pauli, pauli)
    # product index by matching against the eight matrices
    distance = np.abs(products[:, :, None] - pauli[None, None]).sum(axis=(-1, -2))
    group = group_from_table("Q8", distance.argmin(axis=-1), _QUATERNION_LABELS)
    if rep in ("faithful", "pauli"):
        return group, UnitaryRep(group=group, matrices=pauli, name="pauli")
    if rep == "trivial":
        return group, UnitaryRep(group=group, matrices=np.ones((8, 1, 1)), name="trivial")
    raise ConfigurationError(f"unknown representation {rep!r} for Q8")


def _symmetric3(rep: str) -> tuple[FiniteGroup, UnitaryRep]:
    perms = list(permutations(range(3)))
    index = {p: n for n, p in enumerate(perms)}
    table = np.array([[index[tuple(a[b[x]] for x in range(3))] for b in perms] for a in perms])
    labels = tuple("".join(str(x) for x in p) for p in perms)
    group = group_from_table("S3", table, labels)
    permutation_matrices = np.zeros((6, 3, 3))
    for n, p in enumerate(perms):
        permutation_matrices[n, list(p), [0, 1, 2]] = 1.0
    if rep in ("faithful", "standard"):
        basis = np.array([[1.0, 1.0], [-1.0, 1.0], [0.0, -2.0]]) / np.array([np.sqrt(2.0), np.sqrt(6.0)])
        matrices = np.einsum("ji,ajk,kl->ail", basis, permutation_matrices, basis)
        return group, UnitaryRep(group=group, matrices=matrices, name="standard")
    if rep == "sign":
        signs = np.round(np.linalg.det(permutation_matrices))
        return group, UnitaryRep(group=group, matrices=signs.reshape(6, 1, 1), name="sign")
    if rep == "trivial":
        return group, UnitaryRep(group=group, matrices=np.ones((6, 1, 1)), name="trivial")
    raise ConfigurationError(f"unknown representation {rep!r} for S3")


def make_group(kind: str, rep: str = "faithful", order: int | None = None) -> tuple[FiniteGroup, UnitaryRep]:
    """Build one of the bundled groups with the selected representation.

    ``kind`` is ``cyclic`` (with ``order``, or written ``cyclic(n)``),
    ``quaternion8`` or ``symmetric3``.
    """
    normalized = kind.strip().lower()
    if normalized.startswith("cyclic(") and normalized.endswith(")"):
        try:
            order = int(normalized[len("cyclic("):-1])
        except ValueError:
            raise ConfigurationError(f"bad cyclic group {kind!r}") from None
        normalized = "cyclic"
    if normalized == "cyclic":
        if order is None:
            raise ConfigurationError("cyclic group needs an order")
        return _cyclic(order, rep)
    if normalized == "quaternion8":
        return _quaternion8(rep)
    if normalized == "symmetric3":
        return _symmetric3(rep)
    raise ConfigurationError(f"unknown group kind {kind!r}")


def _complex_entry(entry: Any) -> complex:
    if isinstance(entry, (list, tuple)):
        if len(entry) != 2:
            raise ConfigurationError(f"complex entries are [re, im] pairs, got {entry!r}")
        return complex(float(entry[0]), float(entry[1]))
    return complex(float(entry))


def group_from_definition(payload: Mapping[str, Any]) -> tuple[FiniteGroup, UnitaryRep]:
    """Build a user group from a Cayley table and representation matrices.

    Matrix entries are real numbers or ``[re, im]`` pairs.
    """
    try:
        name = str(payload.get("name", "custom"))
        table = np.asarray(payload["table"], dtype=np.int64)
        raw_matrices = payload["matrices"]
    except KeyError as exc:
        raise ConfigurationError(f"group definition is missing {exc.args[0]!r}") from None
    labels = payload.get("labels")
    group = group_from_table(name, table, labels)
    matrices = np.array(
        [[[_complex_entry(entry) for entry in row] for row in matrix] for matrix in raw_matrices],
        dtype=np.complex128,
    )
    rep = UnitaryRep(group=group, matrices=matrices, name=str(payload.get("rep_name", "custom")))
    logger.info("[group] loaded %s of order %d with %d-dimensional representation", name, group.order, rep.dim)
    return group, rep


def quotient_by_scalar_kernel(group: FiniteGroup, rep: UnitaryRep) -> tuple[FiniteGroup, UnitaryRep]:
    kernel = rep.kernel()
    if kernel.size == 1:
        return group, rep
    coset_min = group.table[:, kernel].min(axis=1)
    representatives = np.unique(coset_min)
    coset_index = np.searchsorted(representatives, coset_min)
    table = coset_index[group.table[representatives[:, None], representatives[None, :]]]
    quotient = group_from_table(
        f"{group.name}/ker",
        table,
        tuple(group.labels[g] for g in representatives),
    )
    logger.info("[group] quotient of %s by kernel of size %d has order %d", group.name, kernel.size, quotient.order)
    return quotient, UnitaryRep(group=quotient, matrices=rep.matrices[representatives], name=rep.name)


def scalar_subgroup_X(rep: UnitaryRep) -> HiggsGroup:
    """The phases c with rho(g) = c I for some g, as a cyclic phase group."""
    scalars = [c for g in range(rep.group.order) if (c := rep.scalar_value(g)) is not None]
    turns = sorted({Fraction(float(np.angle(c) / (2 * np.pi)) % 1).limit_denominator(rep.group.order) % 1
                    for c in scalars})
    x = HiggsGroup(order=len(turns))
    if set(turns) != set(x.elements):
        raise ValidationError(f"scalar values of {rep.name} do not form a cyclic phase group")
    for c in scalars:
        if abs(abs(c) - 1.0) > 1e-9:
            raise ValidationError(f"scalar value {c} of {rep.name} is not unit modulus")
    return x


def higgs_quotient(higgs: HiggsGroup, x: HiggsGroup) -> HiggsQuotient:
    if not higgs.contains(x):
        raise ValidationError(f"X of order {x.order} is not a subgroup of H of order {higgs.order}")
    return HiggsQuotient(
        higgs=higgs,
        subgroup=x,
        representatives=tuple(range(higgs.order // x.order)),
    )


def path_product(lat: Lattice, group: FiniteGroup, sigma: np.ndarray, edges: Sequence[OrientedEdge]) -> int:
    """Left-to-right product of sigma along a path, with sigma_{-e} = sigma_e^{-1}."""
    result = group.identity
    previous_head: int | None = None
    for step, (edge, sign) in enumerate(edges):
        tail, head = lat.oriented_endpoints((edge, sign))
        if previous_head is not None and tail != previous_head:
            raise ValidationError(f"path breaks before step {step}")
        value = sigma[edge] if sign > 0 else group.inverse[sigma[edge]]
        result = group.table[result, value]
        previous_head = head
    return int(result)


def plaquette_products(lat: Lattice, group: FiniteGroup, sigma: np.ndarray) -> np.ndarray:
    """(d sigma)_p for every positively oriented plaquette; leading batch axes are kept."""
    edges = lat.plaquette_edges
    first = sigma[..., edges[:, 0]]
    second = sigma[..., edges[:, 1]]
    third = group.inverse[sigma[..., edges[:, 2]]]
    fourth = group.inverse[sigma[..., edges[:, 3]]]
    return group.table[group.table[group.table[first, second], third], fourth]
