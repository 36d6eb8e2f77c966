"""Matrix Hilbert C*-bimodules and skew-corner modules.

``M_{n x m}(A)`` is treated as a right Hilbert module over ``M_m(A)`` with
``<x, y>_R = x* y`` and as a left module over ``M_n(A)`` with
``<x, y>_L = x y*``, everything computed blockwise.  A tuple of module
elements is *unimodular* when the sum of its right inner squares is
invertible in the right algebra, which for matrix modules is exactly left
invertibility of the vertically stacked matrix.

Two independent routes decide whether a tuple generates the module:

* :func:`is_unimodular` tests invertibility of the Gram sum;
* :func:`gen_oracle` assembles the complex-linear map
  ``(a_1, ..., a_k) -> sum_j a_j . x_j`` from copies of the left algebra into
  the module and compares its numerical rank with the module dimension.

Skew corners ``p M_N(A) q`` keep their elements inside the ambient matrix
algebra (always of the compressed form ``p x q``); invertibility questions
for their inner products are decided on the ranges of the projections.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .algebra import (
    DEFAULT_TOL,
    SELF_ADJOINT_RTOL,
    Algebra,
    AlgebraElement,
    _hermitized,
    _svdvals,
    matrix_from_json,
    matrix_to_json,
)
from .errors import (
    DegenerateModuleError,
    DomainError,
    InvertibilityError,
    ModuleNotFullError,
    ShapeMismatchError,
)
from .sampling import complex_gaussian

#: Absolute tolerance for accepting ``p`` as a projection (p = p* = p^2).
PROJECTION_TOL = 1e-10


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class ModuleSpace:
    """The right Hilbert module ``M_{rows x cols}(A)`` over ``M_cols(A)``.

    Per block ``i`` of the base algebra, elements are complex matrices of
    shape ``(rows * k_i, cols * k_i)``.  The right and left algebras are
    derived amplifications of the base, never stored.
    """

    alg: Algebra
    rows: int
    cols: int

    def __post_init__(self):
        object.__setattr__(self, "rows", int(self.rows))
        object.__setattr__(self, "cols", int(self.cols))
        if self.rows < 1 or self.cols < 1:
            raise ValueError("module shape needs rows >= 1 and cols >= 1")

    # -- structure ----------------------------------------------------------

    @property
    def block_shapes(self) -> tuple:
        return tuple(
            (self.rows * k, self.cols * k) for k in self.alg.block_sizes
        )

    @property
    def dim(self) -> int:
        """Complex vector-space dimension of the module."""
        return sum(r * s for r, s in self.block_shapes)

    @property
    def right_algebra(self) -> Algebra:
        return self.alg.matrix_algebra(self.cols)

    @property
    def left_algebra(self) -> Algebra:
        return self.alg.matrix_algebra(self.rows)

    # Algebras in which inner products are represented.  For matrix modules
    # these are the genuine right/left algebras; corners use the ambient one.
    @property
    def right_container(self) -> Algebra:
        return self.right_algebra

    @property
    def left_container(self) -> Algebra:
        return self.left_algebra

    def right_algebra_unit(self) -> AlgebraElement:
        return self.right_algebra.unit()

    # -- elements -------------------------------------------------------------

    def zero(self) -> "ModuleElement":
        return ModuleElement._wrap(
            self,
            [np.zeros(shape, dtype=np.complex128) for shape in self.block_shapes],
        )

    def element(self, blocks) -> "ModuleElement":
        """Build an element from one matrix per block (copies the data)."""
        return ModuleElement(self, blocks)

    def random_element(self, rng) -> "ModuleElement":
        return ModuleElement._wrap(
            self, [complex_gaussian(rng, shape) for shape in self.block_shapes]
        )

    # -- inner products --------------------------------------------------------

    def inner_right(self, x, y) -> AlgebraElement:
        return AlgebraElement._wrap(
            self.right_algebra,
            [xb.conj().T @ yb for xb, yb in zip(x.blocks, y.blocks)],
        )

    def inner_left(self, x, y) -> AlgebraElement:
        return AlgebraElement._wrap(
            self.left_algebra,
            [xb @ yb.conj().T for xb, yb in zip(x.blocks, y.blocks)],
        )

    def gram(self, entries) -> AlgebraElement:
        """Sum of right inner squares over the entries."""
        acc = [
            np.zeros((s, s), dtype=np.complex128) for _, s in self.block_shapes
        ]
        for x in entries:
            for i, xb in enumerate(x.blocks):
                acc[i] += xb.conj().T @ xb
        return AlgebraElement._wrap(self.right_algebra, acc)

    # -- module actions ---------------------------------------------------------

    def apply_right(self, x, b) -> "ModuleElement":
        if b.algebra != self.right_algebra:
            raise ShapeMismatchError("right operand is not in the right algebra")
        return ModuleElement._wrap(
            self, [xb @ bb for xb, bb in zip(x.blocks, b.blocks)]
        )

    def apply_left(self, a, x) -> "ModuleElement":
        if a.algebra != self.left_algebra:
            raise ShapeMismatchError("left operand is not in the left algebra")
        return ModuleElement._wrap(
            self, [ab @ xb for ab, xb in zip(a.blocks, x.blocks)]
        )

    # -- right algebra helpers ----------------------------------------------------

    def right_margin(self, b) -> float:
        """Smallest relative singular value of ``b``, the invertibility margin."""
        svals = [_svdvals(bb) for bb in b.blocks]
        largest = max((float(s[0]) if s.size else 0.0) for s in svals)
        smallest = min((float(s[-1]) if s.size else np.inf) for s in svals)
        return smallest / max(1.0, largest)

    def right_is_invertible(self, b, tol: float = DEFAULT_TOL) -> bool:
        return b.is_invertible(tol)

    def right_inverse(self, b, tol: float = DEFAULT_TOL, check: bool = True):
        if check:
            return b.inverse(tol)
        return AlgebraElement._wrap(
            b.algebra, [np.linalg.inv(bb) for bb in b.blocks]
        )

    def right_inv_sqrt(self, b, tol: float = DEFAULT_TOL):
        return b.inv_sqrt(tol)

    def right_positive_part(self, b):
        return b.positive_part()

    # -- stacking ----------------------------------------------------------------

    def stack(self, entries) -> "ModuleElement":
        """Vertical concatenation, an element of the taller matrix module."""
        target = ModuleSpace(self.alg, self.rows * len(entries), self.cols)
        blocks = [
            np.vstack([x.blocks[i] for x in entries])
            for i in range(self.alg.num_blocks)
        ]
        return ModuleElement._wrap(target, blocks)

    # -- generator oracle -----------------------------------------------------------

    def generation_margin(self, entries) -> float:
        """Relative size of the critical singular value of the span map.

        For each block the linear map ``(a_1, ..., a_k) -> sum_j a_j x_j`` is
        assembled column by column over a basis of the left algebra; the
        entries generate the module exactly when the map has full rank, i.e.
        when the ``dim``-th singular value is positive relative to the
        largest.  Returns the minimum of that ratio over blocks.
        """
        margin = np.inf
        for i, (r, s) in enumerate(self.block_shapes):
            dim = r * s
            if dim == 0:
                continue
            eye = np.eye(r)
            columns = np.hstack([np.kron(eye, x.blocks[i].T) for x in entries])
            svals = _svdvals(columns)
            largest = float(svals[0]) if svals.size else 0.0
            if largest == 0.0:
                return 0.0
            critical = float(svals[dim - 1]) if svals.size >= dim else 0.0
            margin = min(margin, critical / largest)
        return margin

    def generates(self, entries, tol: float = DEFAULT_TOL) -> bool:
        if tol <= 0:
            raise ValueError("tol must be positive")
        return self.generation_margin(entries) > tol

    # -- fullness ------------------------------------------------------------------

    def is_full(self, tol: float = DEFAULT_TOL) -> bool:
        """Whether the inner products of a module basis span the right algebra."""
        return _matrix_module_is_full(self, tol)

    # -- stable rank helpers ----------------------------------------------------------

    def standard_unimodular_tuple(self) -> list:
        """Deterministic shortest unimodular tuple: partial identity columns.

        The stacked matrix of the returned ``r``-tuple is the identity padded
        with zero rows per block, so its Gram sum is exactly the unit.
        """
        r = _ceil_div(self.cols, self.rows)
        entries = []
        for j in range(r):
            blocks = []
            for rows_i, cols_i in self.block_shapes:
                stacked = np.eye(r * rows_i, cols_i, dtype=np.complex128)
                blocks.append(stacked[j * rows_i : (j + 1) * rows_i, :])
            entries.append(ModuleElement._wrap(self, blocks))
        return entries

    def predicted_stable_rank(self) -> int:
        # Finite-dimensional base algebras have stable rank one, so the
        # ceiling formula reduces to ceil(cols / rows).
        return _ceil_div(self.cols, self.rows)

    def rank_obstruction(self, k: int) -> bool:
        """Whether ``k``-tuples are never unimodular for counting reasons."""
        return self.rows * k < self.cols

    # -- serialization -------------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "algebra": self.alg.to_json_dict(),
            "rows": self.rows,
            "cols": self.cols,
        }

    @classmethod
    def from_json_dict(cls, data) -> "ModuleSpace":
        return cls(Algebra.from_json_dict(data["algebra"]), data["rows"], data["cols"])


@lru_cache(maxsize=None)
def _matrix_module_is_full(space: ModuleSpace, tol: float) -> bool:
    for r, s in space.block_shapes:
        target_dim = s * s
        vectors = np.empty((r * s * r * s, target_dim), dtype=np.complex128)
        row = 0
        units = []
        for u in range(r):
            for v in range(s):
                e = np.zeros((r, s), dtype=np.complex128)
                e[u, v] = 1.0
                units.append(e)
        for ea in units:
            lead = ea.conj().T
            for eb in units:
                vectors[row] = (lead @ eb).reshape(-1)
                row += 1
        svals = _svdvals(vectors)
        rank = int(np.sum(svals > tol * svals[0])) if svals.size and svals[0] > 0 else 0
        if rank != target_dim:
            return False
    return True


class ModuleElement:
    """A module element: one complex block matrix per block of the base algebra.

    Supports ``x + y``, ``x - y``, scalar multiples, the right action
    ``x * b`` by the right algebra and the left action ``a * x`` by the left
    algebra.
    """

    __slots__ = ("space", "blocks", "_norm")

    def __init__(self, space, blocks):
        blocks = tuple(blocks)
        expected = space.block_shapes
        if len(blocks) != len(expected):
            raise ShapeMismatchError(
                f"expected {len(expected)} blocks, got {len(blocks)}"
            )
        frozen = []
        for block, shape in zip(blocks, expected):
            arr = np.array(block, dtype=np.complex128)
            if arr.shape != shape:
                raise ShapeMismatchError(
                    f"block has shape {arr.shape}, expected {shape}"
                )
            arr.setflags(write=False)
            frozen.append(arr)
        self.space = space
        self.blocks = tuple(frozen)
        self._norm = None

    @classmethod
    def _wrap(cls, space, blocks):
        el = cls.__new__(cls)
        el.space = space
        out = []
        for b in blocks:
            b = np.asarray(b, dtype=np.complex128)
            b.setflags(write=False)
            out.append(b)
        el.blocks = tuple(out)
        el._norm = None
        return el

    def _require_same_space(self, other):
        if not isinstance(other, ModuleElement):
            raise TypeError(f"expected a ModuleElement, got {type(other).__name__}")
        if other.space is not self.space and other.space != self.space:
            raise ShapeMismatchError("elements belong to different module spaces")

    def __add__(self, other):
        self._require_same_space(other)
        return ModuleElement._wrap(
            self.space, [a + b for a, b in zip(self.blocks, other.blocks)]
        )

    def __sub__(self, other):
        self._require_same_space(other)
        return ModuleElement._wrap(
            self.space, [a - b for a, b in zip(self.blocks, other.blocks)]
        )

    def __neg__(self):
        return ModuleElement._wrap(self.space, [-a for a in self.blocks])

    def __mul__(self, other):
        if isinstance(other, AlgebraElement):
            return self.space.apply_right(self, other)
        if isinstance(other, numbers.Number):
            z = complex(other)
            return ModuleElement._wrap(self.space, [z * b for b in self.blocks])
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, AlgebraElement):
            return self.space.apply_left(other, self)
        if isinstance(other, numbers.Number):
            return self.__mul__(other)
        return NotImplemented

    def norm(self) -> float:
        """Hilbert module norm, the largest singular value over blocks."""
        if self._norm is None:
            self._norm = max(
                float(_svdvals(b)[0]) if b.size else 0.0 for b in self.blocks
            )
        return self._norm

    def to_json_dict(self) -> dict:
        return {
            "space": self.space.to_json_dict(),
            "blocks": [matrix_to_json(b) for b in self.blocks],
        }

    def __repr__(self):
        return f"<ModuleElement in {self.space!r}, norm={self.norm():.4g}>"


@dataclass(frozen=True)
class ModuleTuple:
    """An ordered tuple of module elements sharing one space."""

    entries: tuple

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise ValueError("a module tuple needs at least one entry")
        space = entries[0].space
        for x in entries[1:]:
            if x.space is not space and x.space != space:
                raise ShapeMismatchError("tuple entries live in different spaces")
        object.__setattr__(self, "entries", entries)

    @property
    def space(self):
        return self.entries[0].space

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, idx):
        return self.entries[idx]

    def __sub__(self, other):
        if len(other) != len(self):
            raise ShapeMismatchError("tuples have different lengths")
        return ModuleTuple(tuple(a - b for a, b in zip(self.entries, other.entries)))

    def norm(self) -> float:
        """Norm of the tuple viewed as a single stacked element."""
        return float(np.sqrt(gram(self).norm()))

    def to_json_list(self) -> list:
        return [x.to_json_dict() for x in self.entries]


# ---------------------------------------------------------------------------
# Free operation surface
# ---------------------------------------------------------------------------


def _same_space(x, y):
    if x.space is not y.space and x.space != y.space:
        raise ShapeMismatchError("elements belong to different module spaces")


def inner_right(x, y) -> AlgebraElement:
    """Right inner product ``x* y``, conjugate-linear in ``x``."""
    _same_space(x, y)
    return x.space.inner_right(x, y)


def inner_left(x, y) -> AlgebraElement:
    """Left inner product ``x y*``, conjugate-linear in ``y``."""
    _same_space(x, y)
    return x.space.inner_left(x, y)


def gram(t: ModuleTuple) -> AlgebraElement:
    """Sum of the right inner squares of the tuple entries."""
    return t.space.gram(t.entries)


def stack(t: ModuleTuple) -> ModuleElement:
    """Identify a k-tuple with one element of the k-fold stacked module."""
    return t.space.stack(t.entries)


def is_unimodular(t: ModuleTuple, tol: float = DEFAULT_TOL) -> bool:
    """Whether the Gram sum of the tuple is invertible in the right algebra."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return t.space.right_is_invertible(gram(t), tol)


def unimodularity_margin(t: ModuleTuple) -> float:
    """Relative smallest singular value of the Gram sum (invertible iff > tol)."""
    return t.space.right_margin(gram(t))


def dual_witness(t: ModuleTuple, tol: float = DEFAULT_TOL) -> ModuleTuple:
    """A tuple ``y`` with ``sum_j <y_j, x_j> = 1`` for a unimodular ``t``.

    Uses the closed form ``y_j = x_j (b^{-1})*`` with ``b`` the Gram sum.
    """
    b = gram(t)
    if not t.space.right_is_invertible(b, tol):
        raise DomainError(
            f"tuple is not unimodular at tol={tol:g} "
            f"(margin {t.space.right_margin(b):.3g})"
        )
    # Invertibility was just established, so skip the redundant gate.
    c = t.space.right_inverse(b, tol, check=False).adjoint()
    return ModuleTuple(tuple(x * c for x in t.entries))


def normalize_tuple(t: ModuleTuple, tol: float = DEFAULT_TOL) -> ModuleTuple:
    """Right-multiply by the inverse square root of the Gram sum."""
    c = t.space.right_inv_sqrt(gram(t), tol)
    return ModuleTuple(tuple(x * c for x in t.entries))


def gen_oracle(t: ModuleTuple, tol: float = DEFAULT_TOL) -> bool:
    """Brute-force generator test, independent of inner products.

    Assembles the complex-linear map sending left-algebra coefficient tuples
    to module elements and checks that its numerical rank equals the module
    dimension.
    """
    return t.space.generates(t.entries, tol)


def generation_margin(t: ModuleTuple) -> float:
    return t.space.generation_margin(t.entries)


def is_full(space, tol: float = DEFAULT_TOL) -> bool:
    """Whether the span of all inner products of a basis fills the right algebra."""
    return space.is_full(tol)


# ---------------------------------------------------------------------------
# Skew corners
# ---------------------------------------------------------------------------


def _range_basis(block) -> np.ndarray:
    """Orthonormal basis of the range of a projection block (eigenvalue > 1/2)."""
    w, v = np.linalg.eigh(_hermitized(block))
    return np.ascontiguousarray(v[:, w > 0.5])


class CornerSpace:
    """The skew corner ``p M_N(A) q`` over the corner algebra ``q M_N(A) q``.

    Elements are stored as ambient matrices of the compressed form
    ``p x q``.  Inner products are computed in the ambient algebra (where
    they automatically land inside the corner subalgebras); invertibility in
    the corner algebra is decided after compressing to the range of ``q``.
    """

    def __init__(self, alg: Algebra, size: int, p: AlgebraElement, q: AlgebraElement):
        size = int(size)
        if size < 1:
            raise ValueError("ambient matrix size must be >= 1")
        ambient = alg.matrix_algebra(size)
        for name, proj in (("p", p), ("q", q)):
            if proj.algebra != ambient:
                raise ShapeMismatchError(
                    f"{name} must live in the ambient algebra M_{size}(A)"
                )
            if (proj - proj.adjoint()).norm() > PROJECTION_TOL or (
                proj * proj - proj
            ).norm() > PROJECTION_TOL:
                raise DomainError(f"{name} is not a projection (p = p* = p^2)")
        if q.norm() <= 0.5:
            raise DegenerateModuleError(
                "q = 0 yields the zero corner algebra; the module is degenerate"
            )
        self.alg = alg
        self.size = size
        self.ambient = ambient
        self.p = p
        self.q = q
        self._row_bases = tuple(_range_basis(b) for b in p.blocks)
        self._col_bases = tuple(_range_basis(b) for b in q.blocks)
        self._full_cache = {}

    # -- structure -----------------------------------------------------------

    @property
    def block_shapes(self) -> tuple:
        return tuple((k, k) for k in self.ambient.block_sizes)

    @property
    def compressed_shapes(self) -> tuple:
        """Per-block (rank p, rank q) of the compressed picture."""
        return tuple(
            (u.shape[1], v.shape[1])
            for u, v in zip(self._row_bases, self._col_bases)
        )

    @property
    def dim(self) -> int:
        return sum(r * s for r, s in self.compressed_shapes)

    @property
    def right_container(self) -> Algebra:
        return self.ambient

    @property
    def left_container(self) -> Algebra:
        return self.ambient

    def right_algebra_unit(self) -> AlgebraElement:
        return self.q

    def __eq__(self, other):
        if not isinstance(other, CornerSpace):
            return NotImplemented
        return (
            self.alg == other.alg
            and self.size == other.size
            and all(np.array_equal(a, b) for a, b in zip(self.p.blocks, other.p.blocks))
            and all(np.array_equal(a, b) for a, b in zip(self.q.blocks, other.q.blocks))
        )

    __hash__ = None

    # -- elements ----------------------------------------------------------------

    def zero(self) -> ModuleElement:
        return ModuleElement._wrap(
            self,
            [np.zeros((k, k), dtype=np.complex128) for k in self.ambient.block_sizes],
        )

    def element(self, ambient_blocks) -> ModuleElement:
        """Compress an ambient matrix per block into the corner (``p x q``)."""
        blocks = [
            pb @ np.asarray(xb, dtype=np.complex128) @ qb
            for pb, xb, qb in zip(self.p.blocks, ambient_blocks, self.q.blocks)
        ]
        return ModuleElement(self, blocks)

    def element_from_ambient(self, x: AlgebraElement) -> ModuleElement:
        if x.algebra != self.ambient:
            raise ShapeMismatchError("element must live in the ambient algebra")
        return self.element(x.blocks)

    def random_element(self, rng) -> ModuleElement:
        blocks = [
            pb @ complex_gaussian(rng, (k, k)) @ qb
            for pb, qb, k in zip(self.p.blocks, self.q.blocks, self.ambient.block_sizes)
        ]
        return ModuleElement._wrap(self, blocks)

    # -- inner products -------------------------------------------------------------

    def inner_right(self, x, y) -> AlgebraElement:
        return AlgebraElement._wrap(
            self.ambient,
            [xb.conj().T @ yb for xb, yb in zip(x.blocks, y.blocks)],
        )

    def inner_left(self, x, y) -> AlgebraElement:
        return AlgebraElement._wrap(
            self.ambient,
            [xb @ yb.conj().T for xb, yb in zip(x.blocks, y.blocks)],
        )

    def gram(self, entries) -> AlgebraElement:
        acc = [
            np.zeros((k, k), dtype=np.complex128) for k in self.ambient.block_sizes
        ]
        for x in entries:
            for i, xb in enumerate(x.blocks):
                acc[i] += xb.conj().T @ xb
        return AlgebraElement._wrap(self.ambient, acc)

    # -- actions (operands are compressed into the corner first) ----------------------

    def apply_right(self, x, b) -> ModuleElement:
        if b.algebra != self.ambient:
            raise ShapeMismatchError("right operand must live in the ambient algebra")
        return ModuleElement._wrap(
            self,
            [
                xb @ (qb @ bb @ qb)
                for xb, bb, qb in zip(x.blocks, b.blocks, self.q.blocks)
            ],
        )

    def apply_left(self, a, x) -> ModuleElement:
        if a.algebra != self.ambient:
            raise ShapeMismatchError("left operand must live in the ambient algebra")
        return ModuleElement._wrap(
            self,
            [
                (pb @ ab @ pb) @ xb
                for ab, xb, pb in zip(a.blocks, x.blocks, self.p.blocks)
            ],
        )

    # -- corner algebra helpers ---------------------------------------------------------

    def _compress_right(self, b) -> list:
        return [
            vb.conj().T @ bb @ vb for bb, vb in zip(b.blocks, self._col_bases)
        ]

    def right_margin(self, b) -> float:
        compressed = self._compress_right(b)
        svals = [_svdvals(c) for c in compressed if c.size]
        if not svals:
            return np.inf
        largest = max(float(s[0]) for s in svals)
        smallest = min(float(s[-1]) for s in svals)
        return smallest / max(1.0, largest)

    def right_is_invertible(self, b, tol: float = DEFAULT_TOL) -> bool:
        if tol <= 0:
            raise ValueError("tol must be positive")
        return self.right_margin(b) > tol

    def right_inverse(self, b, tol: float = DEFAULT_TOL, check: bool = True):
        if check and not self.right_is_invertible(b, tol):
            raise InvertibilityError(
                f"element is numerically singular in the corner algebra at tol={tol:g}"
            )
        blocks = []
        for bb, vb in zip(b.blocks, self._col_bases):
            if vb.shape[1] == 0:
                blocks.append(np.zeros_like(bb))
            else:
                blocks.append(vb @ np.linalg.inv(vb.conj().T @ bb @ vb) @ vb.conj().T)
        return AlgebraElement._wrap(self.ambient, blocks)

    def _right_spectral(self, b, transform, positivity_tol=None):
        blocks = []
        for bb, vb in zip(b.blocks, self._col_bases):
            if vb.shape[1] == 0:
                blocks.append(np.zeros_like(bb))
                continue
            c = vb.conj().T @ bb @ vb
            anti = np.linalg.norm(c - c.conj().T, 2)
            if anti > SELF_ADJOINT_RTOL * max(1.0, np.linalg.norm(c, 2)):
                raise DomainError("corner element is not self-adjoint")
            w, u = np.linalg.eigh(_hermitized(c))
            if positivity_tol is not None and w.size and w[0] <= positivity_tol:
                raise DomainError(
                    f"corner element is not positive definite "
                    f"(smallest eigenvalue {w[0]:g})"
                )
            core = (u * transform(w)) @ u.conj().T
            blocks.append(vb @ _hermitized(core) @ vb.conj().T)
        return AlgebraElement._wrap(self.ambient, blocks)

    def right_inv_sqrt(self, b, tol: float = DEFAULT_TOL):
        threshold = tol * max(1.0, b.norm())
        return self._right_spectral(b, lambda w: w ** -0.5, positivity_tol=threshold)

    def right_positive_part(self, b):
        return self._right_spectral(b, lambda w: np.clip(w, 0.0, None))

    # -- stacking: block-diagonal embedding into a larger ambient algebra ---------------

    def stack(self, entries) -> ModuleElement:
        k = len(entries)
        n = self.size
        big_p_blocks = [np.kron(np.eye(k), pb) for pb in self.p.blocks]
        big_q_blocks = []
        stacked_blocks = []
        for i, size_i in enumerate(self.ambient.block_sizes):
            big = np.zeros((k * size_i, k * size_i), dtype=np.complex128)
            big[:size_i, :size_i] = self.q.blocks[i]
            big_q_blocks.append(big)
            mat = np.zeros((k * size_i, k * size_i), dtype=np.complex128)
            for j, x in enumerate(entries):
                mat[j * size_i : (j + 1) * size_i, :size_i] = x.blocks[i]
            stacked_blocks.append(mat)
        big_ambient = self.alg.matrix_algebra(k * n)
        target = CornerSpace(
            self.alg,
            k * n,
            AlgebraElement._wrap(big_ambient, big_p_blocks),
            AlgebraElement._wrap(big_ambient, big_q_blocks),
        )
        return ModuleElement._wrap(target, stacked_blocks)

    # -- generator oracle ------------------------------------------------------------

    def generation_margin(self, entries) -> float:
        margin = np.inf
        for i, (r, s) in enumerate(self.compressed_shapes):
            dim = r * s
            if dim == 0:
                continue
            u, v = self._row_bases[i], self._col_bases[i]
            eye = np.eye(r)
            columns = np.hstack(
                [np.kron(eye, (u.conj().T @ x.blocks[i] @ v).T) for x in entries]
            )
            svals = _svdvals(columns)
            largest = float(svals[0]) if svals.size else 0.0
            if largest == 0.0:
                return 0.0
            critical = float(svals[dim - 1]) if svals.size >= dim else 0.0
            margin = min(margin, critical / largest)
        return margin

    def generates(self, entries, tol: float = DEFAULT_TOL) -> bool:
        if tol <= 0:
            raise ValueError("tol must be positive")
        return self.generation_margin(entries) > tol

    # -- fullness --------------------------------------------------------------------

    def is_full(self, tol: float = DEFAULT_TOL) -> bool:
        if tol not in self._full_cache:
            self._full_cache[tol] = self._compute_full(tol)
        return self._full_cache[tol]

    def _compute_full(self, tol: float) -> bool:
        for r, s in self.compressed_shapes:
            if s == 0:
                continue
            if r == 0:
                return False
            target_dim = s * s
            units = []
            for a in range(r):
                for b in range(s):
                    e = np.zeros((r, s), dtype=np.complex128)
                    e[a, b] = 1.0
                    units.append(e)
            vectors = np.empty((len(units) ** 2, target_dim), dtype=np.complex128)
            row = 0
            for ea in units:
                lead = ea.conj().T
                for eb in units:
                    vectors[row] = (lead @ eb).reshape(-1)
                    row += 1
            svals = _svdvals(vectors)
            rank = (
                int(np.sum(svals > tol * svals[0]))
                if svals.size and svals[0] > 0
                else 0
            )
            if rank != target_dim:
                return False
        return True

    # -- stable rank helpers ------------------------------------------------------------

    def standard_unimodular_tuple(self) -> list:
        lengths = []
        for r, s in self.compressed_shapes:
            if s == 0:
                continue
            if r == 0:
                raise ModuleNotFullError(
                    "corner has a zero row projection against a nonzero column "
                    "projection; no unimodular tuple exists"
                )
            lengths.append(_ceil_div(s, r))
        r_tuple = max(lengths)
        entries = []
        for j in range(r_tuple):
            blocks = []
            for i, (r, s) in enumerate(self.compressed_shapes):
                u, v = self._row_bases[i], self._col_bases[i]
                stacked = np.eye(r_tuple * r, s, dtype=np.complex128)
                comp = stacked[j * r : (j + 1) * r, :]
                blocks.append(u @ comp @ v.conj().T)
            entries.append(ModuleElement._wrap(self, blocks))
        return entries

    def predicted_stable_rank(self):
        lengths = []
        for r, s in self.compressed_shapes:
            if s == 0:
                continue
            if r == 0:
                return None
            lengths.append(_ceil_div(s, r))
        return max(lengths)

    def rank_obstruction(self, k: int) -> bool:
        return any(k * r < s for r, s in self.compressed_shapes)

    # -- serialization --------------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "algebra": self.alg.to_json_dict(),
            "size": self.size,
            "p": self.p.to_json_dict(),
            "q": self.q.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, data) -> "CornerSpace":
        alg = Algebra.from_json_dict(data["algebra"])
        ambient = alg.matrix_algebra(data["size"])
        p = AlgebraElement.from_json_dict(ambient, data["p"])
        q = AlgebraElement.from_json_dict(ambient, data["q"])
        return cls(alg, data["size"], p, q)

    def __repr__(self):
        shapes = ", ".join(f"{r}x{s}" for r, s in self.compressed_shapes)
        return f"<CornerSpace of M_{self.size}(A), compressed blocks [{shapes}]>"


def corner_space(
    alg: Algebra, size: int, p: AlgebraElement, q: AlgebraElement
) -> CornerSpace:
    """The corner module ``p M_N(A) q`` over ``q M_N(A) q``.

    ``p`` and ``q`` must be projections in the ambient matrix algebra; a zero
    ``q`` is rejected because the corner algebra would collapse.
    """
    return CornerSpace(alg, size, p, q)


# ---------------------------------------------------------------------------
# JSON loading helpers
# ---------------------------------------------------------------------------


def space_from_json_dict(data):
    if "rows" in data:
        return ModuleSpace.from_json_dict(data)
    return CornerSpace.from_json_dict(data)


def element_from_json_dict(data) -> ModuleElement:
    space = space_from_json_dict(data["space"])
    blocks = [matrix_from_json(m) for m in data["blocks"]]
    return ModuleElement(space, blocks)


def tuple_from_json_list(data) -> ModuleTuple:
    if not data:
        raise ValueError("a module tuple needs at least one entry")
    first = element_from_json_dict(data[0])
    entries = [first]
    for item in data[1:]:
        if item["space"] != data[0]["space"]:
            raise ShapeMismatchError("tuple entries declare different spaces")
        blocks = [matrix_from_json(m) for m in item["blocks"]]
        entries.append(ModuleElement(first.space, blocks))
    return ModuleTuple(tuple(entries))
