"""Subsets of a finite universe and families of such subsets.

A :class:`Subset` is a bitmask over a :class:`Universe`.  A
:class:`SetFamily` is either listed explicitly or given by a canonical
antichain of generators together with a closure kind:

* ``"up"``   -- all supersets of some generator (minimal generators kept)
* ``"down"`` -- all subsets of some generator (maximal generators kept)

Enumeration order everywhere is by cardinality, then by the sorted tuple of
member indices, so ``{a}`` comes before ``{b}`` and ``{a,b}`` before ``{a,c}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Any, Iterable, Iterator, Sequence

from .errors import EmptyFamilyError, EnumerationRefused, UniverseMismatch
from .verdict import StabilityVerdict, failed, passed

DEFAULT_CEILING = 1 << 16

KINDS = ("explicit", "up", "down")


def iter_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def to_fraction(x: Any) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


@dataclass(frozen=True)
class Universe:
    """A finite indexed ground set.

    Optional metadata drives the model builders: ``coordinates`` (one
    rational point per element, compared in the sup norm), ``magnitude``
    (sublevel ideals), ``order`` (a partial order as ``(i, j)`` pairs
    meaning ``i <= j``) with a designated ``zero``.  Product universes made
    by :func:`pair_encode` remember their ``factors``.
    """

    size: int
    labels: tuple[str, ...] | None = None
    coordinates: tuple[tuple[Fraction, ...], ...] | None = None
    magnitude: tuple[Fraction, ...] | None = None
    order: frozenset[tuple[int, int]] | None = None
    zero: int | None = None
    factors: tuple[Universe, Universe] | None = None

    def __post_init__(self):
        if not isinstance(self.size, int) or self.size < 1:
            raise ValueError(f"universe size must be a positive integer, got {self.size!r}")
        set_ = lambda name, value: object.__setattr__(self, name, value)  # noqa: E731
        labels = tuple(str(i) for i in range(self.size)) if self.labels is None else tuple(map(str, self.labels))
        if len(labels) != self.size:
            raise ValueError(f"{len(labels)} labels for {self.size} elements")
        if len(set(labels)) != self.size:
            raise ValueError("element labels must be unique")
        set_("labels", labels)
        if self.coordinates is not None:
            coords = tuple(
                tuple(to_fraction(c) for c in (p if isinstance(p, (tuple, list)) else (p,)))
                for p in self.coordinates
            )
            if len(coords) != self.size:
                raise ValueError(f"{len(coords)} coordinates for {self.size} elements")
            if len({len(p) for p in coords}) > 1:
                raise ValueError("all coordinates must have the same dimension")
            set_("coordinates", coords)
        if self.magnitude is not None:
            mags = tuple(to_fraction(v) for v in self.magnitude)
            if len(mags) != self.size:
                raise ValueError(f"{len(mags)} magnitudes for {self.size} elements")
            if any(v < 0 for v in mags):
                raise ValueError("magnitudes must be nonnegative")
            set_("magnitude", mags)
        if self.order is not None:
            order = frozenset((int(i), int(j)) for i, j in self.order)
            _check_partial_order(order, self.size)
            set_("order", order)
        if self.zero is not None and not 0 <= self.zero < self.size:
            raise ValueError(f"zero element {self.zero} out of range")

    # -- element lookup -------------------------------------------------

    @cached_property
    def _label_index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    def index(self, item: Any) -> int:
        """Resolve a label, an index, or (on product universes) a pair."""
        if isinstance(item, bool):
            raise TypeError("booleans are not elements")
        if isinstance(item, int):
            if not 0 <= item < self.size:
                raise IndexError(f"element {item} out of range for size {self.size}")
            return item
        if isinstance(item, str):
            try:
                return self._label_index[item]
            except KeyError:
                raise KeyError(f"unknown element label {item!r}") from None
        if isinstance(item, (tuple, list)) and len(item) == 2 and self.factors is not None:
            u1, u2 = self.factors
            return self.pair_index(u1.index(item[0]), u2.index(item[1]))
        raise TypeError(f"cannot interpret {item!r} as an element")

    def subset(self, items: Iterable[Any] = ()) -> Subset:
        if isinstance(items, Subset):
            if items.universe != self:
                raise UniverseMismatch("subset belongs to a different universe")
            return items
        bits = 0
        for item in items:
            bits |= 1 << self.index(item)
        return Subset(self, bits)

    @property
    def full(self) -> Subset:
        return Subset(self, (1 << self.size) - 1)

    @property
    def empty(self) -> Subset:
        return Subset(self, 0)

    def singleton(self, item: Any) -> Subset:
        return Subset(self, 1 << self.index(item))

    # -- metric ---------------------------------------------------------

    @property
    def has_metric(self) -> bool:
        return self.coordinates is not None

    def distance(self, i: int, j: int) -> Fraction:
        """Sup-norm distance between the coordinates of two elements."""
        if self.coordinates is None:
            raise ValueError("universe has no coordinates")
        p, q = self.coordinates[i], self.coordinates[j]
        return max((abs(a - b) for a, b in zip(p, q)), default=Fraction(0))

    # -- order ----------------------------------------------------------

    def leq(self, i: int, j: int) -> bool:
        if self.order is None:
            raise ValueError("universe has no order")
        return (i, j) in self.order

    # -- products -------------------------------------------------------

    def pair_index(self, i: int, j: int) -> int:
        u1, u2 = self._factors()
        if not (0 <= i < u1.size and 0 <= j < u2.size):
            raise IndexError(f"pair ({i}, {j}) out of range for {u1.size}x{u2.size}")
        return i * u2.size + j

    def pair_split(self, k: int) -> tuple[int, int]:
        u1, u2 = self._factors()
        if not 0 <= k < self.size:
            raise IndexError(f"element {k} out of range for size {self.size}")
        return divmod(k, u2.size)

    def _factors(self) -> tuple[Universe, Universe]:
        if self.factors is None:
            raise ValueError("not a product universe")
        return self.factors

    def __repr__(self) -> str:
        shown = ",".join(self.labels[:6]) + (",..." if self.size > 6 else "")
        return f"Universe({self.size}: {shown})"


def _check_partial_order(order: frozenset[tuple[int, int]], n: int) -> None:
    for i, j in order:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"order pair {(i, j)} out of range")
    for i in range(n):
        if (i, i) not in order:
            raise ValueError(f"order is not reflexive at {i}")
    for i, j in order:
        if i != j and (j, i) in order:
            raise ValueError(f"order is not antisymmetric at {(i, j)}")
    above: dict[int, set[int]] = {}
    for i, j in order:
        above.setdefault(i, set()).add(j)
    for i in range(n):
        for j in above.get(i, ()):
            for k in above.get(j, ()):
                if (i, k) not in order:
                    raise ValueError(f"order is not transitive at {(i, j, k)}")


def pair_encode(u1: Universe, u2: Universe) -> Universe:
    """Product universe with row-major pair indexing."""
    labels = [f"({a},{b})" for a in u1.labels for b in u2.labels]
    coords = None
    if u1.coordinates is not None and u2.coordinates is not None:
        coords = [p + q for p in u1.coordinates for q in u2.coordinates]
    mags = None
    if u1.magnitude is not None and u2.magnitude is not None:
        mags = [max(a, b) for a in u1.magnitude for b in u2.magnitude]
    order = None
    zero = None
    if u1.order is not None and u2.order is not None:
        n2 = u2.size
        order = {
            (i1 * n2 + i2, j1 * n2 + j2)
            for i1, j1 in u1.order
            for i2, j2 in u2.order
        }
        if u1.zero is not None and u2.zero is not None:
            zero = u1.zero * n2 + u2.zero
    return Universe(
        u1.size * u2.size,
        labels=labels,
        coordinates=coords,
        magnitude=mags,
        order=order,
        zero=zero,
        factors=(u1, u2),
    )


@dataclass(frozen=True, eq=False)
class Subset:
    universe: Universe
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits < (1 << self.universe.size):
            raise ValueError(f"membership mask {self.bits:#x} does not fit universe of size {self.universe.size}")

    # comparisons skip the universe check when the objects are shared
    def _same(self, other: Subset) -> None:
        if self.universe is not other.universe and self.universe != other.universe:
            raise UniverseMismatch("subsets live on different universes")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Subset):
            return NotImplemented
        return self.bits == other.bits and (self.universe is other.universe or self.universe == other.universe)

    def __hash__(self) -> int:
        return hash(self.bits)

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __iter__(self) -> Iterator[int]:
        return iter_bits(self.bits)

    def __contains__(self, item: Any) -> bool:
        return bool(self.bits >> self.universe.index(item) & 1)

    def __bool__(self) -> bool:
        return self.bits != 0

    def __and__(self, other: Subset) -> Subset:
        self._same(other)
        return Subset(self.universe, self.bits & other.bits)

    def __or__(self, other: Subset) -> Subset:
        self._same(other)
        return Subset(self.universe, self.bits | other.bits)

    def __sub__(self, other: Subset) -> Subset:
        self._same(other)
        return Subset(self.universe, self.bits & ~other.bits)

    def __invert__(self) -> Subset:
        return self.complement()

    def __le__(self, other: Subset) -> bool:
        self._same(other)
        return self.bits & ~other.bits == 0

    def __ge__(self, other: Subset) -> bool:
        return other <= self

    def __lt__(self, other: Subset) -> bool:
        return self <= other and self.bits != other.bits

    def __gt__(self, other: Subset) -> bool:
        return other < self

    def complement(self) -> Subset:
        return Subset(self.universe, ~self.bits & ((1 << self.universe.size) - 1))

    def issubset(self, other: Subset) -> bool:
        return self <= other

    def meets(self, other: Subset) -> bool:
        self._same(other)
        return self.bits & other.bits != 0

    @property
    def key(self) -> tuple[int, tuple[int, ...]]:
        """Canonical sort key: cardinality, then member indices."""
        return (self.bits.bit_count(), tuple(iter_bits(self.bits)))

    def labels(self) -> list[str]:
        return [self.universe.labels[i] for i in self]

    def __str__(self) -> str:
        return "{" + ",".join(self.labels()) + "}"

    def __repr__(self) -> str:
        return f"Subset({self})"


def mask_key(mask: int) -> tuple[int, tuple[int, ...]]:
    return (mask.bit_count(), tuple(iter_bits(mask)))


def complement(s: Subset) -> Subset:
    return s.complement()


def minimal_masks(masks: Iterable[int]) -> list[int]:
    """The inclusion-minimal masks, in canonical order."""
    kept: list[int] = []
    for m in sorted(set(masks), key=mask_key):
        if not any(k & ~m == 0 for k in kept):
            kept.append(m)
    return kept


def maximal_masks(masks: Iterable[int]) -> list[int]:
    """The inclusion-maximal masks, in canonical order."""
    kept: list[int] = []
    for m in sorted(set(masks), key=mask_key, reverse=True):
        if not any(m & ~k == 0 for k in kept):
            kept.append(m)
    return sorted(kept, key=mask_key)


def all_masks(n: int, limit: int = DEFAULT_CEILING) -> Iterator[int]:
    """Every subset mask of an n-element universe, in canonical order."""
    if (1 << n) > limit:
        raise EnumerationRefused(1 << n, limit)
    for k in range(n + 1):
        for combo in combinations(range(n), k):
            mask = 0
            for i in combo:
                mask |= 1 << i
            yield mask


def all_subsets(u: Universe, limit: int = DEFAULT_CEILING) -> Iterator[Subset]:
    return (Subset(u, m) for m in all_masks(u.size, limit))


@dataclass(frozen=True)
class SetFamily:
    """A nonempty family of subsets of one universe.

    Build with :meth:`explicit`, :meth:`up_generated` or
    :meth:`down_generated`; each canonicalizes its input.  For the generated
    kinds, ``members`` holds the generator antichain.
    """

    universe: Universe
    kind: str
    members: tuple[Subset, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        if not self.members:
            raise EmptyFamilyError("families of subsets must be nonempty")
        for s in self.members:
            if s.universe is not self.universe and s.universe != self.universe:
                raise UniverseMismatch("family member from a different universe")
        masks = [s.bits for s in self.members]
        if len(set(masks)) != len(masks):
            raise ValueError("duplicate family members")
        if self.kind != "explicit":
            for i, a in enumerate(masks):
                for b in masks[i + 1:]:
                    if a & ~b == 0 or b & ~a == 0:
                        raise ValueError("generators must form an antichain")

    @classmethod
    def explicit(cls, universe: Universe, sets: Iterable[Any]) -> SetFamily:
        masks = {universe.subset(s).bits for s in sets}
        return cls._from_masks(universe, "explicit", sorted(masks, key=mask_key))

    @classmethod
    def up_generated(cls, universe: Universe, generators: Iterable[Any]) -> SetFamily:
        masks = [universe.subset(s).bits for s in generators]
        return cls._from_masks(universe, "up", minimal_masks(masks))

    @classmethod
    def down_generated(cls, universe: Universe, generators: Iterable[Any]) -> SetFamily:
        masks = [universe.subset(s).bits for s in generators]
        return cls._from_masks(universe, "down", maximal_masks(masks))

    @classmethod
    def _from_masks(cls, universe: Universe, kind: str, masks: Sequence[int]) -> SetFamily:
        if not masks:
            raise EmptyFamilyError("families of subsets must be nonempty")
        return cls(universe, kind, tuple(Subset(universe, m) for m in masks))

    @property
    def generators(self) -> tuple[Subset, ...]:
        return self.members

    @cached_property
    def _masks(self) -> tuple[int, ...]:
        return tuple(s.bits for s in self.members)

    @cached_property
    def _mask_set(self) -> frozenset[int]:
        return frozenset(self._masks)

    def contains_mask(self, mask: int) -> bool:
        if self.kind == "explicit":
            return mask in self._mask_set
        if self.kind == "up":
            return any(g & ~mask == 0 for g in self._masks)
        return any(mask & ~g == 0 for g in self._masks)

    def __contains__(self, s: Subset) -> bool:
        return member_of(self, s)

    def minimal_masks(self) -> list[int]:
        """Inclusion-minimal members of the extension."""
        if self.kind == "up":
            return list(self._masks)
        if self.kind == "down":
            return [0]
        return minimal_masks(self._masks)

    def maximal_masks(self) -> list[int]:
        """Inclusion-maximal members of the extension."""
        if self.kind == "down":
            return list(self._masks)
        if self.kind == "up":
            return [(1 << self.universe.size) - 1]
        return maximal_masks(self._masks)

    def __str__(self) -> str:
        tag = {"explicit": "", "up": "↑", "down": "↓"}[self.kind]
        return tag + "{" + ", ".join(str(s) for s in self.members) + "}"


def _same_universe(u: Universe, v: Universe, what: str = "families") -> None:
    if u is not v and u != v:
        raise UniverseMismatch(f"{what} live on different universes")


def up_closure(f: SetFamily) -> SetFamily:
    """Up-generated family with the same minimal members as ``f``."""
    if f.kind == "up":
        return f
    return SetFamily._from_masks(f.universe, "up", minimal_masks(f.minimal_masks()))


def down_closure(f: SetFamily) -> SetFamily:
    """Down-generated family with the same maximal members as ``f``."""
    if f.kind == "down":
        return f
    return SetFamily._from_masks(f.universe, "down", maximal_masks(f.maximal_masks()))


def member_of(f: SetFamily, s: Subset) -> bool:
    _same_universe(f.universe, s.universe, "family and subset")
    return f.contains_mask(s.bits)


def enumerate_family(f: SetFamily, limit: int = DEFAULT_CEILING) -> list[Subset]:
    """The full extension of ``f`` in canonical order.

    Explicit families are returned as listed.  Generated families are
    enumerated by scanning all ``2**size`` subsets, which is refused above
    ``limit``.
    """
    if f.kind == "explicit":
        return list(f.members)
    return [Subset(f.universe, m) for m in all_masks(f.universe.size, limit) if f.contains_mask(m)]


def extension_masks(f: SetFamily, limit: int = DEFAULT_CEILING) -> list[int]:
    return [s.bits for s in enumerate_family(f, limit)]


def is_filter(f: SetFamily) -> StabilityVerdict:
    """Check nonemptiness, closure under supersets, and under pairwise meets."""
    full = (1 << f.universe.size) - 1
    u = f.universe
    if f.kind == "up":
        gens = f._masks
        for i, a in enumerate(gens):
            for b in gens[i + 1:]:
                if not f.contains_mask(a & b):
                    return failed(
                        ["intersection of generators contains no generator"],
                        axiom="F2", first=Subset(u, a), second=Subset(u, b), missing=Subset(u, a & b),
                    )
        notes = ["improper filter: contains the empty set"] if f.contains_mask(0) else []
        return passed(*notes)
    if f.kind == "down":
        # a down-closed family holds the empty set, so F1 forces it to be everything
        if f._masks == (full,):
            return passed("improper filter: contains the empty set")
        return failed(axiom="F1", member=u.empty, superset=u.full)
    masks = f._mask_set
    for a in f._masks:
        free = full & ~a
        for x in iter_bits(free):
            if a | (1 << x) not in masks:
                return failed(axiom="F1", member=Subset(u, a), superset=Subset(u, a | (1 << x)))
    ordered = f._masks
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if a & b not in masks:
                return failed(axiom="F2", first=Subset(u, a), second=Subset(u, b), missing=Subset(u, a & b))
    notes = ["improper filter: contains the empty set"] if 0 in masks else []
    return passed(*notes)


def is_ideal(f: SetFamily) -> StabilityVerdict:
    """Check nonemptiness, closure under subsets, and under pairwise joins."""
    full = (1 << f.universe.size) - 1
    u = f.universe
    if f.kind == "down":
        gens = f._masks
        for i, a in enumerate(gens):
            for b in gens[i + 1:]:
                if not f.contains_mask(a | b):
                    return failed(
                        ["union of generators lies in no generator"],
                        axiom="I2", first=Subset(u, a), second=Subset(u, b), missing=Subset(u, a | b),
                    )
        notes = ["improper ideal: contains the whole universe"] if f.contains_mask(full) else []
        return passed(*notes)
    if f.kind == "up":
        # an up-closed family holds the whole universe, so I1 forces everything
        if f._masks == (0,):
            return passed("improper ideal: contains the whole universe")
        return failed(axiom="I1", member=u.full, subset=u.empty)
    masks = f._mask_set
    for a in f._masks:
        for x in iter_bits(a):
            if a & ~(1 << x) not in masks:
                return failed(axiom="I1", member=Subset(u, a), subset=Subset(u, a & ~(1 << x)))
    ordered = f._masks
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if a | b not in masks:
                return failed(axiom="I2", first=Subset(u, a), second=Subset(u, b), missing=Subset(u, a | b))
    notes = ["improper ideal: contains the whole universe"] if full in masks else []
    return passed(*notes)


def is_filter_base(f: SetFamily) -> bool:
    return is_filter(up_closure(f)).holds


def is_ideal_base(f: SetFamily) -> bool:
    return is_ideal(down_closure(f)).holds


def dualize(f: SetFamily) -> SetFamily:
    """Family of complements; swaps up- and down-generated representations."""
    full = (1 << f.universe.size) - 1
    masks = [full & ~m for m in f._masks]
    kind = {"explicit": "explicit", "up": "down", "down": "up"}[f.kind]
    return SetFamily._from_masks(f.universe, kind, sorted(masks, key=mask_key))


def rectangle(prod: Universe, s1: Subset, s2: Subset) -> Subset:
    n2 = prod._factors()[1].size
    bits = 0
    for i in s1:
        for j in s2:
            bits |= 1 << (i * n2 + j)
    return Subset(prod, bits)


def product_base(f1: SetFamily, f2: SetFamily) -> SetFamily:
    """All rectangles of members (explicit) or generators (generated families).

    The result is an explicit family on ``pair_encode(f1.universe,
    f2.universe)`` meant to be used as a base, not as a closed family.
    """
    prod = pair_encode(f1.universe, f2.universe)
    rects = {rectangle(prod, a, b).bits for a in f1.members for b in f2.members}
    return SetFamily._from_masks(prod, "explicit", sorted(rects, key=mask_key))


def family_union(f: SetFamily) -> Subset:
    if f.kind == "up":
        return f.universe.full
    bits = 0
    for m in f._masks:
        bits |= m
    return Subset(f.universe, bits)


def covers(f: SetFamily) -> bool:
    """Whether the members of ``f`` cover the whole universe."""
    return family_union(f) == f.universe.full


def family_subset_of(a: SetFamily, b: SetFamily, limit: int = DEFAULT_CEILING) -> bool:
    """Inclusion of extensions, decided on generators where possible."""
    _same_universe(a.universe, b.universe)
    if a.kind == "explicit" or a.kind == b.kind:
        return all(b.contains_mask(m) for m in a._masks)
    if b.kind == "explicit":
        return all(b.contains_mask(m) for m in extension_masks(a, limit))
    if a.kind == "up":
        # b is down-closed: it must hold the top set, hence be everything
        return b.contains_mask((1 << a.universe.size) - 1)
    # a is down-closed and b up-closed: b must hold the empty set
    return b.contains_mask(0)
