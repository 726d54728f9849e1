"""Total set-valued maps between finite universes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Sequence

from .core import Subset, Universe, iter_bits, pair_encode
from .errors import UniverseMismatch


@dataclass(frozen=True, eq=False)
class SetValuedMap:
    """A table assigning each domain element a (possibly empty) codomain subset.

    Rows are stored as codomain bitmasks.
    """

    domain: Universe
    codomain: Universe
    rows: tuple[int, ...]

    def __post_init__(self):
        rows = tuple(self.rows)
        if len(rows) != self.domain.size:
            raise ValueError(f"{len(rows)} rows for a domain of size {self.domain.size}")
        limit = 1 << self.codomain.size
        for r in rows:
            if not 0 <= r < limit:
                raise ValueError("row does not fit the codomain")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_rows(cls, domain: Universe, codomain: Universe, rows: Sequence[Iterable[Any]] | Mapping[Any, Iterable[Any]]) -> SetValuedMap:
        """Rows given in domain order, or as a mapping from domain elements.

        Elements missing from a mapping get the empty row.
        """
        if isinstance(rows, Mapping):
            table = [0] * domain.size
            for key, row in rows.items():
                table[domain.index(key)] = codomain.subset(row).bits
            return cls(domain, codomain, tuple(table))
        return cls(domain, codomain, tuple(codomain.subset(r).bits for r in rows))

    @classmethod
    def from_function(cls, domain: Universe, codomain: Universe, fn: Callable[[int], Iterable[Any]]) -> SetValuedMap:
        return cls(domain, codomain, tuple(codomain.subset(fn(i)).bits for i in range(domain.size)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SetValuedMap):
            return NotImplemented
        return self.rows == other.rows and self.domain == other.domain and self.codomain == other.codomain

    def __hash__(self) -> int:
        return hash(self.rows)

    def row(self, element: Any) -> Subset:
        return Subset(self.codomain, self.rows[self.domain.index(element)])

    @property
    def has_empty_rows(self) -> bool:
        return any(r == 0 for r in self.rows)

    def _in(self, s: Subset, u: Universe, side: str) -> None:
        if s.universe is not u and s.universe != u:
            raise UniverseMismatch(f"subset is not over the map's {side}")

    def image(self, d: Subset) -> Subset:
        """Union of the rows of the members of ``d``."""
        self._in(d, self.domain, "domain")
        return Subset(self.codomain, self.image_mask(d.bits))

    def image_mask(self, mask: int) -> int:
        out = 0
        rows = self.rows
        for i in iter_bits(mask):
            out |= rows[i]
        return out

    def upper_inverse(self, y: Subset) -> Subset:
        """Domain elements whose whole row lies inside ``y`` (empty rows qualify)."""
        self._in(y, self.codomain, "codomain")
        return Subset(self.domain, self.upper_inverse_mask(y.bits))

    def upper_inverse_mask(self, mask: int) -> int:
        out = 0
        for i, r in enumerate(self.rows):
            if r & ~mask == 0:
                out |= 1 << i
        return out

    def lower_inverse(self, y: Subset) -> Subset:
        """Domain elements whose row meets ``y``."""
        self._in(y, self.codomain, "codomain")
        return Subset(self.domain, self.lower_inverse_mask(y.bits))

    def lower_inverse_mask(self, mask: int) -> int:
        out = 0
        for i, r in enumerate(self.rows):
            if r & mask:
                out |= 1 << i
        return out

    def __repr__(self) -> str:
        return f"SetValuedMap({self.domain!r} -> {self.codomain!r})"


def identity_map(u: Universe) -> SetValuedMap:
    return SetValuedMap(u, u, tuple(1 << i for i in range(u.size)))


def compose_maps(m1: SetValuedMap, m2: SetValuedMap) -> SetValuedMap:
    """The map ``d -> m2(m1(d))``."""
    if m1.codomain != m2.domain:
        raise UniverseMismatch("codomain of the first map is not the domain of the second")
    return SetValuedMap(m1.domain, m2.codomain, tuple(m2.image_mask(r) for r in m1.rows))


def product_map(m1: SetValuedMap, m2: SetValuedMap) -> SetValuedMap:
    """The map ``d -> m1(d) x m2(d)`` into the product codomain."""
    if m1.domain != m2.domain:
        raise UniverseMismatch("parallel maps need a common domain")
    prod = pair_encode(m1.codomain, m2.codomain)
    n2 = m2.codomain.size
    rows = []
    for r1, r2 in zip(m1.rows, m2.rows):
        bits = 0
        for i in iter_bits(r1):
            bits |= r2 << (i * n2)
        rows.append(bits)
    return SetValuedMap(m1.domain, prod, tuple(rows))


def embedding_map(source: Universe, target: Universe, mapping: Mapping[Any, Any] | None = None) -> SetValuedMap:
    """Injective single-valued map used to realize ``source ⊂ target``.

    Without ``mapping``, elements are matched by label.
    """
    if mapping is None:
        mapping = {lab: lab for lab in source.labels}
    table = [0] * source.size
    seen = set()
    for key, value in mapping.items():
        j = target.index(value)
        if j in seen:
            raise ValueError("embedding is not injective")
        seen.add(j)
        table[source.index(key)] = 1 << j
    if any(r == 0 for r in table):
        raise ValueError("embedding must be total on the source universe")
    return SetValuedMap(source, target, tuple(table))
