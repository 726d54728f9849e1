"""Forward, backward, weak and global stability of set-valued maps.

Generator-level shortcuts are used whenever the closure kinds make them
exact; every predicate takes ``exhaustive=True`` to force the plain
enumeration route instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

from .core import (
    DEFAULT_CEILING,
    SetFamily,
    Subset,
    Universe,
    down_closure,
    enumerate_family,
    is_filter,
    is_ideal,
    iter_bits,
    mask_key,
    member_of,
)
from .errors import (
    AxiomViolation,
    EnumerationRefused,
    IncompatibleFamilies,
    NoOntoAlpha,
    NotDirected,
    NotGloballyStable,
    UncoveredPoint,
    UniverseMismatch,
)
from .relations import SetValuedMap
from .verdict import StabilityVerdict, failed, passed


def _on(f: SetFamily, u: Universe, what: str) -> None:
    if f.universe is not u and f.universe != u:
        raise UniverseMismatch(f"{what} is not over the expected universe")


def _context_notes(m: SetValuedMap, *families: SetFamily) -> list[str]:
    notes = []
    if m.has_empty_rows:
        notes.append("map has empty rows; their upper inverse membership is vacuous")
    for f in families:
        full = (1 << f.universe.size) - 1
        if f.kind == "up" and f.contains_mask(0):
            notes.append(f"improper filter involved: {f}")
        elif f.kind == "down" and f.contains_mask(full):
            notes.append(f"improper ideal involved: {f}")
    return notes


def is_forward_stable(
    m: SetValuedMap, a: SetFamily, b: SetFamily, *, exhaustive: bool = False, ceiling: int = DEFAULT_CEILING
) -> StabilityVerdict:
    """Every member of ``a`` is mapped onto a member of ``b``.

    With ``a`` down-generated and ``b`` down-closed only the generators of
    ``a`` need checking, since images of subsets are subsets of images.
    """
    _on(a, m.domain, "A")
    _on(b, m.codomain, "B")
    notes = _context_notes(m, a, b)
    if exhaustive or a.kind == "up" or (a.kind == "down" and b.kind != "down"):
        candidates, how = enumerate_family(a, ceiling), "enumerated members of A"
    elif a.kind == "down":
        candidates, how = a.members, "generators of A"
    else:
        candidates, how = a.members, "listed members of A"
    for A in candidates:
        img = m.image_mask(A.bits)
        if not b.contains_mask(img):
            return failed(notes, member=A, image=Subset(m.codomain, img))
    return passed(*notes, f"checked {len(candidates)} {how}")


def is_backward_stable(
    m: SetValuedMap, a: SetFamily, b: SetFamily, *, exhaustive: bool = False, ceiling: int = DEFAULT_CEILING
) -> StabilityVerdict:
    """The upper inverse of every member of ``b`` is a member of ``a``.

    With ``b`` up-generated and ``a`` up-closed only the generators of ``b``
    need checking, since upper inverses are monotone.
    """
    _on(a, m.domain, "A")
    _on(b, m.codomain, "B")
    notes = _context_notes(m, a, b)
    if exhaustive or b.kind == "down" or (b.kind == "up" and a.kind != "up"):
        candidates, how = enumerate_family(b, ceiling), "enumerated members of B"
    elif b.kind == "up":
        candidates, how = b.members, "generators of B"
    else:
        candidates, how = b.members, "listed members of B"
    for B in candidates:
        pre = m.upper_inverse_mask(B.bits)
        if not a.contains_mask(pre):
            return failed(notes, member=B, preimage=Subset(m.domain, pre))
    return passed(*notes, f"checked {len(candidates)} {how}")


def _meets_some_member(b: SetFamily, mask: int, exhaustive: bool, ceiling: int) -> Subset | None:
    """A member of ``b`` meeting ``mask``, or None.

    Some member meets ``mask`` iff some maximal member does.
    """
    if exhaustive:
        for B in enumerate_family(b, ceiling):
            if B.bits & mask:
                return B
        return None
    for g in b.maximal_masks():
        if g & mask:
            return Subset(b.universe, g)
    return None


def is_weak_forward_stable(
    m: SetValuedMap,
    a: SetFamily,
    b: SetFamily,
    *,
    skip_empty: bool = True,
    exhaustive: bool = False,
    ceiling: int = DEFAULT_CEILING,
) -> StabilityVerdict:
    """For every member of ``a`` its image meets some member of ``b``.

    The members of ``a`` are always enumerated.  The empty member of an ideal
    has an empty image that meets nothing; with ``skip_empty`` (the default)
    it is treated as vacuous and the verdict says so.
    """
    _on(a, m.domain, "A")
    _on(b, m.codomain, "B")
    notes = _context_notes(m, a, b)
    members = enumerate_family(a, ceiling)
    for A in members:
        if A.bits == 0 and skip_empty:
            notes.append("empty member of A skipped as vacuous")
            continue
        img = m.image_mask(A.bits)
        if _meets_some_member(b, img, exhaustive, ceiling) is None:
            return failed(notes, member=A, image=Subset(m.codomain, img))
    return passed(*notes, f"checked {len(members)} enumerated members of A")


def is_weak_backward_stable(
    m: SetValuedMap, a: SetFamily, b: SetFamily, *, exhaustive: bool = False, ceiling: int = DEFAULT_CEILING
) -> StabilityVerdict:
    """The lower inverse of every member of ``b`` is a member of ``a``."""
    _on(a, m.domain, "A")
    _on(b, m.codomain, "B")
    notes = _context_notes(m, a, b)
    if exhaustive or b.kind == "down" or (b.kind == "up" and a.kind != "up"):
        candidates, how = enumerate_family(b, ceiling), "enumerated members of B"
    else:
        candidates, how = b.members, ("generators of B" if b.kind == "up" else "listed members of B")
    for B in candidates:
        pre = m.lower_inverse_mask(B.bits)
        if not a.contains_mask(pre):
            return failed(notes, member=B, lower_preimage=Subset(m.domain, pre))
    return passed(*notes, f"checked {len(candidates)} {how}")


def _require(verdict: StabilityVerdict, what: str) -> None:
    if not verdict:
        raise AxiomViolation(f"{what} fails its axioms", verdict)


def is_globally_stable(
    m: SetValuedMap,
    f_dom: SetFamily,
    i_dom: SetFamily,
    f_cod: SetFamily,
    i_cod: SetFamily,
    *,
    exhaustive: bool = False,
    ceiling: int = DEFAULT_CEILING,
) -> StabilityVerdict:
    """Backward stable over the filters and forward stable over the ideals."""
    _require(is_filter(f_dom), "domain filter")
    _require(is_ideal(i_dom), "domain ideal")
    _require(is_filter(f_cod), "codomain filter")
    _require(is_ideal(i_cod), "codomain ideal")
    back = is_backward_stable(m, f_dom, f_cod, exhaustive=exhaustive, ceiling=ceiling)
    fwd = is_forward_stable(m, i_dom, i_cod, exhaustive=exhaustive, ceiling=ceiling)
    notes = [f"backward: {n}" for n in back.notes] + [f"forward: {n}" for n in fwd.notes]
    if not back:
        if not fwd:
            notes.append("forward half fails as well")
        return failed(notes, half="backward", **back.witness)
    if not fwd:
        return failed(notes, half="forward", **fwd.witness)
    return passed(*notes)


def intersection_h(f: SetFamily, i: SetFamily, *, ceiling: int = DEFAULT_CEILING) -> tuple[Subset, ...]:
    """Members common to ``f`` and ``i``, in canonical order (possibly none).

    For an up-generated ``f`` and down-generated ``i`` the common members are
    the intervals between a generator of each, so no powerset scan is needed.
    """
    if f.universe != i.universe:
        raise UniverseMismatch("filter and ideal live on different universes")
    u = f.universe
    if f.kind == "up" and i.kind == "down":
        found: set[int] = set()
        for lo in f._masks:
            for hi in i._masks:
                if lo & ~hi:
                    continue
                free = hi & ~lo
                sub = free
                while True:
                    found.add(lo | sub)
                    if len(found) > ceiling:
                        _refuse(len(found), ceiling)
                    if sub == 0:
                        break
                    sub = (sub - 1) & free
        return tuple(Subset(u, x) for x in sorted(found, key=mask_key))
    return tuple(s for s in enumerate_family(f, ceiling) if i.contains_mask(s.bits))


def _refuse(needed: int, ceiling: int) -> None:
    raise EnumerationRefused(needed, ceiling, "intersection members")


def is_compatible(
    f: SetFamily, i: SetFamily, *, exhaustive: bool = False, ceiling: int = DEFAULT_CEILING
) -> StabilityVerdict:
    """Whether the filter ``f`` and the ideal ``i`` are mutually approximable
    through their common members: every member of ``i`` lies in one (H1) and
    every member of ``f`` contains one (H2).
    """
    _require(is_filter(f), "filter")
    _require(is_ideal(i), "ideal")
    if f.universe != i.universe:
        raise UniverseMismatch("filter and ideal live on different universes")
    u = f.universe
    if not exhaustive and f.kind == "up" and i.kind == "down":
        # a common member above a maximal generator X of i can only be X itself
        for g in i._masks:
            if not f.contains_mask(g):
                return failed(["H1 reduced to the generators of the ideal"], condition="H1", member=Subset(u, g))
        for g in f._masks:
            if not i.contains_mask(g):
                return failed(["H2 reduced to the generators of the filter"], condition="H2", member=Subset(u, g))
        return passed("checked generators of both families")
    hs = [h.bits for h in intersection_h(f, i, ceiling=ceiling)]
    notes = [] if hs else ["the intersection of the filter and the ideal is empty"]
    for x in enumerate_family(i, ceiling):
        if not any(x.bits & ~h == 0 for h in hs):
            return failed(notes, condition="H1", member=x)
    for x in enumerate_family(f, ceiling):
        if not any(h & ~x.bits == 0 for h in hs):
            return failed(notes, condition="H2", member=x)
    return passed(f"intersection has {len(hs)} members")


@dataclass(frozen=True, eq=False)
class AlphaMap:
    """An assignment of members of 𝓗_D to members of 𝓗_Y.

    ``onto_witness`` names, for every member of the codomain family, one
    member of the domain family assigned to it (empty when the map was built
    without surjectivity).
    """

    domain_family: tuple[Subset, ...]
    codomain_family: tuple[Subset, ...]
    assignment: dict[Subset, Subset]
    onto_witness: dict[Subset, Subset] = field(default_factory=dict)

    def __call__(self, h: Subset) -> Subset:
        return self.assignment[h]


@dataclass(frozen=True, eq=False)
class KappaMap:
    """Pointwise bound ``d -> alpha(h(d))`` on the points covered by 𝓗_D."""

    selector: dict[int, Subset]
    point_assignment: dict[int, Subset]

    def __call__(self, d: int) -> Subset:
        try:
            return self.point_assignment[d]
        except KeyError:
            raise UncoveredPoint(f"point {d} is not covered by the domain family") from None

    def select(self, d: int) -> Subset:
        try:
            return self.selector[d]
        except KeyError:
            raise UncoveredPoint(f"point {d} is not covered by the domain family") from None


def _match(options: list[list[int]], n_right: int) -> list[int | None]:
    """Deterministic maximum bipartite matching (augmenting paths).

    ``options[v]`` lists right-hand indices for left vertex ``v`` in
    preference order.  Returns the matched right index per left vertex.
    """
    owner: list[int | None] = [None] * n_right
    match: list[int | None] = [None] * len(options)

    def augment(v: int, seen: set[int]) -> bool:
        for h in options[v]:
            if h in seen:
                continue
            seen.add(h)
            if owner[h] is None or augment(owner[h], seen):
                owner[h] = v
                match[v] = h
                return True
        return False

    for v in range(len(options)):
        augment(v, set())
    return match


def construct_alpha(
    m: SetValuedMap,
    f_dom: SetFamily,
    i_dom: SetFamily,
    f_cod: SetFamily,
    i_cod: SetFamily,
    *,
    onto: bool = True,
    ceiling: int = DEFAULT_CEILING,
) -> AlphaMap:
    """Build the set-level gain bounding ``m`` on the common members.

    Phase one picks, for each ``V`` in 𝓗_Y, some ``H`` in 𝓗_D inside the upper
    inverse of ``V`` and sends it to ``V``; phase two sends every remaining
    ``H`` to a member of 𝓗_Y containing its image.  Candidates are tried
    smallest first.

    With ``onto=True`` phase one must use a different ``H`` for every ``V``
    so the result is surjective; that is a matching problem and may have no
    solution even for globally stable systems (then :class:`NoOntoAlpha`).
    With ``onto=False`` a shared ``H`` is sent to the intersection of its
    targets, which is again a common member.
    """
    for fam, ide, side in ((f_dom, i_dom, "domain"), (f_cod, i_cod, "codomain")):
        verdict = is_compatible(fam, ide, ceiling=ceiling)
        if not verdict:
            raise IncompatibleFamilies(f"{side} filter and ideal are not compatible", verdict)
    glob = is_globally_stable(m, f_dom, i_dom, f_cod, i_cod, ceiling=ceiling)
    if not glob:
        raise NotGloballyStable(f"not globally stable ({glob.witness['half']} half fails)", glob)
    h_dom = intersection_h(f_dom, i_dom, ceiling=ceiling)
    h_cod = intersection_h(f_cod, i_cod, ceiling=ceiling)

    options: list[list[int]] = []
    for v in h_cod:
        pre = m.upper_inverse_mask(v.bits)
        options.append([k for k, h in enumerate(h_dom) if h.bits & ~pre == 0])

    assignment: dict[Subset, Subset] = {}
    witness: dict[Subset, Subset] = {}
    if onto:
        matched = _match(options, len(h_dom))
        for v_idx, h_idx in enumerate(matched):
            if h_idx is None:
                raise NoOntoAlpha(
                    "no onto assignment exists",
                    failed(
                        [f"{len(h_dom)} domain members cannot cover {len(h_cod)} codomain members injectively"],
                        member=h_cod[v_idx],
                        candidates=[h_dom[k] for k in options[v_idx]],
                    ),
                )
            assignment[h_dom[h_idx]] = h_cod[v_idx]
            witness[h_cod[v_idx]] = h_dom[h_idx]
    else:
        for v_idx, v in enumerate(h_cod):
            h = h_dom[options[v_idx][0]]
            assignment[h] = assignment[h] & v if h in assignment else v

    for h in h_dom:
        if h in assignment:
            continue
        img = m.image_mask(h.bits)
        cover = next((v for v in h_cod if img & ~v.bits == 0), None)
        if cover is None:  # unreachable for globally stable, compatible inputs
            raise NotGloballyStable("image of a common member is not covered", failed(member=h))
        assignment[h] = cover
    return AlphaMap(h_dom, h_cod, assignment, witness)


def verify_k_infinity(alpha: AlphaMap, *, onto: bool = True) -> StabilityVerdict:
    """Totality, onto-ness (via the witness and by scan) and small images."""
    dom = set(alpha.domain_family)
    cod = set(alpha.codomain_family)
    for h in alpha.domain_family:
        if h not in alpha.assignment:
            return failed(condition="total", member=h)
        if alpha.assignment[h] not in cod:
            return failed(condition="values", member=h, value=alpha.assignment[h])
    if onto:
        hit = set(alpha.assignment.values())
        for v in alpha.codomain_family:
            w = alpha.onto_witness.get(v)
            if w is None or w not in dom or alpha.assignment.get(w) != v or v not in hit:
                return failed(condition="onto", member=v)
    for v in alpha.codomain_family:
        if not any(val <= v for val in alpha.assignment.values()):
            return failed(condition="small images", member=v)
    return passed()


def alpha_bound_holds(m: SetValuedMap, alpha: AlphaMap) -> StabilityVerdict:
    """``m(H) ⊆ alpha(H)`` for every member of the domain family."""
    for h in alpha.domain_family:
        img = m.image(h)
        if not img <= alpha(h):
            return failed(member=h, image=img, bound=alpha(h))
    return passed()


def construct_kappa(alpha: AlphaMap) -> KappaMap:
    """Pick for each covered point the smallest common member containing it."""
    selector: dict[int, Subset] = {}
    for h in sorted(alpha.domain_family, key=lambda s: s.key):
        for d in h:
            selector.setdefault(d, h)
    return KappaMap(selector, {d: alpha(h) for d, h in selector.items()})


def kappa_bound_holds(m: SetValuedMap, kappa: KappaMap) -> StabilityVerdict:
    for d in sorted(kappa.point_assignment):
        row = m.row(d)
        if d not in kappa.select(d) or not row <= kappa(d):
            return failed(point=m.domain.labels[d], row=row, bound=kappa(d))
    return passed()


def is_uniform_property(p: SetFamily) -> StabilityVerdict:
    """Upward directedness: any two members lie in a common member."""
    u = p.universe
    if p.kind == "up":
        return passed("up-closed families contain the whole universe")
    if p.kind == "down":
        # two distinct maximal generators have no common upper bound inside p
        if len(p._masks) == 1:
            return passed()
        return failed(first=Subset(u, p._masks[0]), second=Subset(u, p._masks[1]))
    masks = p._masks
    for a, b in combinations(masks, 2):
        if not any((a | b) & ~c == 0 for c in masks):
            return failed(first=Subset(u, a), second=Subset(u, b))
    return passed()


def ideal_from_uniform_property(p: SetFamily) -> SetFamily:
    verdict = is_uniform_property(p)
    if not verdict:
        raise NotDirected("family is not upward directed", verdict)
    return down_closure(p)


def check_semilattice_hom(
    m: SetValuedMap, a: SetFamily, b: SetFamily, direction: str, *, ceiling: int = DEFAULT_CEILING
) -> StabilityVerdict:
    """Restriction of the upper inverse (backward) or of the image (forward)
    is a well-defined meet- (join-) preserving map between the families.

    The witness separates the two ways this can fail: a value outside the
    target family, or a broken meet/join identity.
    """
    if direction == "backward":
        _require(is_filter(a), "A")
        _require(is_filter(b), "B")
        source, target, fn, op, name = b, a, m.upper_inverse_mask, (lambda x, y: x & y), "meet"
    elif direction == "forward":
        _require(is_ideal(a), "A")
        _require(is_ideal(b), "B")
        source, target, fn, op, name = a, b, m.image_mask, (lambda x, y: x | y), "join"
    else:
        raise ValueError(f"direction must be 'forward' or 'backward', not {direction!r}")
    members = enumerate_family(source, ceiling)
    values = {}
    for s in members:
        v = fn(s.bits)
        values[s.bits] = v
        if not target.contains_mask(v):
            return failed(mode="value", member=s, value=Subset(target.universe, v))
    for x, y in combinations(values, 2):
        if fn(op(x, y)) != op(values[x], values[y]):
            return failed(mode=name, first=Subset(source.universe, x), second=Subset(source.universe, y))
    return passed(f"checked {len(members)} members pairwise")
