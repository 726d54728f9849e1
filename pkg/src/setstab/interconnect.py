"""Series, parallel and feedback interconnections.

For feedback systems the loop maps ``Γ_12`` and ``Γ_21`` are tabulated per
input point: ``Γ_ij(y, d) = Ψ_i(Ψ_j(y, d_j), d_i)``.  Iterating over a set of
inputs is done pointwise by default (``Γ^n(y, A)`` is the union over ``d``
in ``A`` of ``Γ^n(y, d)``); ``hold_input=False`` instead iterates the
setwise step, which can only give larger sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any

from .core import (
    DEFAULT_CEILING,
    SetFamily,
    Subset,
    Universe,
    down_closure,
    enumerate_family,
    family_subset_of,
    is_filter_base,
    is_ideal_base,
    iter_bits,
    mask_key,
    pair_encode,
    product_base,
    up_closure,
)
from .errors import HypothesisViolation, UniverseMismatch
from .relations import SetValuedMap, compose_maps, product_map
from .stability import is_backward_stable, is_forward_stable
from .verdict import StabilityVerdict, failed, passed


# -- series --------------------------------------------------------------


def series_map(m1: SetValuedMap, m2: SetValuedMap, embedding: SetValuedMap | None = None) -> SetValuedMap:
    """``d -> m2(m1(d))``, optionally routing the first output through an
    injective embedding into the second map's domain."""
    if embedding is not None:
        m1 = compose_maps(m1, embedding)
    if m1.codomain != m2.domain:
        raise UniverseMismatch("series maps need matching universes or an embedding")
    return compose_maps(m1, m2)


def push_family(f: SetFamily, embedding: SetValuedMap, *, ceiling: int = DEFAULT_CEILING) -> SetFamily:
    """Explicit family of the images of the members of ``f``."""
    return SetFamily._from_masks(
        embedding.codomain,
        "explicit",
        sorted({embedding.image_mask(s.bits) for s in enumerate_family(f, ceiling)}, key=mask_key),
    )


def series_check(
    m1: SetValuedMap,
    m2: SetValuedMap,
    a1: SetFamily,
    b1: SetFamily,
    a2: SetFamily,
    b2: SetFamily,
    direction: str,
    *,
    embedding: SetValuedMap | None = None,
    ceiling: int = DEFAULT_CEILING,
) -> StabilityVerdict:
    """Check the hypotheses of the series result, then its conclusion.

    Backward needs ``a2 ⊆ b1``; forward needs ``b1 ⊆ a2``.  Failed
    hypotheses raise :class:`HypothesisViolation`.
    """
    pred = _predicate(direction)
    h1 = pred(m1, a1, b1, ceiling=ceiling)
    if not h1:
        raise HypothesisViolation(f"first system is not {direction} stable", h1)
    h2 = pred(m2, a2, b2, ceiling=ceiling)
    if not h2:
        raise HypothesisViolation(f"second system is not {direction} stable", h2)
    b1_moved = b1 if embedding is None else push_family(b1, embedding, ceiling=ceiling)
    if direction == "backward":
        ok, what = family_subset_of(a2, b1_moved, ceiling), "second input family is not inside the first output family"
    else:
        ok, what = family_subset_of(b1_moved, a2, ceiling), "first output family is not inside the second input family"
    if not ok:
        raise HypothesisViolation(what, failed(condition="inclusion", detail=what))
    return pred(series_map(m1, m2, embedding), a1, b2, ceiling=ceiling)


def _predicate(direction: str):
    if direction == "backward":
        return is_backward_stable
    if direction == "forward":
        return is_forward_stable
    raise ValueError(f"direction must be 'forward' or 'backward', not {direction!r}")


# -- parallel ------------------------------------------------------------


def _as_members(f: SetFamily, closure: str, ceiling: int) -> SetFamily:
    """A family whose ``closure``-closure equals that of the members of ``f``.

    Generators are enough when ``f`` is already closed the same way;
    otherwise the members are listed.
    """
    if f.kind == closure:
        return f
    return SetFamily._from_masks(f.universe, "explicit", [s.bits for s in enumerate_family(f, ceiling)])


def parallel_product_family(b1: SetFamily, b2: SetFamily, direction: str, *, ceiling: int = DEFAULT_CEILING) -> SetFamily:
    """The rectangles of members of ``b1`` and ``b2`` in the form each check needs:
    down-closed for the forward conclusion, the rectangles themselves
    (generator rectangles suffice for up-closed factors) for the backward one."""
    if direction == "forward":
        return down_closure(product_base(_as_members(b1, "down", ceiling), _as_members(b2, "down", ceiling)))
    return product_base(_as_members(b1, "up", ceiling), _as_members(b2, "up", ceiling))


def parallel_check(
    m1: SetValuedMap,
    m2: SetValuedMap,
    a1: SetFamily,
    a2: SetFamily,
    b1: SetFamily,
    b2: SetFamily,
    direction: str,
    *,
    ceiling: int = DEFAULT_CEILING,
) -> StabilityVerdict:
    """Check the hypotheses of the parallel result, then its conclusion:
    forward against ``a1`` and the down-closed rectangles, or backward
    against the up-closure of ``a2`` and the rectangles."""
    pred = _predicate(direction)
    base_ok = is_ideal_base if direction == "forward" else is_filter_base
    for k, a in ((1, a1), (2, a2)):
        if not base_ok(a):
            kind = "ideal" if direction == "forward" else "filter"
            raise HypothesisViolation(f"input family {k} is not an {kind} base", failed(condition="base", family=k))
    for k, m, a, b in ((1, m1, a1, b1), (2, m2, a2, b2)):
        v = pred(m, a, b, ceiling=ceiling)
        if not v:
            raise HypothesisViolation(f"system {k} is not {direction} stable", v)
    if not family_subset_of(a1, a2, ceiling):
        raise HypothesisViolation("first input family is not inside the second", failed(condition="inclusion"))
    prod = product_map(m1, m2)
    rects = parallel_product_family(b1, b2, direction, ceiling=ceiling)
    if direction == "forward":
        return is_forward_stable(prod, a1, rects, ceiling=ceiling)
    return is_backward_stable(prod, up_closure(a2), rects, ceiling=ceiling)


# -- feedback ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FeedbackSystem:
    """Two systems in a loop: ``psi1`` reads ``(y2, u1)``, ``psi2`` reads ``(y1, u2)``."""

    y1: Universe
    y2: Universe
    u1: Universe
    u2: Universe
    psi1: SetValuedMap
    psi2: SetValuedMap

    def __post_init__(self):
        if self.psi1.domain != pair_encode(self.y2, self.u1) or self.psi1.codomain != self.y1:
            raise UniverseMismatch("psi1 must map pairs (y2, u1) into y1")
        if self.psi2.domain != pair_encode(self.y1, self.u2) or self.psi2.codomain != self.y2:
            raise UniverseMismatch("psi2 must map pairs (y1, u2) into y2")

    @classmethod
    def from_functions(cls, y1: Universe, y2: Universe, u1: Universe, u2: Universe, f1, f2) -> FeedbackSystem:
        """Build from callables ``f1(y2, u1)`` and ``f2(y1, u2)`` on indices."""
        d1, d2 = pair_encode(y2, u1), pair_encode(y1, u2)
        psi1 = SetValuedMap.from_function(d1, y1, lambda k: f1(*d1.pair_split(k)))
        psi2 = SetValuedMap.from_function(d2, y2, lambda k: f2(*d2.pair_split(k)))
        return cls(y1, y2, u1, u2, psi1, psi2)

    @cached_property
    def inputs(self) -> Universe:
        return pair_encode(self.u1, self.u2)

    @cached_property
    def outputs(self) -> Universe:
        return pair_encode(self.y1, self.y2)

    def output(self, i: int) -> Universe:
        return _side(i, self.y1, self.y2)

    @cached_property
    def _loop_rows(self) -> dict[int, tuple[tuple[int, ...], ...]]:
        """``rows[i][d][y]`` is the mask of ``Γ_ij(y, d)``."""
        tables = {}
        n_u1, n_u2 = self.u1.size, self.u2.size
        for i in (1, 2):
            yi = self.output(i)
            inner, outer = (self.psi2, self.psi1) if i == 1 else (self.psi1, self.psi2)
            n_ui = n_u1 if i == 1 else n_u2
            n_uj = n_u2 if i == 1 else n_u1
            per_d = []
            for d in range(self.inputs.size):
                d1, d2 = divmod(d, n_u2)
                di, dj = (d1, d2) if i == 1 else (d2, d1)
                row = []
                for y in range(yi.size):
                    mid = inner.rows[y * n_uj + dj]
                    out = 0
                    for z in iter_bits(mid):
                        out |= outer.rows[z * n_ui + di]
                    row.append(out)
                per_d.append(tuple(row))
            tables[i] = tuple(per_d)
        return tables


def _side(i: int, first, second):
    if i == 1:
        return first
    if i == 2:
        return second
    raise ValueError(f"loop index must be 1 or 2, not {i!r}")


def feedback_solution_map(fb: FeedbackSystem) -> SetValuedMap:
    """Inputs ``(u1, u2)`` to all consistent output pairs ``(y1, y2)``."""
    n_y2, n_u1, n_u2 = fb.y2.size, fb.u1.size, fb.u2.size
    rows = []
    for d in range(fb.inputs.size):
        d1, d2 = divmod(d, n_u2)
        bits = 0
        for a in range(fb.y1.size):
            for b in range(n_y2):
                if fb.psi1.rows[b * n_u1 + d1] >> a & 1 and fb.psi2.rows[a * n_u2 + d2] >> b & 1:
                    bits |= 1 << (a * n_y2 + b)
        rows.append(bits)
    return SetValuedMap(fb.inputs, fb.outputs, tuple(rows))


def upsilon_projection(fb: FeedbackSystem, i: int, solution: SetValuedMap | None = None) -> SetValuedMap:
    """Projection of the solution rows onto the ``i``-th output."""
    sol = solution if solution is not None else feedback_solution_map(fb)
    n_y2 = fb.y2.size
    rows = []
    for r in sol.rows:
        bits = 0
        for k in iter_bits(r):
            a, b = divmod(k, n_y2)
            bits |= 1 << (a if i == 1 else b)
        rows.append(bits)
    return SetValuedMap(fb.inputs, _side(i, fb.y1, fb.y2), tuple(rows))


def _check_gamma_args(fb: FeedbackSystem, i: int, y_set: Subset, d_set: Subset) -> None:
    if y_set.universe != fb.output(i):
        raise UniverseMismatch(f"output set is not over y{i}")
    if d_set.universe != fb.inputs:
        raise UniverseMismatch("input set is not over the product input universe")


def _step_mask(table, y_mask: int, d_mask: int) -> int:
    out = 0
    for d in iter_bits(d_mask):
        row = table[d]
        for y in iter_bits(y_mask):
            out |= row[y]
    return out


def gamma_step(fb: FeedbackSystem, i: int, y_set: Subset, d_set: Subset) -> Subset:
    """``Γ_ij`` applied setwise in both arguments."""
    _check_gamma_args(fb, i, y_set, d_set)
    return Subset(y_set.universe, _step_mask(fb._loop_rows[i], y_set.bits, d_set.bits))


@dataclass(frozen=True)
class GammaOrbit:
    """The iterates ``Γ^1, Γ^2, ...`` of one start set as a lasso.

    ``states[k]`` is the state after ``k + 1`` steps; from index
    ``cycle_start`` on the sequence repeats with the given period.
    """

    states: tuple
    cycle_start: int
    period: int

    def state(self, n: int):
        if n < 1:
            raise ValueError("iteration count must be at least 1")
        k = n - 1
        if k < len(self.states):
            return self.states[k]
        return self.states[self.cycle_start + (k - self.cycle_start) % self.period]


def _orbit(step, start) -> GammaOrbit:
    seen: dict[Any, int] = {}
    states = []
    cur = step(start)
    while cur not in seen:
        seen[cur] = len(states)
        states.append(cur)
        cur = step(cur)
    first = seen[cur]
    return GammaOrbit(tuple(states), first, len(states) - first)


def gamma_orbit(fb: FeedbackSystem, i: int, y_mask: int, d_mask: int, *, hold_input: bool = True) -> GammaOrbit:
    """Orbit of iterate masks; pointwise states are tuples of per-input masks."""
    table = fb._loop_rows[i]
    if hold_input:
        points = tuple(iter_bits(d_mask))

        def step(state):
            return tuple(_step_mask(table, s, 1 << d) for s, d in zip(state, points))

        orbit = _orbit(step, tuple(y_mask for _ in points))
        merged = []
        for state in orbit.states:
            bits = 0
            for s in state:
                bits |= s
            merged.append(bits)
        return GammaOrbit(tuple(merged), orbit.cycle_start, orbit.period)
    return _orbit(lambda s: _step_mask(table, s, d_mask), y_mask)


def gamma_iterate(
    fb: FeedbackSystem, i: int, y_set: Subset, d_set: Subset, n: int, *, hold_input: bool = True
) -> Subset:
    """The ``n``-th loop iterate from ``y_set`` under the inputs ``d_set``."""
    if n < 1:
        raise ValueError("iteration count must be at least 1")
    _check_gamma_args(fb, i, y_set, d_set)
    return Subset(y_set.universe, gamma_orbit(fb, i, y_set.bits, d_set.bits, hold_input=hold_input).state(n))


def _rect_inside(b_mask: int, s1: int, s2: int, n_y2: int) -> bool:
    if s1 == 0 or s2 == 0:
        return True
    for a in iter_bits(s1):
        if (s2 << (a * n_y2)) & ~b_mask:
            return False
    return True


def _drive_table(fb, a_mask, b_mask, n_max, hold_input, orbits):
    """Per-point ``(n1, n2)`` sending every point outside ``b_mask`` inside it,
    or ``(None, point)`` for the first point that cannot be handled."""
    full = (1 << fb.outputs.size) - 1
    n_y2 = fb.y2.size
    table = {}
    for k in iter_bits(full & ~b_mask):
        y1, y2 = divmod(k, n_y2)
        o1 = orbits(1, y1, a_mask)
        o2 = orbits(2, y2, a_mask)
        hit = None
        for n1 in range(1, n_max[0] + 1):
            s1 = o1.state(n1)
            for n2 in range(1, n_max[1] + 1):
                if _rect_inside(b_mask, s1, o2.state(n2), n_y2):
                    hit = (n1, n2)
                    break
            if hit:
                break
        if hit is None:
            return None, k
        table[k] = hit
    return table, None


def small_gain_check(
    fb: FeedbackSystem,
    a: SetFamily,
    b: SetFamily,
    n_max: int | tuple[int, int] | None = None,
    *,
    direction: str = "backward",
    hold_input: bool = True,
    exhaustive: bool = False,
    ceiling: int = DEFAULT_CEILING,
) -> StabilityVerdict:
    """Search for the loop contraction that certifies the small-gain property.

    Backward form: every member ``B`` of ``b`` has a member ``A`` of ``a``
    such that each output pair outside ``B`` is driven by some ``Γ`` iterates
    (``n1, n2 <= n_max``) under ``A`` into a rectangle inside ``B``.  Forward
    form: every ``A`` has such a ``B``.

    The condition gets easier for larger ``B`` and smaller ``A``, so the
    backward form checks the minimal members of ``b`` against minimal members
    of ``a``, and the forward form maximal members of both.  ``exhaustive``
    disables that reduction.
    """
    if a.universe != fb.inputs:
        raise UniverseMismatch("A must live on the product input universe")
    if b.universe != fb.outputs:
        raise UniverseMismatch("B must live on the product output universe")
    if n_max is None:
        n_max = (fb.y1.size, fb.y2.size)
    elif isinstance(n_max, int):
        n_max = (n_max, n_max)
    if min(n_max) < 1:
        raise ValueError("n_max must be at least 1")
    if direction not in ("backward", "forward"):
        raise ValueError(f"direction must be 'forward' or 'backward', not {direction!r}")

    cache: dict[tuple[int, int, int], GammaOrbit] = {}

    def orbits(i, y, a_mask):
        key = (i, y, a_mask)
        if key not in cache:
            cache[key] = gamma_orbit(fb, i, 1 << y, a_mask, hold_input=hold_input)
        return cache[key]

    def extension(f: SetFamily, pick: str) -> list[int]:
        if exhaustive:
            return [s.bits for s in enumerate_family(f, ceiling)]
        return f.minimal_masks() if pick == "min" else f.maximal_masks()

    if direction == "backward":
        outer, inner = extension(b, "min"), extension(a, "min")
    else:
        outer, inner = extension(a, "max"), extension(b, "max")

    choices = []
    for x in outer:
        last_uncovered = None
        found = None
        for y in inner:
            a_mask, b_mask = (y, x) if direction == "backward" else (x, y)
            table, point = _drive_table(fb, a_mask, b_mask, n_max, hold_input, orbits)
            if table is not None:
                found = (a_mask, b_mask, table)
                break
            if last_uncovered is None:
                last_uncovered = (a_mask, b_mask, point)
        if found is None:
            a_mask, b_mask, point = last_uncovered if last_uncovered else (None, x, None)
            label = "B" if direction == "backward" else "A"
            witness = {label: Subset(b.universe if label == "B" else a.universe, x)}
            if point is not None:
                witness["uncovered"] = fb.outputs.labels[point]
                witness["first_candidate"] = Subset(
                    a.universe if label == "B" else b.universe, a_mask if label == "B" else b_mask
                )
            return failed([f"no candidate works within n_max={n_max}"], **witness)
        a_mask, b_mask, table = found
        choices.append(
            {
                "A": Subset(a.universe, a_mask),
                "B": Subset(b.universe, b_mask),
                "steps": {fb.outputs.labels[k]: v for k, v in sorted(table.items())},
            }
        )
    cycled = all(len(o.states) <= n_max[i - 1] for (i, _, _), o in cache.items())
    note = "every orbit closed a cycle within n_max" if cycled else "search bounded by n_max"
    return passed(note, choices=choices)


def small_gain_theorem_harness(
    fb: FeedbackSystem,
    a: SetFamily,
    b: SetFamily,
    n_max: int | tuple[int, int] | None = None,
    *,
    direction: str = "backward",
    hold_input: bool = True,
    ceiling: int = DEFAULT_CEILING,
) -> StabilityVerdict:
    """Require the small-gain property, then check the stability it promises."""
    sgp = small_gain_check(fb, a, b, n_max, direction=direction, hold_input=hold_input, ceiling=ceiling)
    if not sgp:
        raise HypothesisViolation("small-gain property fails", sgp)
    sol = feedback_solution_map(fb)
    if direction == "backward":
        verdict = is_backward_stable(sol, up_closure(a), b, ceiling=ceiling)
    else:
        verdict = is_forward_stable(sol, a, down_closure(b), ceiling=ceiling)
    return verdict.with_notes(*(f"small gain: {n}" for n in sgp.notes))
