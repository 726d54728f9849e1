"""Builders for concrete systems: solution maps of finite transition
relations, metric-ball filters, sublevel/safety/positivity ideals, and the
named example systems used by the fixture suite."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Sequence

from .core import (
    DEFAULT_CEILING,
    SetFamily,
    Subset,
    Universe,
    rectangle,
    to_fraction,
)
from .errors import EnumerationRefused, NotDirected
from .interconnect import (
    FeedbackSystem,
    feedback_solution_map,
    parallel_check,
    small_gain_check,
    small_gain_theorem_harness,
)
from .relations import SetValuedMap, product_map
from .stability import (
    ideal_from_uniform_property,
    is_backward_stable,
    is_forward_stable,
    is_weak_backward_stable,
    is_weak_forward_stable,
)
from .verdict import StabilityVerdict, failed


@dataclass(frozen=True)
class TransitionRelation:
    states: Universe
    step: SetValuedMap

    def __post_init__(self):
        if self.step.domain != self.states or self.step.codomain != self.states:
            raise ValueError("step must map the state universe to itself")

    @classmethod
    def from_function(cls, states: Universe, fn: Callable[[int], Iterable[Any]]) -> TransitionRelation:
        return cls(states, SetValuedMap.from_function(states, states, fn))


@dataclass(frozen=True)
class TrajectoryUniverse:
    """All step-consistent state sequences of length ``horizon + 1``."""

    base: Universe
    horizon: int
    paths: tuple[tuple[int, ...], ...]
    universe: Universe


def build_trajectory_universe(
    tr: TransitionRelation, horizon: int, *, ceiling: int = DEFAULT_CEILING
) -> TrajectoryUniverse:
    """Depth-first enumeration in state order.  Coordinates are the
    concatenated state coordinates (so the sup distance is the sup over
    time) and magnitude is the largest state magnitude along the path."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    base = tr.states
    paths: list[tuple[int, ...]] = []

    def extend(path: list[int]) -> None:
        if len(path) == horizon + 1:
            paths.append(tuple(path))
            if len(paths) > ceiling:
                raise EnumerationRefused(len(paths), ceiling, "trajectories")
            return
        row = tr.step.rows[path[-1]]
        for nxt in range(base.size):
            if row >> nxt & 1:
                path.append(nxt)
                extend(path)
                path.pop()

    for s in range(base.size):
        extend([s])
    if not paths:
        raise ValueError(f"no trajectory survives {horizon} steps")
    labels = [">".join(base.labels[s] for s in p) for p in paths]
    coords = None
    if base.coordinates is not None:
        coords = [sum((base.coordinates[s] for s in p), ()) for p in paths]
    mags = None
    if base.magnitude is not None:
        mags = [max(base.magnitude[s] for s in p) for p in paths]
    u = Universe(len(paths), labels=labels, coordinates=coords, magnitude=mags)
    return TrajectoryUniverse(base, horizon, tuple(paths), u)


def solution_map(tr: TransitionRelation, horizon: int, *, trajectories: TrajectoryUniverse | None = None) -> SetValuedMap:
    """Initial states to the trajectories that start there."""
    traj = trajectories or build_trajectory_universe(tr, horizon)
    rows = [0] * tr.states.size
    for k, p in enumerate(traj.paths):
        rows[p[0]] |= 1 << k
    return SetValuedMap(tr.states, traj.universe, tuple(rows))


def ball(u: Universe, center: Subset, radius: Any) -> Subset:
    """Points within sup distance ``radius`` of some point of ``center``."""
    r = to_fraction(radius)
    bits = 0
    for x in range(u.size):
        if any(u.distance(x, c) <= r for c in center):
            bits |= 1 << x
    return Subset(u, bits)


def ball_filter(u: Universe, center: Subset, radii: Sequence[Any]) -> SetFamily:
    """Up-generated family of closed balls around ``center``.

    The balls are nested, so only the smallest survives as a generator.
    An empty center gives the improper filter of all subsets.
    """
    if not u.has_metric:
        raise ValueError("ball filters need a universe with coordinates")
    if not radii:
        raise ValueError("at least one radius is required")
    rs = [to_fraction(r) for r in radii]
    if any(r < 0 for r in rs) or rs != sorted(rs):
        raise ValueError("radii must be nonnegative and ascending")
    return SetFamily.up_generated(u, [ball(u, center, r) for r in rs])


def sublevel(u: Universe, level: Any) -> Subset:
    if u.magnitude is None:
        raise ValueError("sublevel sets need a universe with magnitudes")
    lv = to_fraction(level)
    return Subset(u, sum(1 << x for x in range(u.size) if u.magnitude[x] <= lv))


def sublevel_ideal(u: Universe, levels: Sequence[Any]) -> SetFamily:
    """Down-generated family of sublevel sets; nested, so one generator.

    Use :func:`setstab.core.covers` to see whether the top level bounds
    every point.
    """
    if not levels:
        raise ValueError("at least one level is required")
    return SetFamily.down_generated(u, [sublevel(u, lv) for lv in levels])


def safety_ideal(safe_regions: SetFamily) -> SetFamily:
    """Ideal generated by a union-closed family of safe regions."""
    masks = set(s.bits for s in safe_regions.members) if safe_regions.kind == "explicit" else None
    if masks is not None:
        for a in masks:
            for b in masks:
                if a | b not in masks:
                    u = safe_regions.universe
                    raise NotDirected(
                        "safe regions are not closed under union",
                        failed(first=Subset(u, a), second=Subset(u, b)),
                    )
    return ideal_from_uniform_property(safe_regions)


def positivity_ideal(u: Universe) -> SetFamily:
    """Principal ideal of the points above the designated zero."""
    if u.order is None or u.zero is None:
        raise ValueError("positivity needs an order with a designated zero")
    return SetFamily.down_generated(u, [Subset(u, sum(1 << x for x in range(u.size) if u.leq(u.zero, x)))])


def grid_universe(values: Sequence[Any], *, labels: Sequence[str] | None = None) -> Universe:
    """One-dimensional grid: coordinate and magnitude are the value itself."""
    vals = [to_fraction(v) for v in values]
    return Universe(
        len(vals),
        labels=labels or [str(v) for v in vals],
        coordinates=[(v,) for v in vals],
        magnitude=[abs(v) for v in vals],
    )


# -- named examples ------------------------------------------------------


@dataclass(frozen=True)
class Fixture:
    """One named verdict with the outcome it is expected to have."""

    name: str
    expect: bool
    verdict: StabilityVerdict

    @property
    def ok(self) -> bool:
        return self.verdict.holds == self.expect


@dataclass(frozen=True)
class ExampleSystem:
    """An example's ingredients plus its expected verdicts."""

    name: str
    parts: dict
    fixtures: tuple[Fixture, ...]


def _both(first: StabilityVerdict, second: StabilityVerdict) -> StabilityVerdict:
    for k, v in ((1, first), (2, second)):
        if not v:
            return failed(v.notes, factor=k, **v.witness)
    return StabilityVerdict(True, None, first.notes + second.notes)


def _p_states(p: Fraction) -> tuple[Universe, TransitionRelation]:
    values = [Fraction(0)] if p == 0 else [Fraction(0), p / 2, p]
    states = grid_universe(values)
    half = p / 2

    def step(i: int):
        y = values[i]
        if y <= half:
            return {values.index(Fraction(0)), values.index(p)}
        return {values.index(y / 2)}

    return states, TransitionRelation.from_function(states, step)


def example_weak_stability(p: Any = 1, horizon: int = 4) -> ExampleSystem:
    """Finite analog of the reset-or-halve inclusion on states ``{0, p/2, p}``.

    At zero the state may jump to ``p``; from ``p`` it halves.  The domain
    filter is the ball filter of ``{0}``; the output filter is the ball filter
    of the all-zero trajectory.  For ``p = 0`` the origin is stable; for
    ``p > 0`` strong backward stability fails while the lower-inverse (weak)
    form holds, because one branch stays at zero.
    """
    p = to_fraction(p)
    if p < 0:
        raise ValueError("p must be nonnegative")
    states, tr = _p_states(p)
    traj = build_trajectory_universe(tr, horizon)
    psi = solution_map(tr, horizon, trajectories=traj)
    radii = (Fraction(1, 4), Fraction(1, 2))
    zero = states.subset(["0"])
    zero_path = traj.universe.subset([">".join(["0"] * (horizon + 1))])
    a = ball_filter(states, zero, radii)
    b = ball_filter(traj.universe, zero_path, radii)
    tag = f"weak-stability[p={p}]"
    if p == 0:
        fixtures = (Fixture(f"{tag} backward", True, is_backward_stable(psi, a, b)),)
    else:
        fixtures = (
            Fixture(f"{tag} backward", False, is_backward_stable(psi, a, b)),
            Fixture(f"{tag} weak-backward", True, is_weak_backward_stable(psi, a, b)),
            Fixture(f"{tag} weak-forward", True, is_weak_forward_stable(psi, a, b)),
        )
    parts = {"states": states, "relation": tr, "trajectories": traj, "map": psi, "A": a, "B": b}
    return ExampleSystem(f"weak-stability[p={p}]", parts, fixtures)


def example_weak_lagrange(horizon: int = 4) -> ExampleSystem:
    """Contract, hold or double (capped at 4) on states ``0..4``.

    Every state has a bounded branch (hold) and, away from zero, a branch
    that reaches the cap.  Bounded inputs are the sublevel sets up to 3 and
    bounded trajectories stay at or below 3: strong forward stability fails,
    weak forward stability holds, and the contraction-only relation is
    strongly stable.
    """
    states = grid_universe(range(5))
    branching = TransitionRelation.from_function(
        states, lambda y: {0} if y == 0 else {y // 2, y, min(2 * y, 4)}
    )
    contracting = TransitionRelation.from_function(states, lambda y: {y // 2})
    a = sublevel_ideal(states, (1, 2, 3))
    out = []
    parts: dict = {"states": states, "A": a}
    for tag, tr in (("branching", branching), ("contracting", contracting)):
        traj = build_trajectory_universe(tr, horizon)
        psi = solution_map(tr, horizon, trajectories=traj)
        b = sublevel_ideal(traj.universe, (3,))
        parts[tag] = {"relation": tr, "trajectories": traj, "map": psi, "B": b}
        if tag == "branching":
            out.append(Fixture("weak-lagrange forward", False, is_forward_stable(psi, a, b)))
            out.append(Fixture("weak-lagrange weak-forward", True, is_weak_forward_stable(psi, a, b)))
        else:
            out.append(Fixture("weak-lagrange contraction forward", True, is_forward_stable(psi, a, b)))
    return ExampleSystem("weak-lagrange", parts, tuple(out))


def example_parallel_counterexample() -> ExampleSystem:
    """Identity and clipped identity on the quarter grid over ``[0, 2]``.

    Each factor is backward stable at ``D = [0, 1]`` for balls of radius 1/2,
    and so is the product against rectangles of such balls, but the 1/2-ball
    around the diagonal image pulls back to ``D`` itself.
    """
    grid = grid_universe([Fraction(k, 4) for k in range(9)])
    one = Fraction(1)
    psi1 = SetValuedMap.from_function(grid, grid, lambda i: {i})
    psi2 = SetValuedMap.from_function(grid, grid, lambda i: {i} if grid.coordinates[i][0] <= one else {0})
    d = grid.subset([i for i in range(grid.size) if grid.coordinates[i][0] <= one])
    r = (Fraction(1, 2),)
    a = ball_filter(grid, d, r)
    b1 = ball_filter(grid, psi1.image(d), r)
    b2 = ball_filter(grid, psi2.image(d), r)
    prod = product_map(psi1, psi2)
    image = prod.image(d)
    diagonal = ball_filter(prod.codomain, image, r)
    fixtures = (
        Fixture("parallel-cex factors backward", True, _both(is_backward_stable(psi1, a, b1), is_backward_stable(psi2, a, b2))),
        Fixture("parallel-cex product-base backward", True, parallel_check(psi1, psi2, a, a, b1, b2, "backward")),
        Fixture("parallel-cex diagonal-ball backward", False, is_backward_stable(prod, a, diagonal)),
    )
    parts = {"grid": grid, "psi1": psi1, "psi2": psi2, "D": d, "A": a, "B1": b1, "B2": b2,
             "product": prod, "image": image, "diagonal": diagonal}
    return ExampleSystem("parallel-cex", parts, fixtures)


def halving_feedback() -> FeedbackSystem:
    """Each side outputs the larger of half the other side's output and its input."""
    y = Universe(4, magnitude=range(4))
    u = Universe(4, magnitude=range(4))
    return FeedbackSystem.from_functions(y, y, u, u, lambda a, d: {max(a // 2, d)}, lambda a, d: {max(a // 2, d)})


def example_halving(n_max: int = 3) -> ExampleSystem:
    """Small-gain fixtures for :func:`halving_feedback` in both forms.

    Backward: inputs near zero, outputs in the box ``{0,1}^2``.  Forward:
    inputs and outputs of magnitude at most 1.
    """
    fb = halving_feedback()
    sol = feedback_solution_map(fb)
    ins, outs = fb.inputs, fb.outputs
    box = rectangle(outs, fb.y1.subset([0, 1]), fb.y2.subset([0, 1]))
    back_a = SetFamily.up_generated(ins, [ins.subset([(0, 0)])])
    back_b = SetFamily.up_generated(outs, [box])
    fwd_a = sublevel_ideal(ins, (1,))
    fwd_b = sublevel_ideal(outs, (1,))
    fixtures = (
        Fixture("halving backward small-gain", True, small_gain_check(fb, back_a, back_b, n_max)),
        Fixture("halving backward conclusion", True, small_gain_theorem_harness(fb, back_a, back_b, n_max)),
        Fixture("halving forward small-gain", True, small_gain_check(fb, fwd_a, fwd_b, n_max, direction="forward")),
        Fixture(
            "halving forward conclusion",
            True,
            small_gain_theorem_harness(fb, fwd_a, fwd_b, n_max, direction="forward"),
        ),
    )
    parts = {"feedback": fb, "solution": sol, "backward": (back_a, back_b), "forward": (fwd_a, fwd_b)}
    return ExampleSystem("halving", parts, fixtures)


EXAMPLES: dict[str, Callable[[], list[ExampleSystem]]] = {
    "example:sexy": lambda: [example_weak_stability(0), example_weak_stability(1)],
    "example:sexy2": lambda: [example_weak_lagrange()],
    "example:parallel-cex": lambda: [example_parallel_counterexample()],
    "example:halving": lambda: [example_halving()],
}


def run_fixtures(names: Iterable[str] | None = None) -> list[tuple[str, Fixture]]:
    """Evaluate the named example suites (all by default) in a fixed order."""
    out = []
    for name in names or EXAMPLES:
        try:
            build = EXAMPLES[name]
        except KeyError:
            raise KeyError(f"unknown fixture {name!r}; known: {', '.join(EXAMPLES)}") from None
        for system in build():
            out.extend((name, fx) for fx in system.fixtures)
    return out
