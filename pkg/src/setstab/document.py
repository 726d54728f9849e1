"""JSON system/query documents: parsing, execution and reports.

A document has the sections ``universes``, ``subsets``, ``families``,
``maps``, ``feedbackSystems`` (objects keyed by name) and ``queries`` (a
list).  The grammar is described in the README.  References between
declarations are resolved on demand, so declaration order does not matter.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from .core import (
    DEFAULT_CEILING,
    SetFamily,
    Subset,
    Universe,
    enumerate_family,
    is_filter,
    is_ideal,
    pair_encode,
    product_base,
)
from .errors import NoOntoAlpha, SetStabError, VerdictError
from .interconnect import (
    FeedbackSystem,
    feedback_solution_map,
    parallel_check,
    series_check,
    small_gain_check,
    small_gain_theorem_harness,
)
from .modelgen import ball_filter, positivity_ideal, run_fixtures, sublevel_ideal
from .relations import SetValuedMap, compose_maps, embedding_map, product_map
from .stability import (
    alpha_bound_holds,
    construct_alpha,
    construct_kappa,
    is_backward_stable,
    is_compatible,
    is_forward_stable,
    is_globally_stable,
    is_weak_backward_stable,
    is_weak_forward_stable,
    kappa_bound_holds,
    verify_k_infinity,
)
from .verdict import StabilityVerdict, failed, passed

SECTIONS = ("universes", "subsets", "families", "maps", "feedbackSystems")
EXPECTATIONS = ("holds", "fails")


class DocumentError(SetStabError, ValueError):
    """A document that cannot be parsed or resolved; ``where`` locates it."""

    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@dataclass
class Document:
    """A parsed document.  Declarations are resolved lazily and cached."""

    raw: dict
    text: str = ""
    resolved: dict[str, dict[str, Any]] = field(default_factory=lambda: {s: {} for s in SECTIONS})
    _active: set = field(default_factory=set)

    # -- lookup -----------------------------------------------------------

    def where(self, section: str, name: str) -> str:
        """Line and column of a declaration's key, or its section path."""
        path = f"{section}.{name}"
        if self.text:
            start = self.text.find(f'"{section}"')
            pos = self.text.find(f'"{name}"', max(start, 0))
            if pos >= 0:
                line = self.text.count("\n", 0, pos) + 1
                col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
                return f"line {line}, column {col} ({path})"
        return path

    def get(self, section: str, name: Any) -> Any:
        if not isinstance(name, str):
            raise DocumentError(f"expected a name in section {section!r}, got {name!r}")
        cache = self.resolved[section]
        if name in cache:
            return cache[name]
        decls = self.raw.get(section, {})
        if name not in decls:
            raise DocumentError(f"unresolved reference {name!r} in {section}")
        key = (section, name)
        if key in self._active:
            raise DocumentError(f"circular reference through {name!r}", self.where(section, name))
        self._active.add(key)
        try:
            value = BUILDERS[section](self, name, decls[name])
        except DocumentError:
            raise
        except VerdictError as exc:
            raise DocumentError(f"{exc} (witness: {json.dumps(to_jsonable(exc.verdict.witness))})", self.where(section, name)) from exc
        except (SetStabError, ValueError, KeyError, TypeError, IndexError) as exc:
            raise DocumentError(str(exc), self.where(section, name)) from exc
        finally:
            self._active.discard(key)
        cache[name] = value
        return value

    def resolve_all(self) -> None:
        for section in SECTIONS:
            for name in self.raw.get(section, {}):
                self.get(section, name)

    @property
    def queries(self) -> list[dict]:
        return self.raw.get("queries", [])


def _field(decl: dict, key: str, what: str) -> Any:
    if key not in decl:
        raise DocumentError(f"{what} needs a {key!r} field")
    return decl[key]


def _build_universe(doc: Document, name: str, decl: dict) -> Universe:
    if "product" in decl:
        first, second = decl["product"]
        return pair_encode(doc.get("universes", first), doc.get("universes", second))
    labels = decl.get("labels")
    size = decl.get("size", len(labels) if labels is not None else None)
    if size is None:
        raise DocumentError("universe needs 'labels' or 'size'")
    labels = [str(x) for x in labels] if labels is not None else None
    lookup = {lab: i for i, lab in enumerate(labels or [str(i) for i in range(size)])}

    def idx(x):
        key = str(x)
        if key not in lookup:
            raise DocumentError(f"unknown element {x!r}")
        return lookup[key]

    order = None
    if "order" in decl:
        pairs = {(idx(a), idx(b)) for a, b in decl["order"]}
        pairs |= {(i, i) for i in range(size)}
        order = _transitive(pairs)
    coords = decl.get("coordinates")
    if coords is not None:
        coords = [[_num(c) for c in (p if isinstance(p, list) else [p])] for p in coords]
    mags = [_num(v) for v in decl["magnitude"]] if "magnitude" in decl else None
    zero = idx(decl["zero"]) if "zero" in decl else None
    return Universe(size, labels=labels, coordinates=coords, magnitude=mags, order=order, zero=zero)


def _transitive(pairs: set[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    closed = set(pairs)
    changed = True
    while changed:
        changed = False
        for a, b in list(closed):
            for c, d in list(closed):
                if b == c and (a, d) not in closed:
                    closed.add((a, d))
                    changed = True
    return frozenset(closed)


def _num(x: Any) -> Fraction:
    if isinstance(x, bool):
        raise DocumentError(f"expected a number, got {x!r}")
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


def _element(u: Universe, x: Any) -> Any:
    """Elements are labels; on product universes also ``[a, b]`` pairs.
    Integers are treated as labels first."""
    if isinstance(x, list):
        return tuple(_element(f, y) for f, y in zip(u._factors(), x))
    return str(x)


def _subset(doc: Document, u: Universe, given: Any) -> Subset:
    """A subset name, or a list of elements."""
    if isinstance(given, str):
        s = doc.get("subsets", given)
        if s.universe != u:
            raise DocumentError(f"subset {given!r} lives on a different universe")
        return s
    return u.subset(_element(u, x) for x in given)


def _build_subset(doc: Document, name: str, decl: dict) -> Subset:
    u = doc.get("universes", _field(decl, "universe", "subset"))
    return _subset(doc, u, _field(decl, "members", "subset"))


def _build_family(doc: Document, name: str, decl: dict) -> SetFamily:
    if "product" in decl:
        first, second = decl["product"]
        fam = product_base(doc.get("families", first), doc.get("families", second))
    else:
        u = doc.get("universes", _field(decl, "universe", "family"))
        if "ball" in decl:
            b = decl["ball"]
            fam = ball_filter(u, _subset(doc, u, _field(b, "center", "ball")), [_num(r) for r in _field(b, "radii", "ball")])
        elif "sublevel" in decl:
            fam = sublevel_ideal(u, [_num(v) for v in _field(decl["sublevel"], "levels", "sublevel")])
        elif decl.get("positivity"):
            fam = positivity_ideal(u)
        else:
            kind = decl.get("kind", "explicit")
            sets = [_subset(doc, u, s) for s in _field(decl, "sets", "family")]
            ctor = {"explicit": SetFamily.explicit, "up": SetFamily.up_generated, "down": SetFamily.down_generated}
            if kind not in ctor:
                raise DocumentError(f"unknown family kind {kind!r}")
            fam = ctor[kind](u, sets)
    claim = decl.get("assert")
    if claim is not None:
        checks = {"filter": is_filter, "ideal": is_ideal}
        if claim not in checks:
            raise DocumentError(f"can only assert 'filter' or 'ideal', not {claim!r}")
        verdict = checks[claim](fam)
        if not verdict:
            raise DocumentError(
                f"declared {claim} fails axiom {verdict.witness.get('axiom')} "
                f"(witness: {json.dumps(to_jsonable(verdict.witness))})",
                doc.where("families", name),
            )
    return fam


def _build_map(doc: Document, name: str, decl: dict) -> SetValuedMap:
    if "compose" in decl:
        first, second = decl["compose"]
        return compose_maps(doc.get("maps", first), doc.get("maps", second))
    if "product" in decl:
        first, second = decl["product"]
        return product_map(doc.get("maps", first), doc.get("maps", second))
    dom = doc.get("universes", _field(decl, "domain", "map"))
    cod = doc.get("universes", _field(decl, "codomain", "map"))
    if "embedding" in decl:
        mapping = {_element(dom, k): _element(cod, v) for k, v in decl["embedding"].items()}
        return embedding_map(dom, cod, mapping)
    rows = _field(decl, "rows", "map")
    if isinstance(rows, dict):
        table = {_element(dom, _unpair(k, dom)): [_element(cod, y) for y in r] for k, r in rows.items()}
        return SetValuedMap.from_rows(dom, cod, table)
    if len(rows) != dom.size:
        raise DocumentError(f"{len(rows)} rows for a domain of size {dom.size}")
    return SetValuedMap.from_rows(dom, cod, [[_element(cod, y) for y in r] for r in rows])


def _unpair(key: str, u: Universe) -> Any:
    """Row keys on product domains may be written ``"a,b"`` or as the label ``"(a,b)"``."""
    if u.factors is not None and key not in u._label_index and "," in key:
        return list(key.split(",", 1))
    return key


def _build_feedback(doc: Document, name: str, decl: dict) -> FeedbackSystem:
    g = lambda key, sec: doc.get(sec, _field(decl, key, "feedback system"))  # noqa: E731
    return FeedbackSystem(
        g("y1", "universes"), g("y2", "universes"), g("u1", "universes"), g("u2", "universes"),
        g("psi1", "maps"), g("psi2", "maps"),
    )


BUILDERS: dict[str, Callable[[Document, str, dict], Any]] = {
    "universes": _build_universe,
    "subsets": _build_subset,
    "families": _build_family,
    "maps": _build_map,
    "feedbackSystems": _build_feedback,
}


def parse_document(text: str) -> Document:
    """Parse and fully resolve a document; the first problem raises
    :class:`DocumentError` with a line/column location."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"syntax error: {exc.msg}", f"line {exc.lineno}, column {exc.colno}") from exc
    if not isinstance(raw, dict):
        raise DocumentError("document must be a JSON object")
    unknown = set(raw) - set(SECTIONS) - {"queries"}
    if unknown:
        raise DocumentError(f"unknown sections: {', '.join(sorted(unknown))}")
    for section in SECTIONS:
        if not isinstance(raw.get(section, {}), dict):
            raise DocumentError(f"section {section!r} must be an object of named declarations")
    if not isinstance(raw.get("queries", []), list):
        raise DocumentError("'queries' must be a list")
    doc = Document(raw, text)
    doc.resolve_all()
    ids = set()
    for k, q in enumerate(doc.queries):
        if not isinstance(q, dict) or "type" not in q:
            raise DocumentError("each query needs a 'type'", f"queries[{k}]")
        if q["type"] not in QUERIES:
            raise DocumentError(f"unknown query type {q['type']!r}", f"queries[{k}]")
        qid = query_id(q, k)
        if qid in ids:
            raise DocumentError(f"duplicate query id {qid!r}", f"queries[{k}]")
        ids.add(qid)
        if q.get("expect") not in (None, *EXPECTATIONS):
            raise DocumentError("'expect' must be 'holds' or 'fails'", f"queries[{k}]")
        for key, value in q.items():
            section = _REFERENCE_FIELDS.get(key)
            if section is not None:
                doc.get(section, value)
    return doc


_REFERENCE_FIELDS = {
    "map": "maps", "map1": "maps", "map2": "maps", "embedding": "maps",
    "A": "families", "B": "families", "A1": "families", "A2": "families", "B1": "families", "B2": "families",
    "fD": "families", "iD": "families", "fY": "families", "iY": "families",
    "filter": "families", "ideal": "families", "system": "feedbackSystems",
}


def query_id(q: dict, k: int) -> str:
    return str(q.get("id", f"q{k + 1}"))


# -- queries --------------------------------------------------------------


@dataclass(frozen=True)
class Settings:
    ceiling: int = DEFAULT_CEILING
    n_max: int | None = None


def _fam(doc, q, key):
    return doc.get("families", _field(q, key, f"{q['type']} query"))


def _map(doc, q, key="map"):
    return doc.get("maps", _field(q, key, f"{q['type']} query"))


def _direction(q) -> str:
    d = q.get("direction", "backward")
    if d not in ("backward", "forward"):
        raise DocumentError(f"direction must be 'forward' or 'backward', not {d!r}")
    return d


def _pair_predicate(fn):
    def run(doc, q, st):
        return fn(_map(doc, q), _fam(doc, q, "A"), _fam(doc, q, "B"), ceiling=st.ceiling)

    return run


def _quad(doc, q):
    return _map(doc, q), _fam(doc, q, "fD"), _fam(doc, q, "iD"), _fam(doc, q, "fY"), _fam(doc, q, "iY")


def _q_global(doc, q, st):
    return is_globally_stable(*_quad(doc, q), ceiling=st.ceiling)


def _q_compatible(doc, q, st):
    return is_compatible(_fam(doc, q, "filter"), _fam(doc, q, "ideal"), ceiling=st.ceiling)


def _q_alpha(doc, q, st):
    m, fd, i_d, fy, iy = _quad(doc, q)
    onto = bool(q.get("onto", True))
    try:
        alpha = construct_alpha(m, fd, i_d, fy, iy, onto=onto, ceiling=st.ceiling)
    except NoOntoAlpha as exc:
        return exc.verdict
    for check in (verify_k_infinity(alpha, onto=onto), alpha_bound_holds(m, alpha), kappa_bound_holds(m, construct_kappa(alpha))):
        if not check:
            return check
    return passed(assignment=[[h, alpha(h)] for h in alpha.domain_family])


def _q_series(doc, q, st):
    emb = doc.get("maps", q["embedding"]) if "embedding" in q else None
    return series_check(
        _map(doc, q, "map1"), _map(doc, q, "map2"),
        _fam(doc, q, "A1"), _fam(doc, q, "B1"), _fam(doc, q, "A2"), _fam(doc, q, "B2"),
        _direction(q), embedding=emb, ceiling=st.ceiling,
    )


def _q_parallel(doc, q, st):
    return parallel_check(
        _map(doc, q, "map1"), _map(doc, q, "map2"),
        _fam(doc, q, "A1"), _fam(doc, q, "A2"), _fam(doc, q, "B1"), _fam(doc, q, "B2"),
        _direction(q), ceiling=st.ceiling,
    )


def _q_feedback(doc, q, st):
    """Holds when every input admits at least one consistent output pair."""
    fb = doc.get("feedbackSystems", _field(q, "system", "feedback-solve query"))
    sol = feedback_solution_map(fb)
    rows = {sol.domain.labels[d]: Subset(sol.codomain, r) for d, r in enumerate(sol.rows)}
    empty = [lab for lab, r in rows.items() if not r]
    if empty:
        return failed(["some inputs have no consistent output"], input=empty[0], rows=rows)
    return passed(rows=rows)


def _sg_args(doc, q, st):
    fb = doc.get("feedbackSystems", _field(q, "system", f"{q['type']} query"))
    n_max = q.get("nMax", st.n_max)
    return fb, _fam(doc, q, "A"), _fam(doc, q, "B"), n_max


def _q_small_gain(doc, q, st):
    fb, a, b, n = _sg_args(doc, q, st)
    return small_gain_check(fb, a, b, n, direction=_direction(q), ceiling=st.ceiling)


def _q_small_gain_theorem(doc, q, st):
    fb, a, b, n = _sg_args(doc, q, st)
    return small_gain_theorem_harness(fb, a, b, n, direction=_direction(q), ceiling=st.ceiling)


def _q_fixture(doc, q, st):
    name = _field(q, "name", "fixture query")
    results = run_fixtures([name])
    table = {fx.name: {"expect": fx.expect, "holds": fx.verdict.holds} for _, fx in results}
    bad = [fx for _, fx in results if not fx.ok]
    if bad:
        return failed(["fixture verdicts differ from expectations"], fixture=bad[0].name, verdicts=table)
    return passed(verdicts=table)


QUERIES: dict[str, Callable[[Document, dict, Settings], StabilityVerdict]] = {
    "forward": _pair_predicate(is_forward_stable),
    "backward": _pair_predicate(is_backward_stable),
    "weak-forward": _pair_predicate(is_weak_forward_stable),
    "weak-backward": _pair_predicate(is_weak_backward_stable),
    "global": _q_global,
    "compatible": _q_compatible,
    "construct-alpha": _q_alpha,
    "series-check": _q_series,
    "parallel-check": _q_parallel,
    "feedback-solve": _q_feedback,
    "small-gain": _q_small_gain,
    "small-gain-theorem": _q_small_gain_theorem,
    "fixture": _q_fixture,
}


def to_jsonable(x: Any) -> Any:
    """Subsets become label lists; everything else is made JSON-safe."""
    if isinstance(x, StabilityVerdict):
        return {"holds": x.holds, "witness": to_jsonable(x.witness), "notes": list(x.notes)}
    if isinstance(x, Subset):
        return x.labels()
    if isinstance(x, SetFamily):
        return {"kind": x.kind, "sets": [s.labels() for s in x.members]}
    if isinstance(x, dict):
        return {str(k if not isinstance(k, Subset) else str(k)): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return str(x)
    if x is None or isinstance(x, (bool, int, float, str)):
        return x
    return str(x)


def run_queries(doc: Document, settings: Settings = Settings(), *, timings: bool = False) -> list[dict]:
    """One record per query in declaration order.  Errors become records."""
    records = []
    for k, q in enumerate(doc.queries):
        rec: dict[str, Any] = {"id": query_id(q, k), "type": q["type"]}
        start = time.perf_counter()
        try:
            verdict = QUERIES[q["type"]](doc, q, settings)
        except VerdictError as exc:
            rec["error"] = f"{type(exc).__name__}: {exc}"
            rec["witness"] = to_jsonable(exc.verdict.witness)
            rec["notes"] = list(exc.verdict.notes)
        except (SetStabError, ValueError, KeyError) as exc:
            rec["error"] = f"{type(exc).__name__}: {exc}"
        else:
            rec["holds"] = verdict.holds
            rec["witness"] = to_jsonable(verdict.witness)
            rec["notes"] = list(verdict.notes)
        if "expect" in q:
            rec["expect"] = q["expect"]
            rec["matched"] = "holds" in rec and rec["holds"] == (q["expect"] == "holds")
        if timings:
            rec["wall_time"] = round(time.perf_counter() - start, 6)
        records.append(rec)
    return records


def report_ok(records: list[dict]) -> bool:
    return all(r.get("matched", True) for r in records)


def emit_report(records: list[dict], fmt: str = "jsonlines") -> str:
    if fmt == "jsonlines":
        return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)
    if fmt == "text":
        return "".join(_text_line(r) + "\n" for r in records)
    raise ValueError(f"unknown report format {fmt!r}")


def _text_line(r: dict) -> str:
    if "error" in r:
        status = f"ERROR {r['error']}"
    else:
        status = "holds" if r["holds"] else "fails"
        if not r["holds"] and r.get("witness"):
            status += " witness=" + json.dumps(r["witness"], ensure_ascii=False, sort_keys=True)
    line = f"{r['id']} {r['type']}: {status}"
    if "expect" in r:
        line += " [ok]" if r["matched"] else f" [MISMATCH expected {r['expect']}]"
    if "wall_time" in r:
        line += f" ({r['wall_time']:.6f}s)"
    return line


# -- round trip -----------------------------------------------------------


def dump_document(doc: Document) -> dict:
    """Every declaration in fully explicit form (labels, generator lists,
    row tables), plus the queries unchanged."""
    out: dict[str, Any] = {s: {} for s in SECTIONS}
    known = dict(doc.resolved["universes"])

    def universe_name(u: Universe, hint: str) -> str:
        for name, v in known.items():
            if v == u:
                if name not in out["universes"]:
                    out["universes"][name] = dump_universe(u)
                return name
        name = hint
        while name in known:
            name += "_"
        known[name] = u
        out["universes"][name] = dump_universe(u)
        return name

    def dump_universe(u: Universe) -> dict:
        if u.factors is not None:
            first, second = u.factors
            return {"product": [universe_name(first, "factor"), universe_name(second, "factor")]}
        return _dump_universe(u)

    # declared names are kept even when two universes are structurally equal
    for name, u in list(known.items()):
        out["universes"][name] = dump_universe(u)
    for name, s in doc.resolved["subsets"].items():
        out["subsets"][name] = {"universe": universe_name(s.universe, f"{name}_universe"), "members": s.labels()}
    for name, f in doc.resolved["families"].items():
        out["families"][name] = {
            "universe": universe_name(f.universe, f"{name}_universe"),
            "kind": f.kind,
            "sets": [s.labels() for s in f.members],
        }
    for name, m in doc.resolved["maps"].items():
        out["maps"][name] = {
            "domain": universe_name(m.domain, f"{name}_domain"),
            "codomain": universe_name(m.codomain, f"{name}_codomain"),
            "rows": [Subset(m.codomain, r).labels() for r in m.rows],
        }
    for name, fb in doc.resolved["feedbackSystems"].items():
        names = {k: universe_name(getattr(fb, k), f"{name}_{k}") for k in ("y1", "y2", "u1", "u2")}
        psi = {}
        for k in ("psi1", "psi2"):
            m = getattr(fb, k)
            mname = next((n for n, v in doc.resolved["maps"].items() if v == m), f"{name}_{k}")
            if mname not in out["maps"]:
                out["maps"][mname] = {
                    "domain": universe_name(m.domain, f"{mname}_domain"),
                    "codomain": universe_name(m.codomain, f"{mname}_codomain"),
                    "rows": [Subset(m.codomain, r).labels() for r in m.rows],
                }
            psi[k] = mname
        out["feedbackSystems"][name] = {**names, **psi}
    out["queries"] = list(doc.queries)
    return out


def _dump_universe(u: Universe) -> dict:
    d: dict[str, Any] = {"labels": list(u.labels)}
    if u.coordinates is not None:
        d["coordinates"] = [[str(c) for c in p] for p in u.coordinates]
    if u.magnitude is not None:
        d["magnitude"] = [str(v) for v in u.magnitude]
    if u.order is not None:
        d["order"] = sorted([u.labels[i], u.labels[j]] for i, j in u.order if i != j)
    if u.zero is not None:
        d["zero"] = u.labels[u.zero]
    return d


def documents_equivalent(a: Document, b: Document) -> bool:
    """Same names with the same universes' labels, family extensions and map rows."""
    for section in SECTIONS:
        if set(a.resolved[section]) - set(b.resolved[section]):
            return False
    for name, f in a.resolved["families"].items():
        g = b.resolved["families"][name]
        if f.universe.labels != g.universe.labels:
            return False
        if {s.bits for s in enumerate_family(f)} != {s.bits for s in enumerate_family(g)}:
            return False
    for name, m in a.resolved["maps"].items():
        n = b.resolved["maps"][name]
        if m.rows != n.rows or m.domain.labels != n.domain.labels or m.codomain.labels != n.codomain.labels:
            return False
    for name, s in a.resolved["subsets"].items():
        t = b.resolved["subsets"][name]
        if s.labels() != t.labels():
            return False
    return a.queries == b.queries
