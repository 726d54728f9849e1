import json
import subprocess
import sys
from pathlib import Path

import pytest

from setstab import SetFamily
from setstab.cli import fixture_records, main
from setstab.document import (
    DocumentError,
    dump_document,
    documents_equivalent,
    emit_report,
    Settings,
    parse_document,
    run_queries,
)

DATA = Path(__file__).parent / "data"

MINIMAL = {
    "universes": {"X": {"labels": ["a", "b"]}},
    "families": {"top": {"universe": "X", "kind": "down", "sets": [["a", "b"]]}},
    "maps": {"swap": {"domain": "X", "codomain": "X", "rows": [["b"], ["a"]]}},
    "queries": [{"id": "f", "type": "forward", "map": "swap", "A": "top", "B": "top", "expect": "holds"}],
}


def halving_document(n_max=3):
    vals = range(4)
    labels = [str(v) for v in vals]
    rows = {f"{a},{d}": [str(max(a // 2, d))] for a in vals for d in vals}
    box = [[p, q] for p in ("0", "1") for q in ("0", "1")]
    return {
        "universes": {"Y": {"labels": labels}, "U": {"labels": labels},
                      "YU": {"product": ["Y", "U"]}, "UU": {"product": ["U", "U"]}, "YY": {"product": ["Y", "Y"]}},
        "maps": {"half": {"domain": "YU", "codomain": "Y", "rows": rows}},
        "feedbackSystems": {"loop": {"y1": "Y", "y2": "Y", "u1": "U", "u2": "U", "psi1": "half", "psi2": "half"}},
        "families": {
            "A": {"universe": "UU", "kind": "up", "sets": [[["0", "0"]]]},
            "B": {"universe": "YY", "kind": "up", "sets": [box]},
        },
        "queries": [
            {"id": "solve", "type": "feedback-solve", "system": "loop", "expect": "holds"},
            {"id": "sg", "type": "small-gain", "system": "loop", "A": "A", "B": "B", "nMax": n_max, "expect": "holds"},
            {"id": "conclusion", "type": "small-gain-theorem", "system": "loop", "A": "A", "B": "B", "expect": "holds"},
        ],
    }


def parse(obj):
    return parse_document(json.dumps(obj, indent=2))


class TestParse:
    def test_minimal(self):
        doc = parse(MINIMAL)
        (rec,) = run_queries(doc)
        assert rec["holds"] and rec["matched"]

    def test_unresolved_reference(self):
        bad = json.loads(json.dumps(MINIMAL))
        bad["queries"][0]["B"] = "nowhere"
        with pytest.raises(DocumentError, match="unresolved reference 'nowhere'"):
            parse(bad)

    def test_declared_filter_failing_intersection(self):
        bad = json.loads(json.dumps(MINIMAL))
        bad["families"]["split"] = {"universe": "X", "sets": [["a"], ["b"], ["a", "b"]], "assert": "filter"}
        with pytest.raises(DocumentError, match="F2") as err:
            parse(bad)
        assert "line" in str(err.value) and "witness" in str(err.value)

    def test_syntax_error_has_location(self):
        with pytest.raises(DocumentError, match="line 1, column"):
            parse_document("{oops")

    def test_circular_reference(self):
        bad = json.loads(json.dumps(MINIMAL))
        bad["maps"]["loop1"] = {"compose": ["loop2", "swap"]}
        bad["maps"]["loop2"] = {"compose": ["loop1", "swap"]}
        with pytest.raises(DocumentError, match="circular"):
            parse(bad)

    def test_universe_mismatch(self):
        bad = json.loads(json.dumps(MINIMAL))
        bad["universes"]["Z"] = {"labels": ["z"]}
        bad["families"]["other"] = {"universe": "Z", "kind": "down", "sets": [["z"]]}
        bad["queries"][0]["B"] = "other"
        (rec,) = run_queries(parse(bad))
        assert "UniverseMismatch" in rec["error"] and rec["matched"] is False

    def test_rejects_bad_query_fields(self):
        for change in ({"type": "sideways"}, {"expect": "maybe"}):
            bad = json.loads(json.dumps(MINIMAL))
            bad["queries"][0].update(change)
            with pytest.raises(DocumentError):
                parse(bad)
        bad = json.loads(json.dumps(MINIMAL))
        bad["queries"].append(dict(bad["queries"][0]))
        with pytest.raises(DocumentError, match="duplicate"):
            parse(bad)

    def test_declaration_order_irrelevant(self):
        flipped = {k: dict(reversed(list(v.items()))) if isinstance(v, dict) else v for k, v in reversed(list(MINIMAL.items()))}
        assert emit_report(run_queries(parse(flipped))) == emit_report(run_queries(parse(MINIMAL)))


class TestQueries:
    def test_sample_document(self):
        records = run_queries(parse_document((DATA / "parallel.json").read_text()))
        assert [r["id"] for r in records][:4] == ["id-back", "clip-fwd", "twice-back", "par"]
        assert all(r.get("matched", True) for r in records)

    def test_feedback_queries(self):
        records = run_queries(parse(halving_document()))
        assert [r["matched"] for r in records] == [True, True, True]
        assert records[0]["witness"]["rows"]["(0,0)"] == ["(0,0)"]

    def test_enumeration_refusal_is_a_query_error(self):
        doc = {
            "universes": {"X": {"size": 12}},
            "families": {
                "up": {"universe": "X", "kind": "up", "sets": [[]]},
                "ex": {"universe": "X", "kind": "explicit", "sets": [[]]},
            },
            "maps": {"id": {"domain": "X", "codomain": "X", "rows": [[str(i)] for i in range(12)]}},
            "queries": [
                {"type": "backward", "map": "id", "A": "up", "B": "up"},
                {"type": "compatible", "filter": "up", "ideal": "ex"},
            ],
        }
        first, second = run_queries(parse(doc), Settings(ceiling=16))
        assert first["holds"]  # the generator reduction enumerates nothing
        assert "EnumerationRefused" in second["error"]

    def test_fixture_query(self):
        doc = {"queries": [{"type": "fixture", "name": "example:parallel-cex", "expect": "holds"}]}
        (rec,) = run_queries(parse(doc))
        assert rec["matched"] and len(rec["witness"]["verdicts"]) == 3

    def test_empty_query_list(self):
        assert run_queries(parse({"queries": []})) == []


class TestRoundTrip:
    @pytest.mark.parametrize("source", ["minimal", "sample", "halving"])
    def test_dump_parse_equivalent(self, source):
        text = {
            "minimal": json.dumps(MINIMAL),
            "sample": (DATA / "parallel.json").read_text(),
            "halving": json.dumps(halving_document()),
        }[source]
        doc = parse_document(text)
        again = parse_document(json.dumps(dump_document(doc)))
        assert documents_equivalent(doc, again)
        assert emit_report(run_queries(doc)) == emit_report(run_queries(again))

    def test_equivalence_detects_changes(self):
        doc = parse(MINIMAL)
        changed = json.loads(json.dumps(MINIMAL))
        changed["maps"]["swap"]["rows"] = [["a"], ["b"]]
        assert not documents_equivalent(doc, parse(changed))

    def test_product_family_dump_is_explicit(self):
        doc = parse_document((DATA / "parallel.json").read_text())
        dumped = dump_document(doc)
        assert dumped["families"]["rects"]["kind"] in {"explicit", "up"}
        assert isinstance(doc.resolved["families"]["rects"], SetFamily)


def run_cli(*args, stdin=None):
    return subprocess.run(
        [sys.executable, "-m", "setstab", *args], input=stdin, capture_output=True, text=True, timeout=60
    )


class TestCommandLine:
    def test_check_exit_codes(self, tmp_path, capsys):
        good = tmp_path / "good.json"
        good.write_text(json.dumps(MINIMAL))
        assert main(["check", str(good)]) == 0
        bad = json.loads(json.dumps(MINIMAL))
        bad["queries"][0]["expect"] = "fails"
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        assert main(["check", str(path)]) == 1
        assert "MISMATCH" in capsys.readouterr().out
        broken = tmp_path / "broken.json"
        broken.write_text("[")
        assert main(["check", str(broken)]) == 2
        assert main(["check", str(tmp_path / "missing.json")]) == 2
        assert main(["check", str(good), "--nmax", "0"]) == 2

    def test_text_format_one_line_per_query(self, tmp_path, capsys):
        path = tmp_path / "doc.json"
        path.write_text((DATA / "parallel.json").read_text())
        assert main(["check", str(path)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == len(json.loads(path.read_text())["queries"])

    def test_jsonlines_deterministic(self):
        path = str(DATA / "parallel.json")
        first = run_cli("check", path, "--format", "jsonlines")
        second = run_cli("check", path, "--format", "jsonlines")
        assert first.returncode == 0 and first.stdout == second.stdout
        rec = json.loads(first.stdout.splitlines()[0])
        assert {"id", "type", "holds", "witness", "notes"} <= set(rec)
        assert "wall_time" not in rec

    def test_timings_flag(self, tmp_path, capsys):
        path = tmp_path / "doc.json"
        path.write_text(json.dumps(MINIMAL))
        main(["check", str(path), "--format", "jsonlines", "--timings"])
        rec = json.loads(capsys.readouterr().out)
        assert rec["wall_time"] >= 0

    def test_witness_uses_declared_labels(self, tmp_path, capsys):
        doc = json.loads(json.dumps(MINIMAL))
        doc["families"]["low"] = {"universe": "X", "kind": "down", "sets": [["a"]]}
        doc["queries"] = [{"type": "forward", "map": "swap", "A": "low", "B": "low"}]
        path = tmp_path / "doc.json"
        path.write_text(json.dumps(doc))
        main(["check", str(path), "--format", "jsonlines"])
        rec = json.loads(capsys.readouterr().out)
        assert rec["holds"] is False and rec["witness"]["image"] == ["b"]

    def test_stdin(self):
        out = run_cli("check", "-", stdin=json.dumps(MINIMAL))
        assert out.returncode == 0 and "holds [ok]" in out.stdout

    def test_nmax_override(self, tmp_path, capsys):
        doc = halving_document()
        del doc["queries"][1]["nMax"]
        path = tmp_path / "doc.json"
        path.write_text(json.dumps(doc))
        assert main(["check", str(path), "--nmax", "3"]) == 0

    def test_fixtures(self):
        out = run_cli("--fixtures")
        assert out.returncode == 0
        lines = out.stdout.splitlines()
        assert lines and all(line.endswith("[ok]") for line in lines)
        records = fixture_records()
        cex = [r for r in records if r["suite"] == "example:parallel-cex"]
        assert len(cex) == 3 and cex[-1]["holds"] is False and cex[-1]["witness"]["preimage"]

    def test_no_command(self, capsys):
        assert main([]) == 2
