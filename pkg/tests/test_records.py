import json

import numpy as np
import pytest

from cpkit.ingest import Document
from cpkit.records import (
    Action,
    Command,
    CpkRecord,
    Goal,
    RecordParseError,
    Span,
    SpanSet,
    Workflow,
    corpus_stats,
    count_words,
    deserialize,
    record_to_dict,
    serialize,
    validate_record,
)
from synthgen import make_corpus


def make_doc(text="open the file. then paint the sky. done now.") -> Document:
    return Document(
        id="doc1", url="https://x.example/t", domain="x.example",
        raw_html=b"", clean_text=text,
    )


def simple_record(doc, usage=("open", "the", "file"), n_spans=1):
    span = SpanSet((Span(0, 0, 14),))
    return CpkRecord(
        tutorial_id=doc.id,
        goal=Goal(summary=("paint", "the", "sky"), source=SpanSet((Span(1, 15, 34),))),
        workflow=Workflow(
            (Action(command=Command.parse("File > Open"), usage=tuple(usage), source=span),)
        ),
    )


class TestCommand:
    def test_parse_menu_path(self):
        cmd = Command.parse("File>Open")
        assert cmd.path == ("File", "Open")
        assert cmd.display == "File > Open"

    def test_parse_tool_name(self):
        cmd = Command.parse("Brush   Tool")
        assert cmd.path == ("Brush Tool",)
        assert cmd.display == "Brush Tool"

    def test_reject_empty_segments(self):
        with pytest.raises(ValueError):
            Command.parse("File>>Open")
        with pytest.raises(ValueError):
            Command.parse("  ")

    def test_display_deterministic(self):
        assert Command.parse(" File >  Open ").display == Command.parse("File>Open").display


class TestValidateRecord:
    def test_well_formed_record_passes(self):
        doc = make_doc()
        assert validate_record(simple_record(doc), doc) == []

    def test_eleven_word_usage_flagged(self):
        doc = make_doc()
        record = simple_record(doc, usage=tuple(f"w{i}" for i in range(11)))
        violations = validate_record(record, doc)
        assert any(v.rule == "usage > 10 words" for v in violations)

    def test_ten_word_usage_ok(self):
        doc = make_doc()
        record = simple_record(doc, usage=tuple(f"w{i}" for i in range(10)))
        assert validate_record(record, doc) == []

    def test_degenerate_span_flagged(self):
        doc = make_doc()
        record = simple_record(doc)
        bad = CpkRecord(
            tutorial_id=doc.id,
            goal=record.goal,
            workflow=Workflow(
                (Action(record.workflow.actions[0].command, ("x",), SpanSet((Span(0, 5, 5),))),)
            ),
        )
        assert any(v.rule == "degenerate span" for v in validate_record(bad, doc))

    def test_dangling_reference(self):
        doc = make_doc()
        record = simple_record(doc)
        other = Document(id="other", url="", domain="", raw_html=b"", clean_text="x.")
        violations = validate_record(record, other)
        assert violations and "dangling" in violations[0].rule

    def test_empty_workflow_only_in_draft(self):
        doc = make_doc()
        record = simple_record(doc)
        empty = CpkRecord(tutorial_id=doc.id, goal=record.goal, workflow=Workflow(()))
        assert any(v.rule == "empty workflow" for v in validate_record(empty, doc))
        draft = CpkRecord(
            tutorial_id=doc.id, goal=record.goal, workflow=Workflow(()), draft=True
        )
        assert validate_record(draft, doc) == []

    def test_generator_records_always_valid(self):
        for tutorial in make_corpus(15, seed=77):
            assert validate_record(tutorial.record, tutorial.doc) == []


class TestSerialization:
    def test_round_trip_identity(self):
        doc = make_doc()
        record = simple_record(doc)
        assert deserialize(serialize(record)) == record

    def test_round_trip_generator_records(self):
        for tutorial in make_corpus(10, seed=5):
            assert deserialize(serialize(tutorial.record)) == tutorial.record

    def test_round_trip_non_ascii(self):
        rng = np.random.default_rng(11)
        doc = make_doc()
        for _ in range(25):
            usage = tuple(
                "".join(chr(int(c)) for c in rng.integers(0x20, 0x2FA0, size=4)).strip() or "x"
                for _ in range(3)
            )
            record = simple_record(doc, usage=usage)
            assert deserialize(serialize(record)) == record

    def test_truncated_payload_errors_with_offset(self):
        payload = serialize(simple_record(make_doc()))[:25]
        with pytest.raises(RecordParseError) as err:
            deserialize(payload)
        assert "byte offset" in str(err.value)

    def test_garbage_payload(self):
        with pytest.raises(RecordParseError):
            deserialize(b"{\"tutorial_id\": 42}")


class TestCorpusStats:
    def test_single_record_unigram_bigram(self):
        doc = make_doc()
        span = SpanSet((Span(0, 0, 14),))
        a = Action(Command.parse("A"), ("x",), span)
        b = Action(Command.parse("B"), ("x",), span)
        record = CpkRecord(
            tutorial_id=doc.id,
            goal=Goal(("g",), SpanSet((Span(0, 0, 14),))),
            workflow=Workflow((a, b, a)),
        )
        stats = corpus_stats([record])
        assert stats.command_unigrams == {"A": 2, "B": 1}
        assert stats.command_bigrams == {("A", "B"): 1, ("B", "A"): 1}
        assert stats.unique_commands == 2
        assert stats.action_count == 3

    def test_empty_input(self):
        stats = corpus_stats([])
        assert stats.record_count == 0
        assert stats.action_count == 0
        assert stats.unique_commands == 0

    def test_synthetic_tally_matches_generator(self):
        tutorials = make_corpus(30, seed=13)
        stats = corpus_stats([t.record for t in tutorials])
        expected_unigrams = {}
        expected_actions = 0
        for t in tutorials:
            for cmd in t.command_sequence:
                expected_unigrams[cmd] = expected_unigrams.get(cmd, 0) + 1
                expected_actions += 1
        assert dict(stats.command_unigrams) == expected_unigrams
        assert stats.action_count == expected_actions

    def test_histogram_sums_to_record_count(self):
        tutorials = make_corpus(25, seed=21)
        stats = corpus_stats([t.record for t in tutorials])
        assert sum(stats.actions_per_tutorial.values()) == stats.record_count == 25

    def test_bigram_total_formula_distinct_commands(self):
        # With all commands distinct inside each workflow, bigram total is
        # sum of (len - 1).
        doc = make_doc()
        span = SpanSet((Span(0, 0, 14),))
        records = []
        for n in (1, 2, 5):
            actions = tuple(
                Action(Command.parse(f"C{n}_{i}"), ("u",), span) for i in range(n)
            )
            records.append(
                CpkRecord(
                    tutorial_id=doc.id,
                    goal=Goal(("g",), SpanSet((Span(0, 0, 14),))),
                    workflow=Workflow(actions),
                )
            )
        stats = corpus_stats(records)
        assert sum(stats.command_bigrams.values()) == (1 - 1) + (2 - 1) + (5 - 1)

    def test_json_dict_shape(self):
        stats = corpus_stats([t.record for t in make_corpus(5, seed=1)])
        body = json.loads(json.dumps(stats.to_json_dict()))
        assert body["records"] == 5
        assert isinstance(body["command_unigrams"], list)


def test_count_words_hyphenated_is_one():
    assert count_words("re-color the old-school art") == 4
    assert count_words(("a", "b-c")) == 2
