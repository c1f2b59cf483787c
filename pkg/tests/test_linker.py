"""Linker grammar: parsing, rendering, round trips."""

import pytest
from hypothesis import given, strategies as st

from threadkb.linker import (
    OTHERWISE,
    TOKEN_CONTINUE,
    TOKEN_CROSS,
    TOKEN_MITIGATE,
    LinkerBranch,
    LinkerParseError,
    parse_linker_block,
    render_branch_sentence,
    render_linker_block,
    render_linker_text,
)

FIXTURE_LINKER = (
    "If the chart shows the task is executing and the number is large,"
    " then there is no problem with the pull task execution and report"
    " this case.[MITIGATE] If the chart sometimes drops to zero one hour"
    " ago and the number is low in general, it means the customer traffic"
    " in the cluster is low. In this case, observe for a longer period of"
    " time.[MITIGATE] If the chart constantly hits zero, then there might"
    " be a connectivity issue, then check if Other Clusters In the Region"
    " are Impacted by the connectivity issue.[CONTINUE] Otherwise,"
    " continue to observe since Service A is pulling Service B just"
    " fine.[MITIGATE]"
)


def test_parse_single_sentence():
    branches = parse_linker_block("If the load is high, then optimize the cache.[CONTINUE]")
    assert branches == [
        LinkerBranch("the load is high", "optimize the cache", TOKEN_CONTINUE)
    ]


def test_parse_bullet_block():
    text = (
        "- If the load is high, then optimize the cache.[CONTINUE]\n"
        "- If the disk is full, then clean up old logs.[CROSS]\n"
        "- Otherwise, report the incident as resolved.[MITIGATE]\n"
    )
    branches = parse_linker_block(text)
    assert [b.token for b in branches] == [TOKEN_CONTINUE, TOKEN_CROSS, TOKEN_MITIGATE]
    assert branches[2].condition == OTHERWISE
    assert branches[2].is_catch_all
    assert branches[2].is_terminal


def test_parse_concatenated_fixture_string():
    branches = parse_linker_block(FIXTURE_LINKER)
    assert len(branches) == 4
    assert [b.token for b in branches] == [
        TOKEN_MITIGATE,
        TOKEN_MITIGATE,
        TOKEN_CONTINUE,
        TOKEN_MITIGATE,
    ]
    assert branches[0].condition == (
        "the chart shows the task is executing and the number is large"
    )
    # Branch 2 has no "then"; the first-comma fallback applies.
    assert branches[1].condition == (
        "the chart sometimes drops to zero one hour ago and the number"
        " is low in general"
    )
    assert "observe for a longer period of time" in branches[1].next_intent
    # Branch 3 contains a second "then" inside the intent.
    assert "Other Clusters In the Region are Impacted" in branches[2].next_intent
    assert branches[3].is_catch_all


def test_numbered_bullets_accepted():
    text = "1. If a, then b.[CONTINUE]\n2) If c, then d.[MITIGATE]"
    branches = parse_linker_block(text)
    assert [(b.condition, b.next_intent) for b in branches] == [("a", "b"), ("c", "d")]


def test_empty_block_gives_no_branches():
    assert parse_linker_block("") == []
    assert parse_linker_block("  \n \n") == []


def test_missing_token_reports_line_number():
    text = "- If a, then b.[CONTINUE]\n- If c, then d."
    with pytest.raises(LinkerParseError, match="line 2: missing linker token"):
        parse_linker_block(text)


def test_malformed_line_reports_line_number():
    with pytest.raises(LinkerParseError, match="line 1: malformed"):
        parse_linker_block("just some prose without structure.[CONTINUE]")


def test_multiple_problems_reported_together():
    text = "If a, then b.\nnot a branch at all"
    with pytest.raises(LinkerParseError) as err:
        parse_linker_block(text)
    assert "line 1" in str(err.value)
    assert "line 2" in str(err.value)


def test_unknown_token_is_parsed_not_rejected():
    # Validation owns token vocabulary; the parser only needs a tag.
    branches = parse_linker_block("If a, then b.[FOO]")
    assert branches[0].token == "FOO"


def test_render_sentence_forms():
    plain = LinkerBranch("the load is high", "optimize the cache", TOKEN_CONTINUE)
    catch = LinkerBranch(OTHERWISE, "report the incident", TOKEN_MITIGATE)
    assert render_branch_sentence(plain) == (
        "If the load is high, then optimize the cache.[CONTINUE]"
    )
    assert render_branch_sentence(catch) == "Otherwise, report the incident.[MITIGATE]"


def test_render_block_bullets():
    branches = [LinkerBranch("a", "b", TOKEN_CONTINUE)]
    assert render_linker_block(branches) == "- If a, then b.[CONTINUE]"
    assert render_linker_text([]) == ""


_WORD = st.text(
    alphabet=st.sampled_from("abcdefghijklmnopqrstuvwxyz"), min_size=1, max_size=8
)
# "then" inside a condition would shift the split point; real headers and
# conditions are free-form but the canonical renderer is what we feed back.
_PHRASE = st.lists(
    _WORD.filter(lambda w: w not in ("then", "otherwise", "if")),
    min_size=1,
    max_size=6,
).map(" ".join)
_TOKEN = st.sampled_from([TOKEN_CONTINUE, TOKEN_CROSS, TOKEN_MITIGATE])


@st.composite
def branch_strategy(draw):
    if draw(st.booleans()):
        condition = OTHERWISE
    else:
        condition = draw(_PHRASE)
    return LinkerBranch(condition, draw(_PHRASE), draw(_TOKEN))


@given(st.lists(branch_strategy(), max_size=6))
def test_parse_render_round_trip_text(branches):
    assert parse_linker_block(render_linker_text(branches)) == branches


@given(st.lists(branch_strategy(), max_size=6))
def test_parse_render_round_trip_block(branches):
    assert parse_linker_block(render_linker_block(branches)) == branches
