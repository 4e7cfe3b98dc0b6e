import json
import math

import pytest

import tracecurate as tc


def test_segment_splits_on_markers():
    text = "Try x = 2. Alternatively, try x = 3.\nAnother approach: graph it."
    subs = tc.segment(text)
    assert [s["index"] for s in subs] == [0, 1, 2]
    assert subs[1]["marker"] == "Alternatively"
    assert "".join(s["text"] for s in subs) == text
    # lowercase marker mid-sentence is not a boundary by default
    assert len(tc.segment("then alternatively, no")) == 1
    assert len(tc.segment("Hmm. Wait there.", markers=["Wait"])) == 2


def test_extract_thinking():
    t = tc.extract_thinking("<think>a. b.</think>\nSo \\boxed{3}.")
    assert t["text"] == "a. b."
    assert t["had_delimiters"]
    assert "\\boxed{3}" in t["final_answer"]


def test_quality_score_weightings():
    assert tc.quality_score([1, 3], [1.0, 0.5]) == pytest.approx(0.625)
    assert tc.quality_score([1, 3], [1.0, 0.5], "equal") == pytest.approx(0.75)


def test_sampler_helpers():
    assert tc.alpha(0) == pytest.approx(0.6)
    assert tc.alpha(40) == pytest.approx(1.0)
    with pytest.raises(tc.DataError):
        tc.alpha(41)
    assert tc.kl_divergence({1: 2, 2: 2}, {1: 5, 2: 5}) == pytest.approx(0.0, abs=1e-12)
    p, q = {1: 3, 2: 1}, {1: 1, 2: 3}
    expected = 0.75 * math.log(3) + 0.25 * math.log(1 / 3)
    assert tc.kl_divergence(p, q) == pytest.approx(expected, rel=1e-6)


def test_select_returns_d_ids():
    items = [(f"r{i}", (i % 7) / 7, 1 + i % 4) for i in range(40)]
    run = tc.select(items, 10)
    assert len(run["sampled_ids"]) == 10
    assert len(set(run["sampled_ids"])) == 10
    assert 0 <= run["chosen_j"] <= 40


def test_report_percent_change():
    assert tc.percent_change(8586, 7247) == pytest.approx(-15.595, abs=1e-3)
    assert tc.percent_change(0, 5) is None


def test_boxed_answer():
    assert tc.has_boxed_answer("so \\boxed{x^{2}}")
    assert tc.extract_boxed("so \\boxed{x^{2}} done") == "x^{2}"
    assert not tc.has_boxed_answer("no box")


def test_ngram_index():
    ix = tc.NgramIndex(3)
    ix.add("b1", "the quick brown fox jumps")
    assert ix.matches("A Quick, brown FOX!") == ["b1"]
    assert ix.matches("quick fox brown") == []
    assert ix.n == 3


def test_count_tokens():
    assert tc.count_tokens("") == 0
    assert tc.count_tokens("x=1, so x+1=2.") == 11


def test_exception_hierarchy():
    for cls in (tc.ConfigError, tc.DataError, tc.DependencyError, tc.BackendError):
        assert issubclass(cls, tc.Error)


def _record(i):
    n = 1 + i % 3
    parts = ["Start here."] + ["Alternatively, another idea."] * (n - 1)
    return {
        "id": f"p{i}",
        "question": f"q{i}",
        "answer": "<think>" + " ".join(parts) + "</think> \\boxed{1}",
        "ground_truth": "1",
        "annotations": {"script": {
            "criteria": [[True, True, i % 2 == 0, True, True]] * n,
            "independent": {str(k): False for k in range(n - 1)},
        }},
    }


def test_stages_and_pipeline(tmp_path):
    src = tmp_path / "in.jsonl"
    src.write_text("".join(json.dumps(_record(i)) + "\n" for i in range(12)))

    with pytest.raises(tc.DependencyError):
        tc.run_stage("judge", src, tmp_path / "j.jsonl")
    with pytest.raises(tc.ConfigError):
        tc.run_stage("segment", src, tmp_path / "s.jsonl", {"bogus": 1})

    s = tc.run_stage("segment", src, tmp_path / "s.jsonl")
    assert s["records_out"] == 12

    summaries = tc.run_pipeline(src, tmp_path / "out", {"sample_size": 4})
    assert summaries[-1]["stage"] == "report"
    lines = (tmp_path / "out" / "sampled.jsonl").read_text().splitlines()
    assert len(lines) == 4
