import random

import pytest

from citriage.builds import ConsoleLog
from citriage.errors import InvalidPattern
from citriage.preprocess import (
    PreprocessConfig,
    diff_filter,
    keyword_window,
    preprocess,
    redact,
    scan_for_sensitive,
    strip_status_lines,
)

CONFIG = PreprocessConfig()


def log_of(*lines):
    return ConsoleLog.of(lines)


# --- reference implementation used as an independent oracle ---------------


def ref_word_distance(a: str, b: str) -> int:
    """Plain Wagner-Fischer over whitespace tokens."""
    ta, tb = a.split(), b.split()
    rows = len(ta) + 1
    cols = len(tb) + 1
    d = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        d[i][0] = i
    for j in range(cols):
        d[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if ta[i - 1] == tb[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
    return d[-1][-1]


def ref_diff_filter(failed, successful, threshold):
    kept = []
    for line in failed:
        if all(ref_word_distance(line, ok) >= threshold for ok in successful):
            kept.append(line)
    return kept


def ref_window_union(lines, keywords, radius):
    keep = set()
    for i, line in enumerate(lines):
        if any(k in line.lower() for k in keywords):
            for j in range(max(0, i - radius), min(len(lines), i + radius + 1)):
                keep.add(j)
    return [lines[i] for i in sorted(keep)]


# --- strip ----------------------------------------------------------------


def test_strip_removes_all_timestamp_lines():
    log = log_of("2026-01-02T10:00:00Z boot", "[2026-01-02 10:00:01] init")
    assert strip_status_lines(log, CONFIG).lines == ()


def test_strip_keeps_non_status_lines():
    lines = [f"payload {i}" for i in range(7)] + ["[echo] a", "[echo] b", "[echo] c"]
    out = strip_status_lines(ConsoleLog.of(lines), CONFIG)
    assert len(out.lines) == 7
    assert all(line.startswith("payload") for line in out.lines)


def test_strip_empty_log():
    assert strip_status_lines(log_of(), CONFIG).lines == ()


def test_strip_invalid_pattern():
    config = PreprocessConfig(status_keywords=("[unclosed",))
    with pytest.raises(InvalidPattern):
        strip_status_lines(log_of("x"), config)


# --- diff -----------------------------------------------------------------


def test_diff_removes_identical_line():
    out = diff_filter(log_of("make check ok"), log_of("make check ok"), CONFIG)
    assert out.lines == ()


def test_diff_removes_one_word_difference():
    failed = log_of("built revision abc123 in 42s")
    ok = log_of("built revision def456 in 42s")
    assert diff_filter(failed, ok, CONFIG).lines == ()
    assert ref_diff_filter(list(failed.lines), list(ok.lines), 2) == []


def test_diff_keeps_two_word_difference():
    failed = log_of("error: connection refused by host")
    ok = log_of("info: connection accepted by host")
    assert diff_filter(failed, ok, CONFIG).lines == failed.lines


def test_diff_with_empty_successful_log_is_identity():
    failed = log_of("a b c", "d e f")
    assert diff_filter(failed, log_of(), CONFIG).lines == failed.lines


def test_diff_agrees_with_reference_on_random_lines():
    rng = random.Random(42)
    vocab = ["alpha", "beta", "gamma", "delta", "eps", "zeta"]
    for _ in range(200):
        failed = [
            " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 6)))
            for _ in range(rng.randint(1, 8))
        ]
        ok = [
            " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 6)))
            for _ in range(rng.randint(0, 8))
        ]
        got = diff_filter(ConsoleLog.of(failed), ConsoleLog.of(ok), CONFIG)
        assert list(got.lines) == ref_diff_filter(failed, ok, 2)


# --- window ---------------------------------------------------------------


def test_window_single_keyword_at_ten():
    lines = [f"line {i}" for i in range(30)]
    lines[10] = "an error occurred"
    out = keyword_window(ConsoleLog.of(lines), CONFIG)
    assert list(out.lines) == lines[5:16]


def test_window_merges_overlaps():
    lines = [f"line {i}" for i in range(30)]
    lines[2] = "error one"
    lines[6] = "error two"
    out = keyword_window(ConsoleLog.of(lines), CONFIG)
    assert list(out.lines) == ref_window_union(lines, ["error"], 5)
    assert list(out.lines) == lines[0:12]


def test_window_no_keyword_keeps_nothing():
    assert keyword_window(log_of("all good", "still fine"), CONFIG).lines == ()


def test_window_case_insensitive():
    out = keyword_window(log_of("FATAL ERROR: boom"), CONFIG)
    assert len(out.lines) == 1


def test_window_radius_zero():
    config = PreprocessConfig(context_radius=0)
    lines = ["ok", "error here", "ok"]
    assert keyword_window(ConsoleLog.of(lines), config).lines == ("error here",)


# --- redact ---------------------------------------------------------------


def test_redact_email():
    out = redact(log_of("notify alice@example.com now"), CONFIG)
    assert out.lines == ("notify <EMAIL> now",)


def test_redact_user_id_and_host():
    out = redact(log_of("user i1234567 at build-vault.internal"), CONFIG)
    assert out.lines == ("user <ID> at <HOST>",)


def test_redact_untouched_line():
    out = redact(log_of("nothing sensitive here"), CONFIG)
    assert out.lines == ("nothing sensitive here",)


def test_redact_empty_log():
    assert redact(log_of(), CONFIG).lines == ()


def test_redact_is_idempotent():
    once = redact(log_of("mail bob@example.org from d7654321"), CONFIG)
    twice = redact(once, CONFIG)
    assert once.lines == twice.lines


def test_redact_invalid_pattern():
    config = PreprocessConfig(redaction_rules=((r"(", "BAD"),))
    with pytest.raises(InvalidPattern):
        redact(log_of("x"), config)


def test_redact_preserves_line_count():
    log = log_of("a@example.com", "plain", "b@example.com c@example.com")
    assert len(redact(log, CONFIG).lines) == 3


def test_scan_for_sensitive_flags_lines():
    lines = ["ok line", "mail: x@example.com"]
    assert scan_for_sensitive(lines, CONFIG.redaction_rules) == ["mail: x@example.com"]


# --- composition ------------------------------------------------------------


def test_preprocess_self_diff_empties_log():
    lines = ["2026-01-01T00:00:00Z start", "error: step failed", "done"]
    log = ConsoleLog.of(lines)
    out = preprocess(log, log, CONFIG)
    assert out.lines == ()
    assert out.stage_counts == {"input": 3, "strip": 2, "diff": 0, "window": 0, "redact": 0}


def test_preprocess_without_successful_build():
    lines = [f"step {i} fine" for i in range(12)]
    lines[6] = "unhandled exception in step"
    out = preprocess(ConsoleLog.of(lines), None, CONFIG)
    assert out.stage_counts["diff"] == out.stage_counts["strip"]  # pass-through
    assert len(out.lines) == 11  # indices 1..11
    assert list(out.lines) == lines[1:12]


def test_preprocess_empty_failed_log():
    out = preprocess(ConsoleLog.of([]), None, CONFIG)
    assert out.lines == ()
    assert set(out.stage_counts.values()) == {0}


def test_preprocess_stage_counts_monotone():
    rng = random.Random(7)
    for _ in range(50):
        lines = []
        for i in range(rng.randint(0, 40)):
            roll = rng.random()
            if roll < 0.2:
                lines.append(f"[echo] status {i}")
            elif roll < 0.35:
                lines.append(f"error in unit {i}")
            else:
                lines.append(f"plain output {i} {rng.randint(0, 9)}")
        out = preprocess(ConsoleLog.of(lines), None, CONFIG)
        counts = out.stage_counts
        assert counts["input"] >= counts["strip"] >= counts["diff"] >= counts["window"]
        assert counts["window"] == counts["redact"]
