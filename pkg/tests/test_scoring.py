import statistics

import pytest

from citriage.builds import BuildRef
from citriage.engine import TriageReport, TriageRequest
from citriage.errors import EmptyInput
from citriage.harness.scoring import (
    Color,
    GroundTruth,
    Rounds,
    SCORE_BY_COLOR,
    load_truths,
    save_truths,
    score_solution,
)
from citriage.harness.stats import compute_stats


def truth(required=("restart the packer",), benign=("check the dashboard",),
          harmful=("delete the workspace",)):
    return GroundTruth(
        case_id="case-x",
        entry=BuildRef("main", 1),
        expected_most_downstream=BuildRef("job", 2),
        cause_id="cause-01",
        required_markers=tuple(required),
        benign_extra_markers=tuple(benign),
        harmful_markers=tuple(harmful),
        rounds=Rounds.TWO_ROUND,
    )


def report_with(solutions):
    return TriageReport(
        request=TriageRequest(entry=BuildRef("main", 1)),
        chain=None,
        solutions=solutions,
        parse_ok=True,
    )


def test_missing_required_marker_is_red():
    verdict = score_solution(report_with("try rebooting something"), truth())
    assert verdict.color is Color.RED
    assert verdict.score == 0.0
    assert not verdict.tree_path.contains_correct


def test_required_only_is_green():
    verdict = score_solution(report_with("Please restart the packer now."), truth())
    assert verdict.color is Color.GREEN
    assert verdict.score == 1.0


def test_required_plus_benign_is_yellow():
    verdict = score_solution(
        report_with("Restart the packer. Also check the dashboard."), truth()
    )
    assert verdict.color is Color.YELLOW
    assert verdict.score == 0.5


def test_required_plus_harmful_is_red():
    verdict = score_solution(
        report_with("Restart the packer and delete the workspace."), truth()
    )
    assert verdict.color is Color.RED
    assert verdict.tree_path.harmful


def test_marker_matching_is_case_insensitive():
    verdict = score_solution(report_with("RESTART THE PACKER"), truth())
    assert verdict.color is Color.GREEN


def test_all_required_markers_must_appear():
    t = truth(required=("restart the packer", "rotate the key"))
    assert score_solution(report_with("restart the packer"), t).color is Color.RED
    assert (
        score_solution(report_with("restart the packer; rotate the key"), t).color
        is Color.GREEN
    )


def test_decision_tree_truth_table():
    # (contains_correct, has_extra, harmful) -> color, over the 4 reachable combos
    cases = {
        (False, False, False): Color.RED,
        (True, False, False): Color.GREEN,
        (True, True, False): Color.YELLOW,
        (True, True, True): Color.RED,
    }
    for (contains, extra, harmful), expected in cases.items():
        text = ""
        if contains:
            text += "restart the packer. "
        if harmful:
            text += "delete the workspace. "
        elif extra:
            text += "check the dashboard. "
        verdict = score_solution(report_with(text), truth())
        assert verdict.color is expected, (contains, extra, harmful)
        assert verdict.tree_path == verdict.tree_path.__class__(contains, extra, harmful)


def test_color_score_bijection():
    assert SCORE_BY_COLOR == {Color.GREEN: 1.0, Color.YELLOW: 0.5, Color.RED: 0.0}


def test_ground_truth_requires_markers():
    with pytest.raises(ValueError):
        truth(required=())


def test_truths_file_round_trip(tmp_path):
    truths = [truth()]
    path = tmp_path / "truths.json"
    save_truths(truths, path)
    assert load_truths(path) == truths


# --- statistics ---------------------------------------------------------------


def reference_stats(values):
    xs = sorted(values)
    mean = statistics.fmean(xs)
    median = statistics.median(xs)
    if len(xs) == 1:
        q1 = q3 = xs[0]
    else:
        q1, _, q3 = statistics.quantiles(xs, n=4, method="inclusive")
    return mean, median, q3 - q1, statistics.pstdev(xs)


def test_stats_constant_sequence():
    s = compute_stats([1.0, 1.0, 1.0])
    assert (s.mean, s.median, s.iqr, s.sd) == (1.0, 1.0, 0.0, 0.0)


def test_stats_singleton():
    s = compute_stats([0.7])
    assert (s.mean, s.median, s.iqr, s.sd) == (0.7, 0.7, 0.0, 0.0)


def test_stats_small_case_against_reference():
    values = [0.0, 0.5, 1.0, 1.0]
    s = compute_stats(values)
    mean, median, iqr, sd = reference_stats(values)
    assert abs(s.mean - mean) < 1e-9
    assert abs(s.median - median) < 1e-9
    assert abs(s.iqr - iqr) < 1e-9
    assert abs(s.sd - sd) < 1e-9


def test_stats_empty_input():
    with pytest.raises(EmptyInput):
        compute_stats([])


def test_stats_random_sequences_against_reference():
    import random

    rng = random.Random(123)
    for _ in range(100):
        values = [rng.random() for _ in range(rng.randint(1, 40))]
        s = compute_stats(values)
        mean, median, iqr, sd = reference_stats(values)
        assert abs(s.mean - mean) < 1e-9
        assert abs(s.median - median) < 1e-9
        assert abs(s.iqr - iqr) < 1e-9
        assert abs(s.sd - sd) < 1e-9
