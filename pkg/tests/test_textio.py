"""Text formats and CSV rendering."""

import numpy as np
import pytest

from dprsim.assignment import Assignment
from dprsim.rankings import PartialRanking
from dprsim.textio import (
    format_assignment_csv,
    format_partial,
    format_partials,
    format_ranking,
    parse_constraints,
    parse_partial,
    parse_partials,
    parse_ranking,
    render_csv,
    render_meta,
)


class TestRankingFormat:
    def test_round_trip(self):
        r = [3, 0, 2, 1]
        assert parse_ranking(format_ranking(r)).tolist() == r

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            parse_ranking("   ")


class TestPartialFormat:
    def test_plain_line(self):
        pr = parse_partial("4: 3 7 1")
        assert pr.reviewer == 4
        assert pr.groups == ((3,), (7,), (1,))

    def test_tie_groups(self):
        pr = parse_partial("0: 3 (1 4) 9")
        assert pr.groups == ((3,), (1, 4), (9,))

    def test_tight_parentheses(self):
        pr = parse_partial("2: (1 4) 5")
        assert pr.groups == ((1, 4), (5,))

    def test_round_trip_with_ties(self):
        pr = PartialRanking(7, ((2,), (0, 5), (3,)))
        assert parse_partial(format_partial(pr)) == pr

    def test_multi_line_round_trip(self):
        partials = [
            PartialRanking(0, ((1,), (2,), (0,))),
            PartialRanking(1, ((2, 0), (1,))),
        ]
        assert parse_partials(format_partials(partials)) == partials

    def test_comments_and_blanks_skipped(self):
        text = "# comment\n\n0: 1 2\n"
        assert len(parse_partials(text)) == 1

    @pytest.mark.parametrize(
        "line", ["0 1 2", "0: (1 2", "0: 1 2)", "0: ()", "0: ((1) 2)"]
    )
    def test_malformed_rejected(self, line):
        with pytest.raises(ValueError):
            parse_partial(line)


class TestConstraintsFormat:
    def test_parse_with_self_added(self):
        c = parse_constraints("0: 2 3\n2: 1\n", 4)
        assert c.forbidden[0] == frozenset({0, 2, 3})
        assert c.forbidden[1] == frozenset({1})
        assert c.forbidden[2] == frozenset({1, 2})

    def test_out_of_range_reviewer_rejected(self):
        with pytest.raises(ValueError):
            parse_constraints("9: 1\n", 4)


class TestCsvRendering:
    def test_deterministic_float_format(self):
        out = render_csv(("a", "b"), [(1, 1 / 3), (2, 0.25)])
        assert out == "a,b\n1,0.3333333333\n2,0.25\n"

    def test_bool_and_string_cells(self):
        out = render_csv(("x",), [(True,), ("mbc",)])
        assert out == "x\ntrue\nmbc\n"

    def test_numpy_scalars(self):
        out = render_csv(("x", "y"), [(np.int64(3), np.float64(0.5))])
        assert out == "x,y\n3,0.5\n"

    def test_assignment_csv(self):
        a = Assignment(((1, 2), (0, 2), (0, 1)))
        out = format_assignment_csv(a)
        assert out.splitlines()[0] == "reviewer_id,proposal_0,proposal_1"
        assert out.splitlines()[1] == "0,1,2"

    def test_meta_sorted_and_versioned(self):
        out = render_meta("sweep", {"seed": 7, "alpha": 0.5})
        lines = out.splitlines()
        assert lines[0].startswith("dprsim-")
        assert lines[1] == "command=sweep"
        assert lines[2] == "alpha=0.5"
        assert lines[3] == "seed=7"
