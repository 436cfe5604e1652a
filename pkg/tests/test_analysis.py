import json

import pytest

from uswsim.analysis import (
    CSV_HEADER,
    cost_curve,
    effectiveness,
    emit_snapshot_svg,
    emit_summary_json,
    emit_timeseries_csv,
    fit_growth_exponent,
    ring_capacity,
    snapshot_state,
    summary_dict,
    tree_ring_layout,
)
from uswsim.engine import run
from uswsim.model import PolicyKind, SimConfig
from uswsim.preservation import Family


def family_with(copies, r_min=3, r_max=5):
    fam = Family(1, 999, r_min, r_max, 0)
    for i in range(copies):
        fam.copies[i + 1] = i + 1
    return fam


class TestEffectiveness:
    def test_all_at_max_is_one(self):
        fams = {i: family_with(5) for i in range(1, 4)}
        assert effectiveness(fams) == pytest.approx(1.0)

    def test_all_none_is_zero(self):
        fams = {i: family_with(0) for i in range(1, 4)}
        assert effectiveness(fams) == pytest.approx(0.0)

    def test_mixed_partial_and_max(self):
        fams = {1: family_with(2), 2: family_with(5)}
        assert effectiveness(fams) == pytest.approx(2 / 3)

    def test_no_families_rejected(self):
        with pytest.raises(ValueError):
            effectiveness({})


class TestTreeRingLayout:
    def test_single_do_at_center(self):
        layout = tree_ring_layout([1])
        assert layout.positions == {1: (0, 0)}

    def test_five_dos_fill_first_ring(self):
        layout = tree_ring_layout([1, 2, 3, 4, 5])
        assert layout.positions[1] == (0, 0)
        assert [layout.positions[d] for d in (2, 3, 4, 5)] == \
            [(1, 0), (1, 1), (1, 2), (1, 3)]

    def test_tenth_do_spills_to_ring_two(self):
        layout = tree_ring_layout(list(range(1, 11)))
        rings = [layout.positions[d][0] for d in range(1, 11)]
        assert rings == [0] + [1] * 8 + [2]

    def test_ring_capacities(self):
        assert [ring_capacity(r) for r in range(4)] == [1, 8, 16, 24]

    def test_rings_never_decrease_with_age(self):
        layout = tree_ring_layout(list(range(1, 600)))
        rings = [layout.positions[d][0] for d in range(1, 600)]
        assert rings == sorted(rings)

    def test_bijection_up_to_5000(self):
        layout = tree_ring_layout(list(range(1, 5001)))
        assert len(layout.positions) == 5000
        slots = set(layout.positions.values())
        assert len(slots) == 5000
        for ring, slot in slots:
            assert 0 <= slot < ring_capacity(ring)


class TestFitGrowthExponent:
    def test_recovers_exponents_exactly(self):
        sizes = [10, 50, 100, 250, 500]
        for k in (0, 1, 2, 3):
            sweep = [(n, 7 * n ** k) for n in sizes]
            fit = fit_growth_exponent(sweep)
            assert abs(fit.slope - k) < 1e-6

    def test_constant_totals_slope_zero(self):
        fit = fit_growth_exponent([(10, 42), (100, 42), (1000, 42)])
        assert abs(fit.slope) < 1e-9
        assert fit.marginal_slope is None  # no positive differences

    def test_quadratic_marginal_slope_near_one(self):
        sweep = [(n, 3 * n * n) for n in (10, 50, 100, 250, 500)]
        fit = fit_growth_exponent(sweep)
        assert fit.marginal_slope == pytest.approx(1.0, abs=0.1)

    def test_needs_three_sizes(self):
        with pytest.raises(ValueError):
            fit_growth_exponent([(10, 5), (20, 9)])

    def test_rejects_nonpositive_totals(self):
        with pytest.raises(ValueError):
            fit_growth_exponent([(10, 5), (20, 0), (30, 9)])

    def test_rejects_duplicate_sizes(self):
        with pytest.raises(ValueError):
            fit_growth_exponent([(10, 5), (10, 6), (30, 9)])


@pytest.fixture(scope="module")
def small_run():
    return run(SimConfig(n_max=40, h_max=80, seed=3, policy=PolicyKind.MODERATE))


class TestTimeseriesCsv:
    def test_one_row_per_bin(self, small_run, tmp_path):
        path = tmp_path / "ts.csv"
        emit_timeseries_csv(small_run, path)
        lines = path.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) - 1 == len(small_run.bin_ts)

    def test_fractions_have_six_decimals_and_sum_to_one(self, small_run, tmp_path):
        path = tmp_path / "ts.csv"
        emit_timeseries_csv(small_run, path)
        last = path.read_text().splitlines()[-1].split(",")
        do_fracs = [float(v) for v in last[5:9]]
        host_fracs = [float(v) for v in last[9:15]]
        assert sum(do_fracs) == pytest.approx(1.0, abs=1e-4)
        assert sum(host_fracs) == pytest.approx(1.0, abs=1e-4)
        assert all(len(v.split(".")[1]) == 6 for v in last[5:15])

    def test_rows_ascend_in_t(self, small_run, tmp_path):
        path = tmp_path / "ts.csv"
        emit_timeseries_csv(small_run, path)
        ts = [int(line.split(",")[0]) for line in path.read_text().splitlines()[1:]]
        assert ts == sorted(ts)

    def test_rerun_identical_bytes(self, tmp_path):
        cfg = SimConfig(n_max=30, h_max=60, seed=12)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_timeseries_csv(run(cfg), p1)
        emit_timeseries_csv(run(cfg), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestSummaryJson:
    def test_fields_and_condition(self, small_run, tmp_path):
        path = tmp_path / "s.json"
        emit_summary_json(small_run, path)
        data = json.loads(path.read_text())
        assert data["config"]["policy"] == "moderate"
        assert data["condition"] == "boundary_high"
        assert data["messages"]["total"] == \
            data["messages"]["growth"] + data["messages"]["maintenance"]
        fr = data["status_fractions"]
        assert sum(fr.values()) == pytest.approx(1.0, abs=1e-4)
        hosts = data["hosts"]
        assert hosts["discovered"] + hosts["undiscovered"] == hosts["universe"]

    def test_csv_json_consistency(self, small_run, tmp_path):
        # Final CSV cumulative totals equal the JSON phase subtotal sums.
        csv_path = tmp_path / "ts.csv"
        emit_timeseries_csv(small_run, csv_path)
        last = csv_path.read_text().splitlines()[-1].split(",")
        summ = summary_dict(small_run)
        assert int(last[3]) == summ["messages"]["growth"] + summ["messages"]["maintenance"]
        assert int(last[4]) == summ["messages"]["total"]

    def test_cost_curve_monotone_messages(self, small_run):
        curve = cost_curve(small_run)
        msgs = [p.cumulative_messages for p in curve]
        assert msgs == sorted(msgs)


class TestSnapshots:
    def test_state_at_zero_is_empty(self, small_run):
        copies, used, discovered = snapshot_state(small_run, 0)
        assert not copies
        assert not used
        assert not discovered

    def test_state_at_end_matches_final(self, small_run):
        copies, used, _ = snapshot_state(small_run, small_run.final_t)
        final = {d: f.copy_count for d, f in small_run.families.items()}
        assert copies == final
        assert used == {h.host_id: h.used for h in small_run.hosts.values() if h.used}

    def test_beyond_run_rejected(self, small_run, tmp_path):
        with pytest.raises(ValueError):
            emit_snapshot_svg(small_run, small_run.final_t + 1, tmp_path / "x.svg")

    def test_snapshot_at_zero_all_grey(self, small_run, tmp_path):
        path = tmp_path / "t0.svg"
        emit_snapshot_svg(small_run, 0, path)
        text = path.read_text()
        assert text.count("#bbbbbb") == small_run.config.h_max
        assert "<circle" not in text  # no DOs yet

    def test_final_snapshot_renders_all_dos(self, small_run, tmp_path):
        path = tmp_path / "tend.svg"
        emit_snapshot_svg(small_run, small_run.final_t, path)
        text = path.read_text()
        assert text.count("<circle") == small_run.config.n_max
        assert text.startswith("<svg")
        assert text.rstrip().endswith("</svg>")
