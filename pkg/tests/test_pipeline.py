import math

import numpy as np
import pytest
from scipy.stats import rankdata

from sparsity_cs.config import RunConfig
from sparsity_cs.errors import InvalidInputError
from sparsity_cs.metrics import psnr_lower_bound
from sparsity_cs.pipeline import (
    NOT_AVAILABLE,
    TYPE_I,
    TYPE_II,
    VALIDATED,
    Confusion,
    ScatterRow,
    aggregate_scatter,
    block_maps,
    classify,
    classify_hypothesis,
    correlation_check,
    read_scatter_csv,
    report_from_json,
    report_to_json,
    run_experiment,
    write_block_maps,
    write_scatter_csv,
)
from sparsity_cs.pnm import read_pnm
from sparsity_cs.sensing import gen_measurement_ensemble


def smooth_image(h, w, seed=0):
    rng = np.random.default_rng(seed)
    r, c = np.mgrid[0:h, 0:w]
    img = 120 + 60 * np.sin(r / 7.0) * np.cos(c / 11.0) + rng.normal(0, 4, (h, w))
    return np.clip(img, 0, 255)


@pytest.fixture(scope="module")
def small_omp():
    cfg = RunConfig(block_size=8, rate=0.5, solver="omp")
    return run_experiment(smooth_image(24, 32), cfg, "small")


class TestClassify:
    def test_examples(self):
        assert classify(0.8, 30, 0.734166, 31.970006) == VALIDATED
        assert classify(0.8, 35, 0.734166, 31.970006) == TYPE_I
        assert classify(0.5, 30, 0.734166, 31.970006) == TYPE_II
        assert classify(0.5, 35, 0.734166, 31.970006) == VALIDATED

    def test_boundaries(self):
        # E equal to t0 is not "above"; PSNR equal to r0 is not "below"
        assert classify(0.5, 31.0, 0.5, 31.0) == VALIDATED
        assert classify(0.6, 31.0, 0.5, 31.0) == TYPE_I
        assert classify(0.5, 30.9, 0.5, 31.0) == TYPE_II

    def test_inf_psnr(self):
        assert classify(0.9, math.inf, 0.5, 31.0) == TYPE_I
        assert classify(0.1, math.inf, 0.5, 31.0) == VALIDATED

    def test_counts(self, small_omp):
        report, _ = small_omp
        recs, conf = classify_hypothesis(report.records, 1.0, 1e9)
        assert (conf.type_I, conf.type_II, conf.validated) == (0, len(recs), 0)
        assert all(r.h_class == TYPE_II for r in recs)
        # inputs keep their original labels
        assert [r.h_class for r in report.records] == [
            classify(r.E, r.psnr_db, report.config["t0"], report.config["r0"]) for r in report.records
        ]


class TestConfusion:
    def test_percent(self):
        c = Confusion(type_I=1, type_II=3, validated=12)
        assert c.total == 16
        assert c.percent("type_II") == pytest.approx(18.75)
        d = c.as_dict()
        assert d["errors"] == 4 and d["errors_pct"] == pytest.approx(25.0)

    def test_empty(self):
        assert Confusion().percent("type_I") == 0.0


class TestRunExperiment:
    def test_shapes(self, small_omp):
        report, recon = small_omp
        assert recon.shape == (24, 32)
        assert len(report.records) == 12
        assert [r.index for r in report.records] == list(range(12))
        assert (report.records[5].row, report.records[5].col) == (8, 8)
        assert all(r.h_class in (VALIDATED, TYPE_I, TYPE_II) for r in report.records)
        assert report.config["K"] == 32 and report.config["N"] == 64

    def test_omp_zero_count(self, small_omp):
        report, _ = small_omp
        for r in report.records:
            assert r.support_size <= 32
            assert 0.0 <= r.E <= 1.0

    def test_omp_bound_is_advisory(self, small_omp):
        # computed from the recovered coefficients, with i0 their zero count;
        # not an inequality on the reconstruction PSNR
        report, _ = small_omp
        seen = 0
        for r in report.records:
            i0 = 64 - r.support_size
            if r.p_star > 0 and 1 <= i0 < r.i_star:
                ref = psnr_lower_bound(r.s, r.p_star, r.i_star, i0, 64, 255).total
                assert r.bound_db == pytest.approx(ref, rel=1e-12)
                seen += 1
            else:
                assert r.bound_db is None
        assert seen > 0

    def test_deterministic(self):
        cfg = RunConfig(block_size=8, rate=0.5, solver="bp")
        img = smooth_image(16, 16, seed=1)
        a, ra = run_experiment(img, cfg, "d")
        b, rb = run_experiment(img, cfg, "d")
        assert report_to_json(a) == report_to_json(b)
        assert ra.tobytes() == rb.tobytes()

    def test_workers_do_not_change_results(self):
        img = smooth_image(16, 24, seed=2)
        a, _ = run_experiment(img, RunConfig(block_size=8, rate=0.5, solver="bp"), "w")
        b, _ = run_experiment(img, RunConfig(block_size=8, rate=0.5, solver="bp", workers=3), "w")
        assert report_to_json(a) == report_to_json(b)

    def test_full_rate_is_exact(self):
        img = smooth_image(16, 16, seed=3)
        for solver in ("omp", "bp"):
            report, recon = run_experiment(img, RunConfig(block_size=8, rate=1.0, solver=solver), "f")
            np.testing.assert_allclose(recon, img, atol=1e-6)
            assert report.psnr_db >= 100

    def test_constant_image(self):
        img = np.full((16, 16), 77.0)
        report, recon = run_experiment(img, RunConfig(block_size=8, rate=0.5, solver="bp"), "c")
        for r in report.records:
            assert r.psnr_db >= 50
            assert r.E < 0.05

    def test_padding_crops_back(self):
        img = smooth_image(20, 13, seed=4)
        report, recon = run_experiment(img, RunConfig(block_size=8, rate=0.5, solver="omp"), "p")
        assert recon.shape == (20, 13)
        assert len(report.records) == 6

    def test_shared_ensemble_must_match(self):
        ens = gen_measurement_ensemble(4, 0.5, 0)
        with pytest.raises(InvalidInputError):
            run_experiment(np.zeros((8, 8)), RunConfig(block_size=8), "x", ens)

    def test_rejects_colour_array(self):
        with pytest.raises(InvalidInputError):
            run_experiment(np.zeros((8, 8, 3)), RunConfig(block_size=4))


class TestScatter:
    def test_empty(self):
        assert aggregate_scatter([]) == []

    def test_ordering(self, small_omp):
        report, _ = small_omp
        other = report_from_json(report_to_json(report))
        other.name = "second"
        rows = aggregate_scatter([report, other])
        assert len(rows) == 24
        assert [r.image for r in rows] == ["small"] * 12 + ["second"] * 12
        assert [r.block for r in rows[:12]] == list(range(12))

    def test_csv_round_trip(self, small_omp, tmp_path):
        rows = aggregate_scatter([small_omp[0]])
        path = tmp_path / "scatter.csv"
        write_scatter_csv(rows, path)
        assert path.read_text().splitlines()[0] == "image,block,E,psnr_db,h_class"
        assert read_scatter_csv(path) == rows

    def test_csv_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n")
        with pytest.raises(InvalidInputError):
            read_scatter_csv(path)


class TestCorrelation:
    def test_anti_monotone(self):
        assert correlation_check([(0.1, 40), (0.2, 35), (0.5, 20), (0.9, 10)]) == pytest.approx(-1.0)

    def test_monotone(self):
        rows = [ScatterRow("a", k, 0.1 * k, 5.0 * k, None) for k in range(1, 6)]
        assert correlation_check(rows) == pytest.approx(1.0)

    def test_against_rank_oracle(self):
        rng = np.random.default_rng(0)
        E = rng.random(50)
        q = 40 - 20 * E + rng.normal(0, 3, 50)
        rE, rq = rankdata(E), rankdata(q)
        ref = np.corrcoef(rE, rq)[0, 1]
        assert correlation_check(list(zip(E, q))) == pytest.approx(ref, abs=1e-12)

    def test_degenerate(self):
        with pytest.raises(InvalidInputError):
            correlation_check([(0.5, 1), (0.5, 2), (0.5, 3)])
        with pytest.raises(InvalidInputError):
            correlation_check([(0.1, 1), (0.2, 2)])


class TestReportJson:
    def test_round_trip(self, small_omp):
        report, _ = small_omp
        text = report_to_json(report)
        back = report_from_json(text)
        assert back == report
        assert report_to_json(back) == text

    def test_inf_and_missing_bound(self):
        img = smooth_image(8, 8)
        report, _ = run_experiment(img, RunConfig(block_size=4, rate=1.0, solver="bp"), "i")
        text = report_to_json(report)
        assert NOT_AVAILABLE in text
        back = report_from_json(text)
        assert all(r.bound_db is None for r in back.records)

    def test_schema_checked(self):
        with pytest.raises(InvalidInputError):
            report_from_json('{"schema": "other"}')


class TestBlockMaps:
    def test_values(self, small_omp):
        report, _ = small_omp
        E, Q, H = block_maps(report)
        assert E.shape == (3, 4)
        assert E[1, 2] == report.records[6].E
        assert Q[2, 3] == report.records[11].psnr_db

    def test_files(self, small_omp, tmp_path):
        report, _ = small_omp
        paths = write_block_maps(report, str(tmp_path / "small"))
        arr, maxval = read_pnm(paths[2])
        assert maxval == 2 and arr.shape == (3, 4)
        E, _ = read_pnm(paths[0])
        np.testing.assert_array_equal(E, np.rint(255 * block_maps(report)[0]))
