from __future__ import annotations

import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import _oracles as oracle
from popsynth import evaluate as ev
from popsynth.schema import AttributeSchema, build_index


def schema_of(sizes):
    return AttributeSchema([(f"a{i}", [str(c) for c in range(s)]) for i, s in enumerate(sizes)])


S1 = AttributeSchema([("a", ["A", "B", "C", "D"])])


def idx(rows, schema=S1):
    return build_index(np.asarray(rows).reshape(-1, schema.K), schema)


def test_srmse_identity():
    x = idx([0, 1, 1, 2])
    assert ev.srmse(x, x) == 0.0
    with pytest.raises(ValueError):
        ev.srmse(x, x, order="bivariate")


def test_srmse_hand_value():
    s = AttributeSchema([("a", ["0", "1"])])
    ref, gen = idx([0] * 5 + [1] * 5, s), idx([0] * 6 + [1] * 4, s)
    assert ev.srmse(ref, gen) == pytest.approx(0.2, abs=1e-12)


def test_srmse_uses_reference_mean():
    s = AttributeSchema([("a", ["0", "1"]), ("b", ["0", "1", "2"])])
    ref = build_index([[0, 0], [1, 1]], s)
    gen = build_index([[0, 0], [0, 2], [1, 2]], s)
    pi, pi_hat = ev.marginal_vector(ref), ev.marginal_vector(gen)
    assert ev.srmse(ref, gen) == pytest.approx(np.sqrt(np.mean((pi - pi_hat) ** 2)) / pi.mean(), abs=1e-15)


def test_srmse_schema_mismatch():
    other = AttributeSchema([("a", ["0", "1"])])
    with pytest.raises(ValueError):
        ev.srmse(idx([0]), build_index([[0]], other))


def test_distribution_vector_normalization():
    s = schema_of([2, 3, 4])
    recs = oracle.random_metric_instance(np.random.default_rng(0))[1]
    data = np.random.default_rng(1).integers(0, 2, (50, 3))
    index = build_index(data, s)
    assert ev.marginal_vector(index).sum() == pytest.approx(3, abs=1e-9)
    assert ev.bivariate_vector(index).sum() == pytest.approx(3, abs=1e-9)
    assert ev.bivariate_vector(index).size == 2 * 3 + 2 * 4 + 3 * 4
    assert recs.shape[1] >= 1


def test_precision_examples():
    assert ev.precision(idx([0, 0, 3]), idx([0, 1, 2])) == pytest.approx(2 / 3, abs=1e-15)
    assert ev.precision(idx([0, 1]), idx([0, 1, 2])) == 1.0


def test_recall_examples():
    assert ev.recall(idx([0, 0, 1, 2]), idx([0, 2])) == 0.75
    assert ev.recall(idx([0, 1]), idx([0, 1, 3])) == 1.0


@pytest.mark.parametrize("p,r,expect", [(0.890, 0.747, 0.812), (1.0, 0.564, 0.721)])
def test_f1_worked_values(p, r, expect):
    assert abs(ev.f1(p, r) - expect) < 5e-4


def test_f1_edges():
    assert ev.f1(0.0, 0.0) == 0.0
    assert ev.f1(0.4, 0.4) == pytest.approx(0.4, abs=1e-15)
    with pytest.raises(ValueError):
        ev.f1(1.2, 0.5)


def test_zero_classification_toy():
    z = ev.classify_zeros(np.array([[0], [1], [3]]), idx([0]), idx([0, 1]), S1)
    assert (z.general_sample, z.sampling_zero, z.structural_zero) == pytest.approx((1 / 3, 1 / 3, 1 / 3), abs=1e-15)
    assert z.labels.tolist() == [ev.GENERAL_SAMPLE, ev.SAMPLING_ZERO, ev.STRUCTURAL_ZERO]
    assert z.missing_sample == 0.0


def test_zero_classification_identity():
    sample = np.array([[0], [1], [1]])
    z = ev.classify_zeros(sample, idx(sample), idx([0, 1, 2]), S1)
    assert z.general_sample == 1.0 and z.sampling_zero == 0.0 and z.structural_zero == 0.0


def test_zero_classification_precondition():
    with pytest.raises(ValueError):
        ev.classify_zeros(np.array([[0]]), idx([3]), idx([0, 1]), S1)


def test_missing_sample_rate():
    z = ev.classify_zeros(np.array([[0], [0]]), idx([0, 1]), idx([0, 1, 2]), S1)
    assert z.missing_sample == 0.5


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_metrics_match_oracle(seed):
    sizes, pop, sample, gen = oracle.random_metric_instance(np.random.default_rng(seed))
    s = schema_of(sizes)
    rep = ev.evaluate_generated(gen, build_index(pop, s), build_index(sample, s), s)
    p, r = oracle.precision(gen, pop), oracle.recall(pop, gen)
    assert abs(rep.precision - p) <= 1e-12 and abs(rep.recall - r) <= 1e-12
    assert abs(rep.f1 - oracle.f1(p, r)) <= 1e-12
    assert abs(rep.marg_srmse - oracle.srmse(pop, gen, sizes, "marginal")) <= 1e-12
    if len(sizes) == 1:
        assert rep.bivar_srmse is None
    else:
        assert abs(rep.bivar_srmse - oracle.srmse(pop, gen, sizes, "bivariate")) <= 1e-12
    rates = oracle.zero_rates(gen, sample, pop)
    got = rep.zero_rates
    assert abs(got["general_sample"] - rates[0]) <= 1e-12
    assert abs(got["sampling_zero"] - rates[1]) <= 1e-12
    assert abs(got["structural_zero"] - rates[2]) <= 1e-12
    assert abs(got["missing_sample"] - rates[3]) <= 1e-12
    # invariants
    assert abs(sum(got[k] for k in ev.ZERO_CLASSES) - 1) <= 1e-12
    assert abs(rep.precision - (1 - got["structural_zero"])) <= 1e-12
    assert rep.f1 <= max(rep.precision, rep.recall) + 1e-15
    assert rep.n_combinations == len(set(oracle.tuples(gen)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_recall_monotone_in_growth(seed):
    sizes, pop, _, gen = oracle.random_metric_instance(np.random.default_rng(seed))
    s = schema_of(sizes)
    steps = sorted({1, gen.shape[0] // 3 or 1, gen.shape[0] // 2 or 1, gen.shape[0]})
    curve = ev.recall_curve(gen, build_index(pop, s), steps, s)
    vals = [c["recall"] for c in curve]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    for c in curve:
        assert abs(c["recall"] - oracle.recall(pop, gen[: c["size"]])) <= 1e-12


def test_recall_curve_rejects_unsorted():
    with pytest.raises(ValueError):
        ev.recall_curve(np.array([[0], [1]]), idx([0, 1]), [2, 1], S1)


def test_distance_histogram_toy():
    s = AttributeSchema([("a", ["0", "1", "2"]), ("b", ["0", "1"])])
    sample = np.array([[0, 0]])
    pop = np.array([[0, 0], [1, 0]])
    # general (distance 0), sampling zero (one attribute off: sqrt 2), structural (two off: 2)
    gen = np.array([[0, 0], [0, 0], [1, 0], [2, 1]])
    h = ev.distance_histograms(gen, sample, build_index(pop, s), s, bins=[0, 0.5, 1.5, 1.9, 2.5])
    assert h["classes"]["general_sample"]["histogram"] == [2, 0, 0, 0]
    assert h["classes"]["sampling_zero"]["histogram"] == [0, 1, 0, 0]
    assert h["classes"]["structural_zero"]["histogram"] == [0, 0, 0, 1]
    assert h["classes"]["sampling_zero"]["mean"] == pytest.approx(np.sqrt(2))
    np.testing.assert_allclose(h["distances"], [0, 0, np.sqrt(2), 2])


def test_general_samples_at_zero_distance():
    sizes, pop, sample, _ = oracle.random_metric_instance(np.random.default_rng(5))
    s = schema_of(sizes)
    h = ev.distance_histograms(sample, sample, build_index(pop, s), s)
    edges = np.asarray(h["edges"])
    zero_bin = int(np.searchsorted(edges, 0.0, side="right")) - 1
    assert h["classes"]["general_sample"]["histogram"][zero_bin] == sample.shape[0]
    assert h["classes"]["general_sample"]["mean"] == 0.0


def test_table_and_report_outputs(tmp_path):
    s = AttributeSchema([("a", ["0", "1"]), ("b", ["0", "1"])])
    pop = np.array([[0, 0], [0, 1], [1, 1]])
    rep = ev.evaluate_generated(np.array([[0, 0], [1, 0]]), pop, pop[:1], s, model="X")
    ev.write_table(tmp_path / "t.csv", [rep])
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ev.TABLE_COLUMNS
    assert rows[0] == ["model", "space", "regularization", "marg_srmse", "bivar_srmse",
                       "n_combinations", "recall", "precision", "f1"]
    assert float(rows[1][7]) == rep.precision
    ev.write_report_json(tmp_path / "r.json", rep)
    assert json.loads((tmp_path / "r.json").read_text())["precision"] == 0.5


def test_replayed_population_is_perfect():
    sizes, pop, sample, _ = oracle.random_metric_instance(np.random.default_rng(9))
    s = schema_of(sizes)
    rep = ev.evaluate_generated(pop, pop, sample, s)
    assert (rep.precision, rep.recall, rep.marg_srmse) == (1.0, 1.0, 0.0)
