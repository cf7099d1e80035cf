import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from screject.data import (
    RNG_ALGORITHM,
    LogitRecord,
    LogitSet,
    MixtureSpec,
    bayes_posterior,
    bayes_risk_mc,
    default_shift,
    default_spec,
    load_logit_records,
    p_error_of,
    sample_dataset,
    shift_spec,
    spec_hash,
    write_logit_records,
)
from screject.exceptions import ConfigError, InvalidInputError, LogitFormatError


def two_component(d=2.0, sigma=1.0, seed=0):
    return MixtureSpec(means=[[0.0, 0.0], [d, 0.0]], sigma=sigma, priors=[0.5, 0.5], seed=seed)


def test_spec_validation():
    with pytest.raises(ConfigError):
        MixtureSpec(means=[[0, 0], [0, 0]], sigma=1, priors=[0.5, 0.5])
    with pytest.raises(ConfigError):
        MixtureSpec(means=[[0, 0], [1, 0]], sigma=0, priors=[0.5, 0.5])
    with pytest.raises(ConfigError):
        MixtureSpec(means=[[0, 0], [1, 0]], sigma=1, priors=[0.6, 0.6])
    with pytest.raises(ConfigError):
        MixtureSpec(means=[[0, 0]], sigma=1, priors=[1.0])


def test_posterior_examples():
    spec = two_component()
    np.testing.assert_allclose(bayes_posterior(spec, [1.0, 0.0]), [0.5, 0.5])
    assert bayes_posterior(spec, [0.0, 0.0])[0] == pytest.approx(math.e**2 / (1 + math.e**2))
    wide = MixtureSpec(means=[[0.0], [1.0]], sigma=1e4, priors=[0.3, 0.7])
    np.testing.assert_allclose(bayes_posterior(wide, [0.2]), [0.3, 0.7], atol=1e-6)
    with pytest.raises(InvalidInputError):
        bayes_posterior(spec, [1.0, 2.0, 3.0])


def test_posterior_matches_direct_likelihoods(rng):
    spec = default_spec()
    x = rng.normal(size=(20, 2)) * 3
    for xi, post in zip(x, bayes_posterior(spec, x)):
        lik = [p * math.exp(-np.sum((xi - m) ** 2) / (2 * spec.sigma**2)) for m, p in zip(spec.means, spec.priors)]
        np.testing.assert_allclose(post, np.array(lik) / sum(lik), rtol=1e-10, atol=1e-300)


def test_posterior_sums_to_one():
    ds = sample_dataset(default_spec(seed=3), 2000)
    assert np.max(np.abs(ds.pibar.sum(axis=1) - 1)) <= 1e-12


def test_sampling_is_deterministic():
    a = sample_dataset(default_spec(seed=5), 500, stream=2)
    b = sample_dataset(default_spec(seed=5), 500, stream=2)
    assert a.x.tobytes() == b.x.tobytes() and a.y.tobytes() == b.y.tobytes()
    c = sample_dataset(default_spec(seed=5), 500, stream=3)
    assert a.x.tobytes() != c.x.tobytes()
    assert "PCG64" in RNG_ALGORITHM


def test_bayes_classifier_error_matches_mc_risk():
    spec = two_component(d=2.0, sigma=1.0, seed=11)
    analytic = 0.5 * math.erfc(1.0 / math.sqrt(2))  # Phi(-d / (2 sigma))
    risk, se = bayes_risk_mc(spec, n=1_000_000)
    assert abs(risk - analytic) < 4 * se
    n = 200_000
    ds = sample_dataset(spec, n, stream=4)
    emp = np.mean(ds.pibar.argmax(axis=1) != ds.y)
    assert abs(emp - risk) <= 3 * math.sqrt(risk * (1 - risk) / n)


def test_default_spec_bayes_error_in_band():
    risk, _ = bayes_risk_mc(default_spec(), n=200_000)
    assert 0.10 <= risk <= 0.20


def test_shift_spec():
    spec = default_spec()
    assert np.array_equal(shift_spec(spec, np.zeros(2)).means, spec.means)
    moved = shift_spec(spec, [3.0, 0.0])
    np.testing.assert_allclose(moved.means[:, 0], spec.means[:, 0] + 3)
    np.testing.assert_array_equal(moved.means[:, 1], spec.means[:, 1])
    assert moved.source_tag == "shift" and moved.sigma == spec.sigma
    assert sample_dataset(moved, 3).source_tag == "shift"
    d = default_shift(spec)
    assert np.linalg.norm(d.means[0] - spec.means[0]) == pytest.approx(2 * spec.sigma)
    with pytest.raises(InvalidInputError):
        shift_spec(spec, [1.0])


def test_shift_preserves_pairwise_distances():
    spec = default_spec()
    moved = shift_spec(spec, [0.7, -1.3])
    dist = lambda m: np.linalg.norm(m[:, None] - m[None], axis=-1)  # noqa: E731
    np.testing.assert_allclose(dist(moved.means), dist(spec.means), atol=1e-12)


def test_p_error():
    assert p_error_of([0.9, 0.1], 0) == pytest.approx(0.1)
    assert p_error_of([0.5, 0.5], 0) == 0.5
    assert p_error_of([0.0, 1.0], 1) == 0.0
    np.testing.assert_allclose(p_error_of(np.array([[0.9, 0.1], [0.2, 0.8]]), [0, 0]), [0.1, 0.8])
    with pytest.raises(InvalidInputError):
        p_error_of([0.5, 0.5], 2)


def test_spec_hash_sensitivity():
    a = default_spec()
    assert spec_hash(a) == spec_hash(default_spec())
    assert spec_hash(a) != spec_hash(default_spec(sigma=0.8000000001))
    assert spec_hash(a) != spec_hash(default_spec(seed=1))


def test_logit_file_roundtrip(tmp_path, rng):
    logits = rng.normal(size=(50, 3)) * 1e3
    logits[0] = [1e-300, -0.1, 1 / 3]
    labels = rng.integers(0, 3, 50)
    tags = ["id"] * 25 + ["shift"] * 25
    path = tmp_path / "x.logits"
    assert write_logit_records(path, logits, labels, tags) == 50
    got = load_logit_records(path)
    assert got.logits.tobytes() == logits.tobytes()
    np.testing.assert_array_equal(got.labels, labels)
    assert got.sources == tags and got.num_classes == 3
    rec = got[0]
    assert isinstance(rec, LogitRecord) and rec.source_tag == "id"


def test_logit_file_small_and_empty(tmp_path):
    path = tmp_path / "a.logits"
    write_logit_records(path, [[1.0, 2.0, 3.0], [0.0, 0.0, 1.0]], [0, 2])
    got = load_logit_records(path)
    assert len(got) == 2 and got.num_classes == 3 and got.sources == [None, None]
    (tmp_path / "h.logits").write_text("# screject-logits v1 K=4\n")
    empty = load_logit_records(tmp_path / "h.logits")
    assert len(empty) == 0 and empty.num_classes == 4


@pytest.mark.parametrize("body, line", [
    ("1,2,3\n", 1),
    ("# screject-logits v1 K=3\n1,2,3,3\n", 2),
    ("# screject-logits v1 K=3\n1,2,3,0\n1,2,0\n", 3),
    ("# screject-logits v1 K=3\n1,x,3,0\n", 2),
    ("# screject-logits v1 K=3\n1,nan,3,0\n", 2),
    ("# screject-logits v1 K=3\n1,2,3,0,id,extra\n", 2),
])
def test_logit_file_errors_cite_line(tmp_path, body, line):
    path = tmp_path / "bad.logits"
    path.write_text(body)
    with pytest.raises(LogitFormatError) as info:
        load_logit_records(path)
    assert info.value.line == line
    assert f"bad.logits:{line}:" in str(info.value)


def test_logit_file_missing(tmp_path):
    with pytest.raises(LogitFormatError):
        load_logit_records(tmp_path / "nope.logits")


def test_logitset_concat_and_records():
    a = LogitSet([[1.0, 0.0]], [0], ["id"])
    b = LogitSet.from_records([LogitRecord(np.array([0.0, 2.0]), 1, "shift")])
    both = a.concat(b)
    assert len(both) == 2 and list(both.source_array) == ["id", "shift"]
    with pytest.raises(InvalidInputError):
        a.concat(LogitSet([[1.0, 0.0, 0.0]], [0]))


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=2, max_size=6))
def test_float_serialisation_roundtrip(values):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "r.logits"
        write_logit_records(path, [values], [0])
        assert load_logit_records(path).logits[0].tolist() == [float(v) for v in values]
