import math

import numpy as np
import pytest

from bnmlab.rng import Xoshiro256pp
from bnmlab.scenarios import (
    Dataset,
    DomainShift,
    NO_SHIFT,
    ScenarioKind,
    ScenarioSpec,
    class_means,
    default_spec,
    eligible_indices,
    export_csv,
    generate,
    import_csv,
    known_class_means,
    prototype_init,
    sample_batch,
)


def _ssl_spec(**kw):
    base = dict(
        kind=ScenarioKind.SSL, n_labeled=50, n_unlabeled=200, n_classes=2, n_known=2,
        class_priors=(0.8, 0.2), shift=NO_SHIFT, cluster_std=0.5, seed=11,
    )
    base.update(kw)
    return ScenarioSpec(**base)


# ---------------------------------------------------------------------------
# spec validation
# ---------------------------------------------------------------------------

def test_spec_rejects_bad_priors():
    with pytest.raises(ValueError):
        _ssl_spec(class_priors=(0.8, 0.3))
    with pytest.raises(ValueError):
        _ssl_spec(class_priors=(1.2, -0.2))


def test_spec_rejects_zero_prior_known_class_with_labels():
    with pytest.raises(ValueError):
        _ssl_spec(class_priors=(1.0, 0.0))


def test_spec_rejects_shifted_ssl():
    with pytest.raises(ValueError):
        _ssl_spec(shift=DomainShift(dx=1.0))


def test_spec_rejects_bad_known_count():
    with pytest.raises(ValueError):
        _ssl_spec(n_known=1)
    with pytest.raises(ValueError):
        ScenarioSpec(
            kind=ScenarioKind.OPEN_SET, n_labeled=10, n_unlabeled=50, n_classes=3,
            n_known=3, class_priors=(0.4, 0.3, 0.3), shift=NO_SHIFT, cluster_std=0.5, seed=1,
        )


def test_minority_and_unknown_class_sets():
    spec = default_spec(ScenarioKind.UDA)
    assert spec.minority_classes == (2, 3)
    assert spec.unknown_classes == ()
    spec_o = default_spec(ScenarioKind.OPEN_SET)
    assert spec_o.unknown_classes == (4,)


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def test_generation_is_bit_deterministic():
    spec = default_spec(ScenarioKind.UDA, seed=5)
    d1, d2 = generate(spec), generate(spec)
    assert np.array_equal(d1.labeled_x, d2.labeled_x)
    assert np.array_equal(d1.labeled_y, d2.labeled_y)
    assert np.array_equal(d1.unlabeled_x, d2.unlabeled_x)
    assert np.array_equal(d1.unlabeled_y, d2.unlabeled_y)


def test_ssl_means_coincide_across_domains():
    ml, mu = class_means(_ssl_spec())
    assert np.array_equal(ml, mu)


def test_uda_means_are_rigidly_moved():
    spec = default_spec(ScenarioKind.UDA)
    ml, mu = class_means(spec)
    assert not np.allclose(ml, mu)
    # rigid motion preserves pairwise distances
    dl = np.linalg.norm(ml[0] - ml[1])
    du = np.linalg.norm(mu[0] - mu[1])
    assert dl == pytest.approx(du, abs=1e-12)


def test_unlabeled_class_counts_match_binomial_oracle():
    spec = _ssl_spec(n_labeled=10, n_unlabeled=1000, seed=3)
    d = generate(spec)
    counts = d.unlabeled_y.sum(axis=0)
    for j, prior in enumerate(spec.class_priors):
        sd = math.sqrt(1000 * prior * (1.0 - prior))
        assert abs(counts[j] - 1000 * prior) <= 3.0 * sd


def test_open_set_labels_stay_known():
    spec = default_spec(ScenarioKind.OPEN_SET, seed=2)
    d = generate(spec)
    assert not d.labeled_y[:, spec.unknown_classes].any()
    unknown_count = d.unlabeled_y[:, 4].sum()
    expect = spec.class_priors[4] * spec.n_unlabeled
    sd = math.sqrt(spec.n_unlabeled * spec.class_priors[4] * (1 - spec.class_priors[4]))
    assert abs(unknown_count - expect) <= 3.0 * sd


def test_class_prior_fidelity_chi_square():
    spec = ScenarioSpec(
        kind=ScenarioKind.SSL, n_labeled=10, n_unlabeled=10_000, n_classes=4, n_known=4,
        class_priors=(0.5, 0.3, 0.1, 0.1), shift=NO_SHIFT, cluster_std=0.8, seed=1,
    )
    d = generate(spec)
    counts = d.unlabeled_y.sum(axis=0)
    expected = np.array(spec.class_priors) * spec.n_unlabeled
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < 16.26623619623813  # 0.999 quantile, chi-square with 3 dof


def test_every_positive_prior_class_appears():
    spec = _ssl_spec(n_unlabeled=200, class_priors=(0.9, 0.1), seed=8)
    # n_unlabeled >= 10 / min(prior) = 100
    d = generate(spec)
    assert (d.unlabeled_y.sum(axis=0) > 0).all()


# ---------------------------------------------------------------------------
# prototypes
# ---------------------------------------------------------------------------

def test_prototype_mean_of_all_examples_is_class_mean():
    spec = default_spec(ScenarioKind.OPEN_SET, seed=4)
    d = generate(spec)
    truth = d.unlabeled_y.argmax(axis=1)
    n_unknown = int((truth == 4).sum())
    proto = prototype_init(d, k=n_unknown)
    want = d.unlabeled_x[truth == 4].mean(axis=0)
    assert np.allclose(proto.means[4], want, atol=1e-12)
    assert len(proto.flagged) == n_unknown


def test_prototype_k1_is_first_example():
    spec = default_spec(ScenarioKind.OPEN_SET, seed=4)
    d = generate(spec)
    truth = d.unlabeled_y.argmax(axis=1)
    first = int(np.flatnonzero(truth == 4)[0])
    proto = prototype_init(d, k=1)
    assert proto.flagged == (first,)
    assert np.array_equal(proto.means[4], d.unlabeled_x[first])


def test_prototype_converges_to_generator_mean_for_tight_clusters():
    spec = ScenarioSpec(
        kind=ScenarioKind.OPEN_SET, n_labeled=50, n_unlabeled=500, n_classes=3,
        n_known=2, class_priors=(0.4, 0.3, 0.3), shift=NO_SHIFT, cluster_std=0.01, seed=6,
    )
    d = generate(spec)
    proto = prototype_init(d, k=5)
    _, mu = class_means(spec)
    tol = 3.0 * spec.cluster_std / math.sqrt(5)
    assert np.abs(proto.means[2] - mu[2]).max() <= tol


def test_prototype_requires_open_set_and_enough_examples():
    with pytest.raises(ValueError):
        prototype_init(generate(_ssl_spec()), k=1)
    spec = ScenarioSpec(
        kind=ScenarioKind.OPEN_SET, n_labeled=10, n_unlabeled=20, n_classes=3,
        n_known=2, class_priors=(0.5, 0.45, 0.05), shift=NO_SHIFT, cluster_std=0.5, seed=1,
    )
    with pytest.raises(ValueError):
        prototype_init(generate(spec), k=15)


def test_known_class_means_match_label_groups():
    spec = _ssl_spec(seed=9)
    d = generate(spec)
    means = known_class_means(d)
    labels = d.labeled_y.argmax(axis=1)
    for cls, mean in means.items():
        assert np.allclose(mean, d.labeled_x[labels == cls].mean(axis=0), atol=1e-15)


# ---------------------------------------------------------------------------
# batch sampling
# ---------------------------------------------------------------------------

def test_sample_without_replacement_is_permutation():
    d = generate(_ssl_spec())
    x, y = sample_batch(d, "labeled", 50, Xoshiro256pp(0), replace=False)
    assert x.shape == (50, 2)
    # every labelled point shows up exactly once
    order = np.lexsort((x[:, 1], x[:, 0]))
    base = np.lexsort((d.labeled_x[:, 1], d.labeled_x[:, 0]))
    assert np.array_equal(x[order], d.labeled_x[base])
    assert y.sum() == 50


def test_sample_replay_is_identical_and_streams_advance():
    d = generate(_ssl_spec())
    g = Xoshiro256pp(1)
    x1, _ = sample_batch(d, "unlabeled", 8, g)
    x2, _ = sample_batch(d, "unlabeled", 8, g)
    assert not np.array_equal(x1, x2)  # stream advanced
    g2 = Xoshiro256pp(1)
    y1, _ = sample_batch(d, "unlabeled", 8, g2)
    assert np.array_equal(x1, y1)


def test_unlabeled_batches_carry_no_labels():
    d = generate(_ssl_spec())
    _, y = sample_batch(d, "unlabeled", 4, Xoshiro256pp(2))
    assert y is None


def test_two_element_domain_frequencies():
    spec = _ssl_spec(n_labeled=2, n_unlabeled=10, class_priors=(0.5, 0.5))
    d = generate(spec)
    g = Xoshiro256pp(3)
    hits = 0
    for _ in range(100):
        _, _, idx = sample_batch(d, "labeled", 100, g, return_indices=True)
        hits += int((idx == 0).sum())
    assert abs(hits / 10_000 - 0.5) <= 0.02


def test_exclusion_and_empty_domain():
    d = generate(_ssl_spec(n_labeled=4, n_unlabeled=10))
    _, _, idx = sample_batch(d, "labeled", 100, Xoshiro256pp(4), exclude=(0, 1), return_indices=True)
    assert set(idx.tolist()) <= {2, 3}
    with pytest.raises(ValueError):
        sample_batch(d, "labeled", 1, Xoshiro256pp(4), exclude=(0, 1, 2, 3))
    assert eligible_indices(d, "labeled", (0, 1)).tolist() == [2, 3]


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def test_csv_round_trip_is_exact(tmp_path):
    spec = default_spec(ScenarioKind.OPEN_SET, seed=12)
    d = generate(spec)
    proto = prototype_init(d, 5)
    path = tmp_path / "data.csv"
    export_csv(d, path, flagged=proto.flagged)
    d2, flagged = import_csv(path, spec)
    assert flagged == proto.flagged
    assert np.array_equal(d.labeled_x, d2.labeled_x)
    assert np.array_equal(d.labeled_y, d2.labeled_y)
    assert np.array_equal(d.unlabeled_x, d2.unlabeled_x)
    assert np.array_equal(d.unlabeled_y, d2.unlabeled_y)


def test_dataset_arrays_are_read_only():
    d = generate(_ssl_spec())
    with pytest.raises(ValueError):
        d.labeled_x[0, 0] = 99.0
