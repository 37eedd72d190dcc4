import numpy as np
import pytest

from ulab.models import (
    DesignKind,
    NoiseKind,
    PriorKind,
    build_instance,
    counterexample_atoms,
    parse_design,
    parse_noise,
    parse_prior,
    sample_design,
    sample_noise,
    sample_prior,
)
from ulab.streams import Stream

GAUSS = DesignKind("gaussian")
NOISE1 = NoiseKind("gaussian", sigma=1.0)
PRIOR1 = PriorKind("gaussian", sd=1.0)


def test_reconstruction_identity():
    inst = build_instance(GAUSS, NOISE1, PRIOR1, 60, 80, Stream(1))
    np.testing.assert_allclose(inst.Y - inst.A @ inst.mu0 - inst.xi, 0.0,
                               atol=1e-12)


def test_seed_determinism_bit_identical():
    a = build_instance(GAUSS, NOISE1, PRIOR1, 30, 40, Stream(42).child("x"))
    b = build_instance(GAUSS, NOISE1, PRIOR1, 30, 40, Stream(42).child("x"))
    assert np.array_equal(a.A, b.A)
    assert np.array_equal(a.mu0, b.mu0)
    assert np.array_equal(a.xi, b.xi)
    assert np.array_equal(a.Y, b.Y)


def test_substream_independence_noise_unaffected_by_n():
    a = build_instance(GAUSS, NOISE1, PRIOR1, 30, 40, Stream(42))
    b = build_instance(GAUSS, NOISE1, PRIOR1, 30, 90, Stream(42))
    assert np.array_equal(a.xi, b.xi)


def test_gaussian_design_entry_variance():
    m, n = 1200, 1500
    A = sample_design(GAUSS, m, n, Stream(3))
    v = A.var() * m
    assert 0.95 <= v <= 1.05


def test_student_design_unit_variance_heavy_tail():
    m, n = 1000, 1200  # >= 1e6 entries
    kind = DesignKind("student", df=3.5)
    A = sample_design(kind, m, n, Stream(4))
    v = (A**2).mean() * m
    assert abs(v - 1.0) <= 0.10


def test_counterexample_multipliers_small_case():
    # L=2, m=2: multipliers live on {+/-0.5, +/-sqrt(1.75)}
    lo, hi = counterexample_atoms(2.0, 2)
    assert lo == pytest.approx(0.5)
    assert hi == pytest.approx(np.sqrt(1.75), abs=1e-12)
    assert hi == pytest.approx(1.3228756555322954, abs=1e-12)
    # row 2-norms over many columns identify |U| per row
    kind = DesignKind("counterexample", L=2.0)
    A = sample_design(kind, 2, 50_000, Stream(6))
    row_scale = np.sqrt((A**2).mean(axis=1) * 2)  # |U| estimate per row
    for s in row_scale:
        assert min(abs(s - lo), abs(s - hi)) < 0.02


def test_counterexample_unit_second_moment():
    # E U^2 = 1 exactly by construction, for several (L, m)
    for L in (2.0, 10.0, 50.0):
        for m in (2, 40, 400):
            lo, hi = counterexample_atoms(L, m)
            eu2 = (1 - 1 / m) * lo**2 + (1 / m) * hi**2
            assert eu2 == pytest.approx(1.0, abs=1e-12)


def test_iso3pt_validation_and_moment():
    kind = DesignKind("iso3pt", atom=np.sqrt(2.0), p_atom=0.25)
    A = sample_design(kind, 2000, 600, Stream(8))
    assert abs((A**2).mean() * 2000 - 1.0) < 0.05
    with pytest.raises(ValueError):
        DesignKind("iso3pt", atom=1.0, p_atom=0.25)  # 2 p a^2 = 0.5 != 1


def test_design_rejects_bad_df():
    for df in (2.0, 1.5, -1.0):
        with pytest.raises(ValueError):
            DesignKind("student", df=df)
    DesignKind("student", df=2.1)  # allowed: variance exists


def test_prior_samples():
    assert np.array_equal(
        sample_prior(PriorKind("pointmass", value=0.0), 5, Stream(0)),
        np.zeros(5))
    mu = sample_prior(PriorKind("gaussian", sd=1.0), 1_000_000, Stream(1))
    assert abs(mu.var() - 1.0) < 0.01
    mu5 = sample_prior(PriorKind("gaussian", sd=5.0), 1_000_000, Stream(2))
    assert abs(mu5.var() - 25.0) < 0.25
    sp = sample_prior(PriorKind("sparse2pt", value=2.0, fraction=0.1),
                      200_000, Stream(3))
    assert set(np.unique(sp)) == {0.0, 2.0}
    assert abs((sp != 0).mean() - 0.1) < 0.01


def test_noise_samples():
    assert np.array_equal(sample_noise(NoiseKind("zero", sigma=0.0), 7, Stream(0)),
                          np.zeros(7))
    xi = sample_noise(NoiseKind("student", df=3.0, sigma=2.0), 500_000, Stream(1))
    assert abs(xi.var() / 4.0 - 1.0) < 0.15


def test_build_instance_zero_and_norm():
    inst = build_instance(GAUSS, NoiseKind("zero", sigma=0.0),
                          PriorKind("pointmass", value=0.0), 20, 30, Stream(9))
    np.testing.assert_array_equal(inst.Y, np.zeros(20))
    # E||Y||^2/m = sigma^2 + (n/m) sd^2 = 1 + 1.25 = 2.25 at this scale
    inst = build_instance(GAUSS, NOISE1, PRIOR1, 1200, 1500, Stream(10))
    assert 1.8 <= (inst.Y @ inst.Y) / inst.m <= 2.8
    assert inst.delta == pytest.approx(0.8)


def test_parse_grammars():
    assert parse_design("gaussian") == GAUSS
    assert parse_design("student:3.5") == DesignKind("student", df=3.5)
    k = parse_design("iso3pt:1.4142135623730951:0.25")
    assert k.atom == pytest.approx(np.sqrt(2.0))
    assert parse_design("counterexample:10") == DesignKind("counterexample", L=10.0)
    assert parse_noise("gaussian:1.0") == NOISE1
    assert parse_noise("zero").sigma == 0.0
    assert parse_noise("student:3:1.0") == NoiseKind("student", df=3.0, sigma=1.0)
    assert parse_prior("gaussian:1.0") == PRIOR1
    assert parse_prior("sparse2pt:2:0.1") == PriorKind("sparse2pt", value=2.0,
                                                       fraction=0.1)
    for bad in ("gauss", "student", "iso3pt:1.0", "gaussian:1:2"):
        with pytest.raises(ValueError):
            parse_design(bad)
    with pytest.raises(ValueError):
        parse_noise("gaussian")
    with pytest.raises(ValueError):
        parse_prior("pointmass")


def test_labels_round_trip():
    for spec in ("gaussian", "student:3.5", "counterexample:10"):
        assert parse_design(spec).label() == spec
    assert parse_noise("student:3:1").label() == "student:3:1"
    assert parse_prior("sparse2pt:2:0.1").label() == "sparse2pt:2:0.1"
