import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinarrival.special import erfc_complex, faddeeva_w

mpmath.mp.dps = 30


def mp_erfc(z):
    return complex(mpmath.erfc(mpmath.mpc(z.real, z.imag)))


def mp_w(z):
    z = mpmath.mpc(z.real, z.imag)
    return complex(mpmath.exp(-z * z) * mpmath.erfc(-1j * z))


def w_continued_fraction(z, terms=200):
    # Laplace continued fraction, accurate for large |z| in the upper half-plane
    acc = 0.0
    for k in range(terms, 0, -1):
        acc = (k / 2.0) / (z - acc)
    return 1j / math.sqrt(math.pi) / (z - acc)


def test_w_at_origin():
    assert faddeeva_w(0j) == pytest.approx(1.0, abs=1e-15)


def test_w_on_imaginary_axis():
    assert faddeeva_w(1j) == pytest.approx(math.e * math.erfc(1.0), rel=1e-13)
    assert abs(faddeeva_w(1j) - 0.42758357615580700) < 1e-14


def test_w_asymptote_on_diagonal():
    z = 100.0 * cmath.exp(1j * math.pi / 4)
    lead = 1j / (math.sqrt(math.pi) * z)
    assert abs(faddeeva_w(z) - lead) / abs(lead) < 1e-4  # next term is O(1/z^2)
    assert abs(faddeeva_w(z) - w_continued_fraction(z)) / abs(lead) < 1e-12


@pytest.mark.parametrize(
    "z",
    [0.3 + 0.2j, 2.0 + 1e-3j, 5.5 + 0.05j, 1e-8 + 1e-8j, 3.0 + 4.0j, 12.0 + 0.5j, 0.0 + 30.0j,
     80.0 + 1.0j, 1e3 + 1e3j, 9e3 + 10.0j, -4.0 + 2.0j, 6.3 + 0.0j],
)
def test_w_matches_mpmath(z):
    assert abs(faddeeva_w(z) - mp_w(z)) <= 1e-10 * abs(mp_w(z))


def test_w_lower_half_plane_reflection():
    for z in [1.0 - 0.5j, -2.0 - 1.0j, 0.1 - 3.0j]:
        expected = 2.0 * cmath.exp(-z * z) - faddeeva_w(-z)
        assert abs(faddeeva_w(z) - expected) <= 1e-12 * abs(expected)
        assert abs(faddeeva_w(z) - mp_w(z)) <= 1e-10 * abs(mp_w(z))


def test_w_vectorised_shape():
    z = np.array([[0.0, 1j], [2.0, 3.0 + 1j]])
    out = faddeeva_w(z)
    assert out.shape == (2, 2)
    assert out[0, 1] == pytest.approx(faddeeva_w(1j))


@settings(max_examples=200, deadline=None)
@given(st.floats(-40, 40), st.floats(0, 40))
def test_w_upper_half_plane_property(x, y):
    z = complex(x, y)
    ref = mp_w(z)
    assert abs(faddeeva_w(z) - ref) <= 1e-10 * abs(ref)


def test_erfc_values():
    assert erfc_complex(0j) == pytest.approx(1.0, abs=1e-15)
    assert abs(erfc_complex(1.0 + 0j) - 0.15729920705028513) < 1e-15
    z = 0.7 + 0.3j
    assert abs(erfc_complex(z) + erfc_complex(-z) - 2.0) < 1e-14


def test_erfc_underflows_to_zero():
    assert erfc_complex(40.0 + 0j) == 0.0
    assert erfc_complex(26.0 + 1.0j) != 0.0  # ~1e-294, still representable
    assert np.isfinite(erfc_complex(-40.0 + 0.0j))


def test_erfc_large_real_part_no_overflow():
    # |Re z^2| large with the magnitude still representable
    for z in [25.0 + 3.0j, 3.0 + 25.0j, -3.0 + 25.0j, 20.0 - 20.5j]:
        ref = mp_erfc(z)
        got = erfc_complex(z)
        assert np.isfinite(got)
        assert abs(got - ref) <= 1e-9 * abs(ref)


def test_erfc_reflection_and_conjugation_sample():
    rng = np.random.default_rng(0)
    r = 20.0 * np.sqrt(rng.random(1000))
    phi = 2 * math.pi * rng.random(1000)
    z = r * np.exp(1j * phi)
    e = erfc_complex(z)
    em = erfc_complex(-z)
    assert np.all(np.abs(e + em - 2.0) <= 1e-9 * (1.0 + np.abs(e)))
    ec = erfc_complex(np.conj(z))
    assert np.all(np.abs(ec - np.conj(e)) <= 1e-12 * np.maximum(1.0, np.abs(e)))


def test_erfc_real_axis():
    x = np.linspace(-6, 6, 1000)
    got = erfc_complex(x.astype(complex))
    ref = np.array([math.erfc(v) for v in x])
    assert np.max(np.abs(got.real - ref) / ref) <= 1e-12
    assert np.max(np.abs(got.imag)) == 0.0


def test_erfc_derivative():
    rng = np.random.default_rng(1)
    r = 3.0 * np.sqrt(rng.random(100))
    z = r * np.exp(2j * math.pi * rng.random(100))
    h = 1e-5
    fd = (erfc_complex(z + h) - erfc_complex(z - h)) / (2 * h)
    exact = -2.0 / math.sqrt(math.pi) * np.exp(-z * z)
    assert np.max(np.abs(fd - exact) / np.maximum(1.0, np.abs(exact))) < 1e-6


@settings(max_examples=200, deadline=None)
@given(st.floats(-25, 25), st.floats(-25, 25))
def test_erfc_matches_mpmath_property(x, y):
    z = complex(x, y)
    ref = mp_erfc(z)
    got = erfc_complex(z)
    assert np.isfinite(got)
    if abs(ref) > 1e-300:
        assert abs(got - ref) <= 1e-9 * abs(ref)
    else:
        assert abs(got) < 1e-290
