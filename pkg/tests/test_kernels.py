import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_qht.kernels import (
    KernelExpr,
    Target,
    base_kernel,
    dump_pattern_table,
    eval_kernel,
    hermite,
    kernel_polynomial,
    oscillator_psi,
    pattern_function,
    pattern_kernel,
    richter_kernel,
)
from adaptive_qht.nullfns import NullFamily
from adaptive_qht.quadrature import tomographic_average
from adaptive_qht.states import StateSpec, density_matrix_element, normally_ordered_moment

from conftest import TEST_STATES


class TestSpecialFunctions:
    def test_hermite_values(self):
        assert hermite(0, 0.7) == 1.0
        assert hermite(2, 1.0) == pytest.approx(2.0)
        assert hermite(3, 0.0) == 0.0
        y = np.linspace(-2, 2, 9)
        assert np.allclose(hermite(5, y), np.polynomial.hermite.hermval(y, [0] * 5 + [1]))

    def test_hermite_errors(self):
        with pytest.raises(ValueError):
            hermite(513, 0.0)
        with pytest.raises(OverflowError):
            hermite(500, 1e200)

    def test_oscillator_values(self):
        assert oscillator_psi(0, 0.0) == pytest.approx((2 / math.pi) ** 0.25, abs=1e-15)
        assert oscillator_psi(1, 0.0) == 0.0

    def test_oscillator_orthonormal(self):
        x = np.linspace(-10, 10, 20001)
        psi = np.array([oscillator_psi(n, x) for n in range(8)])
        gram = np.trapezoid(psi[:, None, :] * psi[None, :, :], x, axis=-1)
        assert np.allclose(gram, np.eye(8), atol=1e-8)

    def test_oscillator_high_order_finite(self):
        x = np.linspace(-30, 30, 101)
        vals = oscillator_psi(400, x)
        assert np.all(np.isfinite(vals))
        assert np.trapezoid(oscillator_psi(400, np.linspace(-25, 25, 200001)) ** 2, dx=50 / 200000) == pytest.approx(1, abs=1e-8)


class TestRichter:
    def test_identity_and_intensity(self):
        x = np.linspace(-3, 3, 13)
        assert np.allclose(richter_kernel(0, 0, x, 0.4), 1.0)
        assert np.allclose(richter_kernel(1, 1, x, 0.4), 2 * x**2 - 0.5, atol=1e-14)

    def test_amplitude_kernel(self):
        assert richter_kernel(0, 1, 1.0, 0.0) == pytest.approx(2.0)
        x, phi = 0.7, 1.1
        assert richter_kernel(0, 1, x, phi) == pytest.approx(2 * x * np.exp(1j * phi))

    def test_large_order_normalization(self):
        assert np.isfinite(richter_kernel(32, 32, 1.5, 0.2))
        with pytest.raises(ValueError):
            richter_kernel(40, 30, 0.0, 0.0)

    @pytest.mark.parametrize("name", sorted(TEST_STATES))
    def test_moment_consistency(self, name):
        spec = TEST_STATES[name]
        for n in range(5):
            for m in range(5 - n):
                est = tomographic_average(spec, lambda x, phi: richter_kernel(n, m, x, phi))
                assert est == pytest.approx(normally_ordered_moment(spec, n, m), abs=1e-6)

    @pytest.mark.parametrize("n", range(1, 6))
    def test_diagonal_moment_identity(self, n):
        # the phase factor sits on the side that makes both kernels carry e^{-2i phi}
        rng = np.random.default_rng(n)
        x = rng.uniform(-3, 3, 50)
        phi = rng.uniform(0, math.pi, 50)
        lhs = np.exp(-2j * phi) * richter_kernel(n, n, x, phi)
        rhs = n / (n + 1) * richter_kernel(n + 1, n - 1, x, phi)
        assert np.allclose(lhs, rhs, atol=1e-10, rtol=1e-10)
        lhs2 = np.exp(2j * phi) * richter_kernel(n, n, x, phi)
        assert np.allclose(lhs2, n / (n + 1) * richter_kernel(n - 1, n + 1, x, phi), atol=1e-10, rtol=1e-10)


class TestBaseKernels:
    def test_examples(self):
        assert base_kernel("intensity", 0.0, 1.0) == pytest.approx(-0.5)
        assert np.allclose(base_kernel("quadrature", np.linspace(-2, 2, 5), math.pi / 2), 0, atol=1e-15)
        assert base_kernel("amplitude", 1.0, math.pi) == pytest.approx(-2.0)

    def test_moment_dispatch(self):
        assert base_kernel("moment(2,1)", 0.8, 0.3) == pytest.approx(richter_kernel(2, 1, 0.8, 0.3))

    def test_matrix_element_dispatch(self):
        assert base_kernel("rho(2,0)", 0.4, 0.9) == pytest.approx(pattern_kernel(2, 0, 0.4, 0.9))

    def test_target_parse(self):
        assert Target.parse("rho(1, 3)") == Target("matrix_element", 1, 3)
        assert str(Target.parse("moment(2,0)")) == "moment(2,0)"
        assert not Target.parse("amplitude").is_real
        assert Target.parse("matrix_element(2,2)").is_real
        with pytest.raises(ValueError):
            Target.parse("purity")

    @pytest.mark.parametrize("target", ["intensity", "quadrature", "amplitude", "moment(2,1)", "moment(3,3)"])
    def test_polynomial_matches_kernel(self, target):
        poly = kernel_polynomial(target)
        rng = np.random.default_rng(0)
        x = rng.uniform(-2, 2, 20)
        phi = rng.uniform(0, math.pi, 20)
        from_poly = sum(c * x**j * np.exp(1j * q * phi) for (j, q), c in poly.items())
        assert np.allclose(from_poly, base_kernel(target, x, phi), atol=1e-12)
        assert kernel_polynomial("rho(0,0)") is None


class TestPatternKernels:
    def test_vacuum_and_coherent_examples(self):
        vac = tomographic_average(StateSpec.vacuum(), lambda x, phi: pattern_kernel(0, 0, x, phi))
        assert vac.real == pytest.approx(1.0, abs=1e-6)
        coh = tomographic_average(StateSpec.coherent(1.0), lambda x, phi: pattern_kernel(0, 0, x, phi))
        assert coh.real == pytest.approx(math.exp(-1), abs=1e-6)

    @pytest.mark.parametrize("name", sorted(TEST_STATES))
    def test_reproducing_property(self, name):
        spec = TEST_STATES[name]
        for n in range(7):
            for m in range(7):
                est = tomographic_average(spec, lambda x, phi: pattern_kernel(n, m, x, phi))
                assert abs(est - density_matrix_element(spec, n, m)) <= 1e-6, (n, m)

    @pytest.mark.parametrize("n,m", [(0, 0), (1, 0), (3, 1), (2, 5), (4, 4)])
    def test_parity_and_symmetry(self, n, m):
        x = np.random.default_rng(7).uniform(-4, 4, 50)
        f = pattern_function(n, m, x)
        assert np.allclose(pattern_function(n, m, -x), (-1) ** (n - m) * f, atol=1e-12)
        assert np.allclose(pattern_function(m, n, x), f, atol=1e-12)

    def test_cached_table_matches_direct(self):
        x = np.linspace(-4, 4, 333)
        assert np.allclose(pattern_kernel(3, 1, x, 0.0).real, pattern_function(3, 1, x), atol=1e-7)
        far = np.array([-9.0, 9.5])
        assert np.allclose(pattern_kernel(3, 1, far, 0.0).real, pattern_function(3, 1, far), atol=1e-12)

    def test_convergence_check_passes(self):
        pattern_function(6, 2, np.linspace(-5, 5, 11), check=True)

    def test_index_limits(self):
        with pytest.raises(ValueError):
            pattern_kernel(33, 0, 0.0, 0.0)

    def test_dump(self, tmp_path):
        path = tmp_path / "f10.csv"
        dump_pattern_table(1, 0, path, x=np.array([0.0, 0.5]))
        lines = path.read_text().splitlines()
        assert lines[0] == "x,f_nm_real"
        assert float(lines[2].split(",")[1]) == pytest.approx(pattern_function(1, 0, 0.5), abs=1e-15)


class TestKernelExpr:
    def test_zero_coefficients_equal_base(self):
        k = KernelExpr("quadrature", NullFamily("I", 3))
        x, phi = np.array([0.3, -1.2]), np.array([0.2, 2.0])
        assert np.allclose(eval_kernel(k, x, phi), base_kernel("quadrature", x, phi).real)

    def test_intensity_with_one_member(self):
        mu0 = 0.37
        k = KernelExpr("intensity", NullFamily("I", 1), mu=[mu0])
        assert eval_kernel(k, 1.0, 0.0) == pytest.approx(1.5 + 2 * mu0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            KernelExpr("intensity", NullFamily("I", 2), mu=[1.0])

    def test_complex_target_keeps_independent_coefficients(self):
        k = KernelExpr("amplitude", NullFamily("I", 2), mu=[1, 2j], nu=[0.5, 0])
        assert not k.is_paired and not k.is_real
        val = eval_kernel(k, 0.5, 0.3)
        assert isinstance(val, complex)

    @settings(max_examples=30, deadline=None)
    @given(
        mu=st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), min_size=4, max_size=4),
        kind=st.sampled_from(["I", "II", "III"]),
    )
    def test_paired_real_kernel_is_real(self, mu, kind):
        k = KernelExpr("quadrature", NullFamily(kind, 4), mu=mu)
        rng = np.random.default_rng(1)
        vals = eval_kernel(k, rng.uniform(-3, 3, 100), rng.uniform(0, math.pi, 100))
        assert np.isrealobj(vals)
        assert np.all(np.isfinite(vals))
