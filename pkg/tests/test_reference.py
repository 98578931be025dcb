import math
import unittest

import numpy as np
from scipy import integrate

from nlsgraph.graph_io import load_fixture
from nlsgraph.graph_topology import classify
from nlsgraph.reference import (
    CONSTANTS,
    critical_mass_exact,
    half_soliton,
    soliton,
    soliton_energy_defect,
    soliton_norms,
    spread_quotient,
)


class TestConstants(unittest.TestCase):

    def test_gn_constants_follow_masses(self):
        self.assertAlmostEqual(CONSTANTS.K_R, 3 / CONSTANTS.mu_R**2)
        self.assertAlmostEqual(CONSTANTS.K_R_plus, 3 / CONSTANTS.mu_R_plus**2)
        self.assertAlmostEqual(CONSTANTS.mu_R, 2 * CONSTANTS.mu_R_plus)

    def test_closed_form_norms(self):
        norms = soliton_norms()
        opts = {"epsabs": 1e-12, "epsrel": 1e-12}
        mass, _ = integrate.quad(lambda x: soliton(1.0, x) ** 2, -np.inf, np.inf, **opts)
        sextic, _ = integrate.quad(lambda x: soliton(1.0, x) ** 6, -np.inf, np.inf, **opts)
        self.assertAlmostEqual(mass, norms["mass"], places=8)
        self.assertAlmostEqual(sextic, norms["sextic"], places=8)


class TestSoliton(unittest.TestCase):

    def test_peak_and_decay(self):
        self.assertAlmostEqual(soliton(1.0, 0.0), 1.0)
        self.assertAlmostEqual(soliton(4.0, 0.0), 2.0)
        self.assertLess(soliton(1.0, 30.0), 1e-5)
        self.assertEqual(soliton(1.0, 1e6), 0.0)

    def test_even(self):
        x = np.linspace(0.1, 5.0, 7)
        np.testing.assert_allclose(soliton(2.0, x), soliton(2.0, -x))

    def test_mass_invariant_under_lambda(self):
        for lam in (0.5, 2.0, 8.0):
            mass, _ = integrate.quad(lambda x: soliton(lam, x) ** 2, -np.inf, np.inf, epsabs=1e-12)
            self.assertAlmostEqual(mass, CONSTANTS.mu_R, places=7)

    def test_invalid_lambda(self):
        with self.assertRaises(ValueError):
            soliton(0.0, 1.0)

    def test_half_soliton_domain(self):
        self.assertAlmostEqual(half_soliton(1.0, 0.0), 1.0)
        with self.assertRaises(ValueError):
            half_soliton(1.0, np.array([0.0, -0.1]))

    def test_energy_defect_is_small(self):
        self.assertLess(abs(soliton_energy_defect(1.0, 40.0, 1e-3)), 1e-5)
        # coarser grids leave a larger defect
        self.assertGreater(abs(soliton_energy_defect(1.0, 40.0, 1e-1)), abs(soliton_energy_defect(1.0, 40.0, 1e-2)))


class TestCriticalMass(unittest.TestCase):

    def test_exact_cases(self):
        expected = {
            "line": CONSTANTS.mu_R,
            "fig2": CONSTANTS.mu_R,
            "half_line": CONSTANTS.mu_R_plus,
            "tadpole": CONSTANTS.mu_R_plus,
            "fig1": CONSTANTS.mu_R_plus,
        }
        for name, value in expected.items():
            with self.subTest(graph=name):
                critical = critical_mass_exact(classify(load_fixture(name)))
                self.assertTrue(critical.exact)
                self.assertEqual(critical.value, value)

    def test_case_d_is_a_bracket(self):
        critical = critical_mass_exact(classify(load_fixture("signpost")))
        self.assertFalse(critical.exact)
        self.assertIsNone(critical.gn_constant)
        self.assertEqual((critical.lower, critical.upper), (CONSTANTS.mu_R_plus, CONSTANTS.mu_R))
        self.assertIn("mu_G in", critical.describe())

    def test_describe_exact(self):
        critical = critical_mass_exact(classify(load_fixture("tadpole")))
        self.assertTrue(critical.describe().startswith("mu_G = pi*sqrt(3)/4"))
        self.assertAlmostEqual(critical.gn_constant, CONSTANTS.K_R_plus)


class TestSpreadQuotient(unittest.TestCase):

    def test_one_half_line_tends_to_half_line_constant(self):
        self.assertAlmostEqual(spread_quotient(1, 2 * math.pi, 1e-6), CONSTANTS.K_R_plus, places=4)

    def test_two_half_lines_without_core(self):
        for eps in (1.0, 0.1):
            self.assertAlmostEqual(spread_quotient(2, 0.0, eps), CONSTANTS.K_R)

    def test_core_lowers_the_quotient(self):
        self.assertLess(spread_quotient(1, 2 * math.pi, 0.5), spread_quotient(1, 2 * math.pi, 0.01))

    def test_invalid_arguments(self):
        with self.assertRaises(ValueError):
            spread_quotient(0, 1.0, 0.1)
        with self.assertRaises(ValueError):
            spread_quotient(1, 1.0, 0.0)


if __name__ == "__main__":
    unittest.main()
