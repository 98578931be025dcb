import os
import unittest

from nlsgraph import acceptance

SLOW = bool(os.environ.get("NLSGRAPH_SLOW"))


class TestChecks(unittest.TestCase):

    def test_individual_fast_checks(self):
        for check in (
            acceptance.check_soliton_mass,
            acceptance.check_gn_constants,
            acceptance.check_topology,
            acceptance.check_bridge_doubling,
            acceptance.check_tail_regularization,
            acceptance.check_gradient,
            acceptance.check_modified_gn,
        ):
            with self.subTest(check=check.__name__):
                result = check()
                self.assertTrue(result.passed, result.detail)

    def test_raising_check_is_reported(self):
        def check_broken():
            raise RuntimeError("no data")

        original = acceptance.FAST_CHECKS
        acceptance.FAST_CHECKS = [check_broken]
        try:
            results = acceptance.run_checks()
        finally:
            acceptance.FAST_CHECKS = original
        self.assertEqual(len(results), 1)
        self.assertFalse(results[0].passed)
        self.assertIn("RuntimeError", results[0].detail)

    def test_checks_are_registered(self):
        self.assertIn(acceptance.check_sandwich, acceptance.SLOW_CHECKS)
        self.assertIn(acceptance.check_modified_gn, acceptance.FAST_CHECKS)

    @unittest.skipUnless(SLOW, "set NLSGRAPH_SLOW=1 to run")
    def test_tadpole_window(self):
        result = acceptance.check_tadpole_window()
        self.assertTrue(result.passed, result.detail)

    @unittest.skipUnless(SLOW, "set NLSGRAPH_SLOW=1 to run")
    def test_sandwich(self):
        result = acceptance.check_sandwich()
        self.assertTrue(result.passed, result.detail)

    @unittest.skipUnless(SLOW, "set NLSGRAPH_SLOW=1 to run")
    def test_full_selftest(self):
        failed = [r.to_dict() for r in acceptance.run_checks(full=True) if not r.passed]
        self.assertEqual(failed, [])


if __name__ == "__main__":
    unittest.main()
