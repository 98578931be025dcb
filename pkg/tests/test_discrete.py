import math
import unittest

import numpy as np

from nlsgraph.discrete import (
    DiscretizationError,
    GraphFunction,
    GridSpec,
    build_mesh,
    concentrate,
    concentration_width,
    distance_from,
    edge_kinetic,
    edge_lp,
    energy,
    energy_dual_gradient,
    from_edge_function,
    gn_quotient,
    interval_lp,
    kinetic,
    lp_norm_p,
    mass,
    omega_estimate,
    rescale_to_mass,
    stationary_residual,
    zeros,
)
from nlsgraph.graph_io import fixture_names, load_fixture
from nlsgraph.reference import CONSTANTS, soliton
from nlsgraph.solver import random_bumps


def soliton_on(name: str, lam: float = 1.0, h: float = 1e-3, L: float = 40.0) -> GraphFunction:
    mesh = build_mesh(load_fixture(name), GridSpec(h=h, L=L))
    return GraphFunction(mesh, soliton(lam, distance_from(mesh, vertex="v")))


class TestGridSpec(unittest.TestCase):

    def test_rejects_bad_step(self):
        with self.assertRaises(DiscretizationError):
            GridSpec(h=0.0)
        with self.assertRaises(DiscretizationError):
            GridSpec(h=float("nan"))

    def test_rejects_short_truncation(self):
        with self.assertRaises(DiscretizationError):
            GridSpec(L=5.0)
        with self.assertRaises(DiscretizationError):
            GridSpec(edge_L={"h": 9.0})

    def test_overrides(self):
        grid = GridSpec(h=0.1, L=20.0).replace(edge_h={"h": 0.025}, edge_n={"loop": 7})
        graph = load_fixture("tadpole")
        self.assertEqual(grid.step("h"), 0.025)
        self.assertEqual(grid.intervals(graph.edge("h")), 800)
        self.assertEqual(grid.intervals(graph.edge("loop")), 7)

    def test_hashable(self):
        self.assertEqual(hash(GridSpec(edge_h={"a": 0.1})), hash(GridSpec(edge_h=(("a", 0.1),))))

    def test_dict_form(self):
        grid = GridSpec(h=0.05, L=12.0, edge_n={"loop": 9})
        self.assertEqual(GridSpec.from_dict(grid.to_dict()), grid)


class TestMesh(unittest.TestCase):

    def test_lumped_mass_excludes_the_truncated_ends(self):
        mesh = build_mesh(load_fixture("line"), GridSpec(h=0.5, L=10.0))
        self.assertEqual(mesh.size, 1 + 2 * 19)
        self.assertAlmostEqual(float(np.sum(mesh.lumped)), 19.5)

    def test_loop_closes_on_its_vertex(self):
        mesh = build_mesh(load_fixture("tadpole"), GridSpec(h=0.1, L=10.0))
        nodes = mesh.edge_nodes["loop"]
        self.assertEqual(nodes[0], nodes[-1])
        self.assertEqual(mesh.edge_nodes["h"][-1], mesh.zero)

    def test_constants_on_the_core(self):
        mesh = build_mesh(load_fixture("signpost"), GridSpec(h=0.1, L=10.0))
        ones = from_edge_function(mesh, lambda edge, x: np.ones_like(x))
        self.assertEqual(edge_kinetic(ones, ["post", "loop"]), 0.0)
        self.assertAlmostEqual(edge_lp(ones, ["loop"], 2), 1.0)
        # only the last interval of each half-line drops to zero
        self.assertAlmostEqual(kinetic(ones), 2 / 0.1)


class TestGraphFunction(unittest.TestCase):

    def test_shape_checked(self):
        mesh = build_mesh(load_fixture("half_line"), GridSpec(h=0.5, L=10.0))
        with self.assertRaises(DiscretizationError):
            GraphFunction(mesh, np.zeros(mesh.size + 1))

    def test_values_must_be_finite(self):
        mesh = build_mesh(load_fixture("half_line"), GridSpec(h=0.5, L=10.0))
        values = np.zeros(mesh.size)
        values[3] = np.inf
        with self.assertRaises(DiscretizationError):
            GraphFunction(mesh, values)

    def test_values_are_read_only(self):
        u = zeros(build_mesh(load_fixture("half_line"), GridSpec(h=0.5, L=10.0)))
        with self.assertRaises(ValueError):
            u.values[0] = 1.0

    def test_distance_from_point(self):
        mesh = build_mesh(load_fixture("tadpole"), GridSpec(h=0.1, L=10.0))
        d = distance_from(mesh, point=("h", 2.0))
        self.assertAlmostEqual(d[mesh.vertex_index["v"]], 2.0)
        loop = mesh.edge_nodes["loop"][1:-1]
        # around the loop the nearest way back is through v
        self.assertAlmostEqual(float(np.max(d[loop])), 2.0 + math.pi, places=1)

    def test_distance_needs_one_source(self):
        mesh = build_mesh(load_fixture("tadpole"), GridSpec(h=0.1, L=10.0))
        with self.assertRaises(DiscretizationError):
            distance_from(mesh)


class TestIntegrals(unittest.TestCase):

    def test_interval_lp_same_sign(self):
        self.assertAlmostEqual(float(interval_lp(1.0, 1.0, 2.0, 2)), 2.0)
        self.assertAlmostEqual(float(interval_lp(0.0, 1.0, 1.0, 6)), 1 / 7)

    def test_interval_lp_sign_change(self):
        self.assertAlmostEqual(float(interval_lp(1.0, -1.0, 1.0, 2)), 1 / 3)
        self.assertAlmostEqual(float(interval_lp(2.0, -1.0, 3.0, 1)), 2.5)

    def test_interval_lp_rejects_bad_power(self):
        with self.assertRaises(DiscretizationError):
            interval_lp(1.0, 1.0, 1.0, 0)
        with self.assertRaises(DiscretizationError):
            interval_lp(1.0, 1.0, 1.0, 2.5)

    def test_soliton_mass_on_the_line(self):
        self.assertAlmostEqual(mass(soliton_on("line")), CONSTANTS.mu_R, delta=1e-5)

    def test_half_soliton_mass(self):
        self.assertAlmostEqual(mass(soliton_on("half_line")), CONSTANTS.mu_R_plus, delta=1e-5)

    def test_soliton_energy_vanishes(self):
        for lam in (1.0, 2.0):
            with self.subTest(lam=lam):
                self.assertAlmostEqual(energy(soliton_on("line", lam)).total, 0.0, delta=1e-4)

    def test_soliton_quotients(self):
        self.assertAlmostEqual(gn_quotient(soliton_on("line")), CONSTANTS.K_R, delta=1e-4)
        self.assertAlmostEqual(gn_quotient(soliton_on("half_line")), CONSTANTS.K_R_plus, delta=1e-3)

    def test_quotient_never_beats_the_half_line(self):
        rng = np.random.default_rng(5)
        for name in fixture_names():
            mesh = build_mesh(load_fixture(name), GridSpec(h=0.05, L=10.0))
            for k in range(20):
                u = random_bumps(mesh, rng)
                if k % 2:
                    u = u.with_values(u.values - 0.7 * random_bumps(mesh, rng).values)
                with self.subTest(graph=name, sample=k):
                    self.assertLessEqual(gn_quotient(u), CONSTANTS.K_R_plus + 1e-3)

    def test_quotient_of_zero(self):
        with self.assertRaises(DiscretizationError):
            gn_quotient(zeros(build_mesh(load_fixture("line"), GridSpec(h=0.5, L=10.0))))

    def test_energy_parts(self):
        u = soliton_on("tadpole", h=1e-2)
        e = energy(u)
        self.assertAlmostEqual(e.kinetic, kinetic(u) / 2)
        self.assertAlmostEqual(e.potential, lp_norm_p(u, 6) / 6)
        self.assertAlmostEqual(e.total, e.kinetic - e.potential)


class TestGradient(unittest.TestCase):

    def test_matches_finite_differences(self):
        # 100 directions per graph, errors measured against the size of the gradient
        rng = np.random.default_rng(7)
        eps = 1e-5
        for name in ("line", "half_line", "tadpole", "signpost"):
            mesh = build_mesh(load_fixture(name), GridSpec(h=0.05, L=10.0))
            u = GraphFunction(mesh, 0.5 * rng.normal(size=mesh.size))
            g = energy_dual_gradient(u)
            for k in range(100):
                v = rng.normal(size=mesh.size)
                fd = (energy(u.with_values(u.values + eps * v)).total - energy(u.with_values(u.values - eps * v)).total) / (
                    2 * eps
                )
                exact = float(g @ v)
                scale = abs(exact) + 1e-3 * float(np.linalg.norm(g) * np.linalg.norm(v))
                with self.subTest(graph=name, direction=k):
                    self.assertAlmostEqual(fd, exact, delta=1e-6 * scale)

    def test_soliton_multiplier(self):
        u = soliton_on("line", h=1e-2)
        omega = omega_estimate(u)
        self.assertAlmostEqual(omega, 1 / 3, delta=1e-3)
        self.assertLess(stationary_residual(u, omega), stationary_residual(u, 1.0))

    def test_residual_of_zero(self):
        self.assertEqual(stationary_residual(zeros(build_mesh(load_fixture("line"), GridSpec(h=0.5, L=10.0))), 1.0), 0.0)


class TestRescaling(unittest.TestCase):

    def test_rescale_to_mass(self):
        u = soliton_on("tadpole", h=1e-2)
        self.assertAlmostEqual(mass(rescale_to_mass(u, 2.0)), 2.0)

    def test_rescale_zero(self):
        with self.assertRaises(DiscretizationError):
            rescale_to_mass(zeros(build_mesh(load_fixture("line"), GridSpec(h=0.5, L=10.0))), 1.0)

    def test_concentrate_scales_energy_by_lambda_squared(self):
        mesh = build_mesh(load_fixture("half_line"), GridSpec(h=0.01, L=10.0))
        tent = from_edge_function(mesh, lambda edge, x: np.clip(1.0 - x, 0.0, None))
        squeezed = concentrate(tent, 2.0, "h")
        self.assertAlmostEqual(mass(squeezed), mass(tent))
        self.assertAlmostEqual(energy(squeezed).total / energy(tent).total, 4.0, places=6)
        self.assertLess(concentration_width(squeezed), concentration_width(tent))

    def test_concentrate_needs_support_on_the_edge(self):
        mesh = build_mesh(load_fixture("tadpole"), GridSpec(h=0.1, L=10.0))
        bump = GraphFunction(mesh, soliton(1.0, distance_from(mesh, point=("loop", math.pi))))
        with self.assertRaises(DiscretizationError):
            concentrate(bump, 2.0, "h")

    def test_concentrate_refuses_to_hide_interpolation_loss(self):
        # on h = 0.5 the tent squeezed by 3 keeps a single nonzero node
        mesh = build_mesh(load_fixture("half_line"), GridSpec(h=0.5, L=10.0))
        tent = from_edge_function(mesh, lambda edge, x: np.clip(1.0 - x, 0.0, None))
        with self.assertRaises(DiscretizationError) as ctx:
            concentrate(tent, 3.0, "h")
        self.assertIn("mass defect", str(ctx.exception))
        squeezed = concentrate(tent, 3.0, "h", mass_tolerance=1.0)
        self.assertAlmostEqual(mass(squeezed), mass(tent))

    def test_concentrate_logs_the_defect(self):
        mesh = build_mesh(load_fixture("half_line"), GridSpec(h=0.01, L=10.0))
        tent = from_edge_function(mesh, lambda edge, x: np.clip(1.0 - x, 0.0, None))
        with self.assertLogs("nlsgraph.discrete", level="DEBUG") as logs:
            concentrate(tent, 2.0, "h")
        self.assertTrue(any("mass defect" in line for line in logs.output))

    def test_concentrate_rejects_small_lambda(self):
        mesh = build_mesh(load_fixture("half_line"), GridSpec(h=0.1, L=10.0))
        with self.assertRaises(DiscretizationError):
            concentrate(zeros(mesh), 0.5, "h")


if __name__ == "__main__":
    unittest.main()
