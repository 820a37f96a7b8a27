import numpy as np
import pytest

from affiter import (
    ConfigurationError,
    EtaSchedule,
    catalog,
    error_budget_check,
    forward_backward,
    krasnoselskii_mann,
    linear_operator,
    normal_cone,
    peaceman_rachford,
    polyak_subgradient,
    projector,
    window,
)


def vec(*xs):
    return np.array(xs, dtype=np.float64)


class TestPeacemanRachford:
    def problem(self):
        return catalog("l1_quadratic", a=1.0)

    def test_converges_to_zero_of_the_sum(self):
        # zer(A + B) = {0}: the subgradient of |.| at 0 contains 1 = -B(0)
        prob = self.problem()
        preset = peaceman_rachford(
            prob.ingredients["A"], prob.ingredients["B"], gamma=1.0,
            weights=window(2), x0=vec(0.0), max_iters=50, stop_residual=0.0,
        )
        y, trace = preset.solve()
        assert abs(y[0]) <= 1e-8
        assert trace.n_steps == 50

    def test_extractor_matches_inner_resolvent(self):
        prob = self.problem()
        preset = peaceman_rachford(
            prob.ingredients["A"], prob.ingredients["B"], gamma=1.0,
            weights=window(2), x0=vec(0.3), max_iters=20, stop_residual=0.0,
        )
        y, trace = preset.solve()
        for n in range(trace.n_steps):
            xbar = trace.xbars[n]
            jb = prob.ingredients["B"].resolvent(1.0, xbar)
            assert np.array_equal(trace.aux[n]["y"], jb)

    def test_three_line_form_equivalence(self):
        # engine update must reproduce xbar + 2 (z - y) from the aux records
        prob = self.problem()
        preset = peaceman_rachford(
            prob.ingredients["A"], prob.ingredients["B"], gamma=1.0,
            weights=window(2), x0=vec(0.7), max_iters=15, stop_residual=0.0,
            a_errors=lambda n: vec(0.5**n * 0.1), b_errors=lambda n: vec(0.5**n * -0.05),
        )
        _, trace = preset.solve()
        for n in range(trace.n_steps):
            three_line = trace.xbars[n] + 2.0 * (trace.aux[n]["z"] - trace.aux[n]["y"])
            assert np.linalg.norm(trace.points[n + 1] - three_line) <= 1e-12

    def test_indicator_fixed_start_is_constant(self):
        # A = B = normal cone of the same set and a feasible start: nothing moves
        ball = normal_cone("ball", center=[0.0, 0.0], radius=1.0)
        preset = peaceman_rachford(
            ball, ball, gamma=1.0, weights=window(2),
            x0=vec(0.25, 0.1), max_iters=10, stop_residual=0.0,
        )
        y, trace = preset.solve()
        for p in trace.points:
            assert np.array_equal(p, vec(0.25, 0.1))
        assert np.array_equal(y, vec(0.25, 0.1))

    def test_summable_errors_preserve_limit_with_finite_budget(self):
        prob = self.problem()
        u = 1.0
        preset = peaceman_rachford(
            prob.ingredients["A"], prob.ingredients["B"], gamma=1.0,
            weights=window(2), x0=vec(0.0), max_iters=80, stop_residual=0.0,
            a_errors=lambda n: vec(0.5**n * u), b_errors=lambda n: vec(0.5**n * u),
        )
        y, trace = preset.solve()
        assert abs(y[0]) <= 1e-6
        report = error_budget_check(preset.config, 100)
        # declared budget per iteration is 2 (||a_n|| + ||b_n||), summing to 8u
        assert report.total == pytest.approx(8.0 * u, abs=1e-9)

    def test_rejects_families_without_adjacent_mass(self):
        from affiter import cesaro, memoryless

        prob = self.problem()
        for weights in (cesaro(), memoryless()):
            with pytest.raises(ConfigurationError, match="mu_"):
                peaceman_rachford(
                    prob.ingredients["A"], prob.ingredients["B"], gamma=1.0,
                    weights=weights, x0=vec(0.0),
                )


class TestForwardBackward:
    def problem(self):
        return catalog("l1_quadratic", a=2.0)

    def variant_preset(self, variant, **kw):
        prob = self.problem()
        args = dict(
            A=prob.ingredients["A"], B=prob.ingredients["grad"], beta=prob.beta,
            gamma=1.0, x0=vec(0.0), lam=1.0, max_iters=200,
            reference=prob.reference,
        )
        if variant == "mean":
            args["weights"] = window(3)
        if variant == "inertial":
            args["eta"] = EtaSchedule(kind="nesterov", tau=2.0)
        args.update(kw)
        return forward_backward(variant=variant, **args)

    @pytest.mark.parametrize("variant", ["memoryless", "mean", "inertial"])
    def test_reaches_soft_threshold_solution(self, variant):
        preset = self.variant_preset(variant)
        x, trace = preset.solve()
        assert abs(x[0] - 1.0) <= 1e-6
        assert trace.n_steps <= 200

    def test_gradient_residual_vanishes_at_solution(self):
        preset = self.variant_preset("memoryless")
        _, trace = preset.solve()
        grad = self.problem().ingredients["grad"]
        z = self.problem().reference
        assert np.linalg.norm(grad(trace.xbars[-1]) - grad(z)) <= 1e-6

    def test_memoryless_unit_relaxation_residual_identity(self):
        preset = self.variant_preset("memoryless")
        _, trace = preset.solve()
        for n in range(trace.n_steps):
            step_norm = np.linalg.norm(trace.points[n + 1] - trace.xbars[n])
            assert step_norm == pytest.approx(trace.residuals[n], abs=1e-14)

    def test_2d_problem_with_shorter_steps(self):
        prob = catalog("l1_quadratic", a=[2.0, -0.3])
        preset = forward_backward(
            A=prob.ingredients["A"], B=prob.ingredients["grad"], beta=prob.beta,
            gamma=0.7, x0=vec(0.0, 0.0), lam=1.1, max_iters=400,
            reference=prob.reference,
        )
        x, trace = preset.solve()
        assert np.linalg.norm(x - prob.reference) <= 1e-8

    def test_proximal_point_projects_in_one_step(self):
        cone = normal_cone("nonneg", bounded=False)
        preset = forward_backward(
            A=cone, B=None, beta=None, gamma=1.0, x0=vec(-3.0),
            variant="proximal_point", max_iters=10,
        )
        x, trace = preset.solve()
        assert np.array_equal(trace.points[1], vec(0.0))
        assert np.array_equal(x, vec(0.0))

    def test_gamma_band_enforced(self):
        prob = self.problem()
        with pytest.raises(ConfigurationError, match="gamma"):
            forward_backward(
                A=prob.ingredients["A"], B=prob.ingredients["grad"], beta=1.0,
                gamma=2.5, x0=vec(0.0), epsilon=0.1,
            )

    def test_lambda_band_enforced(self):
        prob = self.problem()
        with pytest.raises(ConfigurationError, match="cap"):
            forward_backward(
                A=prob.ingredients["A"], B=prob.ingredients["grad"], beta=1.0,
                gamma=1.0, x0=vec(0.0), epsilon=0.1, lam=1.6,
            ).solve()

    def test_inertial_with_errors_rejected_for_unbounded_domain(self):
        prob = self.problem()
        with pytest.raises(ConfigurationError, match="bounded"):
            forward_backward(
                A=prob.ingredients["A"], B=prob.ingredients["grad"], beta=1.0,
                gamma=1.0, x0=vec(0.0), variant="inertial",
                eta=EtaSchedule(kind="nesterov", tau=2.0),
                a_errors=lambda n: vec(0.5**n),
            )

    def test_inertial_with_errors_allowed_for_bounded_domain(self):
        # backward operator with bounded domain and unit relaxation is the
        # one supported error regime under inertial weights
        cone = normal_cone("ball", center=[0.0], radius=2.0)
        preset = forward_backward(
            A=cone, B=lambda x: x - 1.0, beta=1.0, gamma=1.0, x0=vec(0.0),
            variant="inertial", eta=EtaSchedule(kind="constant", eta=0.3),
            lam=1.0, a_errors=lambda n: vec(0.25**n * 0.01), max_iters=150,
        )
        x, _ = preset.solve()
        assert abs(x[0] - 1.0) <= 1e-4

    def test_mean_variant_rejects_inertial_weights(self):
        from affiter import inertial as inertial_weights

        prob = self.problem()
        with pytest.raises(ConfigurationError, match="nonnegative"):
            forward_backward(
                A=prob.ingredients["A"], B=prob.ingredients["grad"], beta=1.0,
                gamma=1.0, x0=vec(0.0), variant="mean",
                weights=inertial_weights(EtaSchedule(kind="constant", eta=0.5)),
            )


class TestPolyakSubgradient:
    def test_whole_space_scalar_collapses_in_one_step(self):
        # G sends any x to the level set of |.| at 0 immediately
        box = projector("box", lo=[-1e12], hi=[1e12])
        preset = polyak_subgradient(
            f=lambda x: float(np.abs(x).sum()),
            s=lambda x: np.sign(x),
            theta=0.0,
            region_projector=box,
            x0=vec(4.0),
            max_iters=5,
        )
        x, trace = preset.solve()
        assert trace.points[1] == pytest.approx(0.0)

    def test_feasible_optimal_start_is_constant(self):
        prob = catalog("polyak_norm_over_halfspace")
        preset = polyak_subgradient(
            f=prob.ingredients["f"], s=prob.ingredients["s"], theta=prob.theta,
            region_projector=prob.ingredients["projector"], x0=vec(1.0, 0.0),
            max_iters=10, stop_residual=0.0,
        )
        _, trace = preset.solve()
        for p in trace.points:
            assert np.allclose(p, vec(1.0, 0.0), atol=1e-15)

    def test_norm_over_halfspace_approaches_tangent_point(self):
        # the constraint boundary is tangent to the level set at (1, 0), so
        # the iterates approach at the alternating-projection rate ~ 1/sqrt(n)
        prob = catalog("polyak_norm_over_halfspace")
        preset = polyak_subgradient(
            f=prob.ingredients["f"], s=prob.ingredients["s"], theta=prob.theta,
            region_projector=prob.ingredients["projector"], x0=vec(3.0, 2.0),
            weights=window(2), max_iters=500, stop_residual=0.0,
            reference=prob.reference,
        )
        x, trace = preset.solve()
        errs = [np.linalg.norm(p - prob.reference) for p in trace.points[2:]]
        assert all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))
        final = np.linalg.norm(x - prob.reference)
        assert 1e-3 <= final <= 1e-1
        assert final * np.sqrt(500) == pytest.approx(1.22, abs=0.15)

    def test_epsilon_band(self):
        prob = catalog("polyak_norm_over_halfspace")
        with pytest.raises(ConfigurationError, match="epsilon"):
            polyak_subgradient(
                f=prob.ingredients["f"], s=prob.ingredients["s"], theta=prob.theta,
                region_projector=prob.ingredients["projector"], x0=vec(3.0, 2.0),
                eta_low=0.5, epsilon=0.3,
            )

    def test_lambda_band(self):
        prob = catalog("polyak_norm_over_halfspace")
        with pytest.raises(ConfigurationError, match="lambda"):
            polyak_subgradient(
                f=prob.ingredients["f"], s=prob.ingredients["s"], theta=prob.theta,
                region_projector=prob.ingredients["projector"], x0=vec(3.0, 2.0),
                lam=1.6, xi=1.0, eta_low=0.5, epsilon=0.05,
            )

    def test_start_projected_into_region(self):
        prob = catalog("polyak_norm_over_halfspace")
        preset = polyak_subgradient(
            f=prob.ingredients["f"], s=prob.ingredients["s"], theta=prob.theta,
            region_projector=prob.ingredients["projector"], x0=vec(-5.0, 2.0),
            max_iters=3,
        )
        assert preset.config.x0[0] == pytest.approx(1.0)


class TestKrasnoselskiiMann:
    def neg_id(self):
        return linear_operator(-np.eye(2), alpha=1.0)

    def test_mean_variant_rescues_negation(self):
        preset = krasnoselskii_mann(
            self.neg_id(), x0=vec(1.0, 0.0), variant="mean", weights=window(2),
            max_iters=60, stop_residual=0.0,
        )
        x, _ = preset.solve()
        assert np.linalg.norm(x) <= 1e-7

    def test_memoryless_baseline_oscillates(self):
        preset = krasnoselskii_mann(
            self.neg_id(), x0=vec(1.0, 0.0), variant="memoryless",
            max_iters=40, stop_residual=0.0,
        )
        _, trace = preset.solve()
        assert all(np.linalg.norm(p) == pytest.approx(1.0) for p in trace.points)

    def test_identity_constant_any_variant(self):
        from affiter import identity_operator

        eye = identity_operator()
        for kwargs in (
            dict(variant="memoryless"),
            dict(variant="mean", weights=window(2)),
            dict(variant="inertial", eta=EtaSchedule(kind="constant", eta=0.2), lam=0.5),
        ):
            preset = krasnoselskii_mann(eye, x0=vec(0.4, -0.7), max_iters=10, **kwargs)
            _, trace = preset.solve()
            assert all(np.array_equal(p, vec(0.4, -0.7)) for p in trace.points)

    def test_inertial_rotation_converges_to_origin(self):
        rot = catalog("rotation_fixed_point", angle=np.pi / 2).ingredients["T"]
        preset = krasnoselskii_mann(
            rot, x0=vec(1.0, 0.5), variant="inertial",
            eta=EtaSchedule(kind="constant", eta=0.2), lam=0.5,
            sigma=0.2, theta_tune=2.0 / 3.0, max_iters=300, stop_residual=0.0,
        )
        x, _ = preset.solve()
        assert np.linalg.norm(x) <= 1e-10

    def test_mean_variant_rejects_memoryless_weights(self):
        from affiter import memoryless

        with pytest.raises(ConfigurationError, match="mu_"):
            krasnoselskii_mann(self.neg_id(), x0=vec(1.0, 0.0), variant="mean",
                               weights=memoryless())

    def test_inertial_band_violation_rejected(self):
        with pytest.raises(ConfigurationError, match="band"):
            krasnoselskii_mann(
                self.neg_id(), x0=vec(1.0, 0.0), variant="inertial",
                eta=EtaSchedule(kind="constant", eta=0.9), lam=0.9,
                sigma=1.0, theta_tune=0.1,
            )

    def test_inertial_variant_refuses_errors(self):
        with pytest.raises(ConfigurationError, match="error-free"):
            krasnoselskii_mann(
                self.neg_id(), x0=vec(1.0, 0.0), variant="inertial",
                eta=EtaSchedule(kind="constant", eta=0.2), lam=0.5,
                errors=lambda n: vec(0.5**n, 0.0),
            )

    def test_mean_variant_with_summable_errors(self):
        preset = krasnoselskii_mann(
            self.neg_id(), x0=vec(1.0, 0.0), variant="mean", weights=window(2),
            errors=lambda n: vec(0.5**n * 0.01, 0.0), max_iters=120, stop_residual=0.0,
        )
        x, _ = preset.solve()
        assert np.linalg.norm(x) <= 1e-6
