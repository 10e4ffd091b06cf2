#include <gtest/gtest.h>

#include <cmath>

#include "qbsde/error.hpp"
#include "qbsde/picard.hpp"
#include "qbsde/registry.hpp"

using namespace qbsde;

namespace {

PathEnsemble window(double eps, std::size_t steps, std::size_t paths, std::size_t d = 1,
                    std::uint64_t seed = 1, double T = 1.0) {
  return simulate_brownian(make_grid(T - eps, T, steps), paths, d, seed);
}

PathVectors terminal(const ProblemInstance& inst, const PathEnsemble& e) {
  return evaluate_terminal(e, inst.xi).values;
}

LocalSolveOptions working(std::size_t degree = 5) {
  LocalSolveOptions o;
  o.gamma.basis = RegressionBasis::polynomial(degree);
  return o;
}

double geometric_mean_ratio(const IterationTrace& trace) {
  double s = 0.0;
  int n = 0;
  for (const auto& r : trace.records) {
    if (std::isfinite(r.ratio) && r.ratio > 0.0) {
      s += std::log(r.ratio);
      ++n;
    }
  }
  return n ? std::exp(s / n) : 0.0;
}

StructuralConstants two_by_one() {
  StructuralConstants s;
  s.n = 2;
  s.xi_bound = 1.0;
  return s;
}

}  // namespace

TEST(SystemGenerator, UncoupledWritesZeroH) {
  const auto inst = builtin_instance("decoupled-quadratic");
  EXPECT_FALSE(inst.generator.coupled());
  double out = 3.0, w = 0.0, y = 1.0, z = 2.0;
  inst.generator.h(0.5, {&w, 1}, {&y, 1}, {&z, 1}, {&out, 1});
  EXPECT_EQ(out, 0.0);
}

TEST(SystemGenerator, RejectsHAboveGrowthBound) {
  auto h = [](double, std::span<const double>, std::span<const double> y, std::span<const double>,
              std::span<double> out) {
    out[0] = 3.0 * y[1];
    out[1] = 0.0;
  };
  std::vector<ScalarGenerator> f{ScalarGenerator::pure_quadratic(1.0, 1), ScalarGenerator::pure_quadratic(1.0, 1)};
  try {
    SystemGenerator(f, h, two_by_one(), true);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.probe().size(), 1u + 1u + 2u + 2u);
  }
}

TEST(SystemGenerator, RejectsWrongComponentCount) {
  EXPECT_THROW(SystemGenerator({ScalarGenerator::pure_quadratic(1.0, 1)}, {}, two_by_one()), InvalidArgument);
}

TEST(GammaMap, UncoupledEqualsScalarSolve) {
  const auto inst = builtin_instance("decoupled-quadratic");
  const auto e = window(0.25, 10, 3000);
  const auto xi = terminal(inst, e);
  const auto basis = RegressionBasis::polynomial(3);
  const auto s0 = initial_state(InitialGuess::kZero, xi, e, 1);
  GammaOptions o;
  o.basis = basis;
  const auto g = gamma_map(s0, inst.generator, xi, e, o);
  const auto ref = solve_scalar(e, inst.generator.f(0), zero_driver(e), xi.component(0), basis);
  EXPECT_EQ(g.y0[0], ref.y0);
  for (std::size_t k = 0; k < e.num_nodes(); ++k) EXPECT_EQ(g.Y(k, 17, 0), ref.Y(k, 17, 0));
}

TEST(GammaMap, FrozenConstantDriver) {
  // h = -y with U ≡ u frozen: Y_t = 1 - u(T - t)
  const auto inst = builtin_instance("linear-decay");
  const auto e = window(0.5, 8, 500);
  const auto xi = terminal(inst, e);
  BallState s{AdaptedField(e.num_nodes(), e.num_paths(), 1, 0.3), AdaptedField(e.num_nodes(), e.num_paths(), 1)};
  const auto g = gamma_map(s, inst.generator, xi, e);
  for (std::size_t k = 0; k < e.num_nodes(); ++k) {
    EXPECT_NEAR(g.Y(k, 4, 0), 1.0 - 0.3 * (1.0 - e.grid().time(k)), 1e-12);
  }
}

TEST(GammaMap, ComponentDependsOnlyOnItsCoupling) {
  // h^1 reads (y2, z2) and h^2 reads (y1, z1): moving component 1 of the
  // state changes Y^2 only
  const auto inst = builtin_instance("coupled-quadratic");
  const auto e = window(0.25, 8, 2000);
  const auto xi = terminal(inst, e);
  const auto a = initial_state(InitialGuess::kConditionalMean, xi, e, 1);
  auto b = a;
  for (std::size_t k = 0; k < e.num_nodes(); ++k)
    for (std::size_t p = 0; p < e.num_paths(); ++p) {
      b.U(k, p, 0) += 0.4;
      b.V(k, p, 0) += 0.2;
    }
  const auto ga = gamma_map(a, inst.generator, xi, e);
  const auto gb = gamma_map(b, inst.generator, xi, e);
  EXPECT_EQ(ga.y0[0], gb.y0[0]);
  EXPECT_NE(ga.y0[1], gb.y0[1]);
}

TEST(GammaMap, ShapeAndFinitenessErrors) {
  const auto inst = builtin_instance("coupled-quadratic");
  const auto e = window(0.25, 4, 100);
  const auto xi = terminal(inst, e);
  BallState bad{AdaptedField(5, 100, 1), AdaptedField(5, 100, 2)};
  EXPECT_THROW(gamma_map(bad, inst.generator, xi, e), InvalidArgument);
  auto s = initial_state(InitialGuess::kZero, xi, e, 1);
  s.U(1, 2, 0) = NAN;
  EXPECT_THROW(gamma_map(s, inst.generator, xi, e), DomainError);
}

TEST(Ball, ZeroStateIsMember) {
  const auto inst = builtin_instance("coupled-quadratic");
  const auto& s = inst.generator.structural();
  const auto params = local_parameters(s);
  const auto m = ball_membership(BallMetrics{}, params, s);
  EXPECT_TRUE(m.member);
  EXPECT_NEAR(m.v_margin, static_cast<double>(params.A), 1e-12);
}

TEST(Ball, VNormAtTwiceAIsOutside) {
  const auto inst = builtin_instance("coupled-quadratic");
  const auto& s = inst.generator.structural();
  const auto params = local_parameters(s);
  const double A = static_cast<double>(params.A);
  const auto m = ball_membership(BallMetrics{2.0 * A, 0.0}, params, s);
  EXPECT_FALSE(m.member);
  EXPECT_FALSE(m.v_inside);
  EXPECT_TRUE(m.u_inside);
  EXPECT_NEAR(m.v_margin, -A, 1e-12 * A);
}

TEST(Ball, LargeUIsOutside) {
  const auto inst = builtin_instance("coupled-quadratic");
  const auto& s = inst.generator.structural();
  const auto params = local_parameters(s);
  const auto m = ball_membership(BallMetrics{0.0, 1e3}, params, s);
  EXPECT_FALSE(m.u_inside);
  EXPECT_LT(m.log_u_margin, 0.0);
}

TEST(Ball, GammaOfZeroIsMemberOnCertifiedWindow) {
  const auto inst = builtin_instance("coupled-quadratic");
  const auto& s = inst.generator.structural();
  const auto params = local_parameters(s);
  const double eps = static_cast<double>(params.epsilon);
  const auto e = window(eps, 4, 2000);
  const auto xi = terminal(inst, e);
  const auto g = gamma_map(initial_state(InitialGuess::kZero, xi, e, 1), inst.generator, xi, e);
  const auto metrics = measure_state({g.Y, g.Z}, e);
  EXPECT_TRUE(ball_membership(metrics, params, s).member);
  // and its Y respects the explicit bound
  EXPECT_LE(metrics.u_sup, step2_y_bound(params, s));
}

TEST(Ball, Step2BoundExceedsTerminalBound) {
  const auto inst = builtin_instance("decoupled-quadratic");
  const auto& s = inst.generator.structural();
  EXPECT_GT(step2_y_bound(local_parameters(s), s), s.xi_bound);
}

TEST(LocalSolve, DecoupledConvergesInTwoIterations) {
  // Γ does not depend on the state, so the second image equals the first
  const auto inst = builtin_instance("decoupled-quadratic");
  const auto e = window(0.25, 10, 5000);
  const auto res = local_solve(inst.generator, terminal(inst, e), e, working());
  EXPECT_LE(res.iterations, 2u);
  EXPECT_EQ(res.fixed_point_residual, 0.0);
}

TEST(LocalSolve, CoupledLinearMatchesClosedForm) {
  // W starts at 0 at the window's left end, so Y there is the closed form for horizon ε
  const auto inst = builtin_instance("coupled-linear");
  const double eps = 0.25;
  const auto e = window(eps, 20, 20000, 1, 3);
  const auto res = local_solve(inst.generator, terminal(inst, e), e, working());
  const auto exact = inst.closed_form_y0(eps);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LE(std::abs(res.solution.y0[i] - exact[i]), 3.0 * res.solution.y0_mc_se[i])
        << "component " << i << " y0 " << res.solution.y0[i] << " exact " << exact[i];
  }
}

TEST(LocalSolve, CoupledQuadraticContracts) {
  const auto inst = builtin_instance("coupled-quadratic");
  const auto e = window(inst.working_epsilon, 20, 10000);
  const auto opts = working();
  const auto res = local_solve(inst.generator, terminal(inst, e), e, opts);
  EXPECT_FALSE(res.trace.non_contraction);
  EXPECT_LE(res.fixed_point_residual, 2.0 * opts.tol);
  double prev = INFINITY;
  for (const auto& r : res.trace.records) {
    const double dist = std::max(r.y_dist_sup, r.z_dist_bmo);
    EXPECT_LT(dist, prev) << "iteration " << r.iteration;
    prev = dist;
    if (r.iteration > 1) EXPECT_LT(r.ratio, 1.0);
  }
}

TEST(LocalSolve, RatioShrinksWithWindow) {
  const auto inst = builtin_instance("coupled-quadratic");
  double prev = INFINITY;
  for (double eps : {0.5, 0.25, 0.125}) {
    const auto e = window(eps, 20, 10000);
    const double r = geometric_mean_ratio(local_solve(inst.generator, terminal(inst, e), e, working()).trace);
    EXPECT_LT(r, prev) << "eps " << eps;
    prev = r;
  }
}

TEST(LocalSolve, InitialGuessDoesNotMatter) {
  const auto inst = builtin_instance("coupled-quadratic");
  const auto e = window(0.25, 10, 5000);
  const auto xi = terminal(inst, e);
  auto a = working();
  auto b = working();
  b.initial = InitialGuess::kZero;
  const auto ra = local_solve(inst.generator, xi, e, a);
  const auto rb = local_solve(inst.generator, xi, e, b);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(ra.solution.y0[i], rb.solution.y0[i], 1e-5);
}

TEST(LocalSolve, CertifiedWindowChecks) {
  const auto inst = builtin_instance("coupled-quadratic");
  LocalSolveOptions o;
  o.certified = true;
  const auto long_window = window(0.25, 4, 200);
  EXPECT_THROW(local_solve(inst.generator, terminal(inst, long_window), long_window, o), InvalidArgument);
  const double eps = static_cast<double>(local_parameters(inst.generator.structural()).epsilon);
  const auto e = window(eps, 4, 2000);
  const auto res = local_solve(inst.generator, terminal(inst, e), e, o);
  for (const auto& r : res.trace.records) EXPECT_TRUE(r.in_ball);
}

TEST(LocalSolve, ExhaustedIterationsCarryTrace) {
  const auto inst = builtin_instance("coupled-quadratic");
  const auto e = window(0.5, 10, 2000);
  auto o = working(3);
  o.max_iter = 2;
  o.tol = 1e-14;
  try {
    local_solve(inst.generator, terminal(inst, e), e, o);
    FAIL();
  } catch (const ConvergenceError& err) {
    EXPECT_EQ(err.code(), ErrorCode::kNoConvergence);
    EXPECT_EQ(err.trace().records.size(), 2u);
  }
  o.tol = 0.0;
  EXPECT_THROW(local_solve(inst.generator, terminal(inst, e), e, o), InvalidArgument);
}

TEST(ContractionProbe, IdenticalInputs) {
  const auto inst = builtin_instance("coupled-quadratic");
  const auto e = window(0.25, 8, 2000);
  const auto xi = terminal(inst, e);
  const auto a = initial_state(InitialGuess::kConditionalMean, xi, e, 1);
  const auto rep = contraction_probe(a, a, inst.generator, xi, e);
  EXPECT_TRUE(rep.identity_input);
  EXPECT_TRUE(std::isnan(rep.ratio));
  EXPECT_EQ(rep.output_dist_sq, 0.0);
}

TEST(ContractionProbe, UncoupledMapsEverythingToOnePoint) {
  const auto inst = builtin_instance("decoupled-quadratic");
  const auto e = window(0.25, 8, 2000);
  const auto xi = terminal(inst, e);
  const auto a = initial_state(InitialGuess::kConditionalMean, xi, e, 1);
  const auto b = initial_state(InitialGuess::kZero, xi, e, 1);
  const auto rep = contraction_probe(a, b, inst.generator, xi, e);
  EXPECT_GT(rep.input_dist_sq, 0.0);
  EXPECT_EQ(rep.ratio, 0.0);
  ASSERT_EQ(rep.beta_bmo_sq.size(), 1u);
  EXPECT_EQ(rep.beta_bmo_sq[0], 0.0);
}

TEST(ContractionProbe, RatioBelowOneAndShrinking) {
  const auto inst = builtin_instance("coupled-quadratic");
  double prev = INFINITY;
  for (double eps : {0.5, 0.25, 0.125}) {
    const auto e = window(eps, 16, 5000);
    const auto xi = terminal(inst, e);
    const auto a = initial_state(InitialGuess::kConditionalMean, xi, e, 1);
    auto b = a;
    for (std::size_t k = 0; k < e.num_nodes(); ++k)
      for (std::size_t p = 0; p < e.num_paths(); ++p)
        for (std::size_t i = 0; i < 2; ++i) {
          b.U(k, p, i) += 0.1;
          b.V(k, p, i) -= 0.1;
        }
    const auto rep = contraction_probe(a, b, inst.generator, xi, e, GammaOptions{RegressionBasis::polynomial(5)});
    EXPECT_LT(rep.ratio, 1.0);
    EXPECT_LT(rep.ratio, prev) << "eps " << eps;
    for (double v : rep.beta_bmo_sq) EXPECT_LE(v, rep.beta_bound_sq);
    prev = rep.ratio;
  }
}
