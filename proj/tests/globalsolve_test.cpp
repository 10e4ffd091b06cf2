#include <gtest/gtest.h>

#include <cmath>

#include "qbsde/error.hpp"
#include "qbsde/globalsolve.hpp"
#include "qbsde/registry.hpp"

using namespace qbsde;

namespace {

PathEnsemble ensemble(std::size_t steps, std::size_t paths, std::uint64_t seed = 1) {
  return simulate_brownian(make_grid(0, 1, steps), paths, 1, seed);
}

GlobalSolveOptions options(double segment = 0.25, std::size_t degree = 5) {
  GlobalSolveOptions o;
  o.segment_length = segment;
  o.local.gamma.basis = RegressionBasis::polynomial(degree);
  return o;
}

}  // namespace

TEST(PlanStitch, ShortHorizonIsOneSegment) {
  const auto plan = plan_stitch(0.0, 0.3, 0.5L);
  EXPECT_EQ(plan.num_segments(), 1u);
  EXPECT_EQ(plan.breakpoints, (std::vector<double>{0.3, 0.0}));
}

TEST(PlanStitch, PartialFirstSegment) {
  const auto plan = plan_stitch(0.0, 1.0, 0.4L);
  ASSERT_EQ(plan.num_segments(), 3u);
  const auto len = plan.segment_lengths();
  EXPECT_NEAR(len[0], 0.4, 1e-15);
  EXPECT_NEAR(len[1], 0.4, 1e-15);
  EXPECT_NEAR(len[2], 0.2, 1e-15);
  EXPECT_EQ(plan.breakpoints.front(), 1.0);
  EXPECT_EQ(plan.breakpoints.back(), 0.0);
}

TEST(PlanStitch, ExactMultipleHasNoSliver) {
  EXPECT_EQ(plan_stitch(0.0, 1.0, 0.25L).num_segments(), 4u);
}

TEST(PlanStitch, LargerGrowthConstantNeedsMoreSegments) {
  StructuralConstants a;
  a.C = 0.05;
  a.gamma = 0.05;
  a.T = 1e-4;
  a.xi_bound = 0.0;
  StructuralConstants b = a;
  b.C = 0.1;
  const auto pa = plan_stitch(a, 1e-300);
  const auto pb = plan_stitch(b, 1e-300);
  EXPECT_LT(pb.eta, pa.eta);
  EXPECT_GE(pb.num_segments(), pa.num_segments());
}

TEST(PlanStitch, Rejections) {
  EXPECT_THROW(plan_stitch(1.0, 1.0, 0.1L), InvalidArgument);
  EXPECT_THROW(plan_stitch(0.0, 1.0, 0.0L), InvalidArgument);
  // with |ξ| replaced by λ the certified ledger of the coupled instances leaves the exponent range
  const auto inst = builtin_instance("coupled-linear");
  EXPECT_THROW(plan_stitch(inst.generator.structural()), OverflowError);
  StructuralConstants tiny;
  tiny.T = 1e-4;
  tiny.C = 0.05;
  tiny.gamma = 0.05;
  EXPECT_THROW(plan_stitch(tiny, 1.0), InvalidArgument);
  StructuralConstants s;
  s.alpha = 0.5;
  EXPECT_THROW(plan_stitch(s), InvalidArgument);
}

TEST(GlobalSolve, LinearDecayClosedForm) {
  // ξ ≡ 1 and f = 0: the scheme is deterministic, Y_t = e^{-(T-t)} up to O(Δt)
  const auto inst = builtin_instance("linear-decay");
  const auto e = ensemble(200, 200);
  const auto sol = global_solve(inst.generator, inst.xi, e, options(0.25, 2));
  EXPECT_EQ(sol.segments.size(), 4u);
  for (std::size_t k = 0; k < e.num_nodes(); k += 25) {
    const double exact = std::exp(-(1.0 - e.grid().time(k)));
    EXPECT_NEAR(sol.Y(k, 0, 0), exact, 5e-3) << "node " << k;
  }
  for (double j : sol.seam_jumps) EXPECT_EQ(j, 0.0);
}

TEST(GlobalSolve, CoupledLinearMatchesClosedForm) {
  const auto inst = builtin_instance("coupled-linear");
  const auto e = ensemble(40, 20000);
  const auto sol = global_solve(inst.generator, inst.xi, e, options());
  const auto exact = inst.closed_form_y0(1.0);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LE(std::abs(sol.y0[i] - exact[i]), 3.0 * sol.y0_mc_se[i]) << "component " << i;
  }
  EXPECT_LE(sol.y_sup, sol.lambda);
  ASSERT_EQ(sol.seam_jumps.size(), 3u);
  for (const auto& seg : sol.segments) {
    EXPECT_LE(seg.seam_y_sup, seg.seam_lambda);
    EXPECT_LE(seg.fixed_point_residual, 2.0 * options().local.tol);
  }
  const auto z = z_bmo_report(sol, inst.generator.structural());
  EXPECT_TRUE(z.holds);
  EXPECT_GT(z.estimate, 0.0);
}

TEST(GlobalSolve, SegmentationInvariance) {
  // the discrete fixed point is node-local, so one long segment and four
  // short ones agree up to the Picard tolerance
  const auto inst = builtin_instance("coupled-linear");
  const auto e = ensemble(20, 4000);
  const auto one = global_solve(inst.generator, inst.xi, e, options(1.0));
  const auto four = global_solve(inst.generator, inst.xi, e, options(0.25));
  EXPECT_EQ(one.segments.size(), 1u);
  EXPECT_EQ(four.segments.size(), 4u);
  EXPECT_LE(sup_distance(one.Y, four.Y), 1e-4);
}

TEST(GlobalSolve, Rejections) {
  const auto inst = builtin_instance("coupled-linear");
  const auto e = ensemble(10, 100);
  auto o = options(0.01);
  EXPECT_THROW(global_solve(inst.generator, inst.xi, e, o), InvalidArgument);
  o = options();
  o.mode = SolveMode::kCertified;
  EXPECT_THROW(global_solve(inst.generator, inst.xi, e, o), OverflowError);
  EXPECT_THROW(global_solve(inst.generator, builtin_instance("linear-decay").xi, e, options()), InvalidArgument);
}

TEST(ZBmoReport, BoundFromLedger) {
  GlobalSolution sol;
  sol.lambda = uniform_y_bound(1.0, 1.0, 1.0);
  sol.z_bmo_sq = 4.0;
  StructuralConstants s;
  s.xi_bound = 1.0;
  const auto rep = z_bmo_report(sol, s);
  EXPECT_EQ(rep.estimate, 2.0);
  EXPECT_EQ(rep.bound, z_bmo_bound(s, sol.lambda));
  EXPECT_NEAR(rep.slack, rep.bound - 2.0, 1e-12);
  EXPECT_TRUE(rep.holds);
}

TEST(Uniqueness, SameProblemPasses) {
  const auto inst = builtin_instance("coupled-linear");
  const auto a = ensemble(20, 5000, 1);
  const auto b = ensemble(20, 5000, 2);
  const auto rep = uniqueness_probe(inst.generator, inst.xi, a, b, options());
  EXPECT_TRUE(rep.passes);
  EXPECT_LE(rep.y_sup_distance, rep.same_tolerance);
  EXPECT_LE(rep.y0_seed_distance, rep.seed_tolerance);
}

TEST(Uniqueness, MismatchedGeneratorIsCaught) {
  const auto inst = builtin_instance("coupled-linear");
  const auto other = builtin_instance("coupled-quadratic");
  const auto a = ensemble(20, 5000, 1);
  const auto b = ensemble(20, 5000, 2);
  const auto rep = uniqueness_probe(inst.generator, inst.xi, a, b, options(), &other.generator);
  EXPECT_FALSE(rep.passes);
  EXPECT_GT(rep.y_sup_distance, rep.same_tolerance);
}
