#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "qbsde/bmo.hpp"
#include "qbsde/constants.hpp"
#include "qbsde/error.hpp"

using namespace qbsde;

namespace {

PathEnsemble ensemble(std::size_t paths = 20000, std::size_t steps = 20, std::uint64_t seed = 2) {
  return simulate_brownian(make_grid(0, 1, steps), paths, 1, seed);
}

IntegrandField indicator_integrand(const PathEnsemble& e, double c) {
  IntegrandField f(e.num_nodes(), e.num_paths(), 1);
  for (std::size_t k = 0; k < e.num_nodes(); ++k)
    for (std::size_t p = 0; p < e.num_paths(); ++p) f(k, p, 0) = e.w(k, p, 0) > 0 ? c : 0.0;
  return f;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of_mean(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

TEST(Bmo2Norm, ConstantIntegrand) {
  const auto e = ensemble(2000);
  const auto est = bmo2_norm(e, constant_integrand(e, 0.7));
  EXPECT_NEAR(est.norm_sq, 0.49, 1e-12);
  EXPECT_EQ(est.argmax_node, 0u);
  const auto s = e.slice(5, 20);
  EXPECT_NEAR(bmo2_norm(s, constant_integrand(s, 0.7)).norm_sq, 0.49 * 0.75, 1e-12);
}

TEST(Bmo2Norm, Zero) {
  const auto e = ensemble(500);
  EXPECT_EQ(bmo2_norm(e, constant_integrand(e, 0.0)).norm_sq, 0.0);
}

TEST(Bmo2Norm, FirstHalfIndicator) {
  const auto e = ensemble(500);
  IntegrandField f(e.num_nodes(), e.num_paths(), 1);
  for (std::size_t k = 0; k < 10; ++k)
    for (std::size_t p = 0; p < e.num_paths(); ++p) f(k, p, 0) = 0.8;
  EXPECT_NEAR(bmo2_norm(e, f).norm_sq, 0.64 * 0.5, 1e-10);
}

TEST(Bmo2Norm, HomogeneousOfDegreeTwo) {
  const auto e = ensemble(3000);
  auto f = indicator_integrand(e, 0.5);
  const double a = bmo2_norm(e, f).norm_sq;
  f *= 2.0;
  EXPECT_NEAR(bmo2_norm(e, f).norm_sq, 4.0 * a, 1e-12 * a);
}

TEST(Bmo2Norm, NormIsMaxOfNodes) {
  const auto e = ensemble(3000);
  const auto est = bmo2_norm(e, indicator_integrand(e, 0.9));
  double m = 0.0;
  for (double v : est.per_node_ess_sup) m = std::max(m, v);
  EXPECT_EQ(est.norm_sq, m);
  EXPECT_GE(est.norm_sq, 0.0);
}

TEST(Bmo2Norm, NonFiniteRejected) {
  const auto e = ensemble(100);
  auto f = constant_integrand(e, 1.0);
  f(2, 3, 0) = NAN;
  EXPECT_THROW(bmo2_norm(e, f), DomainError);
}

TEST(StochasticExponential, ZeroIntegrand) {
  const auto e = ensemble(100);
  for (double v : stochastic_exponential(e, constant_integrand(e, 0.0), 0, 20)) EXPECT_EQ(v, 1.0);
}

TEST(StochasticExponential, MartingaleMeanAndLogMean) {
  const auto e = ensemble(40000);
  const double c = 0.6;
  const auto f = constant_integrand(e, c);
  const auto v = stochastic_exponential(e, f, 0, 20);
  EXPECT_LE(std::abs(mean(v) - 1.0), 5.0 * stderr_of_mean(v));
  const auto l = log_stochastic_exponential(e, f, 0, 20);
  EXPECT_LE(std::abs(mean(l) + 0.5 * c * c), 5.0 * stderr_of_mean(l));
}

TEST(StochasticExponential, Multiplicative) {
  const auto e = ensemble(300);
  const auto f = indicator_integrand(e, 0.8);
  const auto a = stochastic_exponential(e, f, 2, 9);
  const auto b = stochastic_exponential(e, f, 9, 17);
  const auto ab = stochastic_exponential(e, f, 2, 17);
  for (std::size_t p = 0; p < a.size(); ++p) EXPECT_NEAR(a[p] * b[p], ab[p], 1e-13 * ab[p]);
}

TEST(StochasticExponential, Errors) {
  const auto e = ensemble(100);
  EXPECT_THROW(stochastic_exponential(e, constant_integrand(e, 1.0), 5, 3), InvalidArgument);
}

TEST(StochasticExponential, LargeIntegrandUnderflowsToZero) {
  const auto e = ensemble(100);
  for (double v : stochastic_exponential(e, constant_integrand(e, 1000.0), 0, 20)) EXPECT_EQ(v, 0.0);
}

TEST(JohnNirenberg, ConstantIntegrandIsExact) {
  const auto e = ensemble(1000);
  const double c = 0.8;
  const auto rep = john_nirenberg_check(e, constant_integrand(e, c));
  ASSERT_TRUE(rep.applicable);
  EXPECT_TRUE(rep.holds);
  EXPECT_NEAR(rep.bound, 1.0 / (1.0 - c * c), 1e-12);
  for (std::size_t k = 0; k < e.num_nodes(); ++k) {
    const double t = e.grid().time(k);
    EXPECT_NEAR(rep.node_estimate[k], std::exp(c * c * (1.0 - t)), 1e-9);
    EXPECT_LE(std::exp(c * c * (1.0 - t)), rep.bound);
  }
}

TEST(JohnNirenberg, PositivePartIntegrandHolds) {
  const auto e = ensemble();
  const auto rep = john_nirenberg_check(e, indicator_integrand(e, 0.9));
  ASSERT_TRUE(rep.applicable);
  EXPECT_TRUE(rep.holds) << rep.worst_violation_se;
  EXPECT_GE(rep.worst_slack, -3.0 * *std::max_element(rep.node_se.begin(), rep.node_se.end()));
}

TEST(JohnNirenberg, LargeNormIsInapplicable) {
  const auto e = ensemble(200);
  const auto rep = john_nirenberg_check(e, constant_integrand(e, 1.1));
  EXPECT_FALSE(rep.applicable);
  EXPECT_FALSE(rep.reason.empty());
}

TEST(ReverseHolder, ZeroIntegrand) {
  const auto e = ensemble(500);
  for (double p : {1.5, 2.0, 4.0}) {
    const auto rep = reverse_holder_check(e, constant_integrand(e, 0.0), p);
    EXPECT_TRUE(rep.applicable);
    for (double v : rep.node_estimate) EXPECT_NEAR(v, 1.0, 1e-12);
  }
}

TEST(ReverseHolder, LognormalMoment) {
  const auto e = ensemble(40000);
  const double c = 0.2;
  const double p = find_p_for_threshold(2 * c);
  ASSERT_GT(capital_phi(p), c);
  const auto rep = reverse_holder_check(e, constant_integrand(e, c), p);
  ASSERT_TRUE(rep.applicable);
  EXPECT_TRUE(rep.holds);
  for (std::size_t k = 0; k + 1 < e.num_nodes(); k += 4) {
    const double exact = std::exp(0.5 * p * (p - 1.0) * c * c * (1.0 - e.grid().time(k)));
    EXPECT_LE(std::abs(rep.node_estimate[k] - exact), 5.0 * rep.node_se[k] + 1e-12) << "node " << k;
  }
}

TEST(ReverseHolder, EmpiricalConstantNondecreasingInP) {
  const auto e = ensemble(20000);
  const auto f = indicator_integrand(e, 0.3);
  double prev = 0.0;
  for (double p : {1.5, 2.0, 3.0, 4.0}) {
    const double cp = reverse_holder_check(e, f, p).empirical_c_p;
    EXPECT_GE(cp, prev * (1.0 - 1e-3));
    prev = cp;
  }
}

TEST(ReverseHolder, InapplicableBeyondPhi) {
  const auto e = ensemble(500);
  const auto rep = reverse_holder_check(e, constant_integrand(e, 0.5), 4.0);
  EXPECT_FALSE(rep.applicable);
  EXPECT_THROW(reverse_holder_check(e, constant_integrand(e, 0.1), 1.0), InvalidArgument);
}

TEST(Girsanov, ZeroN) {
  const auto e = ensemble(5000);
  const auto rep = girsanov_bmo_equivalence(e, indicator_integrand(e, 0.7), constant_integrand(e, 0.0), 0.5);
  ASSERT_TRUE(rep.applicable);
  EXPECT_NEAR(rep.ratio, 1.0, 1e-12);
  EXPECT_TRUE(rep.within);
  EXPECT_LE(rep.bounds.c1, 1.0);
  EXPECT_GE(rep.bounds.c2, 1.0);
}

TEST(Girsanov, EqualConstantIntegrands) {
  // M = N = cW: ⟨M̃⟩ = ⟨M⟩ is deterministic, so both norms are c²T
  const auto e = ensemble(5000);
  const double c = 0.4;
  const auto rep = girsanov_bmo_equivalence(e, constant_integrand(e, c), constant_integrand(e, c), 0.5);
  ASSERT_TRUE(rep.applicable);
  EXPECT_NEAR(rep.norm_M, c, 1e-12);
  EXPECT_NEAR(rep.norm_M_tilde, c, 1e-9);
  EXPECT_TRUE(rep.within);
  const auto& b = rep.bounds;
  EXPECT_GT(b.p, 1.0);
  EXPECT_GT(capital_phi(b.p), b.K);
  EXPECT_LE(b.c1, b.c2);
}

TEST(Girsanov, NormOfNAboveKIsInapplicable) {
  const auto e = ensemble(500);
  const auto rep = girsanov_bmo_equivalence(e, constant_integrand(e, 0.3), constant_integrand(e, 0.8), 0.5);
  EXPECT_FALSE(rep.applicable);
}

TEST(Girsanov, IndicatorPair) {
  const auto e = ensemble(20000);
  const auto rep = girsanov_bmo_equivalence(e, indicator_integrand(e, 1.0), indicator_integrand(e, 0.5), 0.5);
  ASSERT_TRUE(rep.applicable);
  EXPECT_TRUE(rep.within) << rep.ratio << " not in [" << rep.bounds.c1 << ", " << rep.bounds.c2 << "]";
  EXPECT_LE(rep.bounds.c1, rep.bounds.c2);
}

TEST(NormEquivalence, ConstantIntegrandRatioIsOne) {
  const auto e = ensemble(1000);
  for (double p : {1.0, 2.0, 4.0}) EXPECT_NEAR(norm_equivalence_ratio(e, constant_integrand(e, 0.5), p), 1.0, 1e-9);
}
