#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "qbsde/paths.hpp"

namespace qbsde {

enum class BasisKind { kPolynomial, kBins };

/// Markov state at a node as a paths × state_dim array. Must only read
/// data up to `node`.
using StateMap = std::function<std::vector<double>(const PathEnsemble&, std::size_t node)>;

/// Regression basis for conditional expectations at one grid node.
///
/// Polynomial: all monomials of total degree ≤ `order` in the standardized
/// state. Bins: `order` equal-count bins of a scalar state. Both contain
/// the constants, so constant targets are reproduced exactly.
struct RegressionBasis {
  BasisKind kind = BasisKind::kPolynomial;
  std::size_t order = 3;
  /// Empty means the Brownian state W_t.
  StateMap state;

  static RegressionBasis polynomial(std::size_t degree = 3) {
    return {BasisKind::kPolynomial, degree, {}};
  }
  static RegressionBasis bins(std::size_t count) { return {BasisKind::kBins, count, {}}; }
};

/// Relative ridge weight: λ·tr(G)/k is added to the non-constant diagonal.
inline constexpr double kDefaultRidge = 1e-8;

/// Feature transform frozen at fit time; re-applied to any ensemble.
struct FeatureMap {
  BasisKind kind = BasisKind::kPolynomial;
  std::size_t state_dim = 0;
  std::vector<double> center;
  std::vector<double> scale;  // 0 marks a coordinate with no spread
  /// Exponent tuples, one per feature (polynomial).
  std::vector<std::vector<int>> monomials;
  /// Cumulative-indicator thresholds (bins); feature j>0 is 1{x > edges[j-1]}.
  std::vector<double> edges;

  std::size_t num_features() const {
    return kind == BasisKind::kPolynomial ? monomials.size() : edges.size() + 1;
  }
  Eigen::MatrixXd design(std::span<const double> state, std::size_t n_paths) const;
};

/// Least-squares estimate of E[target | F_node] as a function of the state.
class CondExpEstimator {
 public:
  std::size_t node() const noexcept { return node_; }
  const Eigen::VectorXd& coefficients() const noexcept { return coef_; }
  const FeatureMap& features() const noexcept { return features_; }
  double regularization() const noexcept { return ridge_; }
  /// Residual standard deviation of the fit (weighted when weights were used).
  double residual_sd() const noexcept { return residual_sd_; }

  std::vector<double> predict(const PathEnsemble& ensemble, std::size_t node) const;
  /// Per-path standard error of the prediction (HC0 sandwich).
  std::vector<double> standard_errors(const PathEnsemble& ensemble, std::size_t node) const;

 private:
  friend class NodeProjector;
  std::size_t node_ = 0;
  RegressionBasis basis_;
  FeatureMap features_;
  Eigen::VectorXd coef_;
  Eigen::MatrixXd coef_cov_;
  double ridge_ = kDefaultRidge;
  double residual_sd_ = 0.0;
};

/// Design matrix and factorized normal matrix at one node, reusable for
/// many targets on the same paths.
class NodeProjector {
 public:
  NodeProjector(const PathEnsemble& ensemble, std::size_t node, const RegressionBasis& basis,
                double ridge = kDefaultRidge, std::span<const double> weights = {});

  std::size_t num_features() const noexcept { return static_cast<std::size_t>(design_.cols()); }
  std::size_t node() const noexcept { return node_; }

  CondExpEstimator fit(std::span<const double> targets) const;

  struct Projection {
    std::vector<double> values;
    /// Empty unless requested.
    std::vector<double> se;
  };
  /// Fitted values on the projector's own paths.
  Projection project(std::span<const double> targets, bool with_se = false) const;

 private:
  Eigen::VectorXd solve(std::span<const double> targets) const;
  Eigen::MatrixXd sandwich(const Eigen::VectorXd& residual) const;

  std::size_t node_;
  RegressionBasis basis_;
  FeatureMap features_;
  Eigen::MatrixXd design_;
  /// Bins basis: bin index per path (rows are cumulative indicators).
  std::vector<std::size_t> bin_of_;
  Eigen::VectorXd weights_;  // empty = unweighted
  Eigen::LDLT<Eigen::MatrixXd> normal_;
  double ridge_;
};

CondExpEstimator fit(const PathEnsemble& ensemble, std::size_t node,
                     std::span<const double> targets, const RegressionBasis& basis,
                     double regularization = kDefaultRidge);

/// Weighted fit estimating E[target·w | F_node] / E[w | F_node]; with w the
/// stochastic exponential to the horizon this is the conditional
/// expectation under the reweighted measure.
CondExpEstimator weighted_fit(const PathEnsemble& ensemble, std::size_t node,
                              std::span<const double> targets, std::span<const double> weights,
                              const RegressionBasis& basis,
                              double regularization = kDefaultRidge);

std::vector<double> predict(const CondExpEstimator& estimator, const PathEnsemble& ensemble,
                            std::size_t node);

/// State array at a node for a basis (default W_t).
std::vector<double> basis_state(const RegressionBasis& basis, const PathEnsemble& ensemble,
                                std::size_t node, std::size_t* state_dim);

}  // namespace qbsde
