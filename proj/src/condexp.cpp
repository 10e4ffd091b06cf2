#include "qbsde/condexp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qbsde/error.hpp"

namespace qbsde {

namespace {

void enumerate_monomials(const std::vector<std::size_t>& active, std::size_t state_dim,
                         std::size_t degree, std::vector<std::vector<int>>& out) {
  // Graded order: all monomials of total degree 0, then 1, ...
  std::vector<int> exps(state_dim, 0);
  for (std::size_t total = 0; total <= degree; ++total) {
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t idx, std::size_t left) {
      if (idx + 1 == active.size()) {
        exps[active[idx]] = static_cast<int>(left);
        out.push_back(exps);
        exps[active[idx]] = 0;
        return;
      }
      for (std::size_t e = left + 1; e-- > 0;) {
        exps[active[idx]] = static_cast<int>(e);
        rec(idx + 1, left - e);
      }
      exps[active[idx]] = 0;
    };
    if (active.empty()) {
      if (total == 0) out.push_back(exps);
      continue;
    }
    rec(0, total);
  }
}

FeatureMap build_feature_map(std::span<const double> state, std::size_t n_paths,
                             std::size_t state_dim, const RegressionBasis& basis) {
  if (basis.order == 0) throw InvalidArgument("regression basis order must be >= 1");
  FeatureMap fm;
  fm.kind = basis.kind;
  fm.state_dim = state_dim;
  if (basis.kind == BasisKind::kPolynomial) {
    fm.center.assign(state_dim, 0.0);
    fm.scale.assign(state_dim, 0.0);
    std::vector<std::size_t> active;
    for (std::size_t c = 0; c < state_dim; ++c) {
      double mean = 0.0;
      for (std::size_t p = 0; p < n_paths; ++p) mean += state[p * state_dim + c];
      mean /= static_cast<double>(n_paths);
      double var = 0.0;
      for (std::size_t p = 0; p < n_paths; ++p) {
        const double d = state[p * state_dim + c] - mean;
        var += d * d;
      }
      const double sd = std::sqrt(var / static_cast<double>(n_paths));
      fm.center[c] = mean;
      if (sd > 1e-12 * (1.0 + std::abs(mean))) {
        fm.scale[c] = sd;
        active.push_back(c);
      }
    }
    enumerate_monomials(active, state_dim, basis.order, fm.monomials);
  } else {
    if (state_dim != 1) throw InvalidArgument("piecewise-bins basis needs a scalar state");
    std::vector<double> sorted(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(n_paths));
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();
    for (std::size_t j = 1; j < basis.order; ++j) {
      const double e = sorted[j * n_paths / basis.order];
      if (e >= lo && e < hi && (fm.edges.empty() || e > fm.edges.back())) fm.edges.push_back(e);
    }
  }
  return fm;
}

}  // namespace

Eigen::MatrixXd FeatureMap::design(std::span<const double> state, std::size_t n_paths) const {
  const std::size_t k = num_features();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n_paths), static_cast<Eigen::Index>(k));
  if (state.size() != n_paths * state_dim) throw InvalidArgument("state array has wrong size");
  if (kind == BasisKind::kPolynomial) {
    int max_deg = 0;
    for (const auto& m : monomials) {
      for (int e : m) max_deg = std::max(max_deg, e);
    }
    std::vector<double> powers(state_dim * static_cast<std::size_t>(max_deg + 1));
    for (std::size_t p = 0; p < n_paths; ++p) {
      for (std::size_t c = 0; c < state_dim; ++c) {
        const double z = scale[c] > 0 ? (state[p * state_dim + c] - center[c]) / scale[c] : 0.0;
        double acc = 1.0;
        for (int e = 0; e <= max_deg; ++e) {
          powers[c * static_cast<std::size_t>(max_deg + 1) + static_cast<std::size_t>(e)] = acc;
          acc *= z;
        }
      }
      for (std::size_t j = 0; j < k; ++j) {
        double v = 1.0;
        for (std::size_t c = 0; c < state_dim; ++c) {
          const int e = monomials[j][c];
          if (e != 0) v *= powers[c * static_cast<std::size_t>(max_deg + 1) + static_cast<std::size_t>(e)];
        }
        X(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = v;
      }
    }
  } else {
    for (std::size_t p = 0; p < n_paths; ++p) {
      const double x = state[p];
      X(static_cast<Eigen::Index>(p), 0) = 1.0;
      for (std::size_t j = 0; j < edges.size(); ++j) {
        X(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j + 1)) = x > edges[j] ? 1.0 : 0.0;
      }
    }
  }
  return X;
}

std::vector<double> basis_state(const RegressionBasis& basis, const PathEnsemble& ensemble,
                                std::size_t node, std::size_t* state_dim) {
  if (node >= ensemble.num_nodes()) throw InvalidArgument("regression node outside the grid");
  if (!basis.state) {
    const auto w = ensemble.w_at(node);
    *state_dim = ensemble.dim();
    return {w.begin(), w.end()};
  }
  auto s = basis.state(ensemble, node);
  if (s.empty() || s.size() % ensemble.num_paths() != 0) {
    throw InvalidArgument("state map returned an array that is not paths × state_dim");
  }
  *state_dim = s.size() / ensemble.num_paths();
  return s;
}

NodeProjector::NodeProjector(const PathEnsemble& ensemble, std::size_t node,
                             const RegressionBasis& basis, double ridge,
                             std::span<const double> weights)
    : node_(node), basis_(basis), ridge_(ridge) {
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw InvalidArgument("ridge must be >= 0");
  const std::size_t n = ensemble.num_paths();
  std::size_t sdim = 0;
  const auto state = basis_state(basis, ensemble, node, &sdim);
  features_ = build_feature_map(state, n, sdim, basis);
  design_ = features_.design(state, n);
  if (features_.kind == BasisKind::kBins) {
    bin_of_.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
      bin_of_[p] = static_cast<std::size_t>(std::llround(design_.row(static_cast<Eigen::Index>(p)).sum())) - 1;
    }
  }

  Eigen::MatrixXd gram;
  if (!weights.empty()) {
    if (weights.size() != n) throw InvalidArgument("weights length differs from path count");
    weights_.resize(static_cast<Eigen::Index>(n));
    for (std::size_t p = 0; p < n; ++p) {
      if (!std::isfinite(weights[p]) || !(weights[p] > 0.0)) {
        throw DomainError("regression weights must be positive and finite (path " +
                          std::to_string(p) + ")");
      }
      weights_[static_cast<Eigen::Index>(p)] = weights[p];
    }
    const Eigen::MatrixXd weighted = design_.array().colwise() * weights_.array();
    gram = design_.transpose() * weighted;
  } else {
    gram = design_.transpose() * design_;
  }
  const Eigen::Index k = gram.rows();
  if (ridge > 0.0 && k > 1) {
    const double mean_diag = gram.diagonal().tail(k - 1).mean();
    const double bump = ridge * (mean_diag > 0.0 ? mean_diag : 1.0);
    for (Eigen::Index j = 1; j < k; ++j) gram(j, j) += bump;
  }
  normal_.compute(gram);
  const auto D = normal_.vectorD();
  const double dmax = D.cwiseAbs().maxCoeff();
  if (normal_.info() != Eigen::Success || !(D.minCoeff() > 1e-13 * dmax)) {
    throw RankDeficientError("normal matrix at node " + std::to_string(node) +
                             " is singular; use a positive regularization or a smaller basis");
  }
}

Eigen::VectorXd NodeProjector::solve(std::span<const double> targets) const {
  if (targets.size() != static_cast<std::size_t>(design_.rows())) {
    throw InvalidArgument("target length differs from path count");
  }
  Eigen::Map<const Eigen::VectorXd> y(targets.data(), static_cast<Eigen::Index>(targets.size()));
  if (!y.allFinite()) throw DomainError("regression targets must be finite");
  if (weights_.size() > 0) {
    const Eigen::VectorXd wy = weights_.cwiseProduct(y);
    return normal_.solve(design_.transpose() * wy);
  }
  return normal_.solve(design_.transpose() * y);
}

Eigen::MatrixXd NodeProjector::sandwich(const Eigen::VectorXd& residual) const {
  Eigen::VectorXd s = residual;
  if (weights_.size() > 0) s = s.cwiseProduct(weights_);
  const Eigen::Index k = design_.cols();
  if (!bin_of_.empty()) {
    // cumulative indicators: meat(i, j) = Σ s² over paths with bin ≥ max(i, j)
    Eigen::VectorXd tail = Eigen::VectorXd::Zero(k);
    for (std::size_t p = 0; p < bin_of_.size(); ++p) {
      tail[static_cast<Eigen::Index>(bin_of_[p])] += s[static_cast<Eigen::Index>(p)] * s[static_cast<Eigen::Index>(p)];
    }
    for (Eigen::Index j = k - 1; j-- > 0;) tail[j] += tail[j + 1];
    Eigen::MatrixXd meat(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) meat(i, j) = tail[std::max(i, j)];
    }
    const Eigen::MatrixXd inv = normal_.solve(Eigen::MatrixXd::Identity(k, k));
    return inv * meat * inv;
  }
  const Eigen::MatrixXd scaled = design_.array().colwise() * s.array();
  const Eigen::MatrixXd meat = scaled.transpose() * scaled;
  const Eigen::MatrixXd inv = normal_.solve(Eigen::MatrixXd::Identity(k, k));
  return inv * meat * inv;
}

CondExpEstimator NodeProjector::fit(std::span<const double> targets) const {
  CondExpEstimator est;
  est.node_ = node_;
  est.basis_ = basis_;
  est.features_ = features_;
  est.ridge_ = ridge_;
  est.coef_ = solve(targets);
  Eigen::Map<const Eigen::VectorXd> y(targets.data(), static_cast<Eigen::Index>(targets.size()));
  const Eigen::VectorXd residual = y - design_ * est.coef_;
  est.coef_cov_ = sandwich(residual);
  if (weights_.size() > 0) {
    est.residual_sd_ =
        std::sqrt(weights_.dot(residual.cwiseAbs2()) / weights_.sum());
  } else {
    est.residual_sd_ = std::sqrt(residual.squaredNorm() / static_cast<double>(residual.size()));
  }
  return est;
}

NodeProjector::Projection NodeProjector::project(std::span<const double> targets,
                                                 bool with_se) const {
  const Eigen::VectorXd coef = solve(targets);
  const Eigen::VectorXd fitted = design_ * coef;
  Projection out;
  out.values.assign(fitted.data(), fitted.data() + fitted.size());
  if (with_se) {
    Eigen::Map<const Eigen::VectorXd> y(targets.data(), static_cast<Eigen::Index>(targets.size()));
    const Eigen::MatrixXd cov = sandwich(y - fitted);
    if (!bin_of_.empty()) {
      // one variance per bin: the sum of the leading (b+1)×(b+1) block
      const Eigen::Index k = cov.rows();
      std::vector<double> per_bin(static_cast<std::size_t>(k));
      double acc = 0.0;
      for (Eigen::Index b = 0; b < k; ++b) {
        acc += cov(b, b) + 2.0 * cov.row(b).head(b).sum();
        per_bin[static_cast<std::size_t>(b)] = std::sqrt(std::max(0.0, acc));
      }
      out.se.resize(bin_of_.size());
      for (std::size_t p = 0; p < bin_of_.size(); ++p) out.se[p] = per_bin[bin_of_[p]];
      return out;
    }
    const Eigen::VectorXd var = (design_ * cov).cwiseProduct(design_).rowwise().sum();
    out.se.resize(static_cast<std::size_t>(var.size()));
    for (Eigen::Index i = 0; i < var.size(); ++i) {
      out.se[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, var[i]));
    }
  }
  return out;
}

std::vector<double> CondExpEstimator::predict(const PathEnsemble& ensemble,
                                              std::size_t node) const {
  if (node != node_) {
    throw InvalidArgument("estimator fitted at node " + std::to_string(node_) +
                          " used at node " + std::to_string(node));
  }
  std::size_t sdim = 0;
  const auto state = basis_state(basis_, ensemble, node, &sdim);
  if (sdim != features_.state_dim) throw InvalidArgument("state dimension changed since fit");
  const Eigen::VectorXd v = features_.design(state, ensemble.num_paths()) * coef_;
  return {v.data(), v.data() + v.size()};
}

std::vector<double> CondExpEstimator::standard_errors(const PathEnsemble& ensemble,
                                                      std::size_t node) const {
  if (node != node_) throw InvalidArgument("estimator node mismatch");
  std::size_t sdim = 0;
  const auto state = basis_state(basis_, ensemble, node, &sdim);
  const Eigen::MatrixXd X = features_.design(state, ensemble.num_paths());
  const Eigen::VectorXd var = (X * coef_cov_).cwiseProduct(X).rowwise().sum();
  std::vector<double> out(static_cast<std::size_t>(var.size()));
  for (Eigen::Index i = 0; i < var.size(); ++i) {
    out[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, var[i]));
  }
  return out;
}

CondExpEstimator fit(const PathEnsemble& ensemble, std::size_t node,
                     std::span<const double> targets, const RegressionBasis& basis,
                     double regularization) {
  return NodeProjector(ensemble, node, basis, regularization).fit(targets);
}

CondExpEstimator weighted_fit(const PathEnsemble& ensemble, std::size_t node,
                              std::span<const double> targets, std::span<const double> weights,
                              const RegressionBasis& basis, double regularization) {
  if (weights.empty()) throw InvalidArgument("weighted_fit needs weights");
  return NodeProjector(ensemble, node, basis, regularization, weights).fit(targets);
}

std::vector<double> predict(const CondExpEstimator& estimator, const PathEnsemble& ensemble,
                            std::size_t node) {
  return estimator.predict(ensemble, node);
}

}  // namespace qbsde
