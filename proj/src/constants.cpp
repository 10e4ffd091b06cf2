#include "qbsde/constants.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <string>

#include "qbsde/error.hpp"

namespace qbsde {

namespace {

const double kMaxExp = std::log(DBL_MAX);
const long double kMaxExpLong = std::log(LDBL_MAX);

std::string num(long double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12Lg", v);
  return buf;
}

void require(bool ok, const char* inequality, const std::string& detail) {
  if (!ok) throw InvariantError(inequality, detail);
}

long double checked_expl(const char* what, long double exponent) {
  if (exponent > kMaxExpLong) throw OverflowError(what, static_cast<double>(exponent));
  if (exponent < -kMaxExpLong) throw OverflowError(std::string(what) + " (underflow)",
                                                   static_cast<double>(exponent));
  return std::exp(exponent);
}

}  // namespace

void StructuralConstants::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw InvalidArgument("structural constant C must be > 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be > 0");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in [0, 1)");
  if (n < 1) throw InvalidArgument("system dimension n must be >= 1");
  if (d < 1) throw InvalidArgument("Brownian dimension d must be >= 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("horizon T must be > 0");
  if (!(xi_bound >= 0.0) || !std::isfinite(xi_bound)) {
    throw InvalidArgument("terminal bound |xi|_inf must be >= 0");
  }
}

double phi(double y, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("phi needs gamma > 0");
  const double a = gamma * std::abs(y);
  if (a > kMaxExp) throw OverflowError("phi", a);
  return (std::expm1(a) - a) / (gamma * gamma);
}

double phi_prime(double y, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("phi' needs gamma > 0");
  const double a = gamma * std::abs(y);
  if (a > kMaxExp) throw OverflowError("phi'", a);
  const double sgn = y > 0 ? 1.0 : (y < 0 ? -1.0 : 0.0);
  return std::expm1(a) / gamma * sgn;
}

double phi_double_prime(double y, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("phi'' needs gamma > 0");
  const double a = gamma * std::abs(y);
  if (a > kMaxExp) throw OverflowError("phi''", a);
  return std::exp(a);
}

double capital_phi_offset(double s) {
  if (!(s > 0.0)) throw DomainError("capital_phi needs x > 1");
  const double x = 1.0 + s;
  const double u = std::log1p(1.0 / (2.0 * s)) / (x * x);
  // sqrt(1+u) - 1 without cancellation for small u
  return u / (std::sqrt(1.0 + u) + 1.0);
}

double capital_phi(double x) {
  if (!(x > 1.0)) throw DomainError("capital_phi needs x > 1 (got " + num(x) + ")");
  return capital_phi_offset(x - 1.0);
}

double find_p_for_threshold(double K) {
  if (!(K > 0.0) || !std::isfinite(K)) throw DomainError("threshold K must be > 0");
  const double target = K * (1.0 + 1e-3);
  // Bisection on t = log(p - 1); Φ(1 + e^t) is decreasing in t.
  auto f = [&](double t) { return capital_phi_offset(std::exp(t)) - target; };
  double lo = 0.0;
  double hi = 0.0;
  if (f(0.0) > 0.0) {
    hi = 1.0;
    while (f(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 700.0) throw DomainError("threshold too small to bracket");
    }
  } else {
    lo = -1.0;
    while (!(f(lo) > 0.0)) {
      hi = lo;
      lo *= 2.0;
      if (lo < -700.0) throw DomainError("threshold K=" + num(K) + " exceeds Φ on doubles");
    }
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double p = 1.0 + std::exp(lo);
  if (!(p > 1.0) || !(capital_phi(p) > K)) {
    throw DomainError("p with Φ(p) > " + num(K) + " is not representable as a double");
  }
  return p;
}

double delta_alpha(double gamma, double delta, double alpha) {
  if (!(gamma > 0.0) || !(delta > 0.0)) throw DomainError("delta_alpha needs gamma, delta > 0");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw DomainError("delta_alpha needs alpha in [0, 1)");
  return 0.5 * std::pow(gamma, 2.0 / (1.0 - alpha)) *
         std::pow(delta, -(1.0 + alpha) / (1.0 - alpha)) * (1.0 - alpha);
}

double reverse_holder_constant(double p, double b) {
  if (!(p > 1.0)) throw DomainError("reverse Hölder exponent must be > 1");
  if (!(b >= 0.0)) throw DomainError("BMO norm must be >= 0");
  const double exponent = p * p * (b * b + 2.0 * b);
  if (exponent > kMaxExp) throw DomainError("BMO norm beyond Φ(p)");
  const double denom = 1.0 - 2.0 * (p - 1.0) / (2.0 * p - 1.0) * std::exp(exponent);
  if (!(denom > 0.0)) {
    throw DomainError("reverse Hölder needs ‖M‖ < Φ(p) (b=" + num(b) + ", Φ(p)=" +
                      num(capital_phi(p)) + ")");
  }
  return 2.0 / denom;
}

long double LocalSolveParameters::quadratic_relative_residual() const {
  const long double t1 = delta * A * A;
  const long double t2 = (1 + 4 * k_term * delta) * A;
  const long double t3 = 4 * k_term;
  const long double t4 = 4 * mu * std::exp(log_C_delta + log_xi_factor + std::log(epsilon));
  const long double scale = std::max({std::abs(t1), std::abs(t2), std::abs(t3), std::abs(t4)});
  return std::abs(t1 - t2 + t3 + t4) / scale;
}

long double LocalSolveParameters::balance_lhs() const {
  return k_term +
         mu * std::exp(log_C_delta + log_xi_factor + std::log(epsilon)) / (1 - delta * A) +
         A / 4;
}

long double LocalSolveParameters::balance_relative_error() const {
  return std::abs(balance_lhs() - balance_rhs()) / std::abs(balance_rhs());
}

long double LocalSolveParameters::log_ball_u_bound() const {
  return log_C_delta + log_xi_factor - std::log(1 - delta * A);
}

LocalSolveParameters local_parameters(const StructuralConstants& s,
                                      std::optional<double> epsilon_override) {
  s.validate();
  using L = long double;
  const L C = s.C;
  const L g = s.gamma;
  const L a = s.alpha;
  const L n = static_cast<L>(s.n);
  const L T = s.T;
  const L xi = s.xi_bound;

  LocalSolveParameters r;
  r.delta = g * g * std::exp(-g * xi) / (8 * C * n);
  r.log_C_delta = 6 * g * C * T / (1 - a) + 1.5L * g * C * std::pow(n / r.delta, (1 + a) / 2) * T;
  r.C_delta = checked_expl("C_delta", r.log_C_delta);
  r.beta = 0.5L * (1 - a) * std::pow(C, 2 / (1 - a)) * std::pow(2 * (1 + a), (1 + a) / (1 - a));
  r.mu1 = 1 - a + (1 - a) * (1 - a) / ((1 + a) * g);
  r.mu2 = 1 + a + (1 - a) / g;
  r.mu = (r.beta + C * r.mu1) * std::pow(g, 2 / (a - 1)) + C * r.mu2;

  r.epsilon_lipschitz_cap = 1 / (3 * n * C);
  const L log_eps_exp = std::log(C * n / (8 * r.mu)) - r.log_C_delta - 2 * std::log(g) +
                        (1 - 3 * n / (1 - a)) * g * xi;
  r.epsilon_exponential_cap = checked_expl("epsilon", log_eps_exp);
  if (r.epsilon_lipschitz_cap <= r.epsilon_exponential_cap) {
    r.epsilon_max = r.epsilon_lipschitz_cap;
    r.epsilon_binding = EpsilonBinding::kLipschitzCap;
  } else {
    r.epsilon_max = r.epsilon_exponential_cap;
    r.epsilon_binding = EpsilonBinding::kExponentialCap;
  }
  r.epsilon = r.epsilon_max;
  if (epsilon_override) {
    const L e = *epsilon_override;
    require(e > 0, "epsilon > 0", "override " + num(e));
    require(e <= r.epsilon_max * (1 + 1e-12L), "epsilon <= epsilon_max",
            "override " + num(e) + " exceeds certified " + num(r.epsilon_max));
    if (e < r.epsilon_max) {
      r.epsilon = e;
      r.epsilon_binding = EpsilonBinding::kUserOverride;
    }
  }

  r.k_term = C * n * std::exp(g * xi) / (g * g);
  r.log_xi_factor = 3 * n * g * xi / (1 - a);
  const L eps_term = r.mu * std::exp(r.log_C_delta + r.log_xi_factor + std::log(r.epsilon));
  const L lead = 1 - 4 * r.k_term * r.delta;
  r.Delta = lead * lead - 16 * r.delta * eps_term;
  // rounding at the exponential cap, where Δ vanishes analytically
  if (r.Delta < 0 && r.Delta > -1e-15L * lead * lead) r.Delta = 0;
  require(r.Delta >= 0, "Delta >= 0", "Delta = " + num(r.Delta));
  r.A = (1 + 4 * r.k_term * r.delta - std::sqrt(r.Delta)) / (2 * r.delta);

  require(r.A > 0, "A > 0", "A = " + num(r.A));
  require(r.A <= 3 / (4 * r.delta) * (1 + 1e-15L), "A <= 3/(4 delta)", "A = " + num(r.A));
  const L one_minus = 1 - r.delta * r.A;
  require(one_minus > 0, "1 - delta*A > 0", num(one_minus));
  require(std::abs(one_minus - (1 + 2 * std::sqrt(r.Delta)) / 4) <= 1e-12L,
          "1 - delta*A = (1 + 2 sqrt(Delta))/4", num(one_minus));
  require(r.epsilon <= r.epsilon_lipschitz_cap * (1 + 1e-15L), "epsilon <= 1/(3nC)",
          num(r.epsilon));
  require(r.quadratic_relative_residual() <= 1e-10L, "A solves its quadratic",
          "relative residual " + num(r.quadratic_relative_residual()));
  require(r.balance_relative_error() <= 1e-10L, "balance identity",
          "relative error " + num(r.balance_relative_error()));
  return r;
}

double uniform_y_bound(double C, double xi_bound, double time_to_horizon) {
  if (!(C >= 0.0) || !(xi_bound >= 0.0) || !(time_to_horizon >= 0.0)) {
    throw InvalidArgument("uniform bound needs C, |xi|, T - t >= 0");
  }
  const double c1 = std::max(C, xi_bound) + 1.0;
  const double exponent = 0.5 * c1 * c1 * time_to_horizon;
  if (exponent > kMaxExp) throw OverflowError("lambda", exponent);
  return c1 * std::exp(exponent);
}

double z_bmo_bound(const StructuralConstants& s, double lambda) {
  const double n = static_cast<double>(s.n);
  const double dphi = phi_prime(lambda, s.gamma);
  return s.C * n * dphi * std::sqrt(s.T) +
         std::sqrt(2.0 * n * phi(s.xi_bound, s.gamma) + 2.0 * s.C * n * dphi * (2.0 + lambda) * s.T);
}

GlobalSolveParameters global_parameters(const StructuralConstants& s) {
  s.validate();
  if (s.alpha != 0.0) throw InvalidArgument("global solutions need alpha = 0");
  GlobalSolveParameters g;
  g.lambda = uniform_y_bound(s.C, s.xi_bound, s.T);
  StructuralConstants at_lambda = s;
  at_lambda.xi_bound = g.lambda;
  g.eta_lambda = local_parameters(at_lambda).epsilon_max;
  g.z_bmo_bound = z_bmo_bound(s, g.lambda);
  return g;
}

}  // namespace qbsde
