#include "qbsde/registry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qbsde/error.hpp"

namespace qbsde {

namespace {

double sq(std::span<const double> z) {
  double s = 0.0;
  for (double x : z) s += x * x;
  return s;
}

ProblemInstance decoupled_quadratic() {
  StructuralConstants s;
  s.C = 1.0;
  s.gamma = 1.0;
  s.xi_bound = 1.0;
  SystemGenerator gen({ScalarGenerator::pure_quadratic(1.0, 1)}, {}, s);
  ProblemInstance inst{
      "decoupled-quadratic", "n=1, f = |z|^2/2, xi = cos(W_T), no coupling", std::move(gen),
      TerminalMap::of_terminal_state(1, [](std::span<const double> w, std::span<double> out) {
        out[0] = std::cos(w[0]);
      }),
      {}};
  inst.working_epsilon = 0.25;
  inst.segment_length = 0.25;
  return inst;
}

// f^i = a z^i, h = B y with B the rotation generator of rate b; under the
// drift-shifted measure E[e^{iW_T}] is explicit, giving
// Y_0 = e^{-T/2} (cos((a+b)T), sin((a+b)T)).
ProblemInstance coupled_linear() {
  constexpr double a = 0.5;
  constexpr double b = 0.5;
  StructuralConstants s;
  s.n = 2;
  s.C = 1.0;
  s.gamma = 1.0;
  s.xi_bound = 1.0;
  auto lin = [](double, std::span<const double>, std::span<const double> z) { return a * z[0]; };
  std::vector<ScalarGenerator> fs{ScalarGenerator(lin, s.C, s.gamma, 1, a, s.T),
                                  ScalarGenerator(lin, s.C, s.gamma, 1, a, s.T)};
  auto h = [](double, std::span<const double>, std::span<const double> y, std::span<const double>,
              std::span<double> out) {
    out[0] = -b * y[1];
    out[1] = b * y[0];
  };
  ProblemInstance inst{
      "coupled-linear", "n=2, f^i = 0.5 z^i, h = B y (rotation, rate 0.5), xi = (cos W_T, sin W_T)",
      SystemGenerator(std::move(fs), h, s, true),
      TerminalMap::of_terminal_state(2, [](std::span<const double> w, std::span<double> out) {
        out[0] = std::cos(w[0]);
        out[1] = std::sin(w[0]);
      }),
      [](double T) {
        const double m = std::exp(-0.5 * T);
        return std::vector<double>{m * std::cos((a + b) * T), m * std::sin((a + b) * T)};
      }};
  inst.working_epsilon = 0.25;
  inst.segment_length = 0.25;
  return inst;
}

ProblemInstance coupled_quadratic() {
  StructuralConstants s;
  s.n = 2;
  s.C = 1.0;
  s.gamma = 1.0;
  s.xi_bound = 1.0;
  std::vector<ScalarGenerator> fs{ScalarGenerator::pure_quadratic(1.0, 1),
                                  ScalarGenerator::pure_quadratic(1.0, 1)};
  auto h = [](double, std::span<const double>, std::span<const double> y, std::span<const double> z,
              std::span<double> out) {
    out[0] = 0.5 * std::sin(y[1]) + 0.25 * std::tanh(z[1]);
    out[1] = 0.5 * std::sin(y[0]) + 0.25 * std::tanh(z[0]);
  };
  ProblemInstance inst{
      "coupled-quadratic",
      "n=2, f^i = |z^i|^2/2, h^1 = sin(y2)/2 + tanh(z2)/4, h^2 = sin(y1)/2 + tanh(z1)/4, "
      "xi = (cos W_T, sin W_T)",
      SystemGenerator(std::move(fs), h, s, true),
      TerminalMap::of_terminal_state(2, [](std::span<const double> w, std::span<double> out) {
        out[0] = std::cos(w[0]);
        out[1] = std::sin(w[0]);
      }),
      {}};
  inst.working_epsilon = 0.5;
  inst.segment_length = 0.25;
  return inst;
}

// ξ ≡ 1, f = 0, h = -y: Y_t = e^{-(T-t)}.
ProblemInstance linear_decay() {
  StructuralConstants s;
  s.C = 1.0;
  s.gamma = 1.0;
  s.xi_bound = 1.0;
  auto h = [](double, std::span<const double>, std::span<const double> y, std::span<const double>,
              std::span<double> out) { out[0] = -y[0]; };
  ProblemInstance inst{
      "linear-decay", "n=1, f = 0, h = -y, xi = 1", SystemGenerator({ScalarGenerator::zero(1)}, h, s, true),
      TerminalMap::of_terminal_state(1, [](std::span<const double>, std::span<double> out) { out[0] = 1.0; }),
      [](double T) { return std::vector<double>{std::exp(-T)}; }};
  return inst;
}

ScalarGenerator quadratic(double gamma, double shift = 0.0) {
  return ScalarGenerator(
      [gamma, shift](double, std::span<const double>, std::span<const double> z) {
        return 0.5 * gamma * sq(z) + shift;
      },
      std::abs(shift), gamma, 1, gamma);
}

double shape_value(IntegrandShape shape, double w) {
  switch (shape) {
    case IntegrandShape::kConstant: return 1.0;
    case IntegrandShape::kPositivePart: return w > 0.0 ? 1.0 : 0.0;
    case IntegrandShape::kTanh: return std::tanh(w);
    case IntegrandShape::kCos: return std::cos(w);
  }
  return 0.0;
}

}  // namespace

std::vector<InstanceInfo> list_instances() {
  return {
      {"decoupled-quadratic", decoupled_quadratic().description},
      {"coupled-linear", coupled_linear().description},
      {"coupled-quadratic", coupled_quadratic().description},
      {"linear-decay", linear_decay().description},
      {"battery:scalar", "a priori and comparison checks on scalar quadratic problems"},
      {"battery:john-nirenberg", "exponential QV moments of constant and random integrands"},
      {"battery:reverse-holder", "moments of stochastic exponentials below the threshold"},
      {"battery:girsanov", "BMO norms under a change of measure, random (M, N) pairs"},
  };
}

ProblemInstance builtin_instance(const std::string& id) {
  if (id == "decoupled-quadratic") return decoupled_quadratic();
  if (id == "coupled-linear") return coupled_linear();
  if (id == "coupled-quadratic") return coupled_quadratic();
  if (id == "linear-decay") return linear_decay();
  throw InvalidArgument("unknown instance '" + id + "'");
}

ProblemInstance resolve_instance(const std::string& id_or_path, std::size_t probes) {
  for (const auto& info : list_instances()) {
    if (info.id == id_or_path && info.id.rfind("battery:", 0) != 0) return builtin_instance(id_or_path);
  }
  if (id_or_path.rfind("battery:", 0) == 0) {
    throw InvalidArgument("'" + id_or_path + "' is a lemma battery; run verify-lemmas");
  }
  return parse_instance_file(id_or_path, probes);
}

std::vector<ScalarCase> scalar_battery() {
  auto zero = [](double, double) { return 0.0; };
  return {
      {"quad-cos", quadratic(1.0), [](double w) { return std::cos(w); }, zero},
      {"quad-sin-drv", quadratic(1.0), [](double w) { return std::sin(w); },
       [](double, double w) { return 0.5 * std::tanh(w); }},
      {"quad-tanh-drv", quadratic(2.0), [](double w) { return std::tanh(w); },
       [](double, double w) { return 0.3 * std::cos(w); }},
      {"shifted-quad", quadratic(1.0, 0.5), [](double w) { return 0.5 * std::cos(w); }, zero},
  };
}

std::vector<ComparisonCase> comparison_battery() {
  auto zero = [](double, double) { return 0.0; };
  auto cosw = [](double w) { return std::cos(w); };
  auto drv = [](double, double w) { return 0.5 * std::tanh(w); };
  return {
      {"terminal-shift", {"xi", quadratic(1.0), cosw, zero},
       {"xi+0.5", quadratic(1.0), [](double w) { return std::cos(w) + 0.5; }, zero}},
      {"generator-shift", {"f", quadratic(1.0), cosw, drv}, {"f+1", quadratic(1.0, 1.0), cosw, drv}},
      {"curvature", {"gamma=0.5", quadratic(0.5), cosw, zero}, {"gamma=1", quadratic(1.0), cosw, zero}},
  };
}

DriverField case_driver(const ScalarCase& c, const PathEnsemble& ensemble) {
  DriverField g(ensemble.num_nodes(), ensemble.num_paths(), 1);
  for (std::size_t k = 0; k < ensemble.num_nodes(); ++k) {
    const double t = ensemble.grid().time(k);
    for (std::size_t p = 0; p < ensemble.num_paths(); ++p) g(k, p, 0) = c.g(t, ensemble.w(k, p, 0));
  }
  return g;
}

std::vector<double> case_terminal(const ScalarCase& c, const PathEnsemble& ensemble) {
  const std::size_t last = ensemble.num_nodes() - 1;
  std::vector<double> xi(ensemble.num_paths());
  for (std::size_t p = 0; p < xi.size(); ++p) xi[p] = c.xi(ensemble.w(last, p, 0));
  return xi;
}

double IntegrandSpec::sup() const {
  double m = 0.0;
  for (double c : levels) m = std::max(m, std::abs(c));
  return m;
}

std::string IntegrandSpec::label() const {
  static const char* names[] = {"const", "1{W>0}", "tanh(W)", "cos(W)"};
  std::ostringstream os;
  os << names[static_cast<int>(shape)] << " x [";
  for (std::size_t j = 0; j < levels.size(); ++j) os << (j ? " " : "") << levels[j];
  os << "]";
  return os.str();
}

IntegrandField make_integrand(const PathEnsemble& ensemble, const IntegrandSpec& spec) {
  if (spec.levels.empty()) throw InvalidArgument("integrand needs at least one level");
  const TimeGrid& grid = ensemble.grid();
  const std::size_t J = spec.levels.size();
  IntegrandField out(ensemble.num_nodes(), ensemble.num_paths(), ensemble.dim());
  for (std::size_t k = 0; k < ensemble.num_nodes(); ++k) {
    const double frac = (grid.time(k) - grid.t0()) / grid.horizon();
    const auto j = std::min(J - 1, static_cast<std::size_t>(std::floor(frac * static_cast<double>(J))));
    for (std::size_t p = 0; p < ensemble.num_paths(); ++p) {
      out(k, p, 0) = spec.levels[j] * shape_value(spec.shape, ensemble.w(k, p, 0));
    }
  }
  return out;
}

std::vector<IntegrandSpec> random_integrands(std::size_t count, std::uint64_t seed, double max_sup) {
  std::vector<IntegrandSpec> out;
  for (std::size_t i = 0; i < count; ++i) {
    IntegrandSpec s;
    s.shape = static_cast<IntegrandShape>(i % 4);
    for (std::size_t j = 0; j < 4; ++j) {
      // uniform on (-1, 1) through the normal CDF
      const double u = std::erf(counter_normal(seed, i, j, 7) / std::sqrt(2.0));
      s.levels.push_back(max_sup * u);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace qbsde
