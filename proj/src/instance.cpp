#include "qbsde/instance.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "qbsde/error.hpp"

namespace qbsde {

namespace {

struct Entry {
  std::string value;
  std::size_t line = 0;
  std::size_t column = 0;  // 1-based column of the value's first character
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double number(const Entry& e, const std::string& key) {
  char* end = nullptr;
  const double v = std::strtod(e.value.c_str(), &end);
  if (end == e.value.c_str() || *end != '\0' || !std::isfinite(v)) {
    throw ParseError("'" + key + "' needs a finite number", e.line, e.column);
  }
  return v;
}

std::size_t count(const Entry& e, const std::string& key) {
  const double v = number(e, key);
  if (v < 1 || v != std::floor(v) || v > 64) {
    throw ParseError("'" + key + "' needs an integer in 1..64", e.line, e.column);
  }
  return static_cast<std::size_t>(v);
}

bool boolean(const Entry& e, const std::string& key) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  throw ParseError("'" + key + "' needs true or false", e.line, e.column);
}

class Layout {
 public:
  Layout(std::size_t n, std::size_t d) : n_(n), d_(d) {}
  std::size_t size() const { return 1 + d_ + n_ + n_ * d_; }
  std::size_t w(std::size_t c) const { return 1 + c; }
  std::size_t y(std::size_t i) const { return 1 + d_ + i; }
  std::size_t z(std::size_t i, std::size_t c) const { return 1 + d_ + n_ + i * d_ + c; }

 private:
  std::size_t n_;
  std::size_t d_;
};

}  // namespace

std::vector<std::string> instance_variables(std::size_t n, std::size_t d) {
  std::vector<std::string> v{"t"};
  for (std::size_t c = 0; c < d; ++c) v.push_back(d == 1 ? "W" : "W" + std::to_string(c + 1));
  for (std::size_t i = 0; i < n; ++i) v.push_back("y" + std::to_string(i + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      v.push_back(d == 1 ? "z" + std::to_string(i + 1)
                         : "z" + std::to_string(i + 1) + "_" + std::to_string(c + 1));
    }
  }
  return v;
}

ProblemInstance parse_instance(std::istream& in, std::size_t probes) {
  std::map<std::string, Entry> entries;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string body = hash == std::string::npos ? raw : raw.substr(0, hash);
    if (trim(body).empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no, 1);
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ParseError("missing key before '='", line_no, 1);
    std::size_t vstart = eq + 1;
    while (vstart < body.size() && (body[vstart] == ' ' || body[vstart] == '\t')) ++vstart;
    Entry e{trim(body.substr(eq + 1)), line_no, vstart + 1};
    if (e.value.empty()) throw ParseError("missing value for '" + key + "'", line_no, vstart + 1);
    if (!entries.emplace(key, e).second) {
      throw ParseError("duplicate key '" + key + "'", line_no, body.find(key) + 1);
    }
  }

  std::set<std::string> used;
  auto need = [&](const std::string& key) -> const Entry& {
    auto it = entries.find(key);
    if (it == entries.end()) throw ParseError("missing required key '" + key + "'", line_no + 1, 1);
    used.insert(key);
    return it->second;
  };
  auto maybe = [&](const std::string& key) -> const Entry* {
    auto it = entries.find(key);
    if (it == entries.end()) return nullptr;
    used.insert(key);
    return &it->second;
  };

  const Entry& version = need("schema_version");
  if (number(version, "schema_version") != kInstanceSchemaVersion) {
    throw ParseError("unsupported schema_version " + version.value, version.line, version.column);
  }

  StructuralConstants s;
  s.n = count(need("n"), "n");
  s.d = count(need("d"), "d");
  s.T = number(need("T"), "T");
  s.C = number(need("C"), "C");
  s.gamma = number(need("gamma"), "gamma");
  if (const Entry* e = maybe("alpha")) s.alpha = number(*e, "alpha");
  if (const Entry* e = maybe("xi_bound")) s.xi_bound = number(*e, "xi_bound");
  if (!(s.alpha >= 0.0 && s.alpha < 1.0)) {
    const Entry& e = entries.at("alpha");
    throw ParseError("alpha must lie in [0, 1)", e.line, e.column);
  }
  s.validate();

  ProblemInstance inst{.name = "file",
                       .description = {},
                       .generator = SystemGenerator({ScalarGenerator::zero(1)}, {}, StructuralConstants{}),
                       .xi = {},
                       .closed_form_y0 = {}};
  if (const Entry* e = maybe("name")) inst.name = e->value;
  if (const Entry* e = maybe("description")) inst.description = e->value;
  if (const Entry* e = maybe("working_epsilon")) inst.working_epsilon = number(*e, "working_epsilon");
  if (const Entry* e = maybe("segment_length")) inst.segment_length = number(*e, "segment_length");
  const bool lipschitz_h = maybe("lipschitz_h") ? boolean(entries.at("lipschitz_h"), "lipschitz_h") : false;
  const double lipschitz_f = maybe("lipschitz_f") ? number(entries.at("lipschitz_f"), "lipschitz_f") : 0.0;

  const std::size_t n = s.n;
  const std::size_t d = s.d;
  const auto vars = instance_variables(n, d);
  const Layout lay(n, d);
  auto compile = [&](const Entry& e) { return Expression::compile(e.value, vars, e.line, e.column - 1); };
  auto reject_use = [&](const Expression& ex, const Entry& e, std::size_t index, const std::string& why) {
    if (ex.uses(index)) throw ParseError(vars[index] + ": " + why, e.line, e.column);
  };

  std::vector<Expression> xi_ex;
  std::vector<ScalarGenerator> fs;
  std::vector<Expression> hs;
  bool any_h = false;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string idx = std::to_string(i + 1);
    const Entry& xe = need("xi" + idx);
    Expression x = compile(xe);
    for (std::size_t j = 0; j < n; ++j) {
      reject_use(x, xe, lay.y(j), "terminal values may only depend on t and W");
      for (std::size_t c = 0; c < d; ++c) {
        reject_use(x, xe, lay.z(j, c), "terminal values may only depend on t and W");
      }
    }
    xi_ex.push_back(std::move(x));

    const Entry& fe = need("f" + idx);
    auto fx = std::make_shared<Expression>(compile(fe));
    for (std::size_t j = 0; j < n; ++j) {
      reject_use(*fx, fe, lay.y(j), "f" + idx + " may not depend on y; put coupling into h");
      if (j == i) continue;
      for (std::size_t c = 0; c < d; ++c) {
        reject_use(*fx, fe, lay.z(j, c), "f" + idx + " may only read row " + idx + " of z");
      }
    }
    const std::size_t size = lay.size();
    auto f = [fx, i, d, size, lay](double t, std::span<const double> w, std::span<const double> z) {
      thread_local std::vector<double> buf;
      buf.assign(size, 0.0);
      buf[0] = t;
      for (std::size_t c = 0; c < d; ++c) {
        buf[lay.w(c)] = w[c];
        buf[lay.z(i, c)] = z[c];
      }
      return (*fx)(buf);
    };
    try {
      fs.emplace_back(f, s.C, s.gamma, d, lipschitz_f, s.T, probes);
    } catch (const ValidationError& err) {
      throw ValidationError("f" + idx + ": " + err.what(), err.probe());
    }

    if (const Entry* he = maybe("h" + idx)) {
      hs.push_back(compile(*he));
      if (!hs.back().is_constant_zero()) any_h = true;
    } else {
      hs.push_back(Expression::constant(0.0));
    }
  }
  for (const auto& [key, e] : entries) {
    if (!used.count(key)) throw ParseError("unknown key '" + key + "'", e.line, 1);
  }

  SystemGenerator::HFn h;
  if (any_h) {
    auto shared = std::make_shared<std::vector<Expression>>(std::move(hs));
    const std::size_t size = lay.size();
    h = [shared, n, d, size, lay](double t, std::span<const double> w, std::span<const double> y,
                                  std::span<const double> z, std::span<double> out) {
      thread_local std::vector<double> buf;
      buf.assign(size, 0.0);
      buf[0] = t;
      for (std::size_t c = 0; c < d; ++c) buf[lay.w(c)] = w[c];
      for (std::size_t j = 0; j < n; ++j) buf[lay.y(j)] = y[j];
      for (std::size_t k = 0; k < n * d; ++k) buf[lay.z(0, 0) + k] = z[k];
      for (std::size_t j = 0; j < n; ++j) out[j] = (*shared)[j](buf);
    };
  }
  inst.generator = SystemGenerator(std::move(fs), std::move(h), s, lipschitz_h, probes);

  auto xs = std::make_shared<std::vector<Expression>>(std::move(xi_ex));
  const double T = s.T;
  const std::size_t size = lay.size();
  inst.xi = TerminalMap::of_terminal_state(
      n, [xs, T, d, size, lay](std::span<const double> wT, std::span<double> out) {
        thread_local std::vector<double> buf;
        buf.assign(size, 0.0);
        buf[0] = T;
        for (std::size_t c = 0; c < d; ++c) buf[lay.w(c)] = wT[c];
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = (*xs)[j](buf);
      });
  return inst;
}

ProblemInstance parse_instance_file(const std::string& path, std::size_t probes) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open instance file " + path);
  return parse_instance(in, probes);
}

}  // namespace qbsde
