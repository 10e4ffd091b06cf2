#include "qbsde/paths.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "qbsde/error.hpp"

namespace qbsde {

TimeGrid::TimeGrid(double t0, double T, std::size_t steps) : t0_(t0), T_(T), steps_(steps) {
  if (!std::isfinite(t0) || !std::isfinite(T) || !(T > t0)) {
    throw InvalidArgument("time grid needs T > t0 (got t0=" + std::to_string(t0) +
                          ", T=" + std::to_string(T) + ")");
  }
  if (steps == 0) throw InvalidArgument("time grid needs at least one step");
}

double TimeGrid::time(std::size_t node) const {
  if (node > steps_) throw InvalidArgument("grid node out of range");
  if (node == steps_) return T_;
  return t0_ + static_cast<double>(node) * dt();
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> out(num_nodes());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = time(k);
  return out;
}

TimeGrid TimeGrid::slice(std::size_t first, std::size_t last) const {
  if (!(first < last) || last > steps_) throw InvalidArgument("invalid grid slice");
  return TimeGrid(time(first), time(last), last - first);
}

TimeGrid make_grid(double t0, double T, std::size_t steps) { return TimeGrid(t0, T, steps); }

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform in (0, 1) from a 64-bit hash; never exactly 0.
double to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t key(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                  std::uint64_t coord, std::uint64_t lane) {
  std::uint64_t h = splitmix_finalize(seed + kGolden);
  h = splitmix_finalize(h ^ (path * kGolden + 0x632BE59BD9B4E019ULL));
  h = splitmix_finalize(h ^ (step * kGolden + 0x8CB92BA72F3D8DD7ULL));
  h = splitmix_finalize(h ^ (coord * kGolden + 0xD6E8FEB86659FD93ULL));
  return splitmix_finalize(h ^ lane);
}

constexpr std::uint64_t kInitialStep = std::numeric_limits<std::uint64_t>::max();

}  // namespace

double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                      std::uint64_t coord) {
  const double u1 = to_open_unit(key(seed, path, step, coord, 0));
  const double u2 = to_open_unit(key(seed, path, step, coord, 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::span<const double> PathEnsemble::w_at(std::size_t node) const {
  if (node >= num_nodes()) throw InvalidArgument("ensemble node out of range");
  const std::size_t stride = num_paths() * dim();
  return {storage_->w.data() + (node_offset_ + node) * stride, stride};
}

std::span<const double> PathEnsemble::dw_at(std::size_t step) const {
  if (step >= num_steps()) throw InvalidArgument("ensemble step out of range");
  const std::size_t stride = num_paths() * dim();
  return {storage_->dw.data() + (node_offset_ + step) * stride, stride};
}

PathEnsemble PathEnsemble::slice(std::size_t first, std::size_t last) const {
  return PathEnsemble(grid_.slice(first, last), storage_, node_offset_ + first);
}

PathEnsemble PathEnsemble::from_increments(const TimeGrid& grid, std::size_t n_paths,
                                           std::size_t d, std::vector<double> increments,
                                           std::vector<double> initial, std::uint64_t seed) {
  if (n_paths == 0 || d == 0) throw InvalidArgument("ensemble needs n_paths >= 1 and d >= 1");
  const std::size_t stride = n_paths * d;
  if (increments.size() != grid.steps() * stride) {
    throw InvalidArgument("increment array has wrong size");
  }
  if (!initial.empty() && initial.size() != stride) {
    throw InvalidArgument("initial state array has wrong size");
  }
  auto storage = std::make_shared<Storage>();
  storage->n_paths = n_paths;
  storage->d = d;
  storage->seed = seed;
  storage->dw = std::move(increments);
  storage->w.assign(grid.num_nodes() * stride, 0.0);
  if (!initial.empty()) std::copy(initial.begin(), initial.end(), storage->w.begin());
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double* prev = storage->w.data() + k * stride;
    const double* inc = storage->dw.data() + k * stride;
    double* next = storage->w.data() + (k + 1) * stride;
    for (std::size_t i = 0; i < stride; ++i) next[i] = prev[i] + inc[i];
  }
  return PathEnsemble(grid, std::move(storage), 0);
}

PathEnsemble simulate_brownian(const TimeGrid& grid, std::size_t n_paths, std::size_t d,
                               std::uint64_t seed, double origin) {
  if (n_paths == 0 || d == 0) throw InvalidArgument("ensemble needs n_paths >= 1 and d >= 1");
  if (!(origin <= grid.t0())) throw InvalidArgument("Brownian origin must not exceed t0");
  const std::size_t stride = n_paths * d;
  const double sd = std::sqrt(grid.dt());
  std::vector<double> inc(grid.steps() * stride);
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    for (std::size_t p = 0; p < n_paths; ++p) {
      for (std::size_t c = 0; c < d; ++c) {
        inc[(k * n_paths + p) * d + c] = sd * counter_normal(seed, p, k, c);
      }
    }
  }
  std::vector<double> initial;
  if (origin < grid.t0()) {
    const double sd0 = std::sqrt(grid.t0() - origin);
    initial.resize(stride);
    for (std::size_t p = 0; p < n_paths; ++p) {
      for (std::size_t c = 0; c < d; ++c) {
        initial[p * d + c] = sd0 * counter_normal(seed, p, kInitialStep, c);
      }
    }
  }
  return PathEnsemble::from_increments(grid, n_paths, d, std::move(inc), std::move(initial), seed);
}

PathEnsemble simulate_brownian(const TimeGrid& grid, std::size_t n_paths, std::size_t d,
                               std::uint64_t seed) {
  return simulate_brownian(grid, n_paths, d, seed, grid.t0());
}

void PathEnsemble::write_csv(std::ostream& out) const {
  out << "path,step,coordinate,increment\n";
  char buf[64];
  for (std::size_t p = 0; p < num_paths(); ++p) {
    for (std::size_t k = 0; k < num_steps(); ++k) {
      for (std::size_t c = 0; c < dim(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", dw(k, p, c));
        out << p << ',' << k << ',' << c << ',' << buf << '\n';
      }
    }
  }
}

namespace {

template <class T>
void put(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "binary dump assumes little endian");
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <class T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw Error(ErrorCode::kIo, "truncated ensemble dump");
  return value;
}

}  // namespace

void PathEnsemble::write_binary(std::ostream& out) const {
  put<std::uint64_t>(out, num_steps());
  put<std::uint64_t>(out, num_paths());
  put<std::uint64_t>(out, dim());
  put<std::uint64_t>(out, seed());
  put<double>(out, grid_.t0());
  put<double>(out, grid_.T());
  for (std::size_t k = 0; k < num_steps(); ++k) {
    const auto row = dw_at(k);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
}

PathEnsemble PathEnsemble::read_binary(std::istream& in) {
  const auto steps = get<std::uint64_t>(in);
  const auto paths = get<std::uint64_t>(in);
  const auto d = get<std::uint64_t>(in);
  const auto seed = get<std::uint64_t>(in);
  const auto t0 = get<double>(in);
  const auto T = get<double>(in);
  std::vector<double> inc(steps * paths * d);
  in.read(reinterpret_cast<char*>(inc.data()),
          static_cast<std::streamsize>(inc.size() * sizeof(double)));
  if (!in) throw Error(ErrorCode::kIo, "truncated ensemble dump");
  return from_increments(TimeGrid(t0, T, steps), paths, d, std::move(inc), {}, seed);
}

std::vector<double> PathVectors::component(std::size_t c) const {
  std::vector<double> out(num_paths);
  for (std::size_t p = 0; p < num_paths; ++p) out[p] = values[p * dim + c];
  return out;
}

TerminalMap TerminalMap::of_terminal_state(
    std::size_t dim, std::function<void(std::span<const double>, std::span<double>)> f) {
  TerminalMap map;
  map.dim = dim;
  map.fn = [f = std::move(f)](const PathEnsemble& e, std::size_t path, std::span<double> out) {
    const auto last = e.w_at(e.num_nodes() - 1);
    f(last.subspan(path * e.dim(), e.dim()), out);
  };
  return map;
}

TerminalValues evaluate_terminal(const PathEnsemble& ensemble, const TerminalMap& xi) {
  if (xi.dim == 0 || !xi.fn) throw InvalidArgument("terminal map is empty");
  TerminalValues result{PathVectors(ensemble.num_paths(), xi.dim), 0.0};
  for (std::size_t p = 0; p < ensemble.num_paths(); ++p) {
    auto row = result.values.row(p);
    xi.fn(ensemble, p, row);
    for (double v : row) {
      if (!std::isfinite(v)) {
        throw DomainError("terminal map returned a non-finite value on path " + std::to_string(p));
      }
      result.sup_norm = std::max(result.sup_norm, std::abs(v));
    }
  }
  return result;
}

}  // namespace qbsde
