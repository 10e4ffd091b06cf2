#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace qbsde {

/// Uniform time grid t0 = nodes[0] < ... < nodes[steps] = T.
class TimeGrid {
 public:
  TimeGrid(double t0, double T, std::size_t steps);

  double t0() const noexcept { return t0_; }
  double T() const noexcept { return T_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t num_nodes() const noexcept { return steps_ + 1; }
  double dt() const noexcept { return (T_ - t0_) / static_cast<double>(steps_); }
  double horizon() const noexcept { return T_ - t0_; }

  /// Node time; the last node is exactly T.
  double time(std::size_t node) const;
  std::vector<double> nodes() const;

  /// Sub-grid over nodes [first, last] (inclusive).
  TimeGrid slice(std::size_t first, std::size_t last) const;

  bool operator==(const TimeGrid&) const = default;

 private:
  double t0_;
  double T_;
  std::size_t steps_;
};

TimeGrid make_grid(double t0, double T, std::size_t steps);

/// Immutable bundle of d-dimensional Brownian paths on a TimeGrid.
///
/// Increments are stored step-major: dw(step, path, coord). Cumulative
/// values W(node, path, coord) are precomputed. Copies share storage;
/// slice() returns a view over a node range that keeps absolute W values.
class PathEnsemble {
 public:
  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t num_paths() const noexcept { return storage_->n_paths; }
  std::size_t dim() const noexcept { return storage_->d; }
  std::uint64_t seed() const noexcept { return storage_->seed; }
  std::size_t num_nodes() const noexcept { return grid_.num_nodes(); }
  std::size_t num_steps() const noexcept { return grid_.steps(); }

  double w(std::size_t node, std::size_t path, std::size_t coord) const {
    return storage_->w[((node_offset_ + node) * num_paths() + path) * dim() + coord];
  }
  double dw(std::size_t step, std::size_t path, std::size_t coord) const {
    return storage_->dw[((node_offset_ + step) * num_paths() + path) * dim() + coord];
  }

  /// All paths' W at a node, path-major (paths × d).
  std::span<const double> w_at(std::size_t node) const;
  /// All paths' increments over [node, node+1], path-major (paths × d).
  std::span<const double> dw_at(std::size_t step) const;

  /// View over nodes [first, last]; W values stay absolute.
  PathEnsemble slice(std::size_t first, std::size_t last) const;

  /// Absolute index of this view's first node in the underlying storage.
  std::size_t node_offset() const noexcept { return node_offset_; }

  /// Builds an ensemble from explicit increments (steps × paths × d) and
  /// initial values (paths × d, empty means zero).
  static PathEnsemble from_increments(const TimeGrid& grid, std::size_t n_paths,
                                      std::size_t d, std::vector<double> increments,
                                      std::vector<double> initial = {},
                                      std::uint64_t seed = 0);

  /// CSV dump: header `path,step,coordinate,increment`, one row per increment.
  void write_csv(std::ostream& out) const;
  /// Flat little-endian binary: u64 steps, paths, d, seed; f64 t0, T;
  /// then increments in (step, path, coord) order as f64.
  void write_binary(std::ostream& out) const;
  static PathEnsemble read_binary(std::istream& in);

 private:
  struct Storage {
    std::size_t n_paths = 0;
    std::size_t d = 0;
    std::uint64_t seed = 0;
    std::vector<double> dw;
    std::vector<double> w;
  };

  PathEnsemble(TimeGrid grid, std::shared_ptr<const Storage> storage, std::size_t offset)
      : grid_(grid), storage_(std::move(storage)), node_offset_(offset) {}

  TimeGrid grid_;
  std::shared_ptr<const Storage> storage_;
  std::size_t node_offset_ = 0;

  friend PathEnsemble simulate_brownian(const TimeGrid&, std::size_t, std::size_t,
                                        std::uint64_t, double);
};

/// Standard normal keyed by (seed, path, step, coord); order-independent.
double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                      std::uint64_t coord);

/// Seeded Brownian paths. W(t0) = 0 unless origin < t0, in which case
/// W(t0) ~ N(0, t0 - origin) per coordinate (used for windows [T-ε, T]).
PathEnsemble simulate_brownian(const TimeGrid& grid, std::size_t n_paths, std::size_t d,
                               std::uint64_t seed, double origin);
PathEnsemble simulate_brownian(const TimeGrid& grid, std::size_t n_paths, std::size_t d,
                               std::uint64_t seed);

/// Per-path n-vectors (paths × dim, path-major).
struct PathVectors {
  std::size_t num_paths = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  PathVectors() = default;
  PathVectors(std::size_t paths, std::size_t d, double fill = 0.0)
      : num_paths(paths), dim(d), values(paths * d, fill) {}

  double& operator()(std::size_t path, std::size_t c) { return values[path * dim + c]; }
  double operator()(std::size_t path, std::size_t c) const { return values[path * dim + c]; }
  std::span<const double> row(std::size_t path) const { return {values.data() + path * dim, dim}; }
  std::span<double> row(std::size_t path) { return {values.data() + path * dim, dim}; }
  /// One component across all paths.
  std::vector<double> component(std::size_t c) const;
};

/// Terminal map: writes ξ(path) into `out` (length dim). Reads anything on
/// the path through the ensemble, usually W at the last node.
struct TerminalMap {
  std::size_t dim = 1;
  std::function<void(const PathEnsemble&, std::size_t path, std::span<double> out)> fn;

  /// Convenience for maps of the terminal Brownian state W_T only.
  static TerminalMap of_terminal_state(
      std::size_t dim, std::function<void(std::span<const double> w_T, std::span<double> out)> f);
};

struct TerminalValues {
  PathVectors values;
  /// Realized max over paths and components of |ξ|.
  double sup_norm = 0.0;
};

TerminalValues evaluate_terminal(const PathEnsemble& ensemble, const TerminalMap& xi);

}  // namespace qbsde
