#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qbsde {

/// Values of a process on grid nodes × paths × components, node-major.
///
/// Node k of a field built on a (possibly sliced) ensemble refers to node k
/// of that ensemble.
class AdaptedField {
 public:
  AdaptedField() = default;
  AdaptedField(std::size_t nodes, std::size_t paths, std::size_t dim, double fill = 0.0)
      : nodes_(nodes), paths_(paths), dim_(dim), data_(nodes * paths * dim, fill) {}

  std::size_t num_nodes() const noexcept { return nodes_; }
  std::size_t num_paths() const noexcept { return paths_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t node, std::size_t path, std::size_t c) {
    return data_[(node * paths_ + path) * dim_ + c];
  }
  double operator()(std::size_t node, std::size_t path, std::size_t c) const {
    return data_[(node * paths_ + path) * dim_ + c];
  }

  /// One (node, path) row of `dim` components.
  std::span<double> row(std::size_t node, std::size_t path) {
    return {data_.data() + (node * paths_ + path) * dim_, dim_};
  }
  std::span<const double> row(std::size_t node, std::size_t path) const {
    return {data_.data() + (node * paths_ + path) * dim_, dim_};
  }

  /// All paths at a node (paths × dim).
  std::span<double> node(std::size_t k) { return {data_.data() + k * paths_ * dim_, paths_ * dim_}; }
  std::span<const double> node(std::size_t k) const {
    return {data_.data() + k * paths_ * dim_, paths_ * dim_};
  }

  /// Component c across paths at node k.
  std::vector<double> component(std::size_t k, std::size_t c) const;
  void set_component(std::size_t k, std::size_t c, std::span<const double> values);

  /// Max over everything of |value|.
  double sup_abs() const;
  /// Max over nodes/paths of the Euclidean norm of a row.
  double sup_row_norm() const;
  /// Max over nodes/paths of the Euclidean norm of a row at a single node.
  double sup_row_norm(std::size_t node) const;
  bool all_finite() const;

  /// Sub-field over columns [first, first+count) of each row.
  AdaptedField columns(std::size_t first, std::size_t count) const;

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  friend AdaptedField operator-(const AdaptedField& a, const AdaptedField& b);
  AdaptedField& operator*=(double s);

 private:
  std::size_t nodes_ = 0;
  std::size_t paths_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Max over nodes/paths/components of |a - b|.
double sup_distance(const AdaptedField& a, const AdaptedField& b);

}  // namespace qbsde
