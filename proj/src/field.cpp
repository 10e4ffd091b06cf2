#include "qbsde/field.hpp"

#include <algorithm>
#include <cmath>

#include "qbsde/error.hpp"

namespace qbsde {

std::vector<double> AdaptedField::component(std::size_t k, std::size_t c) const {
  std::vector<double> out(paths_);
  for (std::size_t p = 0; p < paths_; ++p) out[p] = (*this)(k, p, c);
  return out;
}

void AdaptedField::set_component(std::size_t k, std::size_t c, std::span<const double> values) {
  if (values.size() != paths_) throw InvalidArgument("component length mismatch");
  for (std::size_t p = 0; p < paths_; ++p) (*this)(k, p, c) = values[p];
}

double AdaptedField::sup_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double AdaptedField::sup_row_norm(std::size_t k) const {
  double m = 0.0;
  for (std::size_t p = 0; p < paths_; ++p) {
    double s = 0.0;
    for (double v : row(k, p)) s += v * v;
    m = std::max(m, s);
  }
  return std::sqrt(m);
}

double AdaptedField::sup_row_norm() const {
  double m = 0.0;
  for (std::size_t k = 0; k < nodes_; ++k) m = std::max(m, sup_row_norm(k));
  return m;
}

bool AdaptedField::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

AdaptedField AdaptedField::columns(std::size_t first, std::size_t count) const {
  if (first + count > dim_) throw InvalidArgument("column range out of bounds");
  AdaptedField out(nodes_, paths_, count);
  for (std::size_t k = 0; k < nodes_; ++k) {
    for (std::size_t p = 0; p < paths_; ++p) {
      const auto src = row(k, p);
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(first), count, out.row(k, p).begin());
    }
  }
  return out;
}

AdaptedField operator-(const AdaptedField& a, const AdaptedField& b) {
  if (a.nodes_ != b.nodes_ || a.paths_ != b.paths_ || a.dim_ != b.dim_) {
    throw InvalidArgument("field shape mismatch");
  }
  AdaptedField out(a.nodes_, a.paths_, a.dim_);
  for (std::size_t i = 0; i < a.data_.size(); ++i) out.data_[i] = a.data_[i] - b.data_[i];
  return out;
}

AdaptedField& AdaptedField::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

double sup_distance(const AdaptedField& a, const AdaptedField& b) {
  if (a.num_nodes() != b.num_nodes() || a.num_paths() != b.num_paths() || a.dim() != b.dim()) {
    throw InvalidArgument("field shape mismatch");
  }
  double m = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) m = std::max(m, std::abs(da[i] - db[i]));
  return m;
}

}  // namespace qbsde
