#include "mkv/path.hpp"

#include <cmath>
#include <string>

#include "mkv/errors.hpp"

namespace mkv {

TimeGrid::TimeGrid(double T, std::size_t M) : horizon(T), steps(M) {
  if (!(T > 0.0) || !std::isfinite(T)) throw PreconditionError("grid horizon must be positive");
  if (M == 0) throw PreconditionError("grid needs at least one step");
}

std::size_t TimeGrid::index_of(double t) const {
  const double pos = t / dt();
  const double j = std::round(pos);
  if (j < 0.0 || j > static_cast<double>(steps) || std::abs(pos - j) > 1e-6) {
    throw GridMismatch("time " + std::to_string(t) + " is not on the grid");
  }
  return static_cast<std::size_t>(j);
}

Path::Path(std::vector<double> states, std::size_t dim) : dim_(dim), states_(std::move(states)) {
  if (dim == 0 || states_.size() % dim != 0) throw ShapeError("path length is not a multiple of dim");
}

Cloud::Cloud(TimeGrid grid, std::size_t count, std::size_t dim)
    : grid_(grid), count_(count), dim_(dim), data_(grid.points() * count * dim, 0.0) {
  if (count == 0) throw EmptyInput("cloud must hold at least one path");
  if (dim == 0) throw ShapeError("cloud dimension must be positive");
}

Cloud Cloud::from_paths(const TimeGrid& grid, std::span<const Path> paths) {
  if (paths.empty()) throw EmptyInput("no paths given");
  Cloud cloud(grid, paths.size(), paths.front().dim());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (paths[i].points() != grid.points() || paths[i].dim() != cloud.dim_) {
      throw GridMismatch("path " + std::to_string(i) + " does not match the grid");
    }
    cloud.set_path(i, paths[i].view());
  }
  return cloud;
}

std::vector<double> Cloud::coordinate(std::size_t t_idx, std::size_t k) const {
  std::vector<double> out(count_);
  const auto m = marginal(t_idx);
  for (std::size_t i = 0; i < count_; ++i) out[i] = m[i * dim_ + k];
  return out;
}

Path Cloud::copy_path(std::size_t i) const {
  Path p(grid_.points(), dim_);
  const auto v = path(i);
  for (std::size_t j = 0; j < grid_.points(); ++j) {
    const auto s = v.state(j);
    std::copy(s.begin(), s.end(), p.state(j).begin());
  }
  return p;
}

void Cloud::set_path(std::size_t i, const PathView& p) {
  if (p.dim() != dim_ || p.length() != grid_.points()) throw ShapeError("path shape mismatch");
  for (std::size_t j = 0; j < grid_.points(); ++j) {
    const auto s = p.state(j);
    std::copy(s.begin(), s.end(), data_.begin() + static_cast<std::ptrdiff_t>((j * count_ + i) * dim_));
  }
}

Cloud Cloud::stopped(std::size_t t_idx) const {
  if (t_idx >= grid_.points()) throw GridMismatch("stopping index beyond horizon");
  Cloud out = *this;
  const auto frozen = marginal(t_idx);
  for (std::size_t j = t_idx + 1; j < grid_.points(); ++j) {
    auto dst = out.marginal(j);
    std::copy(frozen.begin(), frozen.end(), dst.begin());
  }
  return out;
}

void Cloud::validate() const {
  if (count_ == 0) throw EmptyInput("cloud is empty");
  for (double v : data_) {
    if (!std::isfinite(v)) throw NonFinite("cloud holds a non-finite state");
  }
}

}  // namespace mkv
