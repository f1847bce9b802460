#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mkv {

/// Uniform grid t_j = j·dt on [0, T], j = 0..M.
struct TimeGrid {
  double horizon = 1.0;
  std::size_t steps = 200;

  TimeGrid() = default;
  TimeGrid(double T, std::size_t M);

  double dt() const noexcept { return horizon / static_cast<double>(steps); }
  double time(std::size_t j) const noexcept { return static_cast<double>(j) * dt(); }
  std::size_t points() const noexcept { return steps + 1; }
  // Nearest grid index to t; throws GridMismatch if t is not within dt/2 of one.
  std::size_t index_of(double t) const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// Non-owning view of one trajectory. Consecutive states are `stride` doubles
/// apart, which lets the same view address a standalone Path or one row of a
/// time-major Cloud. `length` counts the time points that may be read.
class PathView {
 public:
  PathView() = default;
  PathView(const double* base, std::size_t stride, std::size_t dim, std::size_t length) noexcept
      : base_(base), stride_(stride), dim_(dim), length_(length) {}

  std::span<const double> state(std::size_t j) const noexcept {
    return {base_ + j * stride_, dim_};
  }
  double value(std::size_t j, std::size_t k = 0) const noexcept { return base_[j * stride_ + k]; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t length() const noexcept { return length_; }
  PathView prefix(std::size_t t_idx) const noexcept {
    return {base_, stride_, dim_, t_idx + 1};
  }

 private:
  const double* base_ = nullptr;
  std::size_t stride_ = 0;
  std::size_t dim_ = 0;
  std::size_t length_ = 0;
};

/// One trajectory on a grid, stored contiguously.
class Path {
 public:
  Path() = default;
  Path(std::size_t points, std::size_t dim) : dim_(dim), states_(points * dim, 0.0) {}
  Path(std::vector<double> states, std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t points() const noexcept { return dim_ == 0 ? 0 : states_.size() / dim_; }
  std::span<double> state(std::size_t j) noexcept { return {states_.data() + j * dim_, dim_}; }
  std::span<const double> state(std::size_t j) const noexcept {
    return {states_.data() + j * dim_, dim_};
  }
  PathView view() const noexcept { return {states_.data(), dim_, dim_, points()}; }
  PathView prefix(std::size_t t_idx) const noexcept { return view().prefix(t_idx); }
  const std::vector<double>& data() const noexcept { return states_; }
  std::vector<double>& data() noexcept { return states_; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> states_;
};

/// Uniformly weighted collection of paths on one grid: the empirical stand-in
/// for a law on path space. Storage is time-major, so each time marginal is a
/// contiguous block of size() * dim() values.
class Cloud {
 public:
  Cloud() = default;
  Cloud(TimeGrid grid, std::size_t count, std::size_t dim);

  static Cloud from_paths(const TimeGrid& grid, std::span<const Path> paths);

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return count_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return count_ == 0; }
  double weight() const noexcept { return 1.0 / static_cast<double>(count_); }

  std::span<const double> marginal(std::size_t t_idx) const noexcept {
    return {data_.data() + t_idx * count_ * dim_, count_ * dim_};
  }
  std::span<double> marginal(std::size_t t_idx) noexcept {
    return {data_.data() + t_idx * count_ * dim_, count_ * dim_};
  }
  // Coordinate k of every member at t_idx.
  std::vector<double> coordinate(std::size_t t_idx, std::size_t k = 0) const;

  PathView path(std::size_t i) const noexcept {
    return {data_.data() + i * dim_, count_ * dim_, dim_, grid_.points()};
  }
  PathView prefix(std::size_t i, std::size_t t_idx) const noexcept {
    return path(i).prefix(t_idx);
  }
  Path copy_path(std::size_t i) const;
  void set_path(std::size_t i, const PathView& p);

  /// Law of the process stopped at t_idx: states after t_idx frozen at x_t.
  Cloud stopped(std::size_t t_idx) const;

  /// Throws EmptyInput / NonFinite when the invariants fail.
  void validate() const;

  const std::vector<double>& data() const noexcept { return data_; }

 private:
  TimeGrid grid_;
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

}  // namespace mkv
