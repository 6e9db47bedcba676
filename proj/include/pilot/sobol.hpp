#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "pilot/core_model.hpp"

namespace pilot {

/// Base-2 Sobol sequence with Joe-Kuo direction numbers, optionally with a
/// random linear matrix scramble plus digital shift.  Points are produced in
/// Gray-code order.
class SobolSequence {
 public:
  static constexpr int kBits = 32;

  static int max_dimension();

  /// Unscrambled sequence.
  explicit SobolSequence(int dim);
  /// Scrambled sequence; the scramble is a pure function of `seed`.
  SobolSequence(int dim, std::uint64_t seed);

  int dim() const { return dim_; }
  bool scrambled() const { return scrambled_; }

  /// Points with indices [first, first + n).
  PointMatrix points(std::int64_t first, std::int64_t n) const;

  /// Integer direction numbers of one coordinate (most significant bit first).
  const std::array<std::uint32_t, kBits>& directions(int coord) const { return directions_[coord]; }

 private:
  int dim_;
  bool scrambled_ = false;
  std::vector<std::array<std::uint32_t, kBits>> directions_;
  std::vector<std::uint32_t> shift_;
};

/// First n unscrambled points, skipping the origin.
PointMatrix sobol_points(std::int64_t n, int d);

/// First n points of a scrambled Sobol sequence; coordinates lie in (0,1).
PointMatrix scrambled_sobol(std::int64_t n, int d, std::uint64_t seed);

}  // namespace pilot
