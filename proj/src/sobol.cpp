#include "pilot/sobol.hpp"

#include <bit>
#include <string>

#include "pilot/rng.hpp"

namespace pilot {

namespace {

// Primitive polynomials (leading and constant terms included) and initial
// direction numbers m_1..m_s from the new-joe-kuo-6 table, coordinates 2..21.
constexpr int kTableDims = 20;
constexpr std::uint32_t kPolynomials[kTableDims] = {3,  7,  11, 13, 19,  25,  37,  41,  47,  55,
                                                    59, 61, 67, 91, 97, 103, 109, 115, 131, 137};
constexpr std::uint32_t kInitial[kTableDims][7] = {
    {1, 0, 0, 0, 0, 0, 0},     {1, 3, 0, 0, 0, 0, 0},       {1, 3, 1, 0, 0, 0, 0},     {1, 1, 1, 0, 0, 0, 0},
    {1, 1, 3, 3, 0, 0, 0},     {1, 3, 5, 13, 0, 0, 0},      {1, 1, 5, 5, 17, 0, 0},    {1, 1, 5, 5, 5, 0, 0},
    {1, 1, 7, 11, 19, 0, 0},   {1, 1, 5, 1, 1, 0, 0},       {1, 1, 1, 3, 11, 0, 0},    {1, 3, 5, 5, 31, 0, 0},
    {1, 3, 3, 9, 7, 49, 0},    {1, 1, 1, 15, 21, 21, 0},    {1, 3, 1, 13, 27, 49, 0},  {1, 1, 1, 15, 7, 5, 0},
    {1, 3, 1, 15, 13, 25, 0},  {1, 1, 5, 5, 19, 61, 0},     {1, 3, 7, 11, 23, 15, 103}, {1, 3, 7, 13, 13, 15, 69},
};

using Directions = std::array<std::uint32_t, SobolSequence::kBits>;
constexpr int kBits = SobolSequence::kBits;

Directions make_directions(int coord) {
  Directions v{};
  if (coord == 0) {
    for (int k = 0; k < kBits; ++k) v[k] = 1u << (kBits - 1 - k);
    return v;
  }
  const std::uint32_t poly = kPolynomials[coord - 1];
  const int s = std::bit_width(poly) - 1;
  const std::uint32_t a = (poly >> 1) & ((1u << (s - 1)) - 1u);
  for (int k = 0; k < s && k < kBits; ++k) v[k] = kInitial[coord - 1][k] << (kBits - 1 - k);
  for (int k = s; k < kBits; ++k) {
    std::uint32_t x = v[k - s] ^ (v[k - s] >> s);
    for (int i = 1; i < s; ++i) {
      if ((a >> (s - 1 - i)) & 1u) x ^= v[k - i];
    }
    v[k] = x;
  }
  return v;
}

// Applies a lower-triangular binary matrix (unit diagonal, rows indexed from
// the most significant bit) to a 32-bit digit vector.
std::uint32_t apply_scramble(const std::array<std::uint32_t, kBits>& rows, std::uint32_t x) {
  std::uint32_t out = 0;
  for (int r = 0; r < kBits; ++r) {
    if (std::popcount(rows[r] & x) & 1) out |= 1u << (kBits - 1 - r);
  }
  return out;
}

}  // namespace

int SobolSequence::max_dimension() { return kTableDims + 1; }

SobolSequence::SobolSequence(int dim) : dim_(dim) {
  if (dim < 1 || dim > max_dimension()) {
    throw InvalidInput("Sobol dimension " + std::to_string(dim) + " outside supported range 1.." +
                       std::to_string(max_dimension()));
  }
  for (int c = 0; c < dim; ++c) directions_.push_back(make_directions(c));
  shift_.assign(dim, 0u);
}

SobolSequence::SobolSequence(int dim, std::uint64_t seed) : SobolSequence(dim) {
  scrambled_ = true;
  Engine eng(derive_seed(seed, {0x50B0Lu}));
  for (int c = 0; c < dim; ++c) {
    std::array<std::uint32_t, kBits> rows{};
    for (int r = 0; r < kBits; ++r) {
      const std::uint32_t diag = 1u << (kBits - 1 - r);
      const std::uint32_t above = r == 0 ? 0u : ~((diag << 1) - 1u);
      rows[r] = diag | (static_cast<std::uint32_t>(eng()) & above);
    }
    for (auto& v : directions_[c]) v = apply_scramble(rows, v);
    shift_[c] = static_cast<std::uint32_t>(eng() >> 32);
  }
}

PointMatrix SobolSequence::points(std::int64_t first, std::int64_t n) const {
  if (first < 0 || n < 0 || first + n > (std::int64_t{1} << kBits)) throw InvalidInput("Sobol index range out of bounds");
  PointMatrix out(n, dim_);
  std::vector<std::uint32_t> x(dim_, 0u);
  // State for index `first` is the XOR of directions over the bits of its Gray code.
  const std::uint64_t gray = static_cast<std::uint64_t>(first) ^ (static_cast<std::uint64_t>(first) >> 1);
  for (int c = 0; c < dim_; ++c) {
    std::uint32_t acc = 0;
    for (int k = 0; k < kBits; ++k) {
      if ((gray >> k) & 1u) acc ^= directions_[c][k];
    }
    x[c] = acc;
  }
  const double scale = 0x1.0p-32;
  const double offset = scrambled_ ? 0x1.0p-33 : 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    for (int c = 0; c < dim_; ++c) out(i, c) = static_cast<double>(x[c] ^ shift_[c]) * scale + offset;
    const int bit = std::countr_zero(static_cast<std::uint64_t>(first + i + 1));
    if (bit < kBits) {
      for (int c = 0; c < dim_; ++c) x[c] ^= directions_[c][bit];
    }
  }
  return out;
}

PointMatrix sobol_points(std::int64_t n, int d) { return SobolSequence(d).points(1, n); }

PointMatrix scrambled_sobol(std::int64_t n, int d, std::uint64_t seed) { return SobolSequence(d, seed).points(0, n); }

}  // namespace pilot
