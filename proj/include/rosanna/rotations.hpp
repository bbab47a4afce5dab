#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rosanna {

/// One k x k orthogonal matrix. Columns are the axes of the rotated frame,
/// so coordinates in that frame are M^T v.
struct OrthoBasis {
  uint32_t k = 0;
  uint32_t id = 0;       // rotation index r in [0, R)
  uint64_t seed = 0;     // derivation seed (0 for the identity basis)
  bool identity = false;
  std::vector<double> matrix;  // k*k row-major; empty when identity

  double at(uint32_t row, uint32_t col) const { return matrix[row * k + col]; }
};

/// The R reference systems of an index; bases[0] is always the identity.
struct BasisSet {
  uint32_t r_count = 0;
  std::vector<OrthoBasis> bases;
};

/// Haar-uniform bases via QR of an i.i.d. Gaussian matrix with the Q columns
/// sign-corrected by the diagonal of R. Each basis derives its own generator
/// stream from (seed, id), so generation order and threading are irrelevant.
BasisSet gen_bases(uint32_t k, uint32_t r_count, uint64_t seed);

/// Coordinates of v in the rotated frame: M^T v.
std::vector<float> project(const OrthoBasis& basis, std::span<const float> v);

/// Inverse transform: M y, recovering the original-frame coordinates.
std::vector<float> unproject(const OrthoBasis& basis, std::span<const float> y);

/// max |M^T M - I|, for orthogonality checks.
double orthogonality_error(const OrthoBasis& basis);

}  // namespace rosanna
