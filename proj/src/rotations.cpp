#include "rosanna/rotations.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "rosanna/common.hpp"
#include "rosanna/rng.hpp"

namespace rosanna {

namespace {

OrthoBasis make_identity(uint32_t k) {
  OrthoBasis b;
  b.k = k;
  b.id = 0;
  b.identity = true;
  return b;
}

OrthoBasis make_haar(uint32_t k, uint32_t id, uint64_t seed) {
  Rng rng(derive_seed(seed, id));
  Eigen::MatrixXd a(k, k);
  for (uint32_t i = 0; i < k; ++i)
    for (uint32_t j = 0; j < k; ++j) a(i, j) = rng.gaussian();

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Fix the column signs so the factorization is unique and Haar-distributed.
  for (uint32_t j = 0; j < k; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);

  OrthoBasis b;
  b.k = k;
  b.id = id;
  b.seed = seed;
  b.matrix.resize(static_cast<size_t>(k) * k);
  for (uint32_t i = 0; i < k; ++i)
    for (uint32_t j = 0; j < k; ++j) b.matrix[i * k + j] = q(i, j);
  return b;
}

}  // namespace

BasisSet gen_bases(uint32_t k, uint32_t r_count, uint64_t seed) {
  if (k < 1 || r_count < 1)
    throw UsageError("gen_bases: need k >= 1 and r_count >= 1");

  BasisSet set;
  set.r_count = r_count;
  set.bases.reserve(r_count);
  set.bases.push_back(make_identity(k));
  for (uint32_t r = 1; r < r_count; ++r)
    set.bases.push_back(make_haar(k, r, seed));
  return set;
}

std::vector<float> project(const OrthoBasis& basis, std::span<const float> v) {
  if (v.size() != basis.k) throw UsageError("project: vector length != k");
  if (basis.identity) return {v.begin(), v.end()};

  std::vector<float> out(basis.k);
  for (uint32_t j = 0; j < basis.k; ++j) {
    double sum = 0.0;
    for (uint32_t i = 0; i < basis.k; ++i) sum += basis.at(i, j) * v[i];
    out[j] = static_cast<float>(sum);
  }
  return out;
}

std::vector<float> unproject(const OrthoBasis& basis, std::span<const float> y) {
  if (y.size() != basis.k) throw UsageError("unproject: vector length != k");
  if (basis.identity) return {y.begin(), y.end()};

  std::vector<float> out(basis.k);
  for (uint32_t i = 0; i < basis.k; ++i) {
    double sum = 0.0;
    for (uint32_t j = 0; j < basis.k; ++j) sum += basis.at(i, j) * y[j];
    out[i] = static_cast<float>(sum);
  }
  return out;
}

double orthogonality_error(const OrthoBasis& basis) {
  if (basis.identity) return 0.0;
  double worst = 0.0;
  for (uint32_t a = 0; a < basis.k; ++a) {
    for (uint32_t b = 0; b < basis.k; ++b) {
      double dot = 0.0;
      for (uint32_t i = 0; i < basis.k; ++i)
        dot += basis.at(i, a) * basis.at(i, b);
      double target = (a == b) ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(dot - target));
    }
  }
  return worst;
}

}  // namespace rosanna
