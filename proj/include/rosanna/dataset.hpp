#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rosanna {

/// Dense row-major set of 32-bit float vectors. Immutable after load.
struct VectorSet {
  uint64_t n = 0;
  uint32_t k = 0;
  std::vector<float> data;  // n * k values, row-major
  std::string source;       // file path or synthetic spec tag

  std::span<const float> row(uint64_t i) const {
    return {data.data() + i * k, k};
  }
  bool empty() const { return n == 0; }
  uint64_t bytes() const { return data.size() * sizeof(float); }
};

enum class Distribution { Gaussian, Uniform, Laplace };

Distribution parse_distribution(const std::string& name);
std::string distribution_name(Distribution dist);

/// Spec for an i.i.d. zero-mean unit-variance synthetic corpus.
struct SyntheticSpec {
  Distribution dist = Distribution::Gaussian;
  uint64_t n = 0;
  uint32_t k = 1;
  uint64_t seed = 0;
};

struct Neighbor {
  uint32_t id = 0;
  double dist_sq = 0.0;
};

/// Exact nearest neighbor per query, computed by linear scan.
struct GroundTruth {
  std::vector<uint32_t> nn_id;
  std::vector<double> nn_dist_sq;

  size_t size() const { return nn_id.size(); }
};

/// Squared Euclidean distance, accumulated component by component in double.
/// Every distance in the project goes through this accumulation order so that
/// exact-NN ties compare bit-identically across code paths.
inline double dist_sq(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum;
}

VectorSet gen_synthetic(const SyntheticSpec& spec);

/// Exact NN by brute force; ties broken toward the lowest id.
Neighbor linear_scan_nn(const VectorSet& base, std::span<const float> query);

GroundTruth compute_ground_truth(const VectorSet& base, const VectorSet& queries,
                                 unsigned threads = 1);

/// Point density rho = log2(n) / k.
double density(uint64_t n, uint32_t k);

// --- file formats ---------------------------------------------------------
// fvecs: repeated [int32 LE dim][dim x float32 LE]
// bvecs: repeated [int32 LE dim][dim x uint8], widened to float on load
// raw:   [uint64 LE n][uint64 LE k][n*k x float32 LE]
// Loaders reject NaN/Inf values and report the byte offset of the failure.

VectorSet load_fvecs(const std::string& path);
VectorSet load_bvecs(const std::string& path);
VectorSet load_raw(const std::string& path);

/// Dispatch on file extension (.fvecs / .bvecs / .raw).
VectorSet load_vectors(const std::string& path);

void write_fvecs(const VectorSet& v, const std::string& path);
void write_raw(const VectorSet& v, const std::string& path);

void save_ground_truth_csv(const GroundTruth& gt, const std::string& path);
GroundTruth load_ground_truth_csv(const std::string& path);

}  // namespace rosanna
