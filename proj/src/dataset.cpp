#include "rosanna/dataset.hpp"

#include <cmath>
#include <sstream>
#include <thread>

#include "rosanna/common.hpp"
#include "rosanna/rng.hpp"

namespace rosanna {

Distribution parse_distribution(const std::string& name) {
  if (name == "gaussian") return Distribution::Gaussian;
  if (name == "uniform") return Distribution::Uniform;
  if (name == "laplace") return Distribution::Laplace;
  throw UsageError("unknown distribution: " + name);
}

std::string distribution_name(Distribution dist) {
  switch (dist) {
    case Distribution::Gaussian: return "gaussian";
    case Distribution::Uniform: return "uniform";
    case Distribution::Laplace: return "laplace";
  }
  return "?";
}

VectorSet gen_synthetic(const SyntheticSpec& spec) {
  if (spec.k < 1) throw UsageError("gen_synthetic: k must be >= 1");
  VectorSet out;
  out.n = spec.n;
  out.k = spec.k;
  out.data.resize(spec.n * spec.k);

  Rng rng(derive_seed(spec.seed, static_cast<uint64_t>(spec.dist)));
  switch (spec.dist) {
    case Distribution::Gaussian:
      for (auto& v : out.data) v = static_cast<float>(rng.gaussian());
      break;
    case Distribution::Uniform:
      for (auto& v : out.data) v = static_cast<float>(rng.uniform_unit_var());
      break;
    case Distribution::Laplace:
      for (auto& v : out.data) v = static_cast<float>(rng.laplace_unit_var());
      break;
  }

  std::ostringstream tag;
  tag << "synthetic:" << distribution_name(spec.dist) << ":n=" << spec.n
      << ":k=" << spec.k << ":seed=" << spec.seed;
  out.source = tag.str();
  return out;
}

Neighbor linear_scan_nn(const VectorSet& base, std::span<const float> query) {
  if (base.empty()) throw UsageError("linear_scan_nn: empty base set");
  if (query.size() != base.k)
    throw UsageError("linear_scan_nn: query length != k");

  Neighbor best{0, dist_sq(base.row(0), query)};
  for (uint64_t i = 1; i < base.n; ++i) {
    double d = dist_sq(base.row(i), query);
    if (d < best.dist_sq) best = {static_cast<uint32_t>(i), d};
  }
  return best;
}

GroundTruth compute_ground_truth(const VectorSet& base, const VectorSet& queries,
                                 unsigned threads) {
  if (queries.n > 0 && queries.k != base.k)
    throw UsageError("compute_ground_truth: dimensionality mismatch");

  GroundTruth gt;
  gt.nn_id.resize(queries.n);
  gt.nn_dist_sq.resize(queries.n);

  auto work = [&](uint64_t begin, uint64_t end) {
    for (uint64_t q = begin; q < end; ++q) {
      Neighbor nn = linear_scan_nn(base, queries.row(q));
      gt.nn_id[q] = nn.id;
      gt.nn_dist_sq[q] = nn.dist_sq;
    }
  };

  if (threads <= 1 || queries.n < 2) {
    work(0, queries.n);
    return gt;
  }

  unsigned t = std::min<uint64_t>(threads, queries.n);
  std::vector<std::thread> pool;
  pool.reserve(t);
  uint64_t chunk = (queries.n + t - 1) / t;
  for (unsigned i = 0; i < t; ++i) {
    uint64_t begin = i * chunk;
    uint64_t end = std::min<uint64_t>(begin + chunk, queries.n);
    if (begin >= end) break;
    pool.emplace_back(work, begin, end);
  }
  for (auto& th : pool) th.join();
  return gt;
}

double density(uint64_t n, uint32_t k) {
  if (n < 1 || k < 1) throw UsageError("density: need n >= 1 and k >= 1");
  return std::log2(static_cast<double>(n)) / static_cast<double>(k);
}

}  // namespace rosanna
