#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rosanna/dataset.hpp"
#include "rosanna/index.hpp"

namespace rosanna {

/// Principal components of a dataset: mean, orthonormal eigenvector columns
/// in eigenvalue-descending order, eigenvalues clamped at zero.
struct PcaModel {
  uint32_t k = 0;
  std::vector<double> mean;     // k
  std::vector<double> eigvals;  // k, non-increasing
  std::vector<double> eigvecs;  // k*k row-major; column j = j-th eigenvector

  double vec(uint32_t row, uint32_t col) const { return eigvecs[row * k + col]; }
};

/// Covariance eigendecomposition; eigenvector signs fixed so each column's
/// largest-magnitude entry is positive. Requires n >= 2.
PcaModel pca_fit(const VectorSet& data);

/// Projects a dataset onto the principal axes. Returns the classification
/// view (first d_classify coordinates) and the full view (all k coordinates,
/// distance-equivalent to the original space).
std::pair<VectorSet, VectorSet> pca_transform(const PcaModel& model,
                                              const VectorSet& data,
                                              uint32_t d_classify);

std::pair<std::vector<float>, std::vector<float>> pca_transform_query(
    const PcaModel& model, std::span<const float> query, uint32_t d_classify);

/// Intrinsic dimensionality 2^H(p) with p_i = lambda_i / sum(lambda).
double intrinsic_dim(std::span<const double> eigvals);

/// Coarse k-means partition from Lloyd iterations with k-means++ seeding.
struct CoarseQuantizer {
  uint32_t m = 0;
  uint32_t k = 0;
  std::vector<double> centroids;          // m*k row-major
  std::vector<uint32_t> assignments;      // per point, consistent with centroids
  double distortion = 0.0;                // mean squared point-centroid distance
  std::vector<double> distortion_history; // one entry per assignment pass

  std::span<const double> centroid(uint32_t c) const {
    return {centroids.data() + static_cast<size_t>(c) * k, k};
  }
};

/// Stops at max_iters or when the relative distortion improvement drops below
/// 1e-4. Empty clusters are reseeded from the farthest point.
CoarseQuantizer kmeans_fit(const VectorSet& data, uint32_t m, uint32_t max_iters,
                           uint64_t seed);

/// Coarse quantizer plus one cone index per cluster. Queries rank the
/// centroids and run the cone search inside the w nearest clusters only.
class TwoStageIndex {
 public:
  TwoStageIndex() = default;

  /// K-means runs in full-space coordinates; per-cluster indexes classify in
  /// the (possibly reduced) classify space.
  static TwoStageIndex build(std::shared_ptr<const VectorSet> classify_data,
                             std::shared_ptr<const VectorSet> full_data,
                             uint32_t m, uint32_t kmeans_iters,
                             const IndexParams& params, unsigned threads = 1);

  /// Returned ids are global dataset ids. Scratch counters aggregate over the
  /// probed clusters.
  std::optional<Neighbor> search(std::span<const float> query_classify,
                                 std::span<const float> query_full, uint32_t w,
                                 const SearchParams& params,
                                 SearchScratch& scratch) const;

  const CoarseQuantizer& quantizer() const { return quantizer_; }
  const std::vector<std::vector<uint32_t>>& cluster_ids() const {
    return cluster_ids_;
  }
  const std::vector<RosannaIndex>& cluster_indexes() const {
    return cluster_indexes_;
  }
  uint32_t m() const { return quantizer_.m; }
  uint64_t total_entries() const;
  uint64_t index_bytes() const;

  void save_payload(std::ostream& out) const;
  static TwoStageIndex load_payload(std::istream& in,
                                    const VectorSet& classify_data,
                                    const VectorSet& full_data);

 private:
  CoarseQuantizer quantizer_;
  std::vector<std::vector<uint32_t>> cluster_ids_;  // global ids per cluster
  std::vector<RosannaIndex> cluster_indexes_;       // bucket ids are local
};

/// What the CLI builds and persists: an optional PCA front end followed by
/// either a flat index or a two-stage index. Save/load use the index file
/// container, with PCA model and quantizer stored as extension sections.
struct PipelineOptions {
  uint32_t pca_dim = 0;      // 0 = no PCA; otherwise the classification dim
  uint32_t kmeans_m = 0;     // 0 = flat index; otherwise cluster count
  uint32_t kmeans_iters = 25;
};

class SearchPipeline {
 public:
  SearchPipeline() = default;

  static SearchPipeline build(std::shared_ptr<const VectorSet> base,
                              const IndexParams& params,
                              const PipelineOptions& options,
                              unsigned threads = 1);

  /// query is given in the original data space; w is ignored for flat
  /// pipelines.
  std::optional<Neighbor> search(std::span<const float> query, uint32_t w,
                                 const SearchParams& params,
                                 SearchScratch& scratch) const;

  bool two_stage() const { return two_stage_.has_value(); }
  bool has_pca() const { return pca_.has_value(); }
  const PcaModel& pca() const { return *pca_; }
  uint32_t pca_dim() const { return options_.pca_dim; }
  const RosannaIndex& flat() const { return *flat_; }
  const TwoStageIndex& stages() const { return *two_stage_; }
  const IndexParams& params() const { return params_; }
  uint64_t index_bytes() const;

  void save(const std::string& path) const;
  static SearchPipeline load(const std::string& path,
                             std::shared_ptr<const VectorSet> base);

 private:
  IndexParams params_;
  PipelineOptions options_;
  std::shared_ptr<const VectorSet> base_;
  std::optional<PcaModel> pca_;
  // Views live here so per-query transforms and loads share them.
  std::shared_ptr<const VectorSet> classify_view_;
  std::shared_ptr<const VectorSet> full_view_;
  std::optional<RosannaIndex> flat_;
  std::optional<TwoStageIndex> two_stage_;
};

}  // namespace rosanna
