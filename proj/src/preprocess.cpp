#include "rosanna/preprocess.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "rosanna/common.hpp"
#include "rosanna/rng.hpp"
#include "rosanna/serialize.hpp"

namespace rosanna {

PcaModel pca_fit(const VectorSet& data) {
  if (data.n < 2) throw UsageError("pca_fit: need at least two points");
  const uint32_t k = data.k;
  const uint64_t n = data.n;

  std::vector<double> mean(k, 0.0);
  for (uint64_t i = 0; i < n; ++i) {
    auto row = data.row(i);
    for (uint32_t j = 0; j < k; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);

  // Population covariance, accumulated in double over the upper triangle.
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
  std::vector<double> centered(k);
  for (uint64_t i = 0; i < n; ++i) {
    auto row = data.row(i);
    for (uint32_t j = 0; j < k; ++j) centered[j] = row[j] - mean[j];
    for (uint32_t a = 0; a < k; ++a)
      for (uint32_t b = a; b < k; ++b) cov(a, b) += centered[a] * centered[b];
  }
  for (uint32_t a = 0; a < k; ++a)
    for (uint32_t b = a; b < k; ++b) {
      cov(a, b) /= static_cast<double>(n);
      cov(b, a) = cov(a, b);
    }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw InvariantError("pca_fit: eigendecomposition failed");

  PcaModel model;
  model.k = k;
  model.mean = std::move(mean);
  model.eigvals.resize(k);
  model.eigvecs.resize(static_cast<size_t>(k) * k);

  // Eigen returns ascending eigenvalues; store descending, clamped at zero,
  // with each column's largest-magnitude entry made positive.
  for (uint32_t j = 0; j < k; ++j) {
    uint32_t src = k - 1 - j;
    model.eigvals[j] = std::max(0.0, solver.eigenvalues()(src));
    Eigen::VectorXd col = solver.eigenvectors().col(src);
    uint32_t arg = 0;
    for (uint32_t i = 1; i < k; ++i)
      if (std::abs(col(i)) > std::abs(col(arg))) arg = i;
    if (col(arg) < 0.0) col = -col;
    for (uint32_t i = 0; i < k; ++i) model.eigvecs[i * k + j] = col(i);
  }
  return model;
}

std::pair<VectorSet, VectorSet> pca_transform(const PcaModel& model,
                                              const VectorSet& data,
                                              uint32_t d_classify) {
  if (data.k != model.k) throw UsageError("pca_transform: dimension mismatch");
  if (d_classify < 1 || d_classify > model.k)
    throw UsageError("pca_transform: d_classify out of range");

  VectorSet full;
  full.n = data.n;
  full.k = model.k;
  full.data.resize(data.data.size());
  full.source = data.source + ":pca";

  std::vector<double> centered(model.k);
  for (uint64_t i = 0; i < data.n; ++i) {
    auto row = data.row(i);
    for (uint32_t j = 0; j < model.k; ++j) centered[j] = row[j] - model.mean[j];
    for (uint32_t j = 0; j < model.k; ++j) {
      double sum = 0.0;
      for (uint32_t a = 0; a < model.k; ++a)
        sum += model.vec(a, j) * centered[a];
      full.data[i * model.k + j] = static_cast<float>(sum);
    }
  }

  VectorSet classify;
  classify.n = data.n;
  classify.k = d_classify;
  classify.data.resize(data.n * d_classify);
  classify.source = data.source + ":pca" + std::to_string(d_classify);
  for (uint64_t i = 0; i < data.n; ++i)
    for (uint32_t j = 0; j < d_classify; ++j)
      classify.data[i * d_classify + j] = full.data[i * model.k + j];

  return {std::move(classify), std::move(full)};
}

std::pair<std::vector<float>, std::vector<float>> pca_transform_query(
    const PcaModel& model, std::span<const float> query, uint32_t d_classify) {
  if (query.size() != model.k)
    throw UsageError("pca_transform_query: dimension mismatch");
  if (d_classify < 1 || d_classify > model.k)
    throw UsageError("pca_transform_query: d_classify out of range");

  std::vector<double> centered(model.k);
  for (uint32_t j = 0; j < model.k; ++j) centered[j] = query[j] - model.mean[j];

  std::vector<float> full(model.k);
  for (uint32_t j = 0; j < model.k; ++j) {
    double sum = 0.0;
    for (uint32_t a = 0; a < model.k; ++a) sum += model.vec(a, j) * centered[a];
    full[j] = static_cast<float>(sum);
  }
  std::vector<float> classify(full.begin(), full.begin() + d_classify);
  return {std::move(classify), std::move(full)};
}

double intrinsic_dim(std::span<const double> eigvals) {
  double total = 0.0;
  for (double v : eigvals) {
    if (v < 0.0) throw UsageError("intrinsic_dim: negative eigenvalue");
    total += v;
  }
  if (total <= 0.0) throw UsageError("intrinsic_dim: all-zero spectrum");

  double entropy = 0.0;
  for (double v : eigvals) {
    if (v <= 0.0) continue;  // 0 log 0 = 0
    double p = v / total;
    entropy -= p * std::log2(p);
  }
  return std::exp2(entropy);
}

CoarseQuantizer kmeans_fit(const VectorSet& data, uint32_t m, uint32_t max_iters,
                           uint64_t seed) {
  if (m < 1) throw UsageError("kmeans_fit: m must be >= 1");
  if (data.n < m) throw UsageError("kmeans_fit: m > n");
  const uint32_t k = data.k;
  const uint64_t n = data.n;

  CoarseQuantizer q;
  q.m = m;
  q.k = k;
  q.centroids.resize(static_cast<size_t>(m) * k);
  q.assignments.resize(n);

  auto point_centroid_d2 = [&](uint64_t i, uint32_t c, double bound) {
    auto row = data.row(i);
    const double* cen = q.centroids.data() + static_cast<size_t>(c) * k;
    double sum = 0.0;
    for (uint32_t j = 0; j < k; ++j) {
      double d = row[j] - cen[j];
      sum += d * d;
      if (sum > bound) return sum;  // early abandon, caller compares anyway
    }
    return sum;
  };

  // k-means++ seeding
  Rng rng(derive_seed(seed, 0x6b6d6570));
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  uint64_t first = rng.below(n);
  for (uint32_t j = 0; j < k; ++j) q.centroids[j] = data.row(first)[j];
  for (uint32_t c = 1; c < m; ++c) {
    double total = 0.0;
    for (uint64_t i = 0; i < n; ++i) {
      double d = point_centroid_d2(i, c - 1, min_d2[i]);
      if (d < min_d2[i]) min_d2[i] = d;
      total += min_d2[i];
    }
    uint64_t chosen = n - 1;
    if (total > 0.0) {
      double target = rng.uniform01() * total;
      double run = 0.0;
      for (uint64_t i = 0; i < n; ++i) {
        run += min_d2[i];
        if (run >= target) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = rng.below(n);  // all points coincide with some centroid
    }
    for (uint32_t j = 0; j < k; ++j)
      q.centroids[static_cast<size_t>(c) * k + j] = data.row(chosen)[j];
  }

  // Lloyd iterations
  std::vector<double> best_d2(n);
  std::vector<double> sums(static_cast<size_t>(m) * k);
  std::vector<uint64_t> counts(m);

  auto assign_pass = [&]() {
    double total = 0.0;
    for (uint64_t i = 0; i < n; ++i) {
      uint32_t best = 0;
      double best_d = point_centroid_d2(i, 0, std::numeric_limits<double>::infinity());
      for (uint32_t c = 1; c < m; ++c) {
        double d = point_centroid_d2(i, c, best_d);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      q.assignments[i] = best;
      best_d2[i] = best_d;
      total += best_d;
    }
    return total / static_cast<double>(n);
  };

  double prev = std::numeric_limits<double>::infinity();
  for (uint32_t iter = 0; iter < std::max(1u, max_iters); ++iter) {
    double distortion = assign_pass();
    q.distortion_history.push_back(distortion);
    q.distortion = distortion;

    bool converged =
        prev < std::numeric_limits<double>::infinity() &&
        (prev - distortion) < 1e-4 * std::max(prev, 1e-300);
    if (converged) return q;
    prev = distortion;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (uint64_t i = 0; i < n; ++i) {
      uint32_t c = q.assignments[i];
      auto row = data.row(i);
      double* dst = sums.data() + static_cast<size_t>(c) * k;
      for (uint32_t j = 0; j < k; ++j) dst[j] += row[j];
      ++counts[c];
    }
    for (uint32_t c = 0; c < m; ++c) {
      if (counts[c] == 0) continue;
      for (uint32_t j = 0; j < k; ++j)
        q.centroids[static_cast<size_t>(c) * k + j] =
            sums[static_cast<size_t>(c) * k + j] / static_cast<double>(counts[c]);
    }
    // Reseed empty clusters from the farthest points, one per cluster.
    for (uint32_t c = 0; c < m; ++c) {
      if (counts[c] != 0) continue;
      uint64_t far = 0;
      for (uint64_t i = 1; i < n; ++i)
        if (best_d2[i] > best_d2[far]) far = i;
      for (uint32_t j = 0; j < k; ++j)
        q.centroids[static_cast<size_t>(c) * k + j] = data.row(far)[j];
      best_d2[far] = 0.0;
    }
  }
  // Leave assignments consistent with the final centroids.
  q.distortion = assign_pass();
  q.distortion_history.push_back(q.distortion);
  return q;
}

// --- two-stage index --------------------------------------------------------

namespace {

VectorSet subset_rows(const VectorSet& data, const std::vector<uint32_t>& ids) {
  VectorSet out;
  out.n = ids.size();
  out.k = data.k;
  out.data.reserve(out.n * out.k);
  for (uint32_t id : ids) {
    auto row = data.row(id);
    out.data.insert(out.data.end(), row.begin(), row.end());
  }
  out.source = data.source + ":cluster";
  return out;
}

}  // namespace

TwoStageIndex TwoStageIndex::build(std::shared_ptr<const VectorSet> classify_data,
                                   std::shared_ptr<const VectorSet> full_data,
                                   uint32_t m, uint32_t kmeans_iters,
                                   const IndexParams& params, unsigned threads) {
  if (!classify_data || !full_data) throw UsageError("two-stage build: null data");
  if (classify_data->n != full_data->n)
    throw UsageError("two-stage build: view size mismatch");

  TwoStageIndex ts;
  ts.quantizer_ = kmeans_fit(*full_data, m, kmeans_iters, params.seed);

  ts.cluster_ids_.resize(m);
  for (uint64_t i = 0; i < full_data->n; ++i)
    ts.cluster_ids_[ts.quantizer_.assignments[i]].push_back(
        static_cast<uint32_t>(i));

  ts.cluster_indexes_.reserve(m);
  for (uint32_t c = 0; c < m; ++c) {
    auto cluster_classify = std::make_shared<VectorSet>(
        subset_rows(*classify_data, ts.cluster_ids_[c]));
    auto cluster_full =
        std::make_shared<VectorSet>(subset_rows(*full_data, ts.cluster_ids_[c]));
    ts.cluster_indexes_.push_back(RosannaIndex::build(
        std::move(cluster_classify), std::move(cluster_full), params, threads));
  }
  return ts;
}

std::optional<Neighbor> TwoStageIndex::search(std::span<const float> query_classify,
                                              std::span<const float> query_full,
                                              uint32_t w,
                                              const SearchParams& params,
                                              SearchScratch& scratch) const {
  uint32_t m = quantizer_.m;
  if (w < 1 || w > m) throw UsageError("two-stage search: need 1 <= w <= m");
  if (query_full.size() != quantizer_.k)
    throw UsageError("two-stage search: query length mismatch");

  // Rank clusters by centroid distance; ties toward the lower cluster id.
  std::vector<std::pair<double, uint32_t>> ranked(m);
  for (uint32_t c = 0; c < m; ++c) {
    auto cen = quantizer_.centroid(c);
    double sum = 0.0;
    for (uint32_t j = 0; j < quantizer_.k; ++j) {
      double d = static_cast<double>(query_full[j]) - cen[j];
      sum += d * d;
    }
    ranked[c] = {sum, c};
  }
  std::partial_sort(ranked.begin(), ranked.begin() + w, ranked.end());

  uint64_t seen = 0, computed = 0, probed = 0;
  bool found = false;
  Neighbor best{0, 0.0};
  for (uint32_t v = 0; v < w; ++v) {
    uint32_t c = ranked[v].second;
    if (cluster_indexes_[c].full_data().empty()) continue;
    std::optional<Neighbor> local =
        cluster_indexes_[c].search(query_classify, query_full, params, scratch);
    seen += scratch.candidates_seen;
    computed += scratch.distances_computed;
    probed += scratch.cones_probed;
    if (!local) continue;
    Neighbor global{cluster_ids_[c][local->id], local->dist_sq};
    if (!found || global.dist_sq < best.dist_sq ||
        (global.dist_sq == best.dist_sq && global.id < best.id)) {
      best = global;
      found = true;
    }
  }
  scratch.candidates_seen = seen;
  scratch.distances_computed = computed;
  scratch.cones_probed = probed;
  if (!found) return std::nullopt;
  return best;
}

uint64_t TwoStageIndex::total_entries() const {
  uint64_t total = 0;
  for (const auto& index : cluster_indexes_) total += index.total_entries();
  return total;
}

uint64_t TwoStageIndex::index_bytes() const {
  uint64_t bytes = quantizer_.centroids.size() * sizeof(double);
  for (const auto& index : cluster_indexes_) bytes += index.index_bytes();
  return bytes;
}

void TwoStageIndex::save_payload(std::ostream& out) const {
  io::write_pod<uint32_t>(out, quantizer_.m);
  io::write_pod<uint32_t>(out, quantizer_.k);
  io::write_vec(out, quantizer_.centroids);
  io::write_pod<uint64_t>(out, quantizer_.assignments.size());
  io::write_vec(out, quantizer_.assignments);
  for (uint32_t c = 0; c < quantizer_.m; ++c) {
    io::write_pod<uint64_t>(out, cluster_ids_[c].size());
    io::write_vec(out, cluster_ids_[c]);
    cluster_indexes_[c].save_core(out);
  }
}

TwoStageIndex TwoStageIndex::load_payload(std::istream& in,
                                          const VectorSet& classify_data,
                                          const VectorSet& full_data) {
  TwoStageIndex ts;
  ts.quantizer_.m = io::read_pod<uint32_t>(in);
  ts.quantizer_.k = io::read_pod<uint32_t>(in);
  io::read_vec(in, ts.quantizer_.centroids,
               static_cast<size_t>(ts.quantizer_.m) * ts.quantizer_.k);
  uint64_t n = io::read_pod<uint64_t>(in);
  io::read_vec(in, ts.quantizer_.assignments, n);
  if (n != full_data.n)
    throw IoError("two-stage payload does not match the dataset size");

  ts.cluster_ids_.resize(ts.quantizer_.m);
  ts.cluster_indexes_.reserve(ts.quantizer_.m);
  for (uint32_t c = 0; c < ts.quantizer_.m; ++c) {
    uint64_t count = io::read_pod<uint64_t>(in);
    io::read_vec(in, ts.cluster_ids_[c], count);
    auto cluster_classify = std::make_shared<VectorSet>(
        subset_rows(classify_data, ts.cluster_ids_[c]));
    auto cluster_full =
        std::make_shared<VectorSet>(subset_rows(full_data, ts.cluster_ids_[c]));
    ts.cluster_indexes_.push_back(RosannaIndex::load_core(
        in, std::move(cluster_classify), std::move(cluster_full)));
  }
  return ts;
}

// --- pipeline ---------------------------------------------------------------

SearchPipeline SearchPipeline::build(std::shared_ptr<const VectorSet> base,
                                     const IndexParams& params,
                                     const PipelineOptions& options,
                                     unsigned threads) {
  if (!base) throw UsageError("pipeline build: null dataset");

  SearchPipeline p;
  p.params_ = params;
  p.options_ = options;
  p.base_ = base;

  if (options.pca_dim > 0) {
    p.pca_ = pca_fit(*base);
    auto [classify, full] = pca_transform(*p.pca_, *base, options.pca_dim);
    p.classify_view_ = std::make_shared<VectorSet>(std::move(classify));
    p.full_view_ = std::make_shared<VectorSet>(std::move(full));
  } else {
    p.classify_view_ = base;
    p.full_view_ = base;
  }

  if (options.kmeans_m > 0) {
    p.two_stage_ = TwoStageIndex::build(p.classify_view_, p.full_view_,
                                        options.kmeans_m, options.kmeans_iters,
                                        params, threads);
  } else {
    p.flat_ =
        RosannaIndex::build(p.classify_view_, p.full_view_, params, threads);
  }
  return p;
}

std::optional<Neighbor> SearchPipeline::search(std::span<const float> query,
                                               uint32_t w,
                                               const SearchParams& params,
                                               SearchScratch& scratch) const {
  std::span<const float> qc = query;
  std::span<const float> qf = query;
  std::vector<float> qc_store, qf_store;
  if (pca_) {
    auto [c, f] = pca_transform_query(*pca_, query, options_.pca_dim);
    qc_store = std::move(c);
    qf_store = std::move(f);
    qc = qc_store;
    qf = qf_store;
  }
  if (two_stage_) return two_stage_->search(qc, qf, w, params, scratch);
  return flat_->search(qc, qf, params, scratch);
}

uint64_t SearchPipeline::index_bytes() const {
  uint64_t bytes = two_stage_ ? two_stage_->index_bytes() : flat_->index_bytes();
  if (pca_) bytes += pca_->eigvecs.size() * sizeof(double) +
                     pca_->mean.size() * sizeof(double);
  return bytes;
}

void SearchPipeline::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  io::write_pod<uint32_t>(out, kIndexMagic);
  io::write_pod<uint32_t>(out, kIndexVersion);
  uint32_t flags = (pca_ ? kFlagPca : 0) | (two_stage_ ? kFlagTwoStage : 0);
  io::write_pod<uint32_t>(out, flags);

  if (pca_) {
    io::write_pod<uint32_t>(out, pca_->k);
    io::write_pod<uint32_t>(out, options_.pca_dim);
    io::write_vec(out, pca_->mean);
    io::write_vec(out, pca_->eigvals);
    io::write_vec(out, pca_->eigvecs);
  }
  if (two_stage_) {
    io::write_pod<uint32_t>(out, params_.g);
    io::write_pod<uint32_t>(out, params_.r_count);
    io::write_pod<uint64_t>(out, params_.seed);
    two_stage_->save_payload(out);
  } else {
    flat_->save_core(out);
  }
  if (!out) throw IoError("index write failed: " + path);
}

SearchPipeline SearchPipeline::load(const std::string& path,
                                    std::shared_ptr<const VectorSet> base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  if (io::read_pod<uint32_t>(in) != kIndexMagic)
    throw IoError(path + ": not an index file");
  if (io::read_pod<uint32_t>(in) != kIndexVersion)
    throw IoError(path + ": unsupported index version");
  uint32_t flags = io::read_pod<uint32_t>(in);

  SearchPipeline p;
  p.base_ = base;

  if (flags & kFlagPca) {
    PcaModel model;
    model.k = io::read_pod<uint32_t>(in);
    if (model.k != base->k)
      throw IoError(path + ": PCA section does not match the dataset");
    p.options_.pca_dim = io::read_pod<uint32_t>(in);
    io::read_vec(in, model.mean, model.k);
    io::read_vec(in, model.eigvals, model.k);
    io::read_vec(in, model.eigvecs, static_cast<size_t>(model.k) * model.k);
    p.pca_ = std::move(model);
    auto [classify, full] = pca_transform(*p.pca_, *base, p.options_.pca_dim);
    p.classify_view_ = std::make_shared<VectorSet>(std::move(classify));
    p.full_view_ = std::make_shared<VectorSet>(std::move(full));
  } else {
    p.classify_view_ = base;
    p.full_view_ = base;
  }

  if (flags & kFlagTwoStage) {
    p.params_.g = io::read_pod<uint32_t>(in);
    p.params_.r_count = io::read_pod<uint32_t>(in);
    p.params_.seed = io::read_pod<uint64_t>(in);
    p.two_stage_ =
        TwoStageIndex::load_payload(in, *p.classify_view_, *p.full_view_);
    p.options_.kmeans_m = p.two_stage_->m();
  } else {
    p.flat_ = RosannaIndex::load_core(in, p.classify_view_, p.full_view_);
    p.params_ = p.flat_->params();
  }
  return p;
}

}  // namespace rosanna
