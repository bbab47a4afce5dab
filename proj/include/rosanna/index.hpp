#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rosanna/cones.hpp"
#include "rosanna/dataset.hpp"
#include "rosanna/rotations.hpp"

namespace rosanna {

struct IndexParams {
  uint32_t g = 1;
  uint32_t r_count = 1;
  uint64_t seed = 0;
};

struct SearchParams {
  uint64_t c = 1;                // cones visited per rotation
  bool use_pde = true;           // early-abandon candidate distances
  bool fallback_linear = false;  // full scan when no candidate at all was found
};

/// Per-query mutable state; one instance per worker thread. Visited marks use
/// epoch stamps so resetting between queries is O(1).
struct SearchScratch {
  std::vector<uint32_t> visited;
  uint32_t epoch = 0;

  // Counters for the last query.
  uint64_t candidates_seen = 0;     // bucket entries scanned, duplicates included
  uint64_t distances_computed = 0;  // distinct candidates whose distance was evaluated
  uint64_t cones_probed = 0;

  // Grow-only: a fresh epoch invalidates any stale marks, so one scratch can
  // serve indexes of different sizes (e.g. the per-cluster tables).
  void begin_query(size_t n) {
    if (visited.size() < n) visited.resize(n, 0);
    if (++epoch == 0) {  // stamp wrap-around
      std::fill(visited.begin(), visited.end(), 0);
      epoch = 1;
    }
    candidates_seen = 0;
    distances_computed = 0;
    cones_probed = 0;
  }
};

/// Squared Euclidean distance with partial distance elimination: returns
/// nullopt as soon as the running sum strictly exceeds bound, otherwise the
/// exact squared distance. The accumulation order matches dist_sq.
std::optional<double> pde_distance(std::span<const float> x,
                                   std::span<const float> y, double bound);

/// One per-rotation associative table: cone key bytes -> contiguous bucket of
/// vector ids, frozen after build.
struct ConeTable {
  std::unordered_map<std::string, uint32_t> slot_of;
  std::vector<std::string> keys;   // slot -> key, in first-touch order
  std::vector<uint32_t> offsets;   // slot -> begin into ids; size keys.size()+1
  std::vector<uint32_t> ids;

  std::span<const uint32_t> bucket(const std::string& key) const {
    auto it = slot_of.find(key);
    if (it == slot_of.end()) return {};
    uint32_t s = it->second;
    return {ids.data() + offsets[s], offsets[s + 1] - offsets[s]};
  }
  size_t cone_count() const { return keys.size(); }
  uint64_t entries() const { return ids.size(); }
};

/// R per-rotation cone tables over a dataset, searched with interleaved
/// multi-probe visits (probe rank outer, rotation inner). Immutable after
/// build; concurrent searches are safe as long as each worker owns its
/// SearchScratch.
///
/// Classification runs in `classify_data` coordinates (a reduced space under
/// PCA), while candidate distances always run over all `full_data` components.
/// For a plain index both views are the same VectorSet.
class RosannaIndex {
 public:
  RosannaIndex() = default;

  static RosannaIndex build(std::shared_ptr<const VectorSet> dataset,
                            const IndexParams& params, unsigned threads = 1);
  static RosannaIndex build(std::shared_ptr<const VectorSet> classify_data,
                            std::shared_ptr<const VectorSet> full_data,
                            const IndexParams& params, unsigned threads = 1);

  SearchScratch make_scratch() const { return {}; }

  /// Single nearest neighbor; nullopt when no candidate was found and the
  /// linear-scan fallback is off. Ties broken toward the lowest id.
  std::optional<Neighbor> search(std::span<const float> query,
                                 const SearchParams& params,
                                 SearchScratch& scratch) const;
  std::optional<Neighbor> search(std::span<const float> query_classify,
                                 std::span<const float> query_full,
                                 const SearchParams& params,
                                 SearchScratch& scratch) const;

  /// Best k_nn candidates, ascending by (distance, id). The PDE bound is the
  /// current k-th best distance.
  std::vector<Neighbor> search_knn(std::span<const float> query_classify,
                                   std::span<const float> query_full,
                                   uint32_t k_nn, const SearchParams& params,
                                   SearchScratch& scratch) const;

  const IndexParams& params() const { return params_; }
  const BasisSet& bases() const { return bases_; }
  const VectorSet& classify_data() const { return *classify_data_; }
  const VectorSet& full_data() const { return *full_data_; }
  std::shared_ptr<const VectorSet> classify_data_ptr() const { return classify_data_; }
  std::shared_ptr<const VectorSet> full_data_ptr() const { return full_data_; }
  const std::vector<ConeTable>& tables() const { return tables_; }

  uint64_t total_entries() const;
  /// Bytes of the id tables: ids, offsets and key bytes.
  uint64_t table_bytes() const;
  /// Tables plus the serialized bases.
  uint64_t index_bytes() const;

  // Bucket payload without the file container; shared with the pipeline
  // formats that append preprocessing sections.
  void save_core(std::ostream& out) const;
  static RosannaIndex load_core(std::istream& in,
                                std::shared_ptr<const VectorSet> classify_data,
                                std::shared_ptr<const VectorSet> full_data);

  void save(const std::string& path) const;
  static RosannaIndex load(const std::string& path,
                           std::shared_ptr<const VectorSet> dataset);

 private:
  IndexParams params_;
  BasisSet bases_;
  std::shared_ptr<const VectorSet> classify_data_;
  std::shared_ptr<const VectorSet> full_data_;
  std::vector<ConeTable> tables_;
};

// Index file container tags.
inline constexpr uint32_t kIndexMagic = 0x4e534f52;  // "ROSN"
inline constexpr uint32_t kIndexVersion = 1;
inline constexpr uint32_t kFlagPca = 1u << 0;
inline constexpr uint32_t kFlagTwoStage = 1u << 1;

}  // namespace rosanna
