#include "rosanna/index.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "rosanna/common.hpp"
#include "rosanna/serialize.hpp"

namespace rosanna {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void freeze_table(ConeTable& table,
                  std::vector<std::vector<uint32_t>>& grow_buckets) {
  table.offsets.resize(grow_buckets.size() + 1);
  uint32_t total = 0;
  for (size_t s = 0; s < grow_buckets.size(); ++s) {
    table.offsets[s] = total;
    total += static_cast<uint32_t>(grow_buckets[s].size());
  }
  table.offsets[grow_buckets.size()] = total;
  table.ids.reserve(total);
  for (auto& bucket : grow_buckets)
    table.ids.insert(table.ids.end(), bucket.begin(), bucket.end());
  grow_buckets.clear();
}

void build_rotation(const VectorSet& data, const OrthoBasis& basis, uint32_t g,
                    ConeTable& table) {
  std::vector<std::vector<uint32_t>> grow;
  for (uint64_t i = 0; i < data.n; ++i) {
    std::string key;
    if (basis.identity) {
      key = encode_key(classify(data.row(i), g));
    } else {
      key = encode_key(classify(project(basis, data.row(i)), g));
    }
    auto [it, inserted] =
        table.slot_of.try_emplace(key, static_cast<uint32_t>(table.keys.size()));
    if (inserted) {
      table.keys.push_back(key);
      grow.emplace_back();
    }
    grow[it->second].push_back(static_cast<uint32_t>(i));
  }
  freeze_table(table, grow);
}

}  // namespace

std::optional<double> pde_distance(std::span<const float> x,
                                   std::span<const float> y, double bound) {
  if (x.size() != y.size()) throw UsageError("pde_distance: length mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    sum += d * d;
    if (sum > bound) return std::nullopt;
  }
  return sum;
}

RosannaIndex RosannaIndex::build(std::shared_ptr<const VectorSet> dataset,
                                 const IndexParams& params, unsigned threads) {
  auto copy = dataset;
  return build(std::move(copy), std::move(dataset), params, threads);
}

RosannaIndex RosannaIndex::build(std::shared_ptr<const VectorSet> classify_data,
                                 std::shared_ptr<const VectorSet> full_data,
                                 const IndexParams& params, unsigned threads) {
  if (!classify_data || !full_data)
    throw UsageError("build: null dataset");
  if (classify_data->n != full_data->n)
    throw UsageError("build: classify/full view size mismatch");
  uint32_t k = classify_data->k;
  if (params.g < 1 || params.g > k || params.g > 64)
    throw UsageError("build: g out of range");
  if (params.r_count < 1) throw UsageError("build: r_count must be >= 1");
  if (classify_data->n > std::numeric_limits<uint32_t>::max())
    throw UsageError("build: dataset too large for 32-bit ids");

  RosannaIndex index;
  index.params_ = params;
  index.classify_data_ = std::move(classify_data);
  index.full_data_ = std::move(full_data);
  index.bases_ = gen_bases(k, params.r_count, params.seed);
  index.tables_.resize(params.r_count);

  const VectorSet& data = *index.classify_data_;
  if (threads <= 1 || params.r_count == 1) {
    for (uint32_t r = 0; r < params.r_count; ++r)
      build_rotation(data, index.bases_.bases[r], params.g, index.tables_[r]);
  } else {
    // Rotations are independent; results do not depend on the thread count.
    std::vector<std::thread> pool;
    unsigned width = std::min<unsigned>(threads, params.r_count);
    for (unsigned t = 0; t < width; ++t) {
      pool.emplace_back([&, t]() {
        for (uint32_t r = t; r < params.r_count; r += width)
          build_rotation(data, index.bases_.bases[r], params.g,
                         index.tables_[r]);
      });
    }
    for (auto& th : pool) th.join();
  }
  return index;
}

std::optional<Neighbor> RosannaIndex::search(std::span<const float> query,
                                             const SearchParams& params,
                                             SearchScratch& scratch) const {
  return search(query, query, params, scratch);
}

std::optional<Neighbor> RosannaIndex::search(std::span<const float> query_classify,
                                             std::span<const float> query_full,
                                             const SearchParams& params,
                                             SearchScratch& scratch) const {
  if (!full_data_ || full_data_->empty())
    throw UsageError("search: empty index");
  if (query_classify.size() != classify_data_->k ||
      query_full.size() != full_data_->k)
    throw UsageError("search: query length mismatch");
  if (params.c < 1) throw UsageError("search: c must be >= 1");

  const uint32_t r_count = params_.r_count;
  scratch.begin_query(static_cast<size_t>(full_data_->n));

  // Per-rotation visit lists: project the query and order its cones.
  std::vector<ProbeSequence> seqs;
  seqs.reserve(r_count);
  size_t longest = 0;
  for (uint32_t r = 0; r < r_count; ++r) {
    std::vector<float> proj = project(bases_.bases[r], query_classify);
    seqs.push_back(probe_sequence(proj, params_.g, params.c));
    longest = std::max(longest, seqs.back().size());
  }

  // Interleaved visits: probe rank outer, rotation inner.
  bool found = false;
  Neighbor best{0, kInf};
  for (size_t l = 0; l < longest; ++l) {
    for (uint32_t r = 0; r < r_count; ++r) {
      if (l >= seqs[r].size()) continue;
      ++scratch.cones_probed;
      auto bucket = tables_[r].bucket(encode_key(seqs[r].cones[l]));
      for (uint32_t id : bucket) {
        ++scratch.candidates_seen;
        if (scratch.visited[id] == scratch.epoch) continue;
        scratch.visited[id] = scratch.epoch;
        ++scratch.distances_computed;

        double bound = found ? best.dist_sq : kInf;
        double d;
        if (params.use_pde) {
          auto partial = pde_distance(full_data_->row(id), query_full, bound);
          if (!partial) continue;
          d = *partial;
        } else {
          d = dist_sq(full_data_->row(id), query_full);
        }
        if (!found || d < best.dist_sq ||
            (d == best.dist_sq && id < best.id)) {
          best = {id, d};
          found = true;
        }
      }
    }
  }

  if (!found && params.fallback_linear) {
    Neighbor nn = linear_scan_nn(*full_data_, query_full);
    scratch.candidates_seen += full_data_->n;
    scratch.distances_computed += full_data_->n;
    return nn;
  }
  if (!found) return std::nullopt;
  return best;
}

std::vector<Neighbor> RosannaIndex::search_knn(std::span<const float> query_classify,
                                               std::span<const float> query_full,
                                               uint32_t k_nn,
                                               const SearchParams& params,
                                               SearchScratch& scratch) const {
  if (k_nn < 1) throw UsageError("search_knn: k_nn must be >= 1");
  if (!full_data_ || full_data_->empty())
    throw UsageError("search_knn: empty index");
  if (query_classify.size() != classify_data_->k ||
      query_full.size() != full_data_->k)
    throw UsageError("search_knn: query length mismatch");

  const uint32_t r_count = params_.r_count;
  scratch.begin_query(static_cast<size_t>(full_data_->n));

  std::vector<ProbeSequence> seqs;
  seqs.reserve(r_count);
  size_t longest = 0;
  for (uint32_t r = 0; r < r_count; ++r) {
    std::vector<float> proj = project(bases_.bases[r], query_classify);
    seqs.push_back(probe_sequence(proj, params_.g, params.c));
    longest = std::max(longest, seqs.back().size());
  }

  // Bounded worst-first heap; worst = lexicographically largest (dist, id).
  auto worse = [](const Neighbor& a, const Neighbor& b) {
    if (a.dist_sq != b.dist_sq) return a.dist_sq < b.dist_sq;
    return a.id < b.id;
  };
  std::vector<Neighbor> heap;
  heap.reserve(k_nn);

  for (size_t l = 0; l < longest; ++l) {
    for (uint32_t r = 0; r < r_count; ++r) {
      if (l >= seqs[r].size()) continue;
      ++scratch.cones_probed;
      auto bucket = tables_[r].bucket(encode_key(seqs[r].cones[l]));
      for (uint32_t id : bucket) {
        ++scratch.candidates_seen;
        if (scratch.visited[id] == scratch.epoch) continue;
        scratch.visited[id] = scratch.epoch;
        ++scratch.distances_computed;

        bool full = heap.size() == k_nn;
        double bound = full ? heap.front().dist_sq : kInf;
        double d;
        if (params.use_pde) {
          auto partial = pde_distance(full_data_->row(id), query_full, bound);
          if (!partial) continue;
          d = *partial;
        } else {
          d = dist_sq(full_data_->row(id), query_full);
        }
        Neighbor cand{id, d};
        if (!full) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end(), worse);
        } else if (worse(cand, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), worse);
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end(), worse);
        }
      }
    }
  }

  std::sort(heap.begin(), heap.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.dist_sq != b.dist_sq) return a.dist_sq < b.dist_sq;
    return a.id < b.id;
  });
  return heap;
}

uint64_t RosannaIndex::total_entries() const {
  uint64_t total = 0;
  for (const auto& t : tables_) total += t.entries();
  return total;
}

uint64_t RosannaIndex::table_bytes() const {
  uint64_t bytes = 0;
  for (const auto& t : tables_) {
    bytes += t.ids.size() * sizeof(uint32_t);
    bytes += t.offsets.size() * sizeof(uint32_t);
    for (const auto& key : t.keys) bytes += key.size();
  }
  return bytes;
}

uint64_t RosannaIndex::index_bytes() const {
  uint64_t k = classify_data_ ? classify_data_->k : 0;
  return table_bytes() + static_cast<uint64_t>(params_.r_count) * k * k * 8;
}

void RosannaIndex::save_core(std::ostream& out) const {
  io::write_pod<uint64_t>(out, full_data_ ? full_data_->n : 0);
  io::write_pod<uint32_t>(out, classify_data_ ? classify_data_->k : 0);
  io::write_pod<uint32_t>(out, params_.g);
  io::write_pod<uint32_t>(out, params_.r_count);
  io::write_pod<uint64_t>(out, params_.seed);

  uint32_t k = classify_data_->k;
  for (const auto& basis : bases_.bases) {
    io::write_pod<uint32_t>(out, basis.k);
    io::write_pod<uint32_t>(out, basis.id);
    if (basis.identity) {
      for (uint32_t i = 0; i < k; ++i)
        for (uint32_t j = 0; j < k; ++j)
          io::write_pod<double>(out, i == j ? 1.0 : 0.0);
    } else {
      io::write_vec(out, basis.matrix);
    }
  }

  for (const auto& table : tables_) {
    io::write_pod<uint64_t>(out, table.keys.size());
    for (size_t s = 0; s < table.keys.size(); ++s) {
      io::write_bytes(out, table.keys[s]);
      uint32_t count = table.offsets[s + 1] - table.offsets[s];
      io::write_pod<uint32_t>(out, count);
      out.write(reinterpret_cast<const char*>(table.ids.data() + table.offsets[s]),
                static_cast<std::streamsize>(count) * 4);
    }
  }
  if (!out) throw IoError("index write failed");
}

RosannaIndex RosannaIndex::load_core(std::istream& in,
                                     std::shared_ptr<const VectorSet> classify_data,
                                     std::shared_ptr<const VectorSet> full_data) {
  RosannaIndex index;
  uint64_t n = io::read_pod<uint64_t>(in);
  uint32_t k = io::read_pod<uint32_t>(in);
  index.params_.g = io::read_pod<uint32_t>(in);
  index.params_.r_count = io::read_pod<uint32_t>(in);
  index.params_.seed = io::read_pod<uint64_t>(in);

  if (classify_data->n != n || full_data->n != n)
    throw IoError("index file does not match the supplied dataset size");
  if (classify_data->k != k)
    throw IoError("index file does not match the supplied dataset dimension");

  index.classify_data_ = std::move(classify_data);
  index.full_data_ = std::move(full_data);

  index.bases_.r_count = index.params_.r_count;
  for (uint32_t r = 0; r < index.params_.r_count; ++r) {
    OrthoBasis basis;
    basis.k = io::read_pod<uint32_t>(in);
    basis.id = io::read_pod<uint32_t>(in);
    if (basis.k != k) throw IoError("index file basis dimension mismatch");
    std::vector<double> matrix;
    io::read_vec(in, matrix, static_cast<size_t>(k) * k);
    basis.seed = index.params_.seed;
    if (basis.id == 0) {
      basis.identity = true;  // bases[0] is the identity by construction
      basis.seed = 0;
    } else {
      basis.matrix = std::move(matrix);
    }
    index.bases_.bases.push_back(std::move(basis));
  }

  index.tables_.resize(index.params_.r_count);
  for (auto& table : index.tables_) {
    uint64_t cones = io::read_pod<uint64_t>(in);
    table.keys.reserve(cones);
    table.offsets.reserve(cones + 1);
    uint32_t total = 0;
    for (uint64_t s = 0; s < cones; ++s) {
      std::string key = io::read_bytes(in);
      uint32_t count = io::read_pod<uint32_t>(in);
      table.slot_of.emplace(key, static_cast<uint32_t>(s));
      table.keys.push_back(std::move(key));
      table.offsets.push_back(total);
      size_t base = table.ids.size();
      table.ids.resize(base + count);
      if (!in.read(reinterpret_cast<char*>(table.ids.data() + base),
                   static_cast<std::streamsize>(count) * 4))
        throw IoError("index file truncated");
      total += count;
    }
    table.offsets.push_back(total);
  }
  return index;
}

void RosannaIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  io::write_pod<uint32_t>(out, kIndexMagic);
  io::write_pod<uint32_t>(out, kIndexVersion);
  io::write_pod<uint32_t>(out, 0u);  // flags: plain index
  save_core(out);
  if (!out) throw IoError("index write failed: " + path);
}

RosannaIndex RosannaIndex::load(const std::string& path,
                                std::shared_ptr<const VectorSet> dataset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  if (io::read_pod<uint32_t>(in) != kIndexMagic)
    throw IoError(path + ": not an index file");
  if (io::read_pod<uint32_t>(in) != kIndexVersion)
    throw IoError(path + ": unsupported index version");
  uint32_t flags = io::read_pod<uint32_t>(in);
  if (flags != 0)
    throw IoError(path +
                  ": index carries preprocessing sections; load it through "
                  "the pipeline loader");
  auto copy = dataset;
  return load_core(in, std::move(copy), std::move(dataset));
}

}  // namespace rosanna
