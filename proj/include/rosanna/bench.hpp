#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "rosanna/dataset.hpp"
#include "rosanna/index.hpp"

namespace rosanna {

/// One benchmark measurement. m and w are 0 for flat (single-stage) runs.
struct RunRecord {
  uint32_t g = 0;
  uint32_t r = 0;
  uint64_t c = 0;
  uint32_t m = 0;
  uint32_t w = 0;
  double recall_at_1 = 0.0;
  double speedup_wallclock = 0.0;    // linear-scan time / ANN time
  double candidate_fraction = 0.0;   // mean distinct candidates / n
  double build_time_rel = 0.0;       // build time / linear-scan time
  double memory_overhead_rel = 0.0;  // index bytes / dataset bytes
  // Opt-in threaded timing, kept out of the CSV so the pinned schema and the
  // single-threaded methodology stay intact. 0 when not measured.
  double speedup_threaded = 0.0;
};

struct EvalOptions {
  uint64_t c = 1;
  bool use_pde = true;
  bool fallback_linear = false;
  int timing_reps = 3;             // wall-clock is the best of this many runs
  double linear_scan_seconds = 0;  // measured here when 0
  double build_seconds = 0;        // build_time_rel stays 0 when unknown
  unsigned eval_threads = 1;       // workers for the recall/candidate pass
  unsigned timing_threads = 0;     // >1 also measures a threaded wall-clock
};

/// Recall@1, wall-clock speed-up and candidate statistics over a query batch.
/// A query scores correct when its returned distance matches the true NN
/// distance within 1e-6 relative, so ties at the exact NN distance count.
RunRecord evaluate(const RosannaIndex& index, const VectorSet& queries,
                   const GroundTruth& gt, const EvalOptions& options);

struct GridSpec {
  std::vector<uint32_t> g_list;
  std::vector<uint32_t> r_list;
  std::vector<uint64_t> c_list;
  std::shared_ptr<const VectorSet> base;
  const VectorSet* queries = nullptr;
  uint64_t seed = 0;
  int timing_reps = 3;
  unsigned build_threads = 1;
  unsigned eval_threads = 1;    // recall/candidate pass workers
  unsigned timing_threads = 0;  // >1 adds a separately logged threaded timing
  bool use_pde = true;
  std::ostream* log = nullptr;  // skip reasons and progress
};

/// One record per (g, r, c); the index is rebuilt only when (g, r) changes.
/// Infeasible combinations are skipped with a logged reason.
std::vector<RunRecord> run_grid(const GridSpec& spec);

/// Records not dominated in the (recall, speed-up) plane, sorted by recall.
std::vector<RunRecord> pareto_envelope(std::span<const RunRecord> records);

void write_records_csv(std::span<const RunRecord> records, std::ostream& out);

/// Wall-clock helper: best-of-reps timing of a full linear scan over queries.
double time_linear_scan(const VectorSet& base, const VectorSet& queries,
                        int reps);

}  // namespace rosanna
