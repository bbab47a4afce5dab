// Acceptance suite: end-to-end checks of the library's statistical claims and
// search guarantees, one PASS/FAIL line per criterion. Criteria that need the
// UBC SIFT / IRISA corpora are skipped with a warning when the files are not
// on disk (see README for the expected layout).
//
// Exit code: number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <vector>

#include "rosanna/bench.hpp"
#include "rosanna/common.hpp"
#include "rosanna/cones.hpp"
#include "rosanna/dataset.hpp"
#include "rosanna/index.hpp"
#include "rosanna/osstats.hpp"
#include "rosanna/preprocess.hpp"
#include "rosanna/rng.hpp"
#include "rosanna/rotations.hpp"

using namespace rosanna;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion
            << ": " << detail << std::endl;
  if (!pass) ++failures;
}

void report_skip(int criterion, const std::string& detail) {
  std::cout << "[SKIP] criterion " << criterion << ": " << detail << std::endl;
}

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::shared_ptr<const VectorSet> shared(VectorSet v) {
  return std::make_shared<const VectorSet>(std::move(v));
}

// Dataset discovery for the real-data criteria. Either point ROSANNA_DATA_DIR
// at a directory holding <name>/base.fvecs and <name>/query.fvecs, or place
// them under ./data/<name>/.
std::string find_dataset_file(const std::string& name, const std::string& file) {
  std::vector<std::string> roots;
  if (const char* env = std::getenv("ROSANNA_DATA_DIR")) roots.push_back(env);
  roots.push_back("data");
  roots.push_back("../data");
  for (const auto& root : roots) {
    std::filesystem::path p = std::filesystem::path(root) / name / file;
    if (std::filesystem::exists(p)) return p.string();
  }
  return {};
}

// ---------------------------------------------------------------------------
// 1. Exhaustive-equivalence oracle

void criterion_1() {
  auto start = Clock::now();
  auto base = shared(gen_synthetic({Distribution::Gaussian, 10000, 16, 101}));
  VectorSet queries = gen_synthetic({Distribution::Gaussian, 1000, 16, 102});

  RosannaIndex index = RosannaIndex::build(base, IndexParams{2, 1, 101});
  SearchScratch scratch = index.make_scratch();
  SearchParams params{cone_count(16, 2)};  // every cone

  uint64_t exact = 0;
  for (uint64_t q = 0; q < queries.n; ++q) {
    auto got = index.search(queries.row(q), params, scratch);
    Neighbor oracle = linear_scan_nn(*base, queries.row(q));
    if (got && got->id == oracle.id && got->dist_sq == oracle.dist_sq) ++exact;
  }
  double secs = elapsed(start);

  std::ostringstream detail;
  detail << "exhaustive c=" << params.c << " equals linear scan on " << exact
         << "/" << queries.n << " queries in " << secs << "s (gate 100%, <60s)";
  report(1, exact == queries.n && secs < 60.0, detail.str());
}

// ---------------------------------------------------------------------------
// 2. Order-statistics CDF vs Monte Carlo

void criterion_2() {
  constexpr uint32_t k = 8;
  constexpr size_t samples = 100000;

  std::vector<std::vector<double>> per_rank(k);
  for (auto& v : per_rank) v.reserve(samples);
  Rng rng(2025);
  std::vector<double> mags(k);
  for (size_t s = 0; s < samples; ++s) {
    for (auto& m : mags) m = std::abs(rng.gaussian());
    std::sort(mags.begin(), mags.end(), std::greater<>());
    for (uint32_t i = 0; i < k; ++i) per_rank[i].push_back(mags[i]);
  }
  for (auto& v : per_rank) std::sort(v.begin(), v.end());

  double worst = 0.0;
  for (uint32_t i = 1; i <= k; ++i) {
    const auto& v = per_rank[i - 1];
    for (double x = 0.0; x <= 6.0; x += 0.005) {
      auto it = std::upper_bound(v.begin(), v.end(), x);
      double empirical = static_cast<double>(it - v.begin()) / samples;
      worst = std::max(worst, std::abs(empirical - os_cdf_gaussian(x, i, k)));
    }
  }

  std::ostringstream detail;
  detail << "max |empirical - analytic| CDF deviation over ranks 1..8 = "
         << worst << " (gate < 0.01, " << samples << " samples)";
  report(2, worst < 0.01, detail.str());
}

// ---------------------------------------------------------------------------
// 3. Energy fractions of sorted components

void criterion_3() {
  constexpr uint32_t k = 8;
  std::vector<double> shares = sorted_energy_shares(k);
  double top1 = shares[0];
  double top4 = shares[0] + shares[1] + shares[2] + shares[3];

  // independent Monte Carlo confirmation
  constexpr size_t samples = 200000;
  Rng rng(33);
  std::vector<double> energy(k, 0.0);
  std::vector<double> mags(k);
  for (size_t s = 0; s < samples; ++s) {
    for (auto& m : mags) m = rng.gaussian();
    std::sort(mags.begin(), mags.end(),
              [](double a, double b) { return std::abs(a) > std::abs(b); });
    for (uint32_t i = 0; i < k; ++i) energy[i] += mags[i] * mags[i];
  }
  double total = 0.0;
  for (double e : energy) total += e;
  double mc_top1 = energy[0] / total;
  double mc_top4 = (energy[0] + energy[1] + energy[2] + energy[3]) / total;

  bool pass = std::abs(top1 - 0.44) <= 0.01 && std::abs(top4 - 0.90) <= 0.01 &&
              std::abs(mc_top1 - 0.44) <= 0.01 && std::abs(mc_top4 - 0.90) <= 0.01;
  std::ostringstream detail;
  detail << "rank-1 share: integration " << top1 << ", MC " << mc_top1
         << " (gate 0.44 +/- 0.01); first-4: integration " << top4 << ", MC "
         << mc_top4 << " (gate 0.90 +/- 0.01)";
  report(3, pass, detail.str());
}

// ---------------------------------------------------------------------------
// 4. Agreement probabilities at density 1

void criterion_4() {
  // Estimates carry a per-dataset random effect (sigma ~ 0.036) on top of the
  // binomial noise, so the run uses many small dataset blocks: 30000 trials
  // over 600 datasets puts the standard error near 0.003 around the measured
  // p ~ 0.435.
  AgreementSpec spec;
  spec.k = 16;
  spec.log2n = 16.0;  // n = 2^16, rho = 1
  spec.f = 1;
  spec.trials = 30000;  // >= 500 queries
  spec.queries_per_dataset = 50;
  spec.seed = 404;

  std::vector<uint32_t> g_values{1, 16};
  std::vector<uint32_t> r_values{1, 2, 4, 8, 16};
  AgreementCurves curves = agreement_curves(spec, g_values, r_values, 2);

  double p_match_11 = curves.p_topf_in_topg[0][0];  // f=1, g=1, r=1
  double p_sign_full = curves.p_sign_agree[1][0];   // g=16, r=1

  bool monotone = true;
  for (size_t ri = 1; ri < r_values.size(); ++ri) {
    if (curves.p_topf_in_topg[0][ri] < curves.p_topf_in_topg[0][ri - 1])
      monotone = false;
    if (curves.p_sign_agree[1][ri] < curves.p_sign_agree[1][ri - 1])
      monotone = false;
  }

  bool pass =
      std::abs(p_match_11 - 0.40) <= 0.05 && p_sign_full < 0.05 && monotone;
  std::ostringstream detail;
  detail << "p(top-1 in top-1, r=1) = " << p_match_11
         << " (gate 0.40 +/- 0.05); p(all 16 signs agree, r=1) = "
         << p_sign_full << " (gate < 0.05); monotone in r: "
         << (monotone ? "yes" : "no");
  report(4, pass, detail.str());
}

// ---------------------------------------------------------------------------
// 5. Search quality on unstructured data over the full default grid

void criterion_5() {
  auto start = Clock::now();
  auto base = shared(gen_synthetic({Distribution::Gaussian, 1ull << 16, 16, 501}));
  VectorSet queries = gen_synthetic({Distribution::Gaussian, 1000, 16, 502});

  GridSpec spec;
  spec.g_list = {1, 2, 3, 4, 5, 6, 7, 8};
  spec.r_list = {1, 2, 4, 8, 16};
  spec.c_list = {1, 2, 4, 8, 16, 32, 64, 128};
  spec.base = base;
  spec.queries = &queries;
  spec.seed = 501;
  spec.timing_reps = 1;
  spec.build_threads = 2;
  spec.eval_threads = 2;

  std::vector<RunRecord> records = run_grid(spec);
  double secs = elapsed(start);

  const RunRecord* best = nullptr;
  for (const RunRecord& rec : records) {
    if (rec.recall_at_1 >= 0.95 && rec.candidate_fraction <= 0.20 &&
        (!best || rec.candidate_fraction < best->candidate_fraction))
      best = &rec;
  }

  std::ostringstream detail;
  detail << records.size() << " grid cells in " << secs << "s (gate < 600s); ";
  if (best)
    detail << "best qualifying cell g=" << best->g << " r=" << best->r
           << " c=" << best->c << " recall=" << best->recall_at_1
           << " candidates=" << best->candidate_fraction
           << " (gate recall >= 0.95 with candidates <= 0.20)";
  else
    detail << "no cell reached recall >= 0.95 with candidate fraction <= 0.20";
  report(5, best != nullptr && secs < 600.0 && records.size() == 320,
         detail.str());
}

// ---------------------------------------------------------------------------
// 6. Real-data reproduction on UBC SIFT 100K

struct SiftEval {
  double recall = 0.0;
  double candidate_speedup = 0.0;  // n / mean distinct candidates
};

SiftEval eval_sift(const SearchPipeline& pipeline, const VectorSet& queries,
                   const GroundTruth& gt, uint64_t c) {
  SearchScratch scratch;
  SearchParams params{c};
  uint64_t hits = 0;
  uint64_t touched = 0;
  for (uint64_t q = 0; q < queries.n; ++q) {
    auto got = pipeline.search(queries.row(q), 1, params, scratch);
    touched += scratch.distances_computed;
    if (got && gt.nn_dist_sq[q] >= got->dist_sq - 1e-6 * gt.nn_dist_sq[q] &&
        got->dist_sq <= gt.nn_dist_sq[q] + 1e-6 * gt.nn_dist_sq[q])
      ++hits;
  }
  SiftEval out;
  out.recall = static_cast<double>(hits) / queries.n;
  double mean_candidates =
      static_cast<double>(touched) / static_cast<double>(queries.n);
  out.candidate_speedup =
      mean_candidates > 0 ? static_cast<double>(pipeline.flat().full_data().n) /
                                mean_candidates
                          : 0.0;
  return out;
}

void criterion_6() {
  std::string base_path = find_dataset_file("ubc_sift", "base.fvecs");
  std::string query_path = find_dataset_file("ubc_sift", "query.fvecs");
  if (base_path.empty() || query_path.empty()) {
    report_skip(6,
                "UBC SIFT 100K not found (expected <data>/ubc_sift/base.fvecs "
                "and query.fvecs); download it to enable this check");
    return;
  }

  auto base = shared(load_vectors(base_path));
  VectorSet queries_all = load_vectors(query_path);
  VectorSet queries;
  queries.k = queries_all.k;
  queries.n = std::min<uint64_t>(queries_all.n, 1000);
  queries.data.assign(queries_all.data.begin(),
                      queries_all.data.begin() + queries.n * queries.k);
  GroundTruth gt = compute_ground_truth(*base, queries, 2);

  // classification on the 16 leading PCA components, as for every structured
  // dataset here; distances always run over all 128 components
  struct Config {
    const char* name;
    uint32_t g, r;
    uint64_t c;
    double table_speedup;
  };
  std::vector<Config> configs = {
      {"pivot", 4, 8, 4, 100}, {"G-", 3, 8, 4, 37},   {"G+", 5, 8, 4, 168},
      {"R-", 4, 4, 4, 180},    {"R+", 4, 16, 4, 54},  {"C-", 4, 8, 2, 145},
      {"C+", 4, 8, 8, 66},
  };

  std::map<std::pair<uint32_t, uint32_t>, SearchPipeline> pipelines;
  std::map<std::string, SiftEval> results;
  for (const auto& cfg : configs) {
    auto key = std::make_pair(cfg.g, cfg.r);
    if (!pipelines.count(key))
      pipelines.emplace(key, SearchPipeline::build(
                                 base, IndexParams{cfg.g, cfg.r, 601},
                                 PipelineOptions{16, 0, 25}, 2));
    results[cfg.name] = eval_sift(pipelines.at(key), queries, gt, cfg.c);
  }

  double pivot_recall = results["pivot"].recall;
  bool recall_ok = std::abs(pivot_recall - 0.905) <= 0.03;
  bool g_trend = results["G-"].recall > results["pivot"].recall &&
                 results["pivot"].recall > results["G+"].recall;
  bool r_trend = results["R+"].recall > results["pivot"].recall &&
                 results["pivot"].recall > results["R-"].recall;
  bool c_trend = results["C+"].recall > results["pivot"].recall &&
                 results["pivot"].recall > results["C-"].recall;

  // candidate-based speed-up must order the seven configurations the same way
  // the reported wall-clock speed-ups do
  std::vector<Config> by_table(configs);
  std::sort(by_table.begin(), by_table.end(),
            [](const Config& a, const Config& b) {
              return a.table_speedup > b.table_speedup;
            });
  bool order_ok = true;
  for (size_t i = 1; i < by_table.size(); ++i)
    if (results[by_table[i - 1].name].candidate_speedup <=
        results[by_table[i].name].candidate_speedup)
      order_ok = false;

  std::ostringstream detail;
  detail << "pivot recall=" << pivot_recall
         << " (gate 0.905 +/- 0.03); trends g:" << (g_trend ? "ok" : "BAD")
         << " r:" << (r_trend ? "ok" : "BAD") << " c:" << (c_trend ? "ok" : "BAD")
         << "; candidate-speedup ordering " << (order_ok ? "matches" : "differs");
  report(6, recall_ok && g_trend && r_trend && c_trend && order_ok, detail.str());
}

// ---------------------------------------------------------------------------
// 7. Intrinsic dimensionality

void criterion_7() {
  bool pass = true;
  std::ostringstream detail;

  for (uint32_t d : {1u, 3u, 4u, 7u, 16u}) {
    std::vector<double> uniform(d, 1.7);
    uniform.resize(d + 5, 0.0);  // trailing zeros must not contribute
    double got = intrinsic_dim(uniform);
    if (std::abs(got - d) > 1e-9 * d) pass = false;
  }
  std::vector<double> spike{42.0, 0.0, 0.0, 0.0};
  if (intrinsic_dim(spike) != 1.0) pass = false;
  detail << "uniform spectra give D* = d and a single spike gives exactly 1";

  std::string ubc = find_dataset_file("ubc_sift", "base.fvecs");
  std::string irisa = find_dataset_file("irisa_sift", "base.fvecs");
  if (!ubc.empty()) {
    PcaModel model = pca_fit(load_vectors(ubc));
    double dim = intrinsic_dim(model.eigvals);
    detail << "; UBC D* = " << dim << " (gate 38.69 +/- 0.5)";
    if (std::abs(dim - 38.69) > 0.5) pass = false;
  } else {
    detail << "; UBC spectrum skipped (dataset not present)";
  }
  if (!irisa.empty()) {
    PcaModel model = pca_fit(load_vectors(irisa));
    double dim = intrinsic_dim(model.eigvals);
    detail << "; IRISA D* = " << dim << " (gate 27.94 +/- 0.5)";
    if (std::abs(dim - 27.94) > 0.5) pass = false;
  } else {
    detail << "; IRISA spectrum skipped (dataset not present)";
  }
  report(7, pass, detail.str());
}

// ---------------------------------------------------------------------------
// 8. Structural invariants

void criterion_8() {
  bool pass = true;
  std::ostringstream detail;

  // rotation orthogonality
  BasisSet bases = gen_bases(16, 16, 801);
  double worst_ortho = 0.0;
  for (const auto& basis : bases.bases)
    worst_ortho = std::max(worst_ortho, orthogonality_error(basis));
  if (worst_ortho >= 1e-6) pass = false;
  detail << "orthogonality " << worst_ortho << " (< 1e-6)";

  // total entries
  auto base = shared(gen_synthetic({Distribution::Gaussian, 20000, 16, 801}));
  RosannaIndex index = RosannaIndex::build(base, IndexParams{3, 8, 801}, 2);
  bool entries_ok = index.total_entries() == 8ull * base->n;
  if (!entries_ok) pass = false;
  detail << "; entries " << index.total_entries() << " == r*n "
         << (entries_ok ? "ok" : "BAD");

  // dedup: the distance counter never exceeds the distinct probed candidates
  VectorSet queries = gen_synthetic({Distribution::Gaussian, 200, 16, 802});
  SearchScratch scratch = index.make_scratch();
  bool dedup_ok = true;
  for (uint64_t q = 0; q < queries.n; ++q) {
    index.search(queries.row(q), SearchParams{8}, scratch);
    std::set<uint32_t> distinct;
    for (uint32_t r = 0; r < index.params().r_count; ++r) {
      std::vector<float> proj = project(index.bases().bases[r], queries.row(q));
      ProbeSequence seq = probe_sequence(proj, index.params().g, 8);
      for (const auto& cone : seq.cones) {
        auto bucket = index.tables()[r].bucket(encode_key(cone));
        distinct.insert(bucket.begin(), bucket.end());
      }
    }
    if (scratch.distances_computed > distinct.size()) dedup_ok = false;
  }
  if (!dedup_ok) pass = false;
  detail << "; dedup " << (dedup_ok ? "ok" : "BAD");

  // PDE on/off identical results over 1000 queries
  VectorSet pde_queries = gen_synthetic({Distribution::Gaussian, 1000, 16, 803});
  bool pde_ok = true;
  for (uint64_t q = 0; q < pde_queries.n; ++q) {
    auto with = index.search(pde_queries.row(q), SearchParams{4, true}, scratch);
    auto without =
        index.search(pde_queries.row(q), SearchParams{4, false}, scratch);
    if (with.has_value() != without.has_value()) pde_ok = false;
    if (with && (with->id != without->id || with->dist_sq != without->dist_sq))
      pde_ok = false;
  }
  if (!pde_ok) pass = false;
  detail << "; PDE on/off identical over 1000 queries "
         << (pde_ok ? "ok" : "BAD");

  report(8, pass, detail.str());
}

// ---------------------------------------------------------------------------
// 9. Two-stage search

void criterion_9() {
  auto start = Clock::now();
  bool pass = true;
  std::ostringstream detail;

  // m=1 equals the flat index bit for bit
  {
    auto base = shared(gen_synthetic({Distribution::Gaussian, 20000, 16, 901}));
    VectorSet queries = gen_synthetic({Distribution::Gaussian, 500, 16, 902});
    IndexParams params{3, 4, 901};
    RosannaIndex flat = RosannaIndex::build(base, params, 2);
    TwoStageIndex ts = TwoStageIndex::build(base, base, 1, 10, params, 2);

    SearchScratch s1 = flat.make_scratch();
    SearchScratch s2;
    bool identical = true;
    for (uint64_t q = 0; q < queries.n; ++q) {
      auto a = flat.search(queries.row(q), SearchParams{4}, s1);
      auto b = ts.search(queries.row(q), queries.row(q), 1, SearchParams{4}, s2);
      if (a.has_value() != b.has_value()) identical = false;
      if (a && b && (a->id != b->id || a->dist_sq != b->dist_sq))
        identical = false;
    }
    if (!identical) pass = false;
    detail << "m=1 identical to flat over 500 queries "
           << (identical ? "ok" : "BAD");
  }

  // recall monotone in w on a 1e5-point set
  {
    auto base = shared(gen_synthetic({Distribution::Gaussian, 100000, 16, 903}));
    VectorSet queries = gen_synthetic({Distribution::Gaussian, 300, 16, 904});
    GroundTruth gt = compute_ground_truth(*base, queries, 2);
    TwoStageIndex ts =
        TwoStageIndex::build(base, base, 64, 15, IndexParams{3, 4, 903}, 2);

    SearchScratch scratch;
    bool monotone = true;
    double prev = -1.0;
    detail << "; recall by w:";
    for (uint32_t w : {1u, 2u, 4u, 8u, 16u, 32u, 64u}) {
      uint64_t hits = 0;
      for (uint64_t q = 0; q < queries.n; ++q) {
        auto got =
            ts.search(queries.row(q), queries.row(q), w, SearchParams{4}, scratch);
        if (got && got->dist_sq <= gt.nn_dist_sq[q] + 1e-6 * gt.nn_dist_sq[q])
          ++hits;
      }
      double recall = static_cast<double>(hits) / queries.n;
      detail << ' ' << recall;
      if (recall < prev) monotone = false;
      prev = recall;
    }
    if (!monotone) pass = false;
    detail << (monotone ? " (monotone ok)" : " (NOT monotone)");
  }

  detail << "; " << elapsed(start) << "s";
  report(9, pass, detail.str());
}

}  // namespace

int main() {
  auto start = Clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES PRESENT")
            << " (" << failures << " failed, total " << elapsed(start)
            << "s)" << std::endl;
  return failures;
}
