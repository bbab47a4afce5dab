// Command-line front end: dataset generation, ground truth, index build,
// search, parameter grids, order-statistics curves, PCA and k-means reports.
// All numeric outputs are CSV with a header row.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "rosanna/bench.hpp"
#include "rosanna/common.hpp"
#include "rosanna/cones.hpp"
#include "rosanna/dataset.hpp"
#include "rosanna/osstats.hpp"
#include "rosanna/preprocess.hpp"

using namespace rosanna;

namespace {

struct OutStream {
  std::ofstream file;
  std::ostream* stream = &std::cout;
  bool to_stdout = true;

  explicit OutStream(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path, std::ios::trunc);
    if (!file) throw IoError("cannot open " + path + " for writing");
    stream = &file;
    to_stdout = false;
  }
  std::ostream& out() { return *stream; }
};

struct CommonOpts {
  uint64_t seed = 0;
  unsigned threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--seed", opts.seed, "Seed for every random choice");
  cmd->add_option("--threads", opts.threads, "Worker threads where supported");
}

// --config <file>: one key=value per line, '#' comments; keys are the long
// option names of the active subcommand. Expanded into --key=value tokens
// inserted right after the subcommand, so explicit flags override the file.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string config_path;

  std::vector<std::string> stripped;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      stripped.push_back(args[i]);
    }
  }
  if (config_path.empty()) return stripped;

  std::ifstream file(config_path);
  if (!file) throw IoError("cannot open config file " + config_path);
  std::vector<std::string> expanded;
  std::string line;
  size_t line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    size_t last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line.find('=') == std::string::npos)
      throw UsageError(config_path + ":" + std::to_string(line_no) +
                       ": expected key=value");
    expanded.push_back("--" + line);
  }

  // insert after the subcommand name (the first non-flag token)
  std::vector<std::string> out;
  bool inserted = false;
  for (size_t i = 0; i < stripped.size(); ++i) {
    out.push_back(stripped[i]);
    if (!inserted && i > 0 && !stripped[i].empty() && stripped[i][0] != '-') {
      out.insert(out.end(), expanded.begin(), expanded.end());
      inserted = true;
    }
  }
  if (!inserted) throw UsageError("--config requires a subcommand");
  return out;
}

std::vector<uint32_t> parse_u32_list(const std::string& csv, const char* what) {
  std::vector<uint32_t> out;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(static_cast<uint32_t>(std::stoul(item)));
    } catch (const std::exception&) {
      throw UsageError(std::string("bad ") + what + " list entry: " + item);
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + " list is empty");
  return out;
}

std::shared_ptr<const VectorSet> load_shared(const std::string& path) {
  return std::make_shared<const VectorSet>(load_vectors(path));
}

int run_gen(const std::string& dist, uint64_t n, uint32_t k,
            const std::string& out, const std::string& format,
            const CommonOpts& common) {
  SyntheticSpec spec{parse_distribution(dist), n, k, common.seed};
  VectorSet v = gen_synthetic(spec);
  if (format == "fvecs")
    write_fvecs(v, out);
  else if (format == "raw")
    write_raw(v, out);
  else
    throw UsageError("unknown format: " + format);
  std::cerr << "wrote " << v.n << " x " << v.k << " vectors to " << out << "\n";
  return kExitOk;
}

int run_gt(const std::string& base_path, const std::string& query_path,
           const std::string& out, const CommonOpts& common) {
  VectorSet base = load_vectors(base_path);
  VectorSet queries = load_vectors(query_path);
  GroundTruth gt = compute_ground_truth(base, queries, common.threads);
  save_ground_truth_csv(gt, out);
  std::cerr << "wrote ground truth for " << gt.size() << " queries to " << out
            << "\n";
  return kExitOk;
}

int run_build(const std::string& base_path, uint32_t g, uint32_t r,
              uint32_t pca_dim, uint32_t kmeans_m, uint32_t kmeans_iters,
              const std::string& out, const CommonOpts& common) {
  auto base = load_shared(base_path);
  SearchPipeline pipeline =
      SearchPipeline::build(base, IndexParams{g, r, common.seed},
                            PipelineOptions{pca_dim, kmeans_m, kmeans_iters},
                            common.threads);
  pipeline.save(out);
  std::cerr << "built index (g=" << g << ", r=" << r;
  if (pca_dim) std::cerr << ", pca_dim=" << pca_dim;
  if (kmeans_m) std::cerr << ", m=" << kmeans_m;
  std::cerr << ") over " << base->n << " vectors; " << pipeline.index_bytes()
            << " bytes; saved to " << out << "\n";
  return kExitOk;
}

int run_search(const std::string& index_path, const std::string& base_path,
               const std::string& query_path, uint64_t c, uint32_t w,
               bool fallback, bool no_pde, const std::string& check_gt,
               const std::string& out_path) {
  auto base = load_shared(base_path);
  SearchPipeline pipeline = SearchPipeline::load(index_path, base);
  VectorSet queries = load_vectors(query_path);

  std::optional<GroundTruth> gt;
  if (!check_gt.empty()) {
    gt = load_ground_truth_csv(check_gt);
    if (gt->size() != queries.n)
      throw UsageError("--check-gt row count does not match the query file");
  }

  OutStream sink(out_path);
  sink.out() << "query_id,nn_id,nn_dist_sq,candidates\n";
  sink.out().precision(17);

  SearchParams params{c, !no_pde, fallback};
  SearchScratch scratch;
  uint64_t hits = 0;
  for (uint64_t q = 0; q < queries.n; ++q) {
    auto result = pipeline.search(queries.row(q), w, params, scratch);
    if (result)
      sink.out() << q << ',' << result->id << ',' << result->dist_sq << ','
                 << scratch.distances_computed << '\n';
    else
      sink.out() << q << ",-1,inf," << scratch.distances_computed << '\n';
    if (gt && result &&
        result->dist_sq <= gt->nn_dist_sq[q] + 1e-6 * gt->nn_dist_sq[q])
      ++hits;
  }
  if (gt) {
    std::ostream& report = sink.to_stdout ? std::cerr : std::cout;
    report << "recall_at_1," << static_cast<double>(hits) / std::max<uint64_t>(1, queries.n)
           << "\n";
  }
  return kExitOk;
}

int run_grid_cmd(const std::string& base_path, const std::string& query_path,
                 const std::string& g_csv, const std::string& r_csv,
                 const std::string& c_csv, int timing_reps, bool no_timing,
                 unsigned timing_threads, bool pareto_only,
                 const std::string& out_path, const CommonOpts& common) {
  auto base = load_shared(base_path);
  VectorSet queries = load_vectors(query_path);

  GridSpec spec;
  spec.g_list = parse_u32_list(g_csv, "g");
  spec.r_list = parse_u32_list(r_csv, "r");
  for (uint32_t c : parse_u32_list(c_csv, "c")) spec.c_list.push_back(c);
  spec.base = base;
  spec.queries = &queries;
  spec.seed = common.seed;
  spec.timing_reps = no_timing ? 0 : timing_reps;
  spec.build_threads = common.threads;
  spec.eval_threads = common.threads;
  spec.timing_threads = timing_threads;
  spec.log = &std::cerr;

  std::vector<RunRecord> records = run_grid(spec);
  if (pareto_only) records = pareto_envelope(records);

  OutStream sink(out_path);
  write_records_csv(records, sink.out());
  return kExitOk;
}

int run_osstats_cdf(uint32_t k, double x_max, double step, bool pdf,
                    const std::string& out_path) {
  OutStream sink(out_path);
  sink.out() << (pdf ? "x,i,pdf\n" : "x,i,cdf\n");
  sink.out().precision(12);
  for (double x = pdf ? -x_max : 0.0; x <= x_max + 1e-12; x += step)
    for (uint32_t i = 1; i <= k; ++i)
      sink.out() << x << ',' << i << ','
                 << (pdf ? os_pdf_gaussian(x, i, k) : os_cdf_gaussian(x, i, k))
                 << '\n';
  return kExitOk;
}

int run_osstats_energy(uint32_t k, const std::string& out_path) {
  OutStream sink(out_path);
  std::vector<double> shares = sorted_energy_shares(k);
  sink.out() << "i,energy_share\n";
  sink.out().precision(12);
  for (uint32_t i = 0; i < k; ++i)
    sink.out() << (i + 1) << ',' << shares[i] << '\n';
  return kExitOk;
}

int run_osstats_agreement(uint32_t k, double log2n, uint32_t f,
                          const std::string& g_csv, const std::string& r_csv,
                          uint32_t trials, const std::string& out_path,
                          const CommonOpts& common) {
  AgreementSpec spec;
  spec.k = k;
  spec.log2n = log2n;
  spec.f = f;
  spec.trials = trials;
  spec.seed = common.seed;

  std::vector<uint32_t> g_values = parse_u32_list(g_csv, "g");
  std::vector<uint32_t> r_values = parse_u32_list(r_csv, "r");
  AgreementCurves curves =
      agreement_curves(spec, g_values, r_values, common.threads);

  OutStream sink(out_path);
  sink.out() << "f,g,r,p_topf_in_topg,p_sign_agree\n";
  sink.out().precision(12);
  for (size_t gi = 0; gi < g_values.size(); ++gi)
    for (size_t ri = 0; ri < r_values.size(); ++ri)
      sink.out() << f << ',' << g_values[gi] << ',' << r_values[ri] << ','
                 << curves.p_topf_in_topg[gi][ri] << ','
                 << curves.p_sign_agree[gi][ri] << '\n';
  return kExitOk;
}

int run_pca(const std::string& base_path, uint32_t dim,
            const std::string& out_path) {
  VectorSet base = load_vectors(base_path);
  PcaModel model = pca_fit(base);

  double total = 0;
  for (double e : model.eigvals) total += e;

  OutStream sink(out_path);
  sink.out() << "i,eigenvalue,normalized,cumulative\n";
  sink.out().precision(12);
  double cum = 0;
  for (uint32_t i = 0; i < model.k; ++i) {
    double norm = total > 0 ? model.eigvals[i] / total : 0.0;
    cum += norm;
    sink.out() << (i + 1) << ',' << model.eigvals[i] << ',' << norm << ','
               << cum << '\n';
  }

  std::ostream& report = sink.to_stdout ? std::cerr : std::cout;
  report << "intrinsic_dim," << intrinsic_dim(model.eigvals) << "\n";
  if (dim > 0 && dim <= model.k) {
    double head = 0;
    for (uint32_t i = 0; i < dim; ++i) head += model.eigvals[i];
    report << "energy_first_" << dim << "," << (total > 0 ? head / total : 0.0)
           << "\n";
  }
  return kExitOk;
}

int run_kmeans(const std::string& base_path, uint32_t m, uint32_t iters,
               const std::string& out_path, const CommonOpts& common) {
  VectorSet base = load_vectors(base_path);
  CoarseQuantizer q = kmeans_fit(base, m, iters, common.seed);

  std::vector<uint64_t> sizes(q.m, 0);
  for (uint32_t a : q.assignments) ++sizes[a];

  OutStream sink(out_path);
  sink.out() << "cluster,size\n";
  for (uint32_t c = 0; c < q.m; ++c) sink.out() << c << ',' << sizes[c] << '\n';

  std::ostream& report = sink.to_stdout ? std::cerr : std::cout;
  report << "distortion," << q.distortion << "\n";
  report << "iterations," << q.distortion_history.size() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ROSANNA: order-statistics approximate nearest-neighbor search"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.footer(
      "Every subcommand also accepts --config <file>: one key=value per line,\n"
      "'#' comments, keys matching the subcommand's long option names.\n"
      "Explicit command-line flags override config values.");

  CommonOpts common;

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  std::string gen_dist = "gaussian", gen_out, gen_format = "raw";
  uint64_t gen_n = 0;
  uint32_t gen_k = 1;
  gen->add_option("--dist", gen_dist, "gaussian | uniform | laplace");
  gen->add_option("--n", gen_n, "Vector count")->required();
  gen->add_option("--k", gen_k, "Dimensionality")->required();
  gen->add_option("--out", gen_out, "Output file")->required();
  gen->add_option("--format", gen_format, "raw | fvecs");
  add_common(gen, common);

  // gt
  auto* gt = app.add_subcommand("gt", "Exact nearest neighbors by linear scan");
  std::string gt_base, gt_queries, gt_out;
  gt->add_option("--base", gt_base, "Base vectors")->required();
  gt->add_option("--queries", gt_queries, "Query vectors")->required();
  gt->add_option("--out", gt_out, "Output CSV")->required();
  add_common(gt, common);

  // build
  auto* build = app.add_subcommand("build", "Build and save an index");
  std::string build_base, build_out;
  uint32_t build_g = 4, build_r = 8, build_pca = 0, build_m = 0, build_iters = 25;
  build->add_option("--base", build_base, "Base vectors")->required();
  build->add_option("--g", build_g, "Components used for classification");
  build->add_option("--r", build_r, "Number of rotated bases");
  build->add_option("--pca-dim", build_pca,
                    "Classify on this many leading PCA components (0 = off)");
  build->add_option("--kmeans-m", build_m,
                    "Two-stage search with this many coarse clusters (0 = off)");
  build->add_option("--kmeans-iters", build_iters, "Lloyd iteration cap");
  build->add_option("--out", build_out, "Index file")->required();
  add_common(build, common);

  // search
  auto* search = app.add_subcommand("search", "Query a saved index");
  std::string search_index, search_base, search_queries, search_gt, search_out;
  uint64_t search_c = 4;
  uint32_t search_w = 8;
  bool search_fallback = false, search_no_pde = false;
  search->add_option("--index", search_index, "Index file")->required();
  search->add_option("--base", search_base, "Base vectors")->required();
  search->add_option("--queries", search_queries, "Query vectors")->required();
  search->add_option("--c", search_c, "Cones visited per rotation");
  search->add_option("--w", search_w, "Clusters probed (two-stage only)");
  search->add_flag("--fallback", search_fallback,
                   "Linear scan when no candidate is found");
  search->add_flag("--no-pde", search_no_pde, "Disable partial distance elimination");
  search->add_option("--check-gt", search_gt, "Ground-truth CSV to score against");
  search->add_option("--out", search_out, "Results CSV (default stdout)");
  add_common(search, common);

  // grid
  auto* grid = app.add_subcommand("grid", "Parameter-grid benchmark");
  std::string grid_base, grid_queries, grid_out;
  std::string grid_g = "1,2,3,4,5,6,7,8", grid_r = "1,2,4,8,16",
              grid_c = "1,2,4,8,16,32,64,128";
  int grid_reps = 3;
  unsigned grid_timing_threads = 0;
  bool grid_no_timing = false, grid_pareto = false;
  grid->add_option("--base", grid_base, "Base vectors")->required();
  grid->add_option("--queries", grid_queries, "Query vectors")->required();
  grid->add_option("--g", grid_g, "Comma-separated g values");
  grid->add_option("--r", grid_r, "Comma-separated r values");
  grid->add_option("--c", grid_c, "Comma-separated c values");
  grid->add_option("--timing-reps", grid_reps, "Wall-clock repetitions (best-of)");
  grid->add_flag("--no-timing", grid_no_timing,
                 "Skip wall-clock timing; output is fully deterministic");
  grid->add_option("--timing-threads", grid_timing_threads,
                   "Also measure a threaded wall-clock, logged separately");
  grid->add_flag("--pareto", grid_pareto, "Emit only the Pareto envelope");
  grid->add_option("--out", grid_out, "Output CSV (default stdout)");
  add_common(grid, common);

  // osstats
  auto* osstats = app.add_subcommand("osstats", "Order-statistics analytics");
  osstats->require_subcommand(1);
  auto* cdf = osstats->add_subcommand("cdf", "Sorted-component magnitude CDFs");
  auto* pdf = osstats->add_subcommand("pdf", "Sorted-component densities");
  auto* energy = osstats->add_subcommand("energy", "Per-rank energy shares");
  auto* agree = osstats->add_subcommand("agreement",
                                        "Query/NN agreement Monte Carlo");
  uint32_t os_k = 8;
  double os_xmax = 5.0, os_step = 0.01;
  std::string os_out;
  for (CLI::App* sub : {cdf, pdf}) {
    sub->add_option("--k", os_k, "Dimensionality");
    sub->add_option("--xmax", os_xmax, "Evaluation range limit");
    sub->add_option("--step", os_step, "Evaluation step");
    sub->add_option("--out", os_out, "Output CSV (default stdout)");
  }
  energy->add_option("--k", os_k, "Dimensionality");
  energy->add_option("--out", os_out, "Output CSV (default stdout)");

  uint32_t ag_k = 16, ag_f = 1, ag_trials = 600;
  double ag_log2n = 16.0;
  std::string ag_g = "1,2,3,4,5,6,7,8,10,12,14,16", ag_r = "1,2,4,8,16";
  agree->add_option("--k", ag_k, "Dimensionality");
  agree->add_option("--log2n", ag_log2n, "Dataset size exponent (n = 2^log2n)");
  agree->add_option("--f", ag_f, "Query top components checked");
  agree->add_option("--g", ag_g, "Comma-separated g values");
  agree->add_option("--r", ag_r, "Comma-separated r values (ascending)");
  agree->add_option("--trials", ag_trials, "Monte Carlo trials");
  agree->add_option("--out", os_out, "Output CSV (default stdout)");
  add_common(agree, common);

  // pca
  auto* pca = app.add_subcommand("pca", "Eigen-spectrum and intrinsic dimension");
  std::string pca_base, pca_out;
  uint32_t pca_dim = 16;
  pca->add_option("--base", pca_base, "Base vectors")->required();
  pca->add_option("--dim", pca_dim, "Report cumulative energy of this prefix");
  pca->add_option("--out", pca_out, "Output CSV (default stdout)");
  add_common(pca, common);

  // kmeans
  auto* kmeans = app.add_subcommand("kmeans", "Coarse quantizer report");
  std::string km_base, km_out;
  uint32_t km_m = 256, km_iters = 25;
  kmeans->add_option("--base", km_base, "Base vectors")->required();
  kmeans->add_option("--m", km_m, "Cluster count");
  kmeans->add_option("--iters", km_iters, "Lloyd iteration cap");
  kmeans->add_option("--out", km_out, "Output CSV (default stdout)");
  add_common(kmeans, common);

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }

  try {
    std::vector<const char*> argv_expanded;
    argv_expanded.reserve(args.size());
    for (const auto& a : args) argv_expanded.push_back(a.c_str());
    app.parse(static_cast<int>(argv_expanded.size()), argv_expanded.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed())
      return run_gen(gen_dist, gen_n, gen_k, gen_out, gen_format, common);
    if (gt->parsed()) return run_gt(gt_base, gt_queries, gt_out, common);
    if (build->parsed())
      return run_build(build_base, build_g, build_r, build_pca, build_m,
                       build_iters, build_out, common);
    if (search->parsed())
      return run_search(search_index, search_base, search_queries, search_c,
                        search_w, search_fallback, search_no_pde, search_gt,
                        search_out);
    if (grid->parsed())
      return run_grid_cmd(grid_base, grid_queries, grid_g, grid_r, grid_c,
                          grid_reps, grid_no_timing, grid_timing_threads,
                          grid_pareto, grid_out, common);
    if (osstats->parsed()) {
      if (cdf->parsed()) return run_osstats_cdf(os_k, os_xmax, os_step, false, os_out);
      if (pdf->parsed()) return run_osstats_cdf(os_k, os_xmax, os_step, true, os_out);
      if (energy->parsed()) return run_osstats_energy(os_k, os_out);
      if (agree->parsed())
        return run_osstats_agreement(ag_k, ag_log2n, ag_f, ag_g, ag_r,
                                     ag_trials, os_out, common);
    }
    if (pca->parsed()) return run_pca(pca_base, pca_dim, pca_out);
    if (kmeans->parsed()) return run_kmeans(km_base, km_m, km_iters, km_out, common);
    throw UsageError("no subcommand selected");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return kExitOk;
}
