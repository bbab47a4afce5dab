#include "rosanna/osstats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "rosanna/common.hpp"
#include "rosanna/cones.hpp"
#include "rosanna/dataset.hpp"
#include "rosanna/rng.hpp"
#include "rosanna/rotations.hpp"

namespace rosanna {

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double os_cdf(double x, uint32_t i, uint32_t k,
              const std::function<double(double)>& base_cdf) {
  if (i < 1 || i > k) throw UsageError("os_cdf: rank out of range");

  double f = std::clamp(base_cdf(x), 0.0, 1.0);
  if (f == 0.0) return 0.0;
  if (f == 1.0) return 1.0;

  double sum = 0.0;
  if (k <= 60) {
    double binom = 1.0;  // C(k, j), updated incrementally
    for (uint32_t j = 0; j < i; ++j) {
      sum += binom * std::pow(f, static_cast<double>(k - j)) *
             std::pow(1.0 - f, static_cast<double>(j));
      binom = binom * static_cast<double>(k - j) / static_cast<double>(j + 1);
    }
  } else {
    // log-space to keep C(k, j) finite for large k
    double log_f = std::log(f);
    double log_1mf = std::log1p(-f);
    for (uint32_t j = 0; j < i; ++j) {
      double log_binom = std::lgamma(k + 1.0) - std::lgamma(j + 1.0) -
                         std::lgamma(static_cast<double>(k - j) + 1.0);
      sum += std::exp(log_binom + (k - j) * log_f + j * log_1mf);
    }
  }
  return std::clamp(sum, 0.0, 1.0);
}

double os_cdf_gaussian(double x, uint32_t i, uint32_t k) {
  if (x <= 0.0) return 0.0;
  return os_cdf(x, i, k,
                [](double t) { return std::erf(t / std::numbers::sqrt2); });
}

double os_pdf_gaussian(double x, uint32_t i, uint32_t k) {
  double z = std::abs(x);
  double h = 1e-5 * std::max(1.0, z);
  double upper = os_cdf_gaussian(z + h, i, k);
  double lower = os_cdf_gaussian(z - h, i, k);
  return 0.5 * (upper - lower) / (2.0 * h);
}

std::vector<double> sorted_component_energy(uint32_t k) {
  if (k < 1) throw UsageError("sorted_component_energy: k must be >= 1");

  // Composite Simpson over [0, x_max]; the integrand 2x(1 - F(x)) is
  // negligible beyond 12 even for the largest rank at practical k.
  const double x_max = 12.0;
  const uint32_t intervals = 12000;  // even
  const double step = x_max / intervals;

  std::vector<double> energy(k, 0.0);
  for (uint32_t i = 1; i <= k; ++i) {
    auto integrand = [&](double x) {
      return 2.0 * x * (1.0 - os_cdf_gaussian(x, i, k));
    };
    double sum = integrand(0.0) + integrand(x_max);
    for (uint32_t s = 1; s < intervals; ++s)
      sum += integrand(s * step) * (s % 2 == 1 ? 4.0 : 2.0);
    energy[i - 1] = sum * step / 3.0;
  }
  return energy;
}

std::vector<double> sorted_energy_shares(uint32_t k) {
  std::vector<double> energy = sorted_component_energy(k);
  double total = 0.0;
  for (double e : energy) total += e;
  for (double& e : energy) e /= total;
  return energy;
}

namespace {

// Per trial and per frame, two summary ranks suffice to evaluate every g:
//   worst_rank: max over the query's top-f indices of their rank in the NN's
//               magnitude order ("top-f within top-g" iff worst_rank < g);
//   sign_run:   length of the longest prefix of the query's magnitude order
//               along which query and NN agree in sign ("first g signs agree"
//               iff sign_run >= g).
struct FrameSummary {
  uint32_t worst_rank = 0;
  uint32_t sign_run = 0;
};

FrameSummary summarize_frame(std::span<const float> query_proj,
                             std::span<const float> nn_proj, uint32_t f) {
  uint32_t k = static_cast<uint32_t>(query_proj.size());
  std::vector<uint32_t> q_order = magnitude_order(query_proj);
  std::vector<uint32_t> x_order = magnitude_order(nn_proj);

  std::vector<uint32_t> x_rank(k);
  for (uint32_t pos = 0; pos < k; ++pos) x_rank[x_order[pos]] = pos;

  FrameSummary out;
  for (uint32_t j = 0; j < f; ++j)
    out.worst_rank = std::max(out.worst_rank, x_rank[q_order[j]]);

  while (out.sign_run < k) {
    uint32_t idx = q_order[out.sign_run];
    bool q_pos = query_proj[idx] >= 0.0f;
    bool x_pos = nn_proj[idx] >= 0.0f;
    if (q_pos != x_pos) break;
    ++out.sign_run;
  }
  return out;
}

}  // namespace

AgreementCurves agreement_curves(const AgreementSpec& spec,
                                 std::span<const uint32_t> g_values,
                                 std::span<const uint32_t> r_values,
                                 unsigned threads) {
  if (spec.trials < 1) throw UsageError("agreement: trials must be >= 1");
  if (spec.k < 1 || spec.k > 4096) throw UsageError("agreement: bad k");
  if (spec.f < 1 || spec.f > spec.k) throw UsageError("agreement: bad f");
  uint64_t n = static_cast<uint64_t>(std::llround(std::exp2(spec.log2n)));
  if (n < 1 || n > (1ull << 28))
    throw UsageError("agreement: dataset size out of supported range");
  uint32_t r_max = 1;
  uint32_t r_prev = 0;
  for (uint32_t r : r_values) {
    if (r < 1) throw UsageError("agreement: r values must be >= 1");
    if (r <= r_prev)
      throw UsageError("agreement: r values must be strictly ascending");
    r_prev = r;
    r_max = std::max(r_max, r);
  }
  for (uint32_t g : g_values)
    if (g < spec.f || g > spec.k)
      throw UsageError("agreement: g values must satisfy f <= g <= k");

  // frame summaries for every trial, filled block by block
  std::vector<FrameSummary> summaries(static_cast<size_t>(spec.trials) * r_max);

  uint32_t block_len = std::max(1u, spec.queries_per_dataset);
  for (uint32_t block_start = 0; block_start < spec.trials;
       block_start += block_len) {
    uint32_t block_end = std::min(spec.trials, block_start + block_len);
    uint64_t block_id = block_start / block_len;

    SyntheticSpec data_spec{Distribution::Gaussian, n, spec.k,
                            derive_seed(spec.seed, 0x64617461, block_id)};
    VectorSet dataset = gen_synthetic(data_spec);
    BasisSet bases =
        gen_bases(spec.k, r_max, derive_seed(spec.seed, 0x62617365, block_id));

    auto run_trial = [&](uint32_t t) {
      Rng rng(derive_seed(spec.seed, 0x71757279, t));
      std::vector<float> query(spec.k);
      for (auto& v : query) v = static_cast<float>(rng.gaussian());

      Neighbor nn = linear_scan_nn(dataset, query);
      std::span<const float> nn_row = dataset.row(nn.id);
      for (uint32_t r = 0; r < r_max; ++r) {
        std::vector<float> qp = project(bases.bases[r], query);
        std::vector<float> xp = project(bases.bases[r], nn_row);
        summaries[static_cast<size_t>(t) * r_max + r] =
            summarize_frame(qp, xp, spec.f);
      }
    };

    if (threads <= 1) {
      for (uint32_t t = block_start; t < block_end; ++t) run_trial(t);
    } else {
      std::vector<std::thread> pool;
      unsigned width = std::min<uint32_t>(threads, block_end - block_start);
      for (unsigned w = 0; w < width; ++w)
        pool.emplace_back([&, w]() {
          for (uint32_t t = block_start + w; t < block_end; t += width)
            run_trial(t);
        });
      for (auto& th : pool) th.join();
    }
  }

  AgreementCurves curves;
  curves.g_values.assign(g_values.begin(), g_values.end());
  curves.r_values.assign(r_values.begin(), r_values.end());
  curves.p_topf_in_topg.assign(g_values.size(),
                               std::vector<double>(r_values.size(), 0.0));
  curves.p_sign_agree.assign(g_values.size(),
                             std::vector<double>(r_values.size(), 0.0));

  for (uint32_t t = 0; t < spec.trials; ++t) {
    for (size_t gi = 0; gi < g_values.size(); ++gi) {
      uint32_t g = g_values[gi];
      bool match_any = false;
      bool sign_any = false;
      uint32_t frames_used = 0;
      size_t ri = 0;
      for (uint32_t r = 1; r <= r_max && ri < r_values.size(); ++r) {
        const FrameSummary& s =
            summaries[static_cast<size_t>(t) * r_max + (r - 1)];
        match_any = match_any || s.worst_rank < g;
        sign_any = sign_any || s.sign_run >= g;
        frames_used = r;
        while (ri < r_values.size() && r_values[ri] == frames_used) {
          if (match_any) curves.p_topf_in_topg[gi][ri] += 1.0;
          if (sign_any) curves.p_sign_agree[gi][ri] += 1.0;
          ++ri;
        }
      }
    }
  }
  double inv = 1.0 / spec.trials;
  for (auto& row : curves.p_topf_in_topg)
    for (double& v : row) v *= inv;
  for (auto& row : curves.p_sign_agree)
    for (double& v : row) v *= inv;
  return curves;
}

AgreementResult agreement_mc(const AgreementSpec& spec, unsigned threads) {
  if (spec.g < spec.f || spec.g > spec.k)
    throw UsageError("agreement: need f <= g <= k");
  uint32_t g = spec.g;
  uint32_t r = spec.r;
  AgreementCurves curves =
      agreement_curves(spec, std::span<const uint32_t>(&g, 1),
                       std::span<const uint32_t>(&r, 1), threads);
  return {curves.p_topf_in_topg[0][0], curves.p_sign_agree[0][0]};
}

}  // namespace rosanna
