#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rosanna {

/// Standard Gaussian upper-tail probability Q(x) = P(N(0,1) > x).
double q_function(double x);

/// CDF of |V_i|, the i-th largest magnitude among k i.i.d. components whose
/// magnitude CDF is base_cdf:
///   F_{|V_i|}(x) = sum_{j=0}^{i-1} C(k,j) F(x)^{k-j} (1-F(x))^j.
/// Ranks are 1-based (i = 1 is the largest). Binomials switch to log-space
/// for k > 60.
double os_cdf(double x, uint32_t i, uint32_t k,
              const std::function<double(double)>& base_cdf);

/// os_cdf for standard Gaussian components: F_|X|(x) = 1 - 2 Q(x), x >= 0.
double os_cdf_gaussian(double x, uint32_t i, uint32_t k);

/// Symmetric density of the i-th sorted component (Gaussian case): half the
/// central-difference derivative of os_cdf_gaussian at |x|, with step
/// h = 1e-5 * max(1, |x|).
double os_pdf_gaussian(double x, uint32_t i, uint32_t k);

/// E[V_i^2] for every rank i = 1..k (Gaussian case) via the tail formula
/// E[V^2] = 2 * integral_0^inf x (1 - F(x)) dx. The values sum to k.
std::vector<double> sorted_component_energy(uint32_t k);

/// sorted_component_energy normalized to sum 1.
std::vector<double> sorted_energy_shares(uint32_t k);

/// Monte Carlo setup for the query/NN classification agreement estimates.
/// One fresh query per trial; the dataset and the rotated frames are redrawn
/// every queries_per_dataset trials. The exact NN comes from a linear scan,
/// so the probabilities measure classification reliability only.
struct AgreementSpec {
  uint32_t k = 16;
  double log2n = 16.0;  // dataset size is round(2^log2n)
  uint32_t f = 1;       // how many of the query's top components to check
  uint32_t g = 1;       // window of the NN's top components
  uint32_t r = 1;       // number of reference frames (frame 0 is the identity)
  uint32_t trials = 500;
  uint64_t seed = 0;
  uint32_t queries_per_dataset = 128;
};

struct AgreementResult {
  double p_topf_in_topg = 0.0;  // query's top-f indices within NN's top-g, any frame
  double p_sign_agree = 0.0;    // first g signs agree along the query's order, any frame
};

AgreementResult agreement_mc(const AgreementSpec& spec, unsigned threads = 1);

/// Both probabilities over (g, r) grids, evaluated on shared trials. A frame
/// match is an OR event over the first r frames, so every curve is
/// non-decreasing in r by construction.
struct AgreementCurves {
  std::vector<uint32_t> g_values;
  std::vector<uint32_t> r_values;
  std::vector<std::vector<double>> p_topf_in_topg;  // [g][r]
  std::vector<std::vector<double>> p_sign_agree;    // [g][r]
};

AgreementCurves agreement_curves(const AgreementSpec& spec,
                                 std::span<const uint32_t> g_values,
                                 std::span<const uint32_t> r_values,
                                 unsigned threads = 1);

}  // namespace rosanna
