#include "rosanna/cones.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rosanna/common.hpp"

namespace rosanna {

namespace {

bool magnitude_less(std::span<const float> v, uint32_t a, uint32_t b) {
  // "less" in visit order: larger magnitude first, lower index on ties.
  float ma = std::abs(v[a]);
  float mb = std::abs(v[b]);
  if (ma != mb) return ma > mb;
  return a < b;
}

uint64_t signs_on(std::span<const float> v,
                  std::span<const uint32_t> ascending_indices) {
  uint64_t signs = 0;
  // v >= 0 is true for -0.0f as well, so sign(0) lands on the positive side.
  for (size_t j = 0; j < ascending_indices.size(); ++j)
    if (v[ascending_indices[j]] >= 0.0f) signs |= 1ull << j;
  return signs;
}

/// Enumerates all C(k, g) profiles of the query in canonical probe order:
/// outer loop over profile distance d, inner loop over the d replacement
/// ranks in lexicographic order (i.e. most probable replacements first).
/// fn(profile_ascending, d) returns false to stop.
template <typename Fn>
void enumerate_profiles(std::span<const uint32_t> order, uint32_t g, Fn&& fn) {
  uint32_t k = static_cast<uint32_t>(order.size());
  std::vector<uint32_t> profile(g);
  std::vector<uint32_t> pick;  // positions into the replacement pool

  for (uint32_t d = 0; d <= g; ++d) {
    // Keep the query's top (g - d) ranks; the rank after them is excluded
    // (otherwise the profile would be at a smaller distance); draw the d
    // replacements from every rank beyond that.
    uint32_t kept = g - d;
    uint32_t pool_begin = g - d + 1;  // first candidate rank (0-based)
    if (d == 0) pool_begin = g;       // unused, S is empty
    uint32_t pool_size = (pool_begin <= k) ? k - pool_begin : 0;
    if (d > pool_size) continue;

    pick.resize(d);
    std::iota(pick.begin(), pick.end(), 0u);
    while (true) {
      profile.clear();
      profile.insert(profile.end(), order.begin(), order.begin() + kept);
      for (uint32_t s : pick) profile.push_back(order[pool_begin + s]);
      std::sort(profile.begin(), profile.end());
      if (!fn(std::span<const uint32_t>(profile), d)) return;

      // next d-combination of pool positions, lexicographic
      if (d == 0) break;
      uint32_t i = d;
      while (i > 0 && pick[i - 1] == pool_size - d + (i - 1)) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (uint32_t j = i; j < d; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
}

/// Next bitmask with the same popcount, ascending (Gosper's hack).
uint64_t next_same_popcount(uint64_t m) {
  uint64_t u = m & (~m + 1);
  uint64_t v = m + u;
  return v | (((v ^ m) / u) >> 2);
}

}  // namespace

std::vector<uint32_t> magnitude_order(std::span<const float> v) {
  std::vector<uint32_t> order(v.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](uint32_t a, uint32_t b) { return magnitude_less(v, a, b); });
  return order;
}

ConeKey classify(std::span<const float> v, uint32_t g) {
  uint32_t k = static_cast<uint32_t>(v.size());
  if (g < 1 || g > k) throw UsageError("classify: g out of range");
  if (g > 64) throw UsageError("classify: g > 64 unsupported");

  std::vector<uint32_t> order(k);
  std::iota(order.begin(), order.end(), 0u);
  std::partial_sort(order.begin(), order.begin() + g, order.end(),
                    [&](uint32_t a, uint32_t b) { return magnitude_less(v, a, b); });

  ConeKey key;
  key.g = g;
  key.indices.assign(order.begin(), order.begin() + g);
  std::sort(key.indices.begin(), key.indices.end());
  key.signs = signs_on(v, key.indices);
  return key;
}

uint64_t cone_count(uint32_t k, uint32_t g) {
  if (g < 1 || g > k) throw UsageError("cone_count: g out of range");

  uint64_t binom = 1;
  uint64_t r = std::min(g, k - g);
  for (uint64_t i = 1; i <= r; ++i) {
    // binom = binom * (k - r + i) / i, exact at every step
    uint64_t mul;
    if (__builtin_mul_overflow(binom, k - r + i, &mul))
      throw InvariantError("cone_count: binomial overflow");
    binom = mul / i;
  }
  if (g >= 64 || binom > (UINT64_MAX >> g))
    throw InvariantError("cone_count: 2^g factor overflow");
  return binom << g;
}

uint32_t profile_distance(std::span<const uint32_t> query_order,
                          std::span<const uint32_t> profile) {
  uint32_t g = static_cast<uint32_t>(profile.size());
  uint32_t contained = 0;
  while (contained < g &&
         std::binary_search(profile.begin(), profile.end(),
                            query_order[contained]))
    ++contained;
  return g - contained;
}

ProbeSequence probe_sequence(std::span<const float> query_proj, uint32_t g,
                             uint64_t c) {
  uint32_t k = static_cast<uint32_t>(query_proj.size());
  if (g < 1 || g > k) throw UsageError("probe_sequence: g out of range");
  if (c < 1) throw UsageError("probe_sequence: c must be >= 1");

  std::vector<uint32_t> order = magnitude_order(query_proj);
  ProbeSequence seq;

  // Own-sign probes: every profile once, by increasing profile distance.
  enumerate_profiles(order, g, [&](std::span<const uint32_t> profile, uint32_t d) {
    ConeKey key;
    key.g = g;
    key.indices.assign(profile.begin(), profile.end());
    key.signs = signs_on(query_proj, profile);
    seq.cones.push_back(std::move(key));
    seq.distances.push_back(d);
    return seq.size() < c;
  });
  if (seq.size() >= c || g > 63) return seq;

  // Sign-variant probes, by increasing number of flipped bits. These tiers
  // only matter when c asks for more cones than there are profiles; they make
  // the enumeration cover the full partition.
  for (uint32_t h = 1; h <= g && seq.size() < c; ++h) {
    bool more = true;
    enumerate_profiles(order, g, [&](std::span<const uint32_t> profile, uint32_t) {
      uint64_t own = signs_on(query_proj, profile);
      uint64_t limit = (1ull << g) - 1;  // g <= 63 here
      for (uint64_t mask = (1ull << h) - 1; mask <= limit;
           mask = next_same_popcount(mask)) {
        ConeKey key;
        key.g = g;
        key.indices.assign(profile.begin(), profile.end());
        key.signs = own ^ mask;
        seq.cones.push_back(std::move(key));
        seq.distances.push_back(g + h);
        if (seq.size() >= c) {
          more = false;
          return false;
        }
        if (mask == limit) break;  // Gosper would overflow past the top mask
      }
      return true;
    });
    if (!more) break;
  }
  return seq;
}

std::string encode_key(const ConeKey& key) {
  if (key.g == 0 || key.g > 255)
    throw UsageError("encode_key: g out of encodable range");
  std::string bytes;
  bytes.reserve(1 + key.g + (key.g + 7) / 8);
  bytes.push_back(static_cast<char>(key.g));
  for (uint32_t idx : key.indices) {
    if (idx > 255) throw UsageError("encode_key: k > 256 unsupported");
    bytes.push_back(static_cast<char>(idx));
  }
  for (uint32_t byte = 0; byte < (key.g + 7) / 8; ++byte)
    bytes.push_back(static_cast<char>((key.signs >> (8 * byte)) & 0xff));
  return bytes;
}

}  // namespace rosanna
