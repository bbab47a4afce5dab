#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rosanna {

/// Canonical identity of a cone: the set of the g component indices with the
/// largest absolute values, plus the sign of each of those components.
/// Components within the top-g group are deliberately not ordered among
/// themselves.
struct ConeKey {
  uint32_t g = 0;
  std::vector<uint32_t> indices;  // ascending, size g
  uint64_t signs = 0;             // bit j = 1 iff component indices[j] >= 0

  bool operator==(const ConeKey& other) const = default;
};

/// Ordered multi-probe visit list for one query in one reference frame.
/// distances[i] is the probe tier of cones[i]: the profile distance for
/// own-sign probes, and g + (number of flipped signs) for the sign-variant
/// probes appended after every own-sign profile has been listed. The sequence
/// enumerates every cone exactly once when not truncated.
struct ProbeSequence {
  std::vector<ConeKey> cones;
  std::vector<uint32_t> distances;

  size_t size() const { return cones.size(); }
};

/// All component indices of v sorted by decreasing |v_i|, ties toward the
/// lower index.
std::vector<uint32_t> magnitude_order(std::span<const float> v);

/// Home cone of v for a given g. sign(0) counts as positive. Requires
/// 1 <= g <= min(k, 64).
ConeKey classify(std::span<const float> v, uint32_t g);

/// Total number of cones: C(k, g) * 2^g. Throws InvariantError on overflow.
uint64_t cone_count(uint32_t k, uint32_t g);

/// Profile distance: g minus the length of the longest prefix of the query's
/// magnitude-sorted index chain that is contained in the profile.
/// query_order must hold at least profile.size() entries; profile ascending.
uint32_t profile_distance(std::span<const uint32_t> query_order,
                          std::span<const uint32_t> profile);

/// Ordered list of at most c cones to visit for a query, starting from the
/// home cone. Own-sign probes cover all profiles by increasing profile
/// distance; if c exceeds their count, sign-variant cones follow by
/// increasing number of flipped signs, so the sequence can cover the whole
/// partition.
ProbeSequence probe_sequence(std::span<const float> query_proj, uint32_t g,
                             uint64_t c);

/// Injective canonical byte encoding: [g][indices, one byte each][packed sign
/// bits]. Requires every index < 256 (k <= 256 documented limit).
std::string encode_key(const ConeKey& key);

}  // namespace rosanna
