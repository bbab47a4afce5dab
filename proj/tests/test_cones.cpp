#include <algorithm>
#include <doctest.h>
#include <set>

#include "rosanna/common.hpp"
#include "rosanna/cones.hpp"
#include "rosanna/dataset.hpp"
#include "rosanna/rng.hpp"

using namespace rosanna;

TEST_CASE("classify: toy vectors") {
  std::vector<float> a{-22, 12, 5};

  ConeKey a1 = classify(a, 1);
  CHECK(a1.indices == std::vector<uint32_t>{0});
  CHECK(a1.signs == 0);  // negative largest component

  ConeKey a2 = classify(a, 2);
  CHECK(a2.indices == std::vector<uint32_t>{0, 1});
  CHECK(a2.signs == 0b10);  // x0 negative, x1 positive

  std::vector<float> ones{1, 1, 1};
  ConeKey t = classify(ones, 2);
  CHECK(t.indices == std::vector<uint32_t>{0, 1});  // ties toward lower index
  CHECK(t.signs == 0b11);
}

TEST_CASE("classify: sign of zero is positive") {
  std::vector<float> v{5, 0, -0.0f, 1};
  ConeKey key = classify(v, 3);
  CHECK(key.indices == std::vector<uint32_t>{0, 1, 3});
  CHECK(key.signs == 0b111);
}

TEST_CASE("classify rejects bad g") {
  std::vector<float> v{1, 2};
  CHECK_THROWS_AS(classify(v, 0), UsageError);
  CHECK_THROWS_AS(classify(v, 3), UsageError);
}

TEST_CASE("cone_count values") {
  CHECK(cone_count(3, 1) == 6);
  CHECK(cone_count(3, 2) == 12);
  CHECK(cone_count(16, 4) == 29120);  // C(16,4) * 2^4 = 1820 * 16
  CHECK(cone_count(20, 20) == (1ull << 20));
  CHECK_THROWS_AS(cone_count(64, 32), InvariantError);
}

TEST_CASE("profile_distance follows the query prefix chain") {
  // query order by decreasing magnitude: 4, 2, 0, 3, 1
  std::vector<uint32_t> order{4, 2, 0, 3, 1};

  std::vector<uint32_t> own{0, 2, 4};
  CHECK(profile_distance(order, own) == 0);

  std::vector<uint32_t> last_differs{1, 2, 4};  // shares {4,2}, not 0
  CHECK(profile_distance(order, last_differs) == 1);

  std::vector<uint32_t> disjoint_top{0, 1, 3};  // 4 missing
  CHECK(profile_distance(order, disjoint_top) == 3);
}

TEST_CASE("probe_sequence: home cone only at c=1") {
  std::vector<float> q{5, 11, 4};
  ProbeSequence seq = probe_sequence(q, 2, 1);
  REQUIRE(seq.size() == 1);
  CHECK(seq.cones[0] == classify(q, 2));
  CHECK(seq.distances[0] == 0);
}

TEST_CASE("probe_sequence: worked 3d example") {
  // magnitudes 11 > 5 > 4, so the order is component 1, 0, 2
  std::vector<float> q{5, 11, 4};
  ProbeSequence seq = probe_sequence(q, 2, 12);
  REQUIRE(seq.size() == 12);  // covers all C(3,2) * 4 cones

  CHECK(seq.cones[0].indices == std::vector<uint32_t>{0, 1});
  CHECK(seq.cones[0].signs == 0b11);
  CHECK(seq.distances[0] == 0);

  // first distance-1 probe replaces component 0 (magnitude 5) with
  // component 2 (magnitude 4) and keeps the query's signs
  CHECK(seq.cones[1].indices == std::vector<uint32_t>{1, 2});
  CHECK(seq.cones[1].signs == 0b11);
  CHECK(seq.distances[1] == 1);

  CHECK(seq.cones[2].indices == std::vector<uint32_t>{0, 2});
  CHECK(seq.distances[2] == 2);

  // sign-variant tiers follow the own-sign profiles
  CHECK(seq.distances[3] == 3);
  CHECK(seq.cones[3].indices == std::vector<uint32_t>{0, 1});
  CHECK(seq.cones[3].signs == (0b11 ^ 0b01));

  CHECK(std::is_sorted(seq.distances.begin(), seq.distances.end()));

  std::set<std::string> keys;
  for (const auto& cone : seq.cones) keys.insert(encode_key(cone));
  CHECK(keys.size() == 12);
}

TEST_CASE("probe_sequence: truncation caps at the generable cone count") {
  std::vector<float> q{5, 11, 4};
  ProbeSequence seq = probe_sequence(q, 2, 100);
  CHECK(seq.size() == cone_count(3, 2));
}

TEST_CASE("probe_sequence covers the whole partition when c is large") {
  std::vector<float> q{0.3f, -1.2f, 2.4f, -0.1f};
  uint64_t all = cone_count(4, 2);
  ProbeSequence seq = probe_sequence(q, 2, all);
  REQUIRE(seq.size() == all);

  // independent enumeration of every (profile, sign) pair
  std::set<std::string> expected;
  for (uint32_t a = 0; a < 4; ++a)
    for (uint32_t b = a + 1; b < 4; ++b)
      for (uint64_t s = 0; s < 4; ++s) {
        ConeKey key;
        key.g = 2;
        key.indices = {a, b};
        key.signs = s;
        expected.insert(encode_key(key));
      }

  std::set<std::string> got;
  for (const auto& cone : seq.cones) got.insert(encode_key(cone));
  CHECK(got == expected);
}

TEST_CASE("probe_sequence distances are non-decreasing and cones distinct") {
  VectorSet queries = gen_synthetic({Distribution::Gaussian, 50, 8, 17});
  for (uint64_t i = 0; i < queries.n; ++i) {
    ProbeSequence seq = probe_sequence(queries.row(i), 3, 500);
    CHECK(std::is_sorted(seq.distances.begin(), seq.distances.end()));
    std::set<std::string> keys;
    for (const auto& cone : seq.cones) keys.insert(encode_key(cone));
    CHECK(keys.size() == seq.size());
    CHECK(seq.distances[0] == 0);
    CHECK(seq.cones[0] == classify(queries.row(i), 3));
  }
}

TEST_CASE("classify equivariance properties") {
  Rng rng(5);
  VectorSet vectors = gen_synthetic({Distribution::Gaussian, 200, 10, 23});

  for (uint64_t i = 0; i < vectors.n; ++i) {
    std::vector<float> v(vectors.row(i).begin(), vectors.row(i).end());
    uint32_t g = 1 + static_cast<uint32_t>(rng.below(5));
    ConeKey base = classify(v, g);

    // scale invariance
    std::vector<float> scaled(v);
    float alpha = static_cast<float>(0.25 + 3.0 * rng.uniform01());
    for (auto& x : scaled) x *= alpha;
    CHECK(classify(scaled, g) == base);

    // sign equivariance: negating one component flips exactly its bit when
    // the component is in the profile and never changes the index set
    uint32_t j = static_cast<uint32_t>(rng.below(v.size()));
    std::vector<float> flipped(v);
    flipped[j] = -flipped[j];
    ConeKey after = classify(flipped, g);
    CHECK(after.indices == base.indices);
    auto pos = std::find(base.indices.begin(), base.indices.end(), j);
    if (pos == base.indices.end()) {
      CHECK(after.signs == base.signs);
    } else {
      uint64_t bit = 1ull << (pos - base.indices.begin());
      CHECK((after.signs ^ base.signs) == bit);
    }

    // permutation equivariance: a reversal permutation
    std::vector<float> reversed(v.rbegin(), v.rend());
    ConeKey perm = classify(reversed, g);
    std::vector<uint32_t> mapped;
    for (uint32_t idx : base.indices)
      mapped.push_back(static_cast<uint32_t>(v.size()) - 1 - idx);
    std::sort(mapped.begin(), mapped.end());
    CHECK(perm.indices == mapped);
  }
}

TEST_CASE("distinct observed keys never exceed the cone count") {
  VectorSet vectors = gen_synthetic({Distribution::Gaussian, 100000, 8, 31});
  std::set<std::string> keys;
  for (uint64_t i = 0; i < vectors.n; ++i)
    keys.insert(encode_key(classify(vectors.row(i), 2)));
  CHECK(keys.size() <= cone_count(8, 2));
  CHECK(keys.size() > cone_count(8, 2) / 2);  // and the space is well used
}

TEST_CASE("encode_key: equality matches profile and sign identity") {
  std::vector<float> a{-22, 12, 5};
  std::vector<float> b{-21, -19, -12};
  CHECK(encode_key(classify(a, 1)) == encode_key(classify(b, 1)));
  CHECK(encode_key(classify(a, 2)) != encode_key(classify(b, 2)));

  ConeKey big;
  big.g = 1;
  big.indices = {300};
  CHECK_THROWS_AS(encode_key(big), UsageError);
}
