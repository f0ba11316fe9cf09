#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "snapdrive/annotation.hpp"
#include "snapdrive/error.hpp"

using namespace snapdrive;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

}  // namespace

TEST_SUITE("annotation") {
  TEST_CASE("two of three adjudication") {
    const AnnotationMatrix m({{3, 0}, {2, 1}, {1, 2}, {0, 3}}, {"a", "b", "c", "d"}, {"driving", "non_driving"});
    const auto gt = adjudicate(m, 0);
    REQUIRE(gt.size() == 4);
    CHECK(gt[0].label == Label::kDriving);
    CHECK(gt[0].support == 3);
    CHECK(gt[1].label == Label::kDriving);
    CHECK(gt[1].support == 2);
    CHECK(gt[2].label == Label::kNonDriving);
    CHECK(gt[2].support == 2);
    CHECK(gt[3].label == Label::kNonDriving);
    CHECK(gt[3].item_id == "d");
    const auto strict = adjudicate(m, 0, 3);
    CHECK(strict[1].label == Label::kNonDriving);
  }

  TEST_CASE("adjudication needs two categories") {
    const AnnotationMatrix m({{1, 1, 1}, {3, 0, 0}});
    CHECK(code_of([&] { adjudicate(m, 0); }) == ErrorCode::kUnsupportedCategories);
  }

  TEST_CASE("kappa hand cases") {
    CHECK(fleiss_kappa(AnnotationMatrix({{3, 0}, {0, 3}})) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fleiss_kappa(AnnotationMatrix({{1, 1}, {1, 1}})) == doctest::Approx(-1.0).epsilon(1e-12));
    const auto d = fleiss_kappa_detail(AnnotationMatrix({{3, 0}, {0, 3}}));
    CHECK(d.observed == doctest::Approx(1.0));
    CHECK(d.expected == doctest::Approx(0.5));
    // P = (1 + 1/3 + 1/3 + 1 + 1/3) / 5 = 0.6, Pe = (8/15)^2 + (7/15)^2 = 113/225.
    const std::vector<std::vector<int>> mixed = {{3, 0}, {2, 1}, {1, 2}, {0, 3}, {2, 1}};
    CHECK(std::abs(fleiss_kappa(AnnotationMatrix(mixed)) - 11.0 / 56.0) < 1e-12);
  }

  TEST_CASE("degenerate agreement") {
    const auto d = fleiss_kappa_detail(AnnotationMatrix({{3, 0}, {3, 0}}));
    CHECK(d.degenerate);
    CHECK(d.kappa == 1.0);
  }

  TEST_CASE("kappa matches the pairwise oracle on random matrices") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
      const int k = 2 + static_cast<int>(rng() % 3);
      const int n = 2 + static_cast<int>(rng() % 4);
      const int items = 2 + static_cast<int>(rng() % 20);
      std::vector<std::vector<int>> counts(static_cast<std::size_t>(items), std::vector<int>(static_cast<std::size_t>(k)));
      for (auto& row : counts) {
        for (int r = 0; r < n; ++r) ++row[rng() % static_cast<std::size_t>(k)];
      }
      const AnnotationMatrix m(counts);
      const auto d = fleiss_kappa_detail(m);
      if (d.degenerate) continue;
      CHECK(std::abs(d.kappa - oracle::kappa_by_pairs(counts)) < 1e-12);
      CHECK(d.kappa <= 1.0 + 1e-12);
      CHECK(d.kappa >= -1.0 - 1e-12);
    }
  }

  TEST_CASE("kappa permutation invariance") {
    std::vector<std::vector<int>> counts = {{3, 0, 0}, {1, 2, 0}, {0, 1, 2}, {1, 1, 1}, {0, 0, 3}};
    const double base = fleiss_kappa(AnnotationMatrix(counts));
    std::reverse(counts.begin(), counts.end());
    CHECK(fleiss_kappa(AnnotationMatrix(counts)) == doctest::Approx(base).epsilon(1e-12));
    for (auto& row : counts) std::rotate(row.begin(), row.begin() + 1, row.end());
    CHECK(fleiss_kappa(AnnotationMatrix(counts)) == doctest::Approx(base).epsilon(1e-12));
  }

  TEST_CASE("matrix validation") {
    CHECK(code_of([] { AnnotationMatrix({{3, 0}, {1, 1}}); }) == ErrorCode::kHeterogeneousRaters);
    CHECK(code_of([] { AnnotationMatrix({{3, 0}, {1, 1, 1}}); }) == ErrorCode::kShape);
    CHECK(code_of([] { AnnotationMatrix({}); }) != ErrorCode::kOk);
  }

  TEST_CASE("ratings pivot") {
    const std::vector<Rating> ratings = {{"i1", "r1", "driving"},     {"i1", "r2", "driving"},
                                         {"i1", "r3", "non_driving"}, {"i2", "r1", "non_driving"},
                                         {"i2", "r2", "non_driving"}, {"i2", "r3", "non_driving"},
                                         {"i2", "r4", "driving"}};
    const auto m = pivot_ratings(ratings, {"driving", "non_driving"});
    REQUIRE(m.items() == 2);
    CHECK(m.item_ids() == std::vector<std::string>{"i1", "i2"});
    CHECK(m.count(0, 0) == 2);
    CHECK(m.count(1, 0) == 0);  // fourth rating truncated
    std::vector<Rating> dup = ratings;
    dup.push_back({"i1", "r1", "driving"});
    CHECK(code_of([&] { pivot_ratings(dup, {"driving", "non_driving"}); }) == ErrorCode::kInvalidArgument);
    CHECK(code_of([&] { pivot_ratings(std::vector<Rating>{{"i", "r", "maybe"}}, {"driving", "non_driving"}); }) ==
          ErrorCode::kUnsupportedCategories);
    const std::vector<Rating> short_item = {{"i", "r1", "driving"}, {"i", "r2", "driving"}};
    CHECK(code_of([&] { pivot_ratings(short_item, {"driving", "non_driving"}); }) == ErrorCode::kHeterogeneousRaters);
  }

  TEST_CASE("ratings csv round trip") {
    const std::vector<Rating> ratings = {{"a", "r1", "driving"}, {"b,c", "r2", "non_driving"}};
    std::stringstream io;
    write_ratings_csv(io, ratings);
    const auto back = read_ratings_csv(io);
    REQUIRE(back.size() == 2);
    CHECK(back[1].item_id == "b,c");
    CHECK(back[1].category == "non_driving");
  }
}
