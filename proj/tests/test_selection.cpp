#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vafm/selection.hpp"

using Catch::Matchers::ContainsSubstring;

namespace {

vafm::SymptomDataset labeled_pair(int n, int p, double sep, std::uint64_t seed) {
  vafm::SyntheticSpec spec;
  spec.n = n;
  spec.p = p;
  spec.C = 2;
  spec.K = 0;
  spec.csmf_true = Eigen::Vector2d(0.5, 0.5);
  spec.mu_true = Eigen::MatrixXd::Zero(2, p);
  spec.mu_true.row(0).setConstant(sep / 2.0);
  spec.mu_true.row(1).setConstant(-sep / 2.0);
  spec.lambda_true.assign(2, Eigen::MatrixXd(p, 0));
  spec.seed = seed;
  return vafm::generate_synthetic(spec);
}

vafm::McmcConfig tiny_chain() {
  vafm::McmcConfig config;
  config.iterations = 15;
  config.burn_in = 5;
  config.thin = 5;
  config.R = 5;
  config.K = 1;
  config.seed = 11;
  return config;
}

}  // namespace

TEST_CASE("cross validation over a factor grid", "[selection]") {
  const auto train = labeled_pair(60, 3, 1.5, 101);
  const auto config = tiny_chain();

  SECTION("singleton grid") {
    const auto result = vafm::cross_validate_k(train, {1}, 2, config);
    REQUIRE(result.entries.size() == 1);
    CHECK(result.best_index == 0);
    CHECK(result.best_setting == 1.0);
    REQUIRE(result.entries[0].accuracies.size() == 2);
    for (double acc : result.entries[0].accuracies) {
      CHECK(acc >= 0.0);
      CHECK(acc <= 1.0);
    }
  }

  SECTION("two point grid runs and is reproducible") {
    const auto first = vafm::cross_validate_k(train, {0, 1}, 2, config);
    REQUIRE(first.entries.size() == 2);
    CHECK(first.entries[0].setting == 0.0);
    CHECK(first.entries[1].setting == 1.0);
    CHECK(first.best_setting ==
          first.entries[first.best_index].setting);
    for (const auto &entry : first.entries)
      REQUIRE(entry.accuracies.size() == 2);

    const auto second = vafm::cross_validate_k(train, {0, 1}, 2, config);
    for (std::size_t g = 0; g < first.entries.size(); ++g)
      CHECK(first.entries[g].accuracies == second.entries[g].accuracies);
    CHECK(first.best_index == second.best_index);
  }

  SECTION("input contracts") {
    CHECK_THROWS_AS(vafm::cross_validate_k(vafm::drop_labels(train), {1}, 2, config),
                    vafm::schema_error);
    CHECK_THROWS_AS(vafm::cross_validate_k(train, {}, 2, config),
                    vafm::config_error);
    CHECK_THROWS_AS(vafm::cross_validate_k(train, {-1}, 2, config),
                    vafm::config_error);
  }

  SECTION("a cause too rare to stratify is reported") {
    auto skewed = labeled_pair(30, 3, 1.5, 103);
    // exactly one individual with cause 2
    for (auto &label : skewed.y) label = 1;
    skewed.y[4] = 2;
    try {
      vafm::cross_validate_k(skewed, {0}, 3, tiny_chain());
      FAIL("expected schema_error");
    } catch (const vafm::schema_error &err) {
      CHECK_THAT(err.what(), ContainsSubstring("stratified"));
      CHECK_THAT(err.what(), ContainsSubstring("cause 2"));
    }
  }
}

TEST_CASE("prior sensitivity sweep", "[selection]") {
  const auto train = labeled_pair(50, 3, 1.5, 107);
  const auto target = labeled_pair(30, 3, 1.5, 109);
  const auto config = tiny_chain();

  const auto result = vafm::sensitivity_sweep_a(train, target, {0.7}, config);
  REQUIRE(result.entries.size() == 1);
  CHECK(result.best_setting == 0.7);
  REQUIRE(static_cast<int>(result.entries[0].accuracies.size()) ==
          vafm::saved_draw_count(config));
  for (double acc : result.entries[0].accuracies) {
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }

  CHECK_THROWS_AS(vafm::sensitivity_sweep_a(train, target, {0.0}, config),
                  vafm::config_error);
  CHECK_THROWS_AS(vafm::sensitivity_sweep_a(train, target, {}, config),
                  vafm::config_error);
  CHECK_THROWS_AS(
      vafm::sensitivity_sweep_a(train, vafm::drop_labels(target), {0.7}, config),
      vafm::schema_error);
}

TEST_CASE("monte carlo sweep collapses without factors", "[selection]") {
  // with K = 0 the likelihood does not depend on the number of replicates,
  // so both grid points must score identically draw for draw, and the tie
  // has to resolve to the smaller setting
  const auto train = labeled_pair(50, 3, 1.5, 113);
  const auto target = labeled_pair(30, 3, 1.5, 127);
  auto config = tiny_chain();
  config.K = 0;

  const auto result = vafm::sensitivity_sweep_r(train, target, {200, 50}, config);
  REQUIRE(result.entries.size() == 2);
  CHECK(result.entries[0].setting == 200.0);
  CHECK(result.entries[1].setting == 50.0);
  CHECK(result.entries[0].accuracies == result.entries[1].accuracies);
  CHECK(result.best_setting == 50.0);
  CHECK(result.best_index == 1);

  CHECK_THROWS_AS(vafm::sensitivity_sweep_r(train, target, {0}, config),
                  vafm::config_error);
}
