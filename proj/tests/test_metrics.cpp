#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dncshap/metrics.hpp"
#include "dncshap/rng.hpp"

using namespace dncshap;

namespace {

ConfusionMatrix from_rows(const std::vector<std::vector<long long>>& rows) {
  ConfusionMatrix cm(static_cast<int>(rows.size()));
  for (int i = 0; i < cm.k; ++i) {
    for (int j = 0; j < cm.k; ++j) cm.at(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return cm;
}

ConfusionMatrix permute(const ConfusionMatrix& cm, const std::vector<int>& p) {
  ConfusionMatrix out(cm.k);
  for (int i = 0; i < cm.k; ++i) {
    for (int j = 0; j < cm.k; ++j) {
      out.at(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]) = cm.at(i, j);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("the [[3,1],[1,3]] fixture") {
  const ConfusionMatrix cm = from_rows({{3, 1}, {1, 3}});
  CHECK(accuracy(cm) == Catch::Approx(0.75).margin(1e-15));
  CHECK(macro_f1(cm) == Catch::Approx(0.75).margin(1e-15));
  CHECK(cohen_kappa(cm) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("diagonal matrix scores perfectly") {
  const ConfusionMatrix cm = from_rows({{5, 0, 0}, {0, 2, 0}, {0, 0, 7}});
  CHECK(accuracy(cm) == 1.0);
  CHECK(macro_f1(cm) == 1.0);
  CHECK(cohen_kappa(cm) == 1.0);
}

TEST_CASE("all mass in one off-diagonal cell scores zero accuracy") {
  const ConfusionMatrix cm = from_rows({{0, 9}, {0, 0}});
  CHECK(accuracy(cm) == 0.0);
}

TEST_CASE("a class never predicted and never true contributes F1 = 0") {
  // class 2 has no support and no predictions
  const ConfusionMatrix cm = from_rows({{4, 0, 0}, {0, 4, 0}, {0, 0, 0}});
  // classes 0 and 1 have F1 = 1; class 2 contributes 0
  CHECK(macro_f1(cm) == Catch::Approx(2.0 / 3.0).margin(1e-12));
  CHECK(accuracy(cm) == 1.0);
}

TEST_CASE("chance-level predictions give kappa zero") {
  // rank-1 expected matrix: counts = row marginal x column marginal
  const std::vector<long long> rows = {1, 2, 3};
  const std::vector<long long> cols = {2, 1, 2};
  ConfusionMatrix cm(3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      cm.at(i, j) = rows[static_cast<std::size_t>(i)] * cols[static_cast<std::size_t>(j)];
    }
  }
  CHECK(std::abs(cohen_kappa(cm)) <= 1e-9);
}

TEST_CASE("kappa is one exactly when off-diagonal mass is zero") {
  const ConfusionMatrix diag = from_rows({{3, 0}, {0, 5}});
  CHECK(cohen_kappa(diag) == 1.0);
  const ConfusionMatrix off = from_rows({{3, 1}, {0, 5}});
  CHECK(cohen_kappa(off) < 1.0);
}

TEST_CASE("degenerate marginals define kappa as zero") {
  // everything is class 0, predicted class 0: p_e == 1
  const ConfusionMatrix cm = from_rows({{7, 0}, {0, 0}});
  CHECK(cohen_kappa(cm) == 0.0);
}

TEST_CASE("empty matrices are rejected") {
  const ConfusionMatrix cm(3);
  CHECK_THROWS_AS(accuracy(cm), UserError);
  CHECK_THROWS_AS(macro_f1(cm), UserError);
  CHECK_THROWS_AS(cohen_kappa(cm), UserError);
}

TEST_CASE("metrics are invariant under class permutations") {
  Rng rng(2718);
  for (int it = 0; it < 20; ++it) {
    const int k = 2 + rng.below(4);
    ConfusionMatrix cm(k);
    for (long long& c : cm.counts) c = rng.below(20);
    if (cm.total() == 0) cm.at(0, 0) = 1;

    std::vector<int> perm(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);
    const ConfusionMatrix pm = permute(cm, perm);

    CHECK(accuracy(pm) == Catch::Approx(accuracy(cm)).margin(1e-12));
    CHECK(macro_f1(pm) == Catch::Approx(macro_f1(cm)).margin(1e-12));
    CHECK(cohen_kappa(pm) == Catch::Approx(cohen_kappa(cm)).margin(1e-12));
  }
}

TEST_CASE("confusion matrix accounting") {
  ConfusionMatrix cm = confusion_from_pairs({0, 1, 1, 0, 1}, {0, 1, 0, 0, 1}, 2);
  CHECK(cm.total() == 5);
  CHECK(cm.trace() == 4);
  CHECK(cm.at(1, 0) == 1);
  CHECK_THROWS_AS(confusion_from_pairs({0, 2}, {0, 0}, 2), UserError);  // class out of range
  CHECK_THROWS_AS(confusion_from_pairs({0, 1}, {0}, 2), UserError);     // length mismatch
}

TEST_CASE("metrics report serializes the full matrix") {
  const ConfusionMatrix cm = from_rows({{3, 1}, {1, 3}});
  const nlohmann::json j = metrics_report(cm);
  CHECK(j["accuracy"] == Catch::Approx(0.75));
  CHECK(j["macro_f1"] == Catch::Approx(0.75));
  CHECK(j["cohen_kappa"] == Catch::Approx(0.5));
  CHECK(j["confusion"][0][0] == 3);
  CHECK(j["confusion"][0][1] == 1);
  CHECK(j["confusion"][1][1] == 3);
}
