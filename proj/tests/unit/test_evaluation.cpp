#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "hml/evaluation.hpp"
#include "unit/support.hpp"

using hml::ClassId;
using hml::ErrorKind;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const hml::Error& e) {
    return e.kind();
  }
  FAIL("expected an hml::Error");
  return ErrorKind::Usage;
}

// on(0) -> parked on(1), sitting on(2); has(3) -> with(4).
const std::vector<std::string> kNames{"on", "parked on", "sitting on", "has", "with"};

hml::PredicateTree fixture_tree(int layers) {
  std::vector<hml::PredicateGroup> groups{{{"on", "parked on", "sitting on"}, {1, 0}}, {{"has", "with"}, {0, 1}}};
  std::map<std::string, long> counts{{"on", 100}, {"parked on", 20}, {"sitting on", 10}, {"has", 50}, {"with", 5}};
  return hml::build_layers(groups, counts, {layers, 0.0, {}});
}

}  // namespace

TEST_CASE("per_class_recall examples") {
  const std::vector<ClassId> labels{0, 0, 1}, preds{0, 1, 1};
  auto r = hml::per_class_recall(preds, labels);
  CHECK(r.size() == 2);
  CHECK(r.at(0) == 0.5);
  CHECK(r.at(1) == 1.0);
  CHECK(r.count(2) == 0);

  auto same = hml::per_class_recall(labels, labels);
  for (const auto& [c, v] : same) CHECK(v == 1.0);
  CHECK(kind_of([] { hml::per_class_recall(std::vector<ClassId>{1}, std::vector<ClassId>{1, 2}); }) ==
        ErrorKind::Shape);
}

TEST_CASE("aggregate examples") {
  auto a = hml::aggregate({{0, 1.0}, {1, 0.0}}, {{0, 1}, {1, 1}});
  CHECK(a.mean_recall == 0.5);
  CHECK(a.overall_recall == 0.5);
  CHECK(a.mean_at == 0.5);

  auto b = hml::aggregate({{0, 1.0}, {1, 0.0}}, {{0, 9}, {1, 1}});
  CHECK(b.mean_recall == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(b.overall_recall == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(b.mean_at == doctest::Approx(0.7).epsilon(1e-15));

  auto c = hml::aggregate({{4, 0.37}}, {{4, 12}});
  CHECK(c.mean_recall == doctest::Approx(0.37));
  CHECK(c.overall_recall == doctest::Approx(0.37));
  CHECK(c.mean_at == doctest::Approx(0.37));

  CHECK(kind_of([] { hml::aggregate({}, {}); }) == ErrorKind::Validation);
}

TEST_CASE("hierarchical credit rules") {
  auto tree = fixture_tree(2);
  // Fine prediction for a coarse label: credited.
  CHECK(hml::hierarchical_recall(std::vector<ClassId>{1}, std::vector<ClassId>{0}, tree, kNames) == 1.0);
  // Sibling fine class: not credited.
  CHECK(hml::hierarchical_recall(std::vector<ClassId>{2}, std::vector<ClassId>{1}, tree, kNames) == 0.0);
  // Coarse prediction for a fine label: not credited.
  CHECK(hml::hierarchical_recall(std::vector<ClassId>{0}, std::vector<ClassId>{1}, tree, kNames) == 0.0);
  // Fine child of another family: not credited.
  CHECK(hml::hierarchical_recall(std::vector<ClassId>{4}, std::vector<ClassId>{0}, tree, kNames) == 0.0);
  // Exact matches.
  std::vector<ClassId> all{0, 1, 2, 3, 4};
  CHECK(hml::hierarchical_recall(all, all, tree, kNames) == 1.0);

  CHECK(kind_of([&] { hml::hierarchical_recall(std::vector<ClassId>{9}, std::vector<ClassId>{0}, tree, kNames); }) ==
        ErrorKind::Validation);
  std::vector<std::string> extra = kNames;
  extra.push_back("riding");
  CHECK(kind_of([&] { hml::hierarchical_recall(std::vector<ClassId>{5}, std::vector<ClassId>{0}, tree, extra); }) ==
        ErrorKind::Validation);
}

TEST_CASE("ten-instance fixtures") {
  //                              credit?   exact?
  const std::vector<ClassId> labels{0, 0, 0, 1, 1, 2, 3, 3, 4, 0};
  const std::vector<ClassId> preds{0, 1, 2, 1, 2, 2, 4, 0, 4, 3};
  // exact: idx 0, 3, 5, 8                         -> 4
  // credited: idx 1 (parked on | on), 2 (sitting on | on), 6 (with | has) -> +3
  auto two = fixture_tree(2);
  auto report = hml::evaluate(preds, labels, two, kNames);
  CHECK(report.overall_recall == 0.4);
  CHECK(report.hierarchical_recall == 0.7);
  // per class: on 1/4, parked on 1/2, sitting on 1/1, has 0/2, with 1/1
  CHECK(report.mean_recall == doctest::Approx((0.25 + 0.5 + 1.0 + 0.0 + 1.0) / 5).epsilon(1e-15));
  CHECK(report.mean_at == doctest::Approx(0.5 * (report.mean_recall + 0.4)).epsilon(1e-15));

  auto flat = fixture_tree(1);
  auto flat_report = hml::evaluate(preds, labels, flat, kNames);
  CHECK(flat_report.hierarchical_recall == flat_report.overall_recall);
  CHECK(flat_report.hierarchical_recall == 0.4);

  // Three layers: sitting on sits below parked on but its coarse parent is still on.
  auto three = fixture_tree(3);
  CHECK(hml::evaluate(preds, labels, three, kNames).hierarchical_recall == 0.7);
}

TEST_CASE("metric properties on random inputs") {
  auto two = fixture_tree(2), flat = fixture_tree(1);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<ClassId> labels(n), preds(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<ClassId>(rng() % 5);
      preds[i] = static_cast<ClassId>(rng() % 5);
    }
    auto r = hml::evaluate(preds, labels, two, kNames);
    CHECK(r.hierarchical_recall >= r.overall_recall);
    for (double v : {r.mean_recall, r.overall_recall, r.mean_at, r.hierarchical_recall}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    auto rf = hml::evaluate(preds, labels, flat, kNames);
    CHECK(rf.hierarchical_recall == rf.overall_recall);

    // Overall recall agrees with the support-weighted mean.
    auto s = hml::aggregate(r.per_class_recall, r.support);
    CHECK(std::abs(s.overall_recall - r.overall_recall) <= 1e-12);

    // Joint permutation leaves every metric unchanged.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ClassId> pl(n), pp(n);
    for (std::size_t i = 0; i < n; ++i) {
      pl[i] = labels[perm[i]];
      pp[i] = preds[perm[i]];
    }
    auto rp = hml::evaluate(pp, pl, two, kNames);
    CHECK(rp.per_class_recall == r.per_class_recall);
    CHECK(rp.overall_recall == r.overall_recall);
    CHECK(rp.hierarchical_recall == r.hierarchical_recall);
    CHECK(rp.mean_recall == r.mean_recall);
  }
}

TEST_CASE("metrics CSV layout") {
  auto tree = fixture_tree(2);
  const std::vector<ClassId> labels{0, 1, 1, 3}, preds{0, 1, 0, 4};
  auto report = hml::evaluate(preds, labels, tree, kNames);
  testing::TempDir dir;
  hml::write_metrics_csv(report, kNames, dir / "m.csv");
  const std::string text = testing::read_text(dir / "m.csv");
  CHECK(text.rfind("class,support,recall\non,1,1\nparked on,2,0.5\nhas,1,0\n", 0) == 0);
  CHECK(text.find("summary,mean_recall,overall_recall,mean_at,hierarchical_recall\n") != std::string::npos);
  CHECK(text.find("summary,0.5,0.5,0.5,0.75\n") != std::string::npos);
}

TEST_CASE("mean_recall_over") {
  auto tree = fixture_tree(2);
  auto report = hml::evaluate(std::vector<ClassId>{0, 1, 1}, std::vector<ClassId>{0, 1, 2}, tree, kNames);
  CHECK(report.mean_recall_over(std::vector<ClassId>{1, 2}) == 0.5);
  CHECK(std::isnan(report.mean_recall_over(std::vector<ClassId>{4})));
}
