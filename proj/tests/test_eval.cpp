#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <random>
#include <set>

#include "support.hpp"
#include "wsr/eval.hpp"
#include "wsr/synth.hpp"

using namespace wsr;

namespace {

IndexEntry slide(const std::string& id, const std::string& patient, const std::string& organ, const std::string& label,
                 std::vector<Barcode> codes) {
  IndexEntry e{SlideRecord{id, patient, organ, label, std::nullopt}, {}};
  e.bunch.wsi_id = id;
  for (std::size_t i = 0; i < codes.size(); ++i) e.bunch.coords.push_back({static_cast<std::uint32_t>(i), 0});
  e.bunch.barcodes = std::move(codes);
  return e;
}

double oracle_macro_f1(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::set<std::string> truths;
  for (const auto& [t, p] : pairs) truths.insert(t);
  double sum = 0;
  for (const auto& c : truths) {
    double tp = 0, fp = 0, fn = 0;
    for (const auto& [t, p] : pairs) {
      tp += t == c && p == c;
      fp += t != c && p == c;
      fn += t == c && p != c;
    }
    sum += 2 * tp / (2 * tp + fp + fn);
  }
  return sum / static_cast<double>(truths.size());
}

}  // namespace

TEST_CASE("two-slide organs") {
  std::mt19937_64 rng(1);
  const auto a = test::random_barcode(rng, 31), b = test::random_barcode(rng, 31);
  EvalConfig cfg;
  cfg.top_ks = {1};
  auto ev = leave_one_out(SlideIndex({slide("a", "p1", "O", "X", {a}), slide("b", "p2", "O", "X", {b})}), "O", cfg);
  CHECK(macro_f1(ev.tables.at(1)) == 1.0);
  ev = leave_one_out(SlideIndex({slide("a", "p1", "O", "X", {a}), slide("b", "p2", "O", "Y", {b})}), "O", cfg);
  CHECK(macro_f1(ev.tables.at(1)) == 0.0);
}

TEST_CASE("macro-F1 closed forms for an always-majority predictor") {
  ConfusionTable prostate;
  for (int i = 0; i < 445; ++i) prostate.record("adeno", "adeno");
  for (int i = 0; i < 4; ++i) prostate.record("other", "adeno");
  CHECK(macro_f1(prostate) == doctest::Approx((890.0 / 894.0) / 2).epsilon(1e-12));
  CHECK(macro_f1(prostate) == doctest::Approx(0.4978).epsilon(1e-3));

  ConfusionTable liver;
  for (int i = 0; i < 364; ++i) liver.record("hcc", "hcc");
  for (int i = 0; i < 6; ++i) liver.record("chol", "hcc");
  for (int i = 0; i < 4; ++i) liver.record("mixed", "hcc");
  CHECK(macro_f1(liver) == doctest::Approx((728.0 / 738.0) / 3).epsilon(1e-12));
  CHECK(prostate.queries() == 449);
  CHECK(liver.queries() == 374);
}

TEST_CASE("macro-F1 ignores predicted-only labels and rejects empty tables") {
  ConfusionTable t;
  t.record("A", "Z");
  t.record("A", "A");
  CHECK(macro_f1(t) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(macro_f1(ConfusionTable{}), DataError);
}

TEST_CASE("leave-one-out replays against an independent search and F1") {
  std::mt19937_64 rng(2);
  const char* labels[] = {"A", "B", "C"};
  std::vector<IndexEntry> entries;
  for (int i = 0; i < 30; ++i) {
    std::vector<Barcode> codes;
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int p = 0; p < n; ++p) codes.push_back(test::random_barcode(rng, 15));
    entries.push_back(slide("s" + std::to_string(100 + i), "p" + std::to_string(i % 12), "Organ", labels[rng() % 3],
                            std::move(codes)));
  }
  const SlideIndex index(entries);
  const EvalConfig cfg;
  const auto ev = leave_one_out(index, "Organ", cfg, RetrievalMode::kBarcodes, 4);
  REQUIRE(ev.log.size() == 30);

  std::map<int, std::vector<std::pair<std::string, std::string>>> pairs;
  for (const auto& q : index.entries()) {
    std::vector<std::pair<double, std::string>> ranked;
    std::map<std::string, std::string> label_of;
    for (const auto& c : index.entries()) {
      if (c.record.wsi_id == q.record.wsi_id) continue;
      ranked.push_back({test::naive_median_of_minimums(q.bunch.barcodes, c.bunch.barcodes), c.record.wsi_id});
      label_of[c.record.wsi_id] = c.record.primary_diagnosis;
    }
    std::sort(ranked.begin(), ranked.end());
    for (int k : cfg.top_ks) {
      std::map<std::string, int> count, first;
      for (int i = 0; i < k; ++i) {
        const auto& l = label_of[ranked[i].second];
        if (!count[l]++) first[l] = i;
      }
      std::string best;
      for (const auto& [l, c] : count) {
        if (best.empty() || c > count[best] || (c == count[best] && first[l] < first[best])) best = l;
      }
      pairs[k].push_back({q.record.primary_diagnosis, best});
    }
  }
  for (int k : cfg.top_ks) {
    CHECK(macro_f1(ev.tables.at(k)) == doctest::Approx(oracle_macro_f1(pairs[k])).epsilon(1e-12));
    CHECK(ev.tables.at(k).queries() == 30);
    CHECK(ev.shortfalls.at(k) == 0);
  }
  CHECK(leave_one_out(index, "Organ", cfg, RetrievalMode::kBarcodes, 1).tables == ev.tables);
}

TEST_CASE("top-1 equals majority vote at k = 1 and labels can be renamed") {
  CohortSpec spec;
  spec.organ = "Kidneys";
  spec.classes = {{"A", 5, 10}, {"B", 5, 10}, {"C", 3, 6}};
  spec.dim = 32;
  spec.patches_per_wsi = 6;
  spec.class_separation = 3.0;
  spec.seed = 9;
  const auto cohort = generate_cohort(spec);
  EvalConfig cfg;
  cfg.top_ks = {1, 3};
  const auto index = build_index(cohort.manifest, cohort.embeddings);
  const auto base = leave_one_out(index, "Kidneys", cfg);
  for (const auto& log : base.log) {
    const auto& e = index.at(log.wsi_id);
    CHECK(log.predicted[0] == search(index, e.record, e.bunch, 1, cfg).ranked[0].primary_diagnosis);
  }

  auto renamed = cohort.manifest;
  for (auto& r : renamed.records) r.primary_diagnosis = r.primary_diagnosis == "A" ? "zeta" : r.primary_diagnosis;
  const auto other = leave_one_out(build_index(renamed, cohort.embeddings), "Kidneys", cfg);
  for (int k : cfg.top_ks) CHECK(macro_f1(other.tables.at(k)) == macro_f1(base.tables.at(k)));
}

TEST_CASE("aggregate statistics") {
  EvalConfig cfg;
  const std::vector<double> flat(7, 0.4);
  auto s = aggregate_stats(flat, cfg);
  CHECK(s.mean == doctest::Approx(0.4));
  CHECK(s.std == doctest::Approx(0.0));
  CHECK(s.ci_low == doctest::Approx(0.4));
  CHECK(s.ci_high == doctest::Approx(0.4));

  const std::vector<double> one{0.5};
  CHECK_THROWS_AS(aggregate_stats(one, cfg), DataError);

  const std::vector<double> two{0.2, 0.6};
  s = aggregate_stats(two, cfg);
  CHECK(s.std == doctest::Approx(std::sqrt(0.08)));
  CHECK(s.ci_high - s.ci_low == doctest::Approx(2 * 1.96 * std::sqrt(0.08) / std::sqrt(2.0)));

  // Repeating a sample four times keeps the mean, barely moves the std and
  // roughly halves the interval.
  std::vector<double> base{0.1, 0.3, 0.5, 0.2, 0.9}, rep;
  for (int i = 0; i < 4; ++i) rep.insert(rep.end(), base.begin(), base.end());
  const auto a = aggregate_stats(base, cfg), b = aggregate_stats(rep, cfg);
  CHECK(b.mean == doctest::Approx(a.mean));
  const double ratio = (b.ci_high - b.ci_low) / (a.ci_high - a.ci_low);
  CHECK(ratio == doctest::Approx(0.5 * b.std / a.std));
  CHECK(ratio < 0.6);
}

TEST_CASE("aggregate statistics of the published per-organ scores") {
  const auto rows = load_f1_fixture(test::data_dir() / "tables_2_4.csv");
  CHECK(rows.size() == 327);
  const auto s = aggregate_stats(fixture_scores(rows, "Yottixel", 1), EvalConfig{});
  CHECK(s.n == 23);
  CHECK(std::abs(100 * s.mean - 28) <= 1);
  CHECK(std::abs(100 * s.std - 13) <= 1);
  CHECK(std::abs(100 * s.ci_low - 23) <= 1);
  CHECK(std::abs(100 * s.ci_high - 33) <= 1);
  CHECK(std::abs(100 * aggregate_stats(fixture_scores(rows, "Yottixel-UNI", 1), EvalConfig{}).mean - 44) <= 1);
  CHECK(fixture_models(rows).size() == 5);
  CHECK(fixture_topks(rows) == std::vector<int>{1, 3, 5});
  CHECK(fixture_scores(rows, "GigaPath-WSI", 5).size() == 17);
}

TEST_CASE("f1 fixture parse errors") {
  CHECK_THROWS_AS(parse_f1_fixture("organ,model,k,f1\n"), FormatError);
  CHECK_THROWS_AS(parse_f1_fixture("organ,model,topk,f1\nA,m,x,0.3\n"), FormatError);
  CHECK_THROWS_AS(parse_f1_fixture("organ,model,topk,f1\nA,m,1,1.3\n"), FormatError);
  CHECK_THROWS_AS(parse_f1_fixture("organ,model,topk,f1\nA,m,1\n"), FormatError);
}

TEST_CASE("report layout and reproducibility") {
  CohortSpec spec;
  spec.organ = "Lung";
  spec.classes = {{"A", 3, 4}, {"B", 3, 4}};
  spec.dim = 16;
  spec.patches_per_wsi = 3;
  spec.seed = 4;
  auto cohort = generate_cohort(spec);
  // A second organ with one slide is skipped.
  cohort.manifest.records.push_back({"solo", "px", "Eye", "A", std::nullopt});
  SlideEmbeddings solo(16);
  solo.add({0, 0}, Embedding::LinSpaced(16, 0, 1));
  cohort.embeddings.insert("solo", std::move(solo));

  const auto report = run_evaluation(cohort.manifest, cohort.embeddings, EvalConfig{});
  const auto text = report_to_json(report);
  const auto doc = nlohmann::json::parse(text);
  CHECK(doc["organs"].size() == 1);
  const auto& lung = doc["organs"]["Lung"];
  CHECK(lung["n_queries"] == 8);
  for (const char* key : {"top1", "maj3", "maj5"}) {
    CHECK(lung[key].get<double>() >= 0.0);
    CHECK(lung[key].get<double>() <= 1.0);
    CHECK(doc["aggregate"][key].is_null());
  }
  CHECK(doc["skipped_organs"] == nlohmann::json::array({"Eye"}));
  CHECK(report_to_json(run_evaluation(cohort.manifest, cohort.embeddings, EvalConfig{}, 4)) == text);

  const auto csv = parse_f1_fixture(report_to_csv(report, "mine"));
  CHECK(csv.size() == 3);
  CHECK(csv[1].f1 == report.organs.at("Lung").f1.at(3));
}
