#ifndef WSR_EVAL_HPP
#define WSR_EVAL_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsr/core.hpp"
#include "wsr/embedding.hpp"
#include "wsr/search.hpp"

namespace wsr {

struct ClassCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Per-label true-positive / false-positive / false-negative counts.
struct ConfusionTable {
  std::map<std::string, ClassCounts> classes;

  void record(const std::string& truth, const std::string& predicted);
  /// Sum of TP + FN, i.e. the number of recorded queries.
  long queries() const;

  friend bool operator==(const ConfusionTable&, const ConfusionTable&) = default;
};

/// Mean over labels with TP + FN > 0 of 2TP / (2TP + FP + FN), a zero
/// denominator counting as F1 = 0. Throws DataError for an empty table.
double macro_f1(const ConfusionTable& table);

struct AggregateStats {
  double mean = 0;
  double std = 0;  // sample standard deviation (n - 1)
  double ci_low = 0;
  double ci_high = 0;
  int n = 0;
};

/// mean, sample std and mean +- z * std / sqrt(n). Needs n >= 2.
AggregateStats aggregate_stats(std::span<const double> scores, const EvalConfig& cfg);

enum class RetrievalMode { kBarcodes, kSlideVectors };

struct QueryLog {
  std::string wsi_id;
  std::string truth;
  std::vector<std::string> predicted;  // parallel to EvalConfig::top_ks
  std::size_t retrieved = 0;
};

struct OrganEvaluation {
  std::map<int, ConfusionTable> tables;  // keyed by top-k
  std::map<int, int> shortfalls;         // queries with fewer than k hits
  std::vector<QueryLog> log;             // ordered by wsi_id
};

/// Queries every slide of `organ` against the rest of the index once.
OrganEvaluation leave_one_out(const SlideIndex& index, const std::string& organ, const EvalConfig& cfg,
                              RetrievalMode mode = RetrievalMode::kBarcodes, int threads = 1);

struct OrganScores {
  std::map<int, double> f1;
  int n_queries = 0;
  std::map<int, int> shortfalls;
};

struct EvalReport {
  std::vector<int> top_ks;
  std::map<std::string, OrganScores> organs;
  std::map<int, std::optional<AggregateStats>> aggregate;  // empty when < 2 organs
  std::vector<std::string> skipped_organs;                 // fewer than 2 slides
};

/// "top1" for k = 1, "maj<k>" otherwise.
std::string topk_key(int k);

EvalReport run_evaluation(const SlideIndex& index, const EvalConfig& cfg,
                          RetrievalMode mode = RetrievalMode::kBarcodes, int threads = 1);
EvalReport run_evaluation(const DatasetManifest& manifest, const EmbeddingStore& embeddings, const EvalConfig& cfg,
                          int threads = 1);

/// Aggregates over per-organ scores, one entry per top-k.
void aggregate_report(EvalReport& report, const EvalConfig& cfg);

std::string report_to_json(const EvalReport& report);
/// Rows `organ,model,topk,f1` in the per-organ fixture layout.
std::string report_to_csv(const EvalReport& report, const std::string& model);

struct F1Row {
  std::string organ;
  std::string model;
  int topk = 1;
  double f1 = 0;
};

/// CSV `organ,model,topk,f1`.
std::vector<F1Row> parse_f1_fixture(std::string_view text);
std::vector<F1Row> load_f1_fixture(const std::filesystem::path& path);
/// Models and top-ks in first-appearance order.
std::vector<std::string> fixture_models(const std::vector<F1Row>& rows);
std::vector<int> fixture_topks(const std::vector<F1Row>& rows);
std::vector<double> fixture_scores(const std::vector<F1Row>& rows, const std::string& model, int topk);

}  // namespace wsr

#endif  // WSR_EVAL_HPP
