#include "wsr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "wsr/error.hpp"
#include "wsr/parallel.hpp"

namespace wsr {

void ConfusionTable::record(const std::string& truth, const std::string& predicted) {
  if (truth == predicted) {
    ++classes[truth].tp;
  } else {
    ++classes[truth].fn;
    ++classes[predicted].fp;
  }
}

long ConfusionTable::queries() const {
  long n = 0;
  for (const auto& [label, c] : classes) n += c.tp + c.fn;
  return n;
}

double macro_f1(const ConfusionTable& table) {
  double sum = 0;
  int present = 0;
  for (const auto& [label, c] : table.classes) {
    if (c.tp + c.fn == 0) continue;
    const long denom = 2 * c.tp + c.fp + c.fn;
    sum += denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
    ++present;
  }
  if (present == 0) throw DataError("macro_f1: no class has ground-truth instances");
  return sum / present;
}

AggregateStats aggregate_stats(std::span<const double> scores, const EvalConfig& cfg) {
  const auto n = scores.size();
  if (n < 2) throw DataError("aggregate_stats: need at least 2 scores, got " + std::to_string(n));
  if (!(cfg.z_value > 0)) throw DataError("aggregate_stats: z_value must be positive");
  AggregateStats s;
  s.n = static_cast<int>(n);
  s.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(n);
  double ss = 0;
  for (double x : scores) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(n - 1));
  const double half = cfg.z_value * s.std / std::sqrt(static_cast<double>(n));
  s.ci_low = s.mean - half;
  s.ci_high = s.mean + half;
  return s;
}

OrganEvaluation leave_one_out(const SlideIndex& index, const std::string& organ, const EvalConfig& cfg,
                              RetrievalMode mode, int threads) {
  cfg.validate();
  auto it = index.organs().find(organ);
  if (it == index.organs().end()) throw DataError("leave_one_out: organ '" + organ + "' is not in the index");
  const auto& members = it->second;
  if (members.size() < 2)
    throw DataError("leave_one_out: organ '" + organ + "' has a single slide; nothing to retrieve");

  OrganEvaluation out;
  out.log.resize(members.size());
  const int max_k = cfg.max_k();
  parallel_for(members.size(), threads, [&](std::size_t q) {
    const auto& entry = index.entries()[members[q]];
    RetrievalResult res;
    if (mode == RetrievalMode::kBarcodes) {
      res = search(index, entry.record, entry.bunch, max_k, cfg);
    } else {
      auto sv = index.slide_vectors().find(entry.record.wsi_id);
      if (sv == index.slide_vectors().end())
        throw DataError("leave_one_out: no slide vector for '" + entry.record.wsi_id + "'");
      res = slide_vector_search(index, entry.record, sv->second, max_k, cfg);
    }
    auto& log = out.log[q];
    log.wsi_id = entry.record.wsi_id;
    log.truth = entry.record.primary_diagnosis;
    log.retrieved = res.ranked.size();
    for (int k : cfg.top_ks) log.predicted.push_back(majority_label(res, k));
  });

  for (int k : cfg.top_ks) {
    out.tables[k];
    out.shortfalls[k] = 0;
  }
  for (const auto& log : out.log) {
    for (std::size_t j = 0; j < cfg.top_ks.size(); ++j) {
      const int k = cfg.top_ks[j];
      out.tables[k].record(log.truth, log.predicted[j]);
      if (log.retrieved < static_cast<std::size_t>(k)) ++out.shortfalls[k];
    }
  }
  return out;
}

std::string topk_key(int k) { return k == 1 ? "top1" : "maj" + std::to_string(k); }

void aggregate_report(EvalReport& report, const EvalConfig& cfg) {
  report.aggregate.clear();
  for (int k : report.top_ks) {
    std::vector<double> scores;
    for (const auto& [organ, s] : report.organs) {
      if (auto f = s.f1.find(k); f != s.f1.end()) scores.push_back(f->second);
    }
    report.aggregate[k] = scores.size() >= 2 ? std::optional(aggregate_stats(scores, cfg)) : std::nullopt;
  }
}

EvalReport run_evaluation(const SlideIndex& index, const EvalConfig& cfg, RetrievalMode mode, int threads) {
  cfg.validate();
  if (index.empty()) throw DataError("run_evaluation: empty index");
  EvalReport report;
  report.top_ks = cfg.top_ks;
  for (const auto& [organ, members] : index.organs()) {
    if (members.size() < 2) {
      report.skipped_organs.push_back(organ);
      continue;
    }
    OrganEvaluation ev;
    try {
      ev = leave_one_out(index, organ, cfg, mode, threads);
    } catch (const DataError& e) {
      throw DataError("organ '" + organ + "': " + e.what());
    }
    OrganScores s;
    s.n_queries = static_cast<int>(ev.log.size());
    for (int k : cfg.top_ks) s.f1[k] = macro_f1(ev.tables.at(k));
    s.shortfalls = ev.shortfalls;
    report.organs.emplace(organ, std::move(s));
  }
  if (report.organs.empty()) throw DataError("run_evaluation: no organ has at least 2 slides");
  aggregate_report(report, cfg);
  return report;
}

EvalReport run_evaluation(const DatasetManifest& manifest, const EmbeddingStore& embeddings, const EvalConfig& cfg,
                          int threads) {
  return run_evaluation(build_index(manifest, embeddings), cfg, RetrievalMode::kBarcodes, threads);
}

std::string report_to_json(const EvalReport& report) {
  using nlohmann::ordered_json;
  ordered_json organs = ordered_json::object();
  for (const auto& [name, s] : report.organs) {
    ordered_json o;
    for (int k : report.top_ks) o[topk_key(k)] = s.f1.at(k);
    o["n_queries"] = s.n_queries;
    ordered_json sf = ordered_json::object();
    for (int k : report.top_ks) sf[topk_key(k)] = s.shortfalls.count(k) ? s.shortfalls.at(k) : 0;
    o["shortfalls"] = sf;
    organs[name] = o;
  }
  ordered_json agg = ordered_json::object();
  for (int k : report.top_ks) {
    auto it = report.aggregate.find(k);
    if (it == report.aggregate.end() || !it->second) {
      agg[topk_key(k)] = nullptr;
      continue;
    }
    const auto& a = *it->second;
    agg[topk_key(k)] = {{"mean", a.mean}, {"std", a.std}, {"ci_low", a.ci_low}, {"ci_high", a.ci_high},
                        {"n_organs", a.n}};
  }
  ordered_json doc;
  doc["organs"] = organs;
  doc["aggregate"] = agg;
  if (!report.skipped_organs.empty()) doc["skipped_organs"] = report.skipped_organs;
  return doc.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report, const std::string& model) {
  std::ostringstream out;
  out.precision(17);
  out << "organ,model,topk,f1\n";
  for (const auto& [name, s] : report.organs) {
    for (int k : report.top_ks) out << csv_escape(name) << ',' << csv_escape(model) << ',' << k << ',' << s.f1.at(k) << '\n';
  }
  return out.str();
}

std::vector<F1Row> parse_f1_fixture(std::string_view text) {
  auto rows = parse_csv(text);
  if (rows.empty()) throw FormatError("f1 fixture: empty file");
  {
    const auto& h = rows[0].fields;
    if (h.size() != 4 || trim(h[0]) != "organ" || trim(h[1]) != "model" || trim(h[2]) != "topk" || trim(h[3]) != "f1")
      throw FormatError("f1 fixture: line 1: expected header 'organ,model,topk,f1'");
  }
  std::vector<F1Row> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    const auto where = "f1 fixture: line " + std::to_string(rows[r].line) + ": ";
    if (f.size() != 4) throw FormatError(where + "expected 4 fields");
    F1Row row{trim(f[0]), trim(f[1]), 0, 0};
    try {
      std::size_t used = 0;
      const auto k = trim(f[2]);
      row.topk = std::stoi(k, &used);
      if (used != k.size()) throw std::invalid_argument("topk");
      const auto v = trim(f[3]);
      row.f1 = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("f1");
    } catch (const std::exception&) {
      throw FormatError(where + "non-numeric topk or f1");
    }
    if (row.topk < 1) throw FormatError(where + "topk must be >= 1");
    if (!(row.f1 >= 0.0 && row.f1 <= 1.0)) throw FormatError(where + "f1 outside [0, 1]");
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<F1Row> load_f1_fixture(const std::filesystem::path& path) {
  try {
    return parse_f1_fixture(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> fixture_models(const std::vector<F1Row>& rows) {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    if (std::find(out.begin(), out.end(), r.model) == out.end()) out.push_back(r.model);
  }
  return out;
}

std::vector<int> fixture_topks(const std::vector<F1Row>& rows) {
  std::vector<int> out;
  for (const auto& r : rows) {
    if (std::find(out.begin(), out.end(), r.topk) == out.end()) out.push_back(r.topk);
  }
  return out;
}

std::vector<double> fixture_scores(const std::vector<F1Row>& rows, const std::string& model, int topk) {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.model == model && r.topk == topk) out.push_back(r.f1);
  }
  return out;
}

}  // namespace wsr
