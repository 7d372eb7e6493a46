// Command-line front end: mosaic, index, search, eval, synth, stats.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "wsr/barcode.hpp"
#include "wsr/core.hpp"
#include "wsr/embedding.hpp"
#include "wsr/error.hpp"
#include "wsr/eval.hpp"
#include "wsr/mosaic.hpp"
#include "wsr/parallel.hpp"
#include "wsr/persistence.hpp"
#include "wsr/raster.hpp"
#include "wsr/search.hpp"
#include "wsr/synth.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kPartialFailure = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
  bool verbose = false;
};

struct MosaicFlags {
  wsr::MosaicConfig cfg;

  void add_to(CLI::App& app) {
    app.add_option("--k-color", cfg.k_color, "Colour clusters (stage 1)")->capture_default_str();
    app.add_option("--fraction", cfg.select_fraction, "Fraction of tissue tiles kept")->capture_default_str();
    app.add_option("--patch-size", cfg.patch_size, "Patch edge in pixels")->capture_default_str();
    app.add_option("--magnification", cfg.magnification, "Magnification recorded for patches")->capture_default_str();
    app.add_option("--white-threshold", cfg.background_white_threshold, "Background channel threshold (0-255)")
        ->capture_default_str();
    app.add_option("--background-fraction", cfg.background_max_fraction, "White-pixel fraction marking background")
        ->capture_default_str();
    app.add_option("--kmeans-iter", cfg.kmeans_max_iter, "Lloyd iteration cap")->capture_default_str();
  }
};

struct EvalFlags {
  wsr::EvalConfig cfg;
  bool exclude_same_patient = false;
  bool within_organ = true;

  void add_to(CLI::App& app, bool with_topks) {
    if (with_topks) app.add_option("--top-k", cfg.top_ks, "Top-k values to evaluate")->capture_default_str();
    app.add_option("--within-organ", within_organ, "Restrict candidates to the query's organ")->capture_default_str();
    app.add_flag("--exclude-same-patient", exclude_same_patient, "Drop slides of the query's patient");
  }
  wsr::EvalConfig resolved() const {
    auto c = cfg;
    c.within_organ = within_organ;
    c.exclude_same_patient = exclude_same_patient;
    return c;
  }
};

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

wsr::DatasetManifest load_nonempty_manifest(const fs::path& path) {
  auto m = wsr::load_manifest(path);
  if (m.records.empty()) throw UsageError("manifest '" + path.string() + "' has no slides");
  return m;
}

void report_failures(const std::vector<std::string>& failures) {
  for (const auto& f : failures) {
    if (!f.empty()) std::cerr << "error: " << f << '\n';
  }
}

std::size_t count_failures(const std::vector<std::string>& failures) {
  return static_cast<std::size_t>(std::count_if(failures.begin(), failures.end(), [](const auto& f) { return !f.empty(); }));
}

// ---------------------------------------------------------------- mosaic

wsr::Mosaic mosaic_for(const wsr::SlideRecord& rec, const fs::path& base, const wsr::MosaicConfig& cfg) {
  if (!rec.source_path) throw wsr::DataError("slide '" + rec.wsi_id + "' has no raster path");
  const auto raster = wsr::open_raster(resolve(base, *rec.source_path), cfg.magnification);
  return wsr::select_mosaic(wsr::tile_grid(*raster, cfg), cfg, rec.wsi_id);
}

int cmd_mosaic(const GlobalOptions& g, const fs::path& manifest_path, const fs::path& out_dir, wsr::MosaicConfig cfg) {
  cfg.seed = g.seed;
  cfg.validate();
  const auto manifest = load_nonempty_manifest(manifest_path);
  fs::create_directories(out_dir);
  const auto base = manifest_path.parent_path();
  std::vector<std::string> failures(manifest.records.size());
  wsr::parallel_for(manifest.records.size(), g.threads, [&](std::size_t i) {
    const auto& rec = manifest.records[i];
    try {
      const auto mosaic = mosaic_for(rec, base, cfg);
      wsr::write_text_file(out_dir / (rec.wsi_id + ".mosaic.csv"), wsr::format_mosaic_csv({mosaic}));
    } catch (const std::exception& e) {
      failures[i] = rec.wsi_id + ": " + e.what();
    }
  });
  report_failures(failures);
  if (g.verbose) {
    std::cout << (manifest.records.size() - count_failures(failures)) << " of " << manifest.records.size()
              << " mosaics written to " << out_dir.string() << '\n';
  }
  return count_failures(failures) ? kPartialFailure : kOk;
}

// ---------------------------------------------------------------- index

struct IndexSources {
  std::optional<fs::path> embeddings_dir;
  std::optional<fs::path> mosaics_dir;
  bool builtin = false;
  int dim = 1024;
};

wsr::BunchOfBarcodes bunch_from_embeddings(const wsr::SlideRecord& rec, const IndexSources& src) {
  const auto slide = wsr::load_embeddings(*src.embeddings_dir / (rec.wsi_id + ".yxeb"));
  if (!src.mosaics_dir) return wsr::barcode_slide(rec.wsi_id, slide);
  const auto mosaics = wsr::parse_mosaic_csv(wsr::read_text_file(*src.mosaics_dir / (rec.wsi_id + ".mosaic.csv")));
  if (mosaics.size() != 1 || mosaics[0].wsi_id != rec.wsi_id)
    throw wsr::DataError("mosaic file for '" + rec.wsi_id + "' does not describe exactly that slide");
  wsr::BunchOfBarcodes bunch;
  bunch.wsi_id = rec.wsi_id;
  for (const auto& p : mosaics[0].patches) {
    bunch.barcodes.push_back(wsr::barcode_from_embedding(slide.at({p.x, p.y})));
    bunch.coords.push_back({p.x, p.y});
  }
  return bunch;
}

wsr::BunchOfBarcodes bunch_from_raster(const wsr::SlideRecord& rec, const fs::path& base, const wsr::MosaicConfig& cfg,
                                       const wsr::BuiltinEmbedder& embed) {
  if (!rec.source_path) throw wsr::DataError("slide '" + rec.wsi_id + "' has no raster path");
  const auto raster = wsr::open_raster(resolve(base, *rec.source_path), cfg.magnification);
  const auto mosaic = wsr::select_mosaic(wsr::tile_grid(*raster, cfg), cfg, rec.wsi_id);
  wsr::BunchOfBarcodes bunch;
  bunch.wsi_id = rec.wsi_id;
  for (const auto& p : mosaic.patches) {
    const auto block = raster->read(static_cast<int>(p.x), static_cast<int>(p.y), static_cast<int>(p.width),
                                     static_cast<int>(p.height));
    bunch.barcodes.push_back(wsr::barcode_from_embedding(embed(block)));
    bunch.coords.push_back({p.x, p.y});
  }
  return bunch;
}

/// Builds index entries slide by slide; failed slides are reported and left out.
std::pair<std::vector<wsr::IndexEntry>, std::vector<std::string>> build_entries(const GlobalOptions& g,
                                                                                const fs::path& manifest_path,
                                                                                const IndexSources& src,
                                                                                wsr::MosaicConfig cfg) {
  const auto manifest = load_nonempty_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  cfg.seed = g.seed;
  std::optional<wsr::BuiltinEmbedder> embed;
  if (src.builtin) embed.emplace(src.dim, g.seed);

  std::vector<std::optional<wsr::IndexEntry>> built(manifest.records.size());
  std::vector<std::string> failures(manifest.records.size());
  wsr::parallel_for(manifest.records.size(), g.threads, [&](std::size_t i) {
    const auto& rec = manifest.records[i];
    try {
      auto bunch = src.builtin ? bunch_from_raster(rec, base, cfg, *embed) : bunch_from_embeddings(rec, src);
      bunch.validate();
      built[i] = wsr::IndexEntry{rec, std::move(bunch)};
    } catch (const std::exception& e) {
      failures[i] = rec.wsi_id + ": " + e.what();
    }
  });
  std::vector<wsr::IndexEntry> entries;
  for (auto& e : built) {
    if (e) entries.push_back(std::move(*e));
  }
  return {std::move(entries), std::move(failures)};
}

void check_sources(const IndexSources& src) {
  if (src.builtin == src.embeddings_dir.has_value())
    throw UsageError("exactly one of --embeddings-dir or --builtin-embed is required");
  if (src.mosaics_dir && src.builtin) throw UsageError("--mosaics applies to --embeddings-dir only");
}

int cmd_index(const GlobalOptions& g, const fs::path& manifest_path, const IndexSources& src, const fs::path& out,
              const wsr::MosaicConfig& cfg) {
  check_sources(src);
  cfg.validate();
  auto [entries, failures] = build_entries(g, manifest_path, src, cfg);
  report_failures(failures);
  if (entries.empty()) throw wsr::DataError("no slide could be indexed");
  const wsr::SlideIndex index(std::move(entries));
  wsr::write_index(index, out);
  if (g.verbose) std::cout << index.size() << " slides, " << index.nbits() << "-bit barcodes -> " << out.string() << '\n';
  return count_failures(failures) ? kPartialFailure : kOk;
}

// ---------------------------------------------------------------- search

std::map<std::string, wsr::Embedding> load_slide_vectors(const wsr::SlideIndex& index, const fs::path& dir) {
  std::map<std::string, wsr::Embedding> out;
  for (const auto& e : index.entries()) {
    out.emplace(e.record.wsi_id, wsr::load_slide_vector(dir / (e.record.wsi_id + ".yxsv"), e.record.wsi_id).vector);
  }
  return out;
}

void print_ranking(const wsr::RetrievalResult& res, bool verbose) {
  for (std::size_t i = 0; i < res.ranked.size(); ++i) {
    const auto& h = res.ranked[i];
    nlohmann::ordered_json line{{"rank", i + 1}, {"wsi_id", h.wsi_id}, {"distance", h.distance},
                                {"primary_diagnosis", h.primary_diagnosis}};
    std::cout << line.dump() << '\n';
  }
  if (verbose) {
    for (std::size_t i = 0; i < res.ranked.size(); ++i) {
      std::fprintf(stdout, "%3zu  %-24s %10.3f  %s\n", i + 1, res.ranked[i].wsi_id.c_str(), res.ranked[i].distance,
                   res.ranked[i].primary_diagnosis.c_str());
    }
  }
}

struct QueryFlags {
  std::string wsi_id;
  std::optional<fs::path> embeddings;
  std::string organ;
  std::string patient;
};

int cmd_search(const GlobalOptions& g, const fs::path& index_path, const QueryFlags& q, int k,
               const wsr::EvalConfig& cfg, const std::optional<fs::path>& slide_vectors) {
  if (k < 1) throw UsageError("--k must be >= 1");
  auto index = wsr::read_index(index_path);
  wsr::SlideRecord record;
  wsr::BunchOfBarcodes bunch;
  if (const auto* e = index.find(q.wsi_id)) {
    record = e->record;
    bunch = e->bunch;
  } else {
    if (!q.embeddings)
      throw UsageError("slide '" + q.wsi_id + "' is not in the index; pass --query-embeddings and --query-organ");
    if (q.organ.empty() && cfg.within_organ) throw UsageError("--query-organ is required for out-of-index queries");
    record = wsr::SlideRecord{q.wsi_id, q.patient, q.organ, "", std::nullopt};
    bunch = wsr::barcode_slide(q.wsi_id, wsr::load_embeddings(*q.embeddings));
  }
  wsr::RetrievalResult res;
  if (slide_vectors) {
    index.set_slide_vectors(load_slide_vectors(index, *slide_vectors));
    auto it = index.slide_vectors().find(record.wsi_id);
    if (it == index.slide_vectors().end()) throw wsr::DataError("no slide vector for '" + record.wsi_id + "'");
    res = wsr::slide_vector_search(index, record, it->second, k, cfg);
  } else {
    res = wsr::search(index, record, bunch, k, cfg);
  }
  print_ranking(res, g.verbose);
  return kOk;
}

// ---------------------------------------------------------------- eval

void print_report_table(const wsr::EvalReport& r) {
  std::printf("%-28s", "organ");
  for (int k : r.top_ks) std::printf(" %8s", wsr::topk_key(k).c_str());
  std::printf(" %8s\n", "queries");
  for (const auto& [organ, s] : r.organs) {
    std::printf("%-28s", organ.c_str());
    for (int k : r.top_ks) std::printf(" %8.2f", s.f1.at(k));
    std::printf(" %8d\n", s.n_queries);
  }
  for (int k : r.top_ks) {
    const auto& a = r.aggregate.at(k);
    if (!a) continue;
    std::printf("%-6s %3.0f%% +- %3.0f%% [%3.0f%% %3.0f%%]  n=%d\n", wsr::topk_key(k).c_str(), 100 * a->mean,
                100 * a->std, 100 * a->ci_low, 100 * a->ci_high, a->n);
  }
}

struct EvalInputs {
  std::optional<fs::path> index;
  std::optional<fs::path> manifest;
  IndexSources sources;
  std::optional<fs::path> slide_vectors;
};

int cmd_eval(const GlobalOptions& g, const EvalInputs& in, const fs::path& report_path,
             const std::optional<fs::path>& csv_path, const std::string& model, const wsr::EvalConfig& cfg,
             const wsr::MosaicConfig& mosaic_cfg) {
  cfg.validate();
  if (in.index.has_value() == in.manifest.has_value()) throw UsageError("pass exactly one of --index or --manifest");
  int status = kOk;
  wsr::SlideIndex index;
  if (in.index) {
    index = wsr::read_index(*in.index);
  } else {
    check_sources(in.sources);
    auto [entries, failures] = build_entries(g, *in.manifest, in.sources, mosaic_cfg);
    report_failures(failures);
    if (count_failures(failures)) status = kPartialFailure;
    if (entries.empty()) throw wsr::DataError("no slide could be indexed");
    index = wsr::SlideIndex(std::move(entries));
  }
  auto mode = wsr::RetrievalMode::kBarcodes;
  if (in.slide_vectors) {
    index.set_slide_vectors(load_slide_vectors(index, *in.slide_vectors));
    mode = wsr::RetrievalMode::kSlideVectors;
  }
  const auto report = wsr::run_evaluation(index, cfg, mode, g.threads);
  wsr::write_text_file(report_path, wsr::report_to_json(report));
  if (csv_path) wsr::write_text_file(*csv_path, wsr::report_to_csv(report, model));
  if (g.verbose) print_report_table(report);
  return status;
}

// ---------------------------------------------------------------- synth / stats

int cmd_synth(const GlobalOptions& g, const fs::path& spec_path, const fs::path& out_dir) {
  auto spec = wsr::load_cohort_spec(spec_path);
  if (g.seed_given) spec.seed = g.seed;
  const auto cohort = wsr::generate_cohort(spec);
  wsr::write_cohort(cohort, out_dir);
  if (g.verbose) {
    std::cout << cohort.manifest.records.size() << " slides of '" << spec.organ << "' written to " << out_dir.string()
              << '\n';
  }
  return kOk;
}

int cmd_stats(const GlobalOptions& g, const fs::path& fixture, const std::optional<std::string>& model,
              const std::optional<int>& topk, double z) {
  const auto rows = wsr::load_f1_fixture(fixture);
  wsr::EvalConfig cfg;
  cfg.z_value = z;
  auto models = wsr::fixture_models(rows);
  auto topks = wsr::fixture_topks(rows);
  if (model) {
    if (std::find(models.begin(), models.end(), *model) == models.end())
      throw wsr::DataError("fixture has no model '" + *model + "'");
    models = {*model};
  }
  if (topk) {
    if (std::find(topks.begin(), topks.end(), *topk) == topks.end())
      throw wsr::DataError("fixture has no top-k " + std::to_string(*topk));
    topks = {*topk};
  }
  for (const auto& m : models) {
    for (int k : topks) {
      const auto scores = wsr::fixture_scores(rows, m, k);
      if (scores.empty()) continue;
      wsr::AggregateStats s;
      try {
        s = wsr::aggregate_stats(scores, cfg);
      } catch (const wsr::DataError& e) {
        throw wsr::DataError("model '" + m + "', top-k " + std::to_string(k) + ": " + e.what());
      }
      nlohmann::ordered_json line{{"model", m},        {"topk", k},          {"n_organs", s.n},
                                  {"mean", s.mean},    {"std", s.std},       {"ci_low", s.ci_low},
                                  {"ci_high", s.ci_high}};
      std::cout << line.dump() << '\n';
      if (g.verbose) {
        std::printf("%-20s %-6s %3.0f%% +- %3.0f%% [%3.0f%% %3.0f%%]  n=%d\n", m.c_str(), wsr::topk_key(k).c_str(),
                    std::round(100 * s.mean), std::round(100 * s.std), std::round(100 * s.ci_low),
                    std::round(100 * s.ci_high), s.n);
      }
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-slide image retrieval with barcoded patch embeddings"};
  app.require_subcommand(1);
  GlobalOptions g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("-v,--verbose", g.verbose, "Human-readable summaries on standard output");

  std::function<int()> run;

  // mosaic
  auto* mosaic = app.add_subcommand("mosaic", "Select representative patches for every slide");
  fs::path m_manifest, m_out;
  MosaicFlags m_flags;
  mosaic->add_option("--manifest", m_manifest, "Manifest CSV")->required();
  mosaic->add_option("--out", m_out, "Output directory for <wsi_id>.mosaic.csv")->required();
  m_flags.add_to(*mosaic);
  mosaic->callback([&] { run = [&] { return cmd_mosaic(g, m_manifest, m_out, m_flags.cfg); }; });

  // index
  auto* index = app.add_subcommand("index", "Barcode slides into a YXIX index file");
  fs::path i_manifest, i_out;
  IndexSources i_src;
  MosaicFlags i_mosaic;
  index->add_option("--manifest", i_manifest, "Manifest CSV")->required();
  index->add_option("--embeddings-dir", i_src.embeddings_dir, "Directory of <wsi_id>.yxeb files");
  index->add_option("--mosaics", i_src.mosaics_dir, "Directory of <wsi_id>.mosaic.csv restricting the patches");
  index->add_flag("--builtin-embed", i_src.builtin, "Embed mosaic patches of the manifest rasters in-process");
  index->add_option("--dim", i_src.dim, "Built-in embedding dimension")->capture_default_str();
  index->add_option("--out", i_out, "Index file to write")->required();
  i_mosaic.add_to(*index);
  index->callback([&] { run = [&] { return cmd_index(g, i_manifest, i_src, i_out, i_mosaic.cfg); }; });

  // search
  auto* search = app.add_subcommand("search", "Rank indexed slides against one query slide");
  fs::path s_index;
  QueryFlags s_query;
  int s_k = 5;
  EvalFlags s_eval;
  std::optional<fs::path> s_vectors;
  search->add_option("--index", s_index, "Index file")->required();
  search->add_option("--query-wsi", s_query.wsi_id, "Query slide id")->required();
  search->add_option("--query-embeddings", s_query.embeddings, "YXEB file for a query outside the index");
  search->add_option("--query-organ", s_query.organ, "Organ of an out-of-index query");
  search->add_option("--query-patient", s_query.patient, "Patient of an out-of-index query");
  search->add_option("--k", s_k, "Number of results")->capture_default_str();
  search->add_option("--slide-vectors", s_vectors, "Directory of <wsi_id>.yxsv; switches to cosine slide search");
  s_eval.add_to(*search, false);
  search->callback([&] { run = [&] { return cmd_search(g, s_index, s_query, s_k, s_eval.resolved(), s_vectors); }; });

  // eval
  auto* eval = app.add_subcommand("eval", "Leave-one-out macro-F1 evaluation");
  EvalInputs e_in;
  fs::path e_report;
  std::optional<fs::path> e_csv;
  std::string e_model = "engine";
  EvalFlags e_eval;
  MosaicFlags e_mosaic;
  eval->add_option("--index", e_in.index, "Index file");
  eval->add_option("--manifest", e_in.manifest, "Manifest CSV (index built in memory)");
  eval->add_option("--embeddings-dir", e_in.sources.embeddings_dir, "Directory of <wsi_id>.yxeb files");
  eval->add_option("--mosaics", e_in.sources.mosaics_dir, "Directory of <wsi_id>.mosaic.csv");
  eval->add_flag("--builtin-embed", e_in.sources.builtin, "Embed manifest rasters in-process");
  eval->add_option("--dim", e_in.sources.dim, "Built-in embedding dimension")->capture_default_str();
  eval->add_option("--slide-vectors", e_in.slide_vectors, "Directory of <wsi_id>.yxsv; evaluates slide vectors");
  eval->add_option("--report", e_report, "EvalReport JSON output")->required();
  eval->add_option("--csv", e_csv, "Per-organ CSV output (organ,model,topk,f1)");
  eval->add_option("--model-name", e_model, "Model column of the CSV output")->capture_default_str();
  eval->add_option("--z", e_eval.cfg.z_value, "Normal quantile of the confidence interval")->capture_default_str();
  e_eval.add_to(*eval, true);
  e_mosaic.add_to(*eval);
  eval->callback([&] {
    run = [&] { return cmd_eval(g, e_in, e_report, e_csv, e_model, e_eval.resolved(), e_mosaic.cfg); };
  });

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic embedding cohort");
  fs::path y_spec, y_out;
  synth->add_option("--spec", y_spec, "Cohort spec JSON")->required();
  synth->add_option("--out-dir", y_out, "Output directory")->required();
  synth->callback([&] { run = [&] { return cmd_synth(g, y_spec, y_out); }; });

  // stats
  auto* stats = app.add_subcommand("stats", "Mean, std and CI of per-organ F1 values");
  fs::path t_fixture;
  std::optional<std::string> t_model;
  std::optional<int> t_topk;
  double t_z = 1.96;
  stats->add_option("--fixture", t_fixture, "CSV organ,model,topk,f1")->required();
  stats->add_option("--model", t_model, "Only this model");
  stats->add_option("--topk", t_topk, "Only this top-k");
  stats->add_option("--z", t_z, "Normal quantile of the confidence interval")->capture_default_str();
  stats->callback([&] { run = [&] { return cmd_stats(g, t_fixture, t_model, t_topk, t_z); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    return run();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
}
