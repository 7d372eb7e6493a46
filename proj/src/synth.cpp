#include "wsr/synth.hpp"

#include <Eigen/QR>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <random>
#include <set>

#include "wsr/error.hpp"
#include "wsr/random.hpp"

namespace wsr {

namespace {

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      out.push_back(static_cast<char>(std::tolower(u)));
    } else if (!out.empty() && out.back() != '-') {
      out.push_back('-');
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out.empty() ? "cohort" : out;
}

std::string padded(int value, int width) {
  std::string s = std::to_string(value);
  return std::string(s.size() < static_cast<std::size_t>(width) ? width - s.size() : 0, '0') + s;
}

Eigen::VectorXf gaussian(std::mt19937_64& rng, int dim, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXf v(dim);
  for (int i = 0; i < dim; ++i) v[i] = static_cast<float>(scale * normal(rng));
  return v;
}

}  // namespace

void CohortSpec::validate() const {
  if (organ.empty()) throw DataError("cohort spec: organ is empty");
  if (classes.empty()) throw DataError("cohort spec: no classes");
  if (patches_per_wsi < 1) throw DataError("cohort spec: patches_per_wsi must be >= 1");
  if (dim < 2) throw DataError("cohort spec: dim must be >= 2");
  if (!(class_separation >= 0.0) || !std::isfinite(class_separation))
    throw DataError("cohort spec: class_separation must be a finite value >= 0");
  if (!(patient_effect >= 0.0) || !std::isfinite(patient_effect))
    throw DataError("cohort spec: patient_effect must be a finite value >= 0");
  if (class_separation > 0 && classes.size() > static_cast<std::size_t>(dim))
    throw DataError("cohort spec: " + std::to_string(classes.size()) + " classes need dim >= class count");
  std::set<std::string> labels;
  for (const auto& c : classes) {
    if (c.label.empty()) throw DataError("cohort spec: empty class label");
    if (!labels.insert(c.label).second) throw DataError("cohort spec: duplicate class label '" + c.label + "'");
    if (c.patients < 1) throw DataError("cohort spec: class '" + c.label + "' needs >= 1 patient");
    if (c.wsis < c.patients)
      throw DataError("cohort spec: class '" + c.label + "' has fewer WSIs than patients");
  }
}

Cohort generate_cohort(const CohortSpec& spec) {
  spec.validate();
  const int n_classes = static_cast<int>(spec.classes.size());
  const int dim = spec.dim;

  Eigen::MatrixXf centers = Eigen::MatrixXf::Zero(dim, n_classes);
  if (spec.class_separation > 0) {
    std::mt19937_64 rng(derive_seed(spec.seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(dim, n_classes);
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, n_classes);
    centers = (q * (spec.class_separation / std::sqrt(2.0))).cast<float>();
  }

  Cohort cohort{DatasetManifest{}, EmbeddingStore(dim)};
  const std::string prefix = slug(spec.organ);
  for (int c = 0; c < n_classes; ++c) {
    const auto& cls = spec.classes[c];
    std::mt19937_64 rng(derive_seed(spec.seed, 1 + static_cast<std::uint64_t>(c)));
    std::vector<Eigen::VectorXf> patient_offsets;
    for (int p = 0; p < cls.patients; ++p) patient_offsets.push_back(gaussian(rng, dim, spec.patient_effect));

    for (int w = 0; w < cls.wsis; ++w) {
      const int patient = w % cls.patients;
      SlideRecord rec;
      rec.wsi_id = prefix + "-c" + padded(c, 3) + "-w" + padded(w, 4);
      rec.patient_id = prefix + "-c" + padded(c, 3) + "-p" + padded(patient, 4);
      rec.organ = spec.organ;
      rec.primary_diagnosis = cls.label;
      rec.source_path = rec.wsi_id + ".yxeb";

      SlideEmbeddings slide(dim);
      const Eigen::VectorXf base = centers.col(c) + patient_offsets[patient];
      for (int i = 0; i < spec.patches_per_wsi; ++i) {
        const PatchKey key{static_cast<std::uint32_t>((i % 16) * 224), static_cast<std::uint32_t>((i / 16) * 224)};
        slide.add(key, base + gaussian(rng, dim, 1.0));
      }
      cohort.embeddings.insert(rec.wsi_id, std::move(slide));
      cohort.manifest.records.push_back(std::move(rec));
    }
  }
  return cohort;
}

CohortSpec scale_cohort(CohortSpec spec, double divisor) {
  if (!(divisor > 0)) throw DataError("scale_cohort: divisor must be positive");
  for (auto& c : spec.classes) {
    c.wsis = std::max(1, static_cast<int>(std::lround(c.wsis / divisor)));
    c.patients = std::clamp(static_cast<int>(std::lround(c.patients / divisor)), 1, c.wsis);
  }
  return spec;
}

std::vector<AppendixRow> load_appendix_fixture(const std::filesystem::path& path) {
  const auto rows = parse_csv(read_text_file(path));
  if (rows.empty() || rows[0].fields.size() != 4 || trim(rows[0].fields[0]) != "organ")
    throw FormatError(path.string() + ": expected header 'organ,primary_diagnosis,patients,wsis'");
  std::vector<AppendixRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() != 4) throw FormatError(path.string() + ": line " + std::to_string(rows[r].line) + ": expected 4 fields");
    try {
      out.push_back({trim(f[0]), trim(f[1]), std::stoi(f[2]), std::stoi(f[3])});
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": line " + std::to_string(rows[r].line) + ": non-numeric count");
    }
  }
  return out;
}

std::vector<CohortClass> appendix_classes(const std::vector<AppendixRow>& rows, const std::string& organ) {
  std::vector<CohortClass> out;
  for (const auto& r : rows) {
    if (r.organ == organ) out.push_back({r.primary_diagnosis, r.patients, r.wsis});
  }
  if (out.empty()) throw DataError("appendix fixture: no organ '" + organ + "'");
  return out;
}

CohortSpec parse_cohort_spec(std::string_view json_text) {
  using nlohmann::json;
  CohortSpec spec;
  try {
    const json j = json::parse(json_text);
    spec.organ = j.at("organ").get<std::string>();
    for (const auto& c : j.at("classes")) {
      spec.classes.push_back({trim(c.at("label").get<std::string>()), c.at("patients").get<int>(), c.at("wsis").get<int>()});
    }
    spec.patches_per_wsi = j.value("patches_per_wsi", spec.patches_per_wsi);
    spec.dim = j.value("dim", spec.dim);
    spec.class_separation = j.value("class_separation", spec.class_separation);
    spec.patient_effect = j.value("patient_effect", spec.patient_effect);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("scale_divisor")) spec = scale_cohort(std::move(spec), j.at("scale_divisor").get<double>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("cohort spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

CohortSpec load_cohort_spec(const std::filesystem::path& path) {
  try {
    return parse_cohort_spec(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_cohort(const Cohort& cohort, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_manifest(cohort.manifest, dir / "manifest.csv");
  for (const auto& rec : cohort.manifest.records) write_embeddings(cohort.embeddings.at(rec.wsi_id), dir / (rec.wsi_id + ".yxeb"));
}

}  // namespace wsr
