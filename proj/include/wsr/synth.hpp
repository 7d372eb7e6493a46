#ifndef WSR_SYNTH_HPP
#define WSR_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wsr/core.hpp"
#include "wsr/embedding.hpp"

namespace wsr {

struct CohortClass {
  std::string label;
  int patients = 1;
  int wsis = 1;
};

struct CohortSpec {
  std::string organ;
  std::vector<CohortClass> classes;
  int patches_per_wsi = 16;
  int dim = 64;
  double class_separation = 8.0;  // pairwise distance between class centres
  double patient_effect = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Cohort {
  DatasetManifest manifest;
  EmbeddingStore embeddings;
};

/// Gaussian-mixture cohort. Class c sits at (separation / sqrt 2) * q_c where
/// the q_c are orthonormal directions from a seeded Gaussian QR, so every
/// pair of centres is `class_separation` apart. Each patient adds
/// patient_effect * N(0, I); each patch adds N(0, I). WSIs of a class are
/// dealt to its patients round-robin. Patch i of a slide sits at
/// ((i % 16) * 224, (i / 16) * 224).
Cohort generate_cohort(const CohortSpec& spec);

/// Divides every class's patient and WSI count by `divisor`, rounding to
/// nearest and keeping at least one of each.
CohortSpec scale_cohort(CohortSpec spec, double divisor);

struct AppendixRow {
  std::string organ;
  std::string primary_diagnosis;
  int patients = 0;
  int wsis = 0;
};

/// CSV `organ,primary_diagnosis,patients,wsis` of per-subtype cohort sizes.
std::vector<AppendixRow> load_appendix_fixture(const std::filesystem::path& path);
/// Cohort classes of one organ from the appendix rows, in file order.
std::vector<CohortClass> appendix_classes(const std::vector<AppendixRow>& rows, const std::string& organ);

CohortSpec parse_cohort_spec(std::string_view json_text);
CohortSpec load_cohort_spec(const std::filesystem::path& path);

/// Writes `manifest.csv` plus one `<wsi_id>.yxeb` per slide into `dir`.
void write_cohort(const Cohort& cohort, const std::filesystem::path& dir);

}  // namespace wsr

#endif  // WSR_SYNTH_HPP
