#ifndef WSR_CORE_HPP
#define WSR_CORE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wsr {

/// Identity and labels of one whole-slide image.
struct SlideRecord {
  std::string wsi_id;
  std::string patient_id;
  std::string organ;
  std::string primary_diagnosis;
  std::optional<std::string> source_path;

  friend bool operator==(const SlideRecord&, const SlideRecord&) = default;
};

/// A square patch in the level-0 pixel frame.
struct PatchCoordinate {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t width = 224;
  std::uint32_t height = 224;
  double magnification = 20.0;

  friend bool operator==(const PatchCoordinate&, const PatchCoordinate&) = default;
};

struct MosaicConfig {
  int k_color = 9;
  double select_fraction = 0.02;
  int patch_size = 224;
  double magnification = 20.0;
  int background_white_threshold = 200;
  double background_max_fraction = 0.9;
  int kmeans_max_iter = 100;
  std::uint64_t seed = 0;

  /// Throws DataError when a field is out of range.
  void validate() const;
};

struct EvalConfig {
  std::vector<int> top_ks{1, 3, 5};
  double z_value = 1.96;
  bool exclude_same_patient = false;
  bool within_organ = true;

  void validate() const;
  int max_k() const { return top_ks.empty() ? 0 : top_ks.back(); }
};

struct DatasetManifest {
  std::vector<SlideRecord> records;

  /// Throws DataError on duplicate wsi_id or duplicate file path.
  void validate() const;
};

/// Removes leading and trailing ASCII whitespace.
std::string trim(std::string_view s);

/// Parses a manifest CSV with header `wsi_id,patient_id,organ,primary_diagnosis,path`.
/// Relative paths are kept as written.
DatasetManifest parse_manifest(std::string_view text);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Canonical CSV form: fields quoted only when they contain a comma, quote or newline.
std::string format_manifest(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Splits CSV text into rows of fields (RFC 4180 quoting). Used by every
/// CSV reader in the project. Row numbers are 1-based file line numbers.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};
std::vector<CsvRow> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace wsr

#endif  // WSR_CORE_HPP
