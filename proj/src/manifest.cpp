#include "wsr/core.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "wsr/error.hpp"

namespace wsr {

namespace {

constexpr std::string_view kManifestHeader = "wsi_id,patient_id,organ,primary_diagnosis,path";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

}  // namespace

std::string trim(std::string_view s) {
  auto b = s.begin();
  auto e = s.end();
  while (b != e && is_space(*b)) ++b;
  while (e != b && is_space(*(e - 1))) --e;
  return std::string(b, e);
}

void MosaicConfig::validate() const {
  if (!(select_fraction > 0.0 && select_fraction <= 1.0))
    throw DataError("mosaic: select_fraction must be in (0, 1]");
  if (k_color < 1) throw DataError("mosaic: k_color must be >= 1");
  if (patch_size < 1) throw DataError("mosaic: patch_size must be >= 1");
  if (background_white_threshold < 0 || background_white_threshold > 255)
    throw DataError("mosaic: background_white_threshold must be in [0, 255]");
  if (!(background_max_fraction >= 0.0 && background_max_fraction <= 1.0))
    throw DataError("mosaic: background_max_fraction must be in [0, 1]");
  if (kmeans_max_iter < 1) throw DataError("mosaic: kmeans_max_iter must be >= 1");
}

void EvalConfig::validate() const {
  if (top_ks.empty()) throw DataError("eval: top_ks is empty");
  if (!std::is_sorted(top_ks.begin(), top_ks.end()) ||
      std::adjacent_find(top_ks.begin(), top_ks.end()) != top_ks.end())
    throw DataError("eval: top_ks must be strictly increasing");
  if (top_ks.front() < 1) throw DataError("eval: every top-k must be >= 1");
  if (!(z_value > 0.0)) throw DataError("eval: z_value must be positive");
}

void DatasetManifest::validate() const {
  std::unordered_set<std::string> ids;
  std::unordered_set<std::string> paths;
  for (const auto& r : records) {
    if (r.wsi_id.empty()) throw DataError("manifest: empty wsi_id");
    if (r.organ.empty()) throw DataError("manifest: empty organ for '" + r.wsi_id + "'");
    if (r.primary_diagnosis.empty())
      throw DataError("manifest: empty primary_diagnosis for '" + r.wsi_id + "'");
    if (!ids.insert(r.wsi_id).second) throw DataError("manifest: duplicate wsi_id '" + r.wsi_id + "'");
    if (r.source_path && !r.source_path->empty() && !paths.insert(*r.source_path).second)
      throw DataError("manifest: path '" + *r.source_path + "' referenced twice");
  }
}

std::vector<CsvRow> parse_csv(std::string_view text) {
  std::vector<CsvRow> rows;
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    CsvRow row;
    row.line = line;
    std::string field;
    bool quoted_field = false;
    bool row_done = false;
    while (!row_done) {
      if (i < n && text[i] == '"' && field.empty() && !quoted_field) {
        quoted_field = true;
        ++i;
        for (;;) {
          if (i >= n)
            throw FormatError("csv: unterminated quoted field starting on line " + std::to_string(row.line));
          char c = text[i++];
          if (c == '"') {
            if (i < n && text[i] == '"') {
              field.push_back('"');
              ++i;
            } else {
              break;
            }
          } else {
            if (c == '\n') ++line;
            field.push_back(c);
          }
        }
        if (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r')
          throw FormatError("csv: unexpected character after closing quote on line " + std::to_string(line));
        continue;
      }
      if (i >= n || text[i] == '\n' || (text[i] == '\r' && i + 1 < n && text[i + 1] == '\n') ||
          (text[i] == '\r' && i + 1 == n)) {
        row.fields.push_back(std::move(field));
        if (i < n) {
          i += text[i] == '\r' ? 2 : 1;
          ++line;
        }
        row_done = true;
      } else if (text[i] == ',') {
        row.fields.push_back(std::move(field));
        field.clear();
        quoted_field = false;
        ++i;
      } else {
        if (quoted_field)
          throw FormatError("csv: unexpected character after closing quote on line " + std::to_string(line));
        field.push_back(text[i++]);
      }
    }
    // Blank lines are skipped.
    if (!(row.fields.size() == 1 && trim(row.fields[0]).empty())) rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

DatasetManifest parse_manifest(std::string_view text) {
  auto rows = parse_csv(text);
  if (rows.empty()) throw FormatError("manifest: missing header");
  std::string header;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) {
    if (i) header += ',';
    header += trim(rows[0].fields[i]);
  }
  if (header != kManifestHeader)
    throw FormatError("manifest: line 1: expected header '" + std::string(kManifestHeader) + "'");

  DatasetManifest m;
  std::unordered_set<std::string> ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    const auto where = "manifest: line " + std::to_string(rows[r].line) + ": ";
    if (f.size() != 5) throw FormatError(where + "expected 5 fields, got " + std::to_string(f.size()));
    SlideRecord rec{trim(f[0]), trim(f[1]), trim(f[2]), trim(f[3]), std::nullopt};
    if (auto p = trim(f[4]); !p.empty()) rec.source_path = std::move(p);
    if (rec.wsi_id.empty()) throw FormatError(where + "empty wsi_id");
    if (rec.organ.empty() || rec.primary_diagnosis.empty())
      throw FormatError(where + "organ and primary_diagnosis must be non-empty");
    if (!ids.insert(rec.wsi_id).second) throw DataError(where + "duplicate wsi_id '" + rec.wsi_id + "'");
    m.records.push_back(std::move(rec));
  }
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  try {
    return parse_manifest(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto& r : manifest.records) {
    out += csv_escape(r.wsi_id) + ',' + csv_escape(r.patient_id) + ',' + csv_escape(r.organ) + ',' +
           csv_escape(r.primary_diagnosis) + ',' + csv_escape(r.source_path.value_or("")) + '\n';
  }
  return out;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_text_file(path, format_manifest(manifest));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace wsr
