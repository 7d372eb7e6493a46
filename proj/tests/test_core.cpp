#include <doctest.h>

#include <map>
#include <set>

#include "support.hpp"
#include "wsr/core.hpp"
#include "wsr/error.hpp"
#include "wsr/synth.hpp"

using namespace wsr;

TEST_CASE("three-line manifest parses in file order") {
  const auto m = parse_manifest(
      "wsi_id,patient_id,organ,primary_diagnosis,path\n"
      "S1,P1,Liver,\"Hepatocellular carcinoma, NOS\",s1.yxeb\n"
      "S2,P1,Liver,\"  Hepatocellular carcinoma, clear cell type \",s2.yxeb\n"
      "S3,P2,Liver,\"Combined hepatocellular carcinoma and cholangiocarcinoma\",\n");
  REQUIRE(m.records.size() == 3);
  CHECK(m.records[0].wsi_id == "S1");
  CHECK(m.records[0].primary_diagnosis == "Hepatocellular carcinoma, NOS");
  CHECK(m.records[1].primary_diagnosis == "Hepatocellular carcinoma, clear cell type");
  CHECK(m.records[2].source_path == std::nullopt);
  CHECK(m.records[0].patient_id == m.records[1].patient_id);
}

TEST_CASE("unquoted commas produce a field-count error with the line number") {
  try {
    parse_manifest("wsi_id,patient_id,organ,primary_diagnosis,path\nS1,P1,Liver,Adenocarcinoma, NOS,x\n");
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("labels are trimmed but otherwise byte-exact") {
  const auto m = parse_manifest(
      "wsi_id,patient_id,organ,primary_diagnosis,path\n"
      " a , p ,Lungs,\"  Adenocarcinoma, NOS  \",\n"
      "b,p,Lungs,\"adenocarcinoma, nos\",\n");
  CHECK(m.records[0].wsi_id == "a");
  CHECK(m.records[0].primary_diagnosis == "Adenocarcinoma, NOS");
  CHECK(m.records[0].primary_diagnosis != m.records[1].primary_diagnosis);
}

TEST_CASE("duplicate wsi_id is rejected with the id in the message") {
  try {
    parse_manifest("wsi_id,patient_id,organ,primary_diagnosis,path\nS1,P,O,D,\nS1,Q,O,D,\n");
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("'S1'") != std::string::npos);
  }
}

TEST_CASE("bad header and unterminated quotes are format errors") {
  CHECK_THROWS_AS(parse_manifest("id,patient,organ,dx,path\n"), FormatError);
  CHECK_THROWS_AS(parse_manifest("wsi_id,patient_id,organ,primary_diagnosis,path\nS1,P,O,\"D,\n"), FormatError);
  CHECK_THROWS_AS(parse_manifest(""), FormatError);
}

TEST_CASE("duplicate file paths are rejected") {
  CHECK_THROWS_AS(parse_manifest("wsi_id,patient_id,organ,primary_diagnosis,path\nA,P,O,D,x.ppm\nB,P,O,D,x.ppm\n"),
                  DataError);
}

TEST_CASE("canonical manifests round-trip byte for byte") {
  const std::string text =
      "wsi_id,patient_id,organ,primary_diagnosis,path\n"
      "S1,P1,Thyroid gland,\"Papillary carcinoma, follicular variant\",a/b.yxeb\n"
      "S2,P2,Testicles,None,\n"
      "S3,P3,Odd,\"say \"\"hi\"\"\",c.yxeb\n";
  CHECK(format_manifest(parse_manifest(text)) == text);

  const auto dir = test::temp_dir("manifest-rt");
  write_text_file(dir / "m.csv", text);
  const auto m = load_manifest(dir / "m.csv");
  write_manifest(m, dir / "m2.csv");
  CHECK(read_text_file(dir / "m2.csv") == text);
}

TEST_CASE("prostate-shaped fixture manifest has 449 records and 2 subtypes") {
  const auto rows = load_appendix_fixture(test::data_dir() / "appendix_cohorts.csv");
  const auto classes = appendix_classes(rows, "Prostate");
  DatasetManifest m;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (int w = 0; w < classes[c].wsis; ++w) {
      m.records.push_back({"PR-" + std::to_string(c) + "-" + std::to_string(w),
                           "PRP-" + std::to_string(c) + "-" + std::to_string(w % classes[c].patients), "Prostate",
                           classes[c].label, std::nullopt});
    }
  }
  const auto dir = test::temp_dir("prostate-manifest");
  write_manifest(m, dir / "prostate.csv");
  const auto loaded = load_manifest(dir / "prostate.csv");
  CHECK(loaded.records.size() == 449);
  std::set<std::string> labels, patients;
  for (const auto& r : loaded.records) {
    labels.insert(r.primary_diagnosis);
    patients.insert(r.patient_id);
  }
  CHECK(labels.size() == 2);
  CHECK(patients.size() == 399 + 4);
}

TEST_CASE("appendix fixture reproduces the published cohort sizes") {
  const auto rows = load_appendix_fixture(test::data_dir() / "appendix_cohorts.csv");
  CHECK(rows.size() == 117);
  std::map<std::string, int> wsis;
  long patients = 0, total = 0;
  for (const auto& r : rows) {
    wsis[r.organ] += r.wsis;
    patients += r.patients;
    total += r.wsis;
    CHECK(r.wsis >= r.patients);
  }
  CHECK(wsis.size() == 23);
  CHECK(patients == 9339);
  CHECK(total == 11444);
  const auto kidneys = appendix_classes(rows, "Kidneys");
  REQUIRE(kidneys.size() == 4);
  CHECK(kidneys[0].wsis == 506);
  CHECK(kidneys[1].wsis == 300);
  CHECK(kidneys[2].wsis == 13);
  CHECK(kidneys[3].wsis == 121);
}

TEST_CASE("config validation") {
  MosaicConfig m;
  CHECK_NOTHROW(m.validate());
  m.select_fraction = 0;
  CHECK_THROWS_AS(m.validate(), DataError);
  m.select_fraction = 1.0;
  m.k_color = 0;
  CHECK_THROWS_AS(m.validate(), DataError);

  EvalConfig e;
  CHECK_NOTHROW(e.validate());
  e.top_ks = {3, 1};
  CHECK_THROWS_AS(e.validate(), DataError);
  e.top_ks = {0, 1};
  CHECK_THROWS_AS(e.validate(), DataError);
  e.top_ks = {1, 2};
  e.z_value = 0;
  CHECK_THROWS_AS(e.validate(), DataError);
}
