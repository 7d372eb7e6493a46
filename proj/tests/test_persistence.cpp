#include <doctest.h>

#include <random>

#include "support.hpp"
#include "wsr/persistence.hpp"

using namespace wsr;

namespace {

SlideIndex random_index(std::mt19937_64& rng) {
  const std::size_t nbits = 1 + rng() % 200;
  std::vector<IndexEntry> entries;
  const int slides = 1 + static_cast<int>(rng() % 12);
  for (int s = 0; s < slides; ++s) {
    IndexEntry e;
    e.record = {"slide-" + std::to_string(rng()), "p" + std::to_string(rng() % 5), rng() % 2 ? "Lungs" : "Head and neck",
                rng() % 2 ? "Squamous cell carcinoma, NOS" : "Adenocarcinoma", std::nullopt};
    e.bunch.wsi_id = e.record.wsi_id;
    const int patches = 1 + static_cast<int>(rng() % 9);
    for (int p = 0; p < patches; ++p) {
      e.bunch.barcodes.push_back(test::random_barcode(rng, nbits));
      e.bunch.coords.push_back({static_cast<std::uint32_t>(rng()), static_cast<std::uint32_t>(rng())});
    }
    entries.push_back(std::move(e));
  }
  return SlideIndex(std::move(entries));
}

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_str(std::vector<std::uint8_t>& b, const std::string& s) {
  put_u32(b, static_cast<std::uint32_t>(s.size()));
  b.insert(b.end(), s.begin(), s.end());
}

std::vector<std::uint8_t> one_slide_file() {
  std::vector<std::uint8_t> b{'Y', 'X', 'I', 'X'};
  put_u16(b, 1);
  put_u32(b, 3);
  put_u32(b, 1);
  put_str(b, "w1");
  put_str(b, "p1");
  put_str(b, "Eye");
  put_str(b, "Melanoma");
  put_u32(b, 1);
  put_u32(b, 448);
  put_u32(b, 672);
  put_u64(b, 0b101);
  return b;
}

std::string error_of(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_index(bytes);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("hand-assembled index decodes") {
  const auto index = decode_index(one_slide_file());
  REQUIRE(index.size() == 1);
  const auto& e = index.at("w1");
  CHECK(index.nbits() == 3);
  CHECK(e.record.organ == "Eye");
  CHECK(e.record.primary_diagnosis == "Melanoma");
  CHECK(e.bunch.coords[0] == PatchOrigin{448, 672});
  CHECK(e.bunch.barcodes[0] == Barcode::from_bits({true, false, true}));
  CHECK(encode_index(index) == one_slide_file());
}

TEST_CASE("random indexes round trip") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto index = random_index(rng);
    const auto bytes = encode_index(index);
    const auto back = decode_index(bytes);
    CHECK(back == index);
    CHECK(encode_index(back) == bytes);
  }
}

TEST_CASE("files written twice are byte-identical") {
  std::mt19937_64 rng(4);
  const auto index = random_index(rng);
  const auto dir = test::temp_dir("persistence");
  write_index(index, dir / "a.yxix");
  write_index(read_index(dir / "a.yxix"), dir / "b.yxix");
  CHECK(read_binary_file(dir / "a.yxix") == read_binary_file(dir / "b.yxix"));
  CHECK_THROWS_AS(read_index(dir / "missing.yxix"), Error);
}

TEST_CASE("malformed index files") {
  auto b = one_slide_file();
  b[0] = 'Z';
  CHECK(error_of(b).find("magic") != std::string::npos);

  b = one_slide_file();
  b[4] = 0xe7;
  b[5] = 0x03;
  CHECK(error_of(b).find("version 999") != std::string::npos);

  b = one_slide_file();
  b.pop_back();
  const auto msg = error_of(b);
  CHECK(msg.find("truncated") != std::string::npos);
  CHECK(msg.find("slide 0") != std::string::npos);

  b = one_slide_file();
  b.push_back(0);
  CHECK(error_of(b).find("trailing") != std::string::npos);

  b = one_slide_file();
  b[b.size() - 8] = 0b1101;  // bit 3 lies past nbits
  CHECK_FALSE(error_of(b).empty());

  b = one_slide_file();
  b[6] = 0;  // nbits = 0
  CHECK_FALSE(error_of(b).empty());

  CHECK_THROWS_AS(encode_index(SlideIndex{}), DataError);
}
