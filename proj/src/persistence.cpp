#include "wsr/persistence.hpp"

#include "binary_io.hpp"
#include "wsr/error.hpp"

namespace wsr {

namespace {

constexpr std::string_view kIndexMagic = "YXIX";
constexpr std::uint16_t kIndexVersion = 1;

}  // namespace

std::vector<std::uint8_t> encode_index(const SlideIndex& index) {
  if (index.empty()) throw DataError("write_index: index is empty");
  detail::ByteWriter out;
  out.bytes(kIndexMagic);
  out.u16(kIndexVersion);
  out.u32(static_cast<std::uint32_t>(index.nbits()));
  out.u32(static_cast<std::uint32_t>(index.size()));
  for (const auto& e : index.entries()) {
    out.str(e.record.wsi_id);
    out.str(e.record.patient_id);
    out.str(e.record.organ);
    out.str(e.record.primary_diagnosis);
    out.u32(static_cast<std::uint32_t>(e.bunch.barcodes.size()));
    for (std::size_t p = 0; p < e.bunch.barcodes.size(); ++p) {
      out.u32(e.bunch.coords[p].x);
      out.u32(e.bunch.coords[p].y);
      for (auto w : e.bunch.barcodes[p].words()) out.u64(w);
    }
  }
  return out.take();
}

SlideIndex decode_index(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes, "YXIX");
  in.set_context("header");
  if (in.bytes(4) != kIndexMagic) throw FormatError("YXIX: bad magic");
  if (auto v = in.u16(); v != kIndexVersion) throw FormatError("YXIX: unsupported version " + std::to_string(v));
  const auto nbits = in.u32();
  const auto count = in.u32();
  if (nbits == 0) throw FormatError("YXIX: nbits must be >= 1");
  const auto words = Barcode::words_for(nbits);

  std::vector<IndexEntry> entries;
  std::string previous;
  for (std::uint32_t s = 0; s < count; ++s) {
    in.set_context("slide " + std::to_string(s));
    IndexEntry e;
    e.record.wsi_id = in.str();
    e.record.patient_id = in.str();
    e.record.organ = in.str();
    e.record.primary_diagnosis = in.str();
    if (s > 0 && !(previous < e.record.wsi_id))
      throw FormatError("YXIX: slide " + std::to_string(s) + " ('" + e.record.wsi_id + "') is out of wsi_id order");
    previous = e.record.wsi_id;
    e.bunch.wsi_id = e.record.wsi_id;
    const auto patches = in.u32();
    if (patches == 0) throw FormatError("YXIX: slide " + std::to_string(s) + " has no patches");
    in.need(static_cast<std::size_t>(patches) * (8 + 8 * words));
    for (std::uint32_t p = 0; p < patches; ++p) {
      PatchOrigin o;
      o.x = in.u32();
      o.y = in.u32();
      std::vector<std::uint64_t> w(words);
      for (auto& word : w) word = in.u64();
      try {
        e.bunch.barcodes.emplace_back(nbits, std::move(w));
      } catch (const FormatError& err) {
        throw FormatError("YXIX: slide " + std::to_string(s) + ": " + err.what());
      }
      e.bunch.coords.push_back(o);
    }
    entries.push_back(std::move(e));
  }
  if (!in.at_end()) throw FormatError("YXIX: " + std::to_string(in.remaining()) + " trailing bytes after last slide");
  return SlideIndex(std::move(entries));
}

void write_index(const SlideIndex& index, const std::filesystem::path& path) {
  write_binary_file(path, encode_index(index));
}

SlideIndex read_index(const std::filesystem::path& path) {
  try {
    return decode_index(read_binary_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace wsr
