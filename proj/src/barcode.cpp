#include "wsr/barcode.hpp"

#include <bit>

namespace wsr {

Barcode::Barcode(std::size_t nbits) : nbits_(nbits), words_(words_for(nbits), 0) {}

Barcode::Barcode(std::size_t nbits, std::vector<std::uint64_t> words) : nbits_(nbits), words_(std::move(words)) {
  if (words_.size() != words_for(nbits_)) {
    throw FormatError("barcode: " + std::to_string(words_.size()) + " words cannot hold exactly " +
                      std::to_string(nbits_) + " bits");
  }
  if (nbits_ % 64 != 0 && (words_.back() >> (nbits_ % 64)) != 0) {
    throw FormatError("barcode: trailing bits beyond bit " + std::to_string(nbits_) + " are set");
  }
}

Barcode Barcode::from_bits(std::span<const bool> bits) {
  Barcode code(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) code.set(i, bits[i]);
  return code;
}

void Barcode::set(std::size_t i, bool value) {
  const std::uint64_t mask = std::uint64_t{1} << (i % 64);
  if (value) {
    words_[i / 64] |= mask;
  } else {
    words_[i / 64] &= ~mask;
  }
}

std::vector<bool> Barcode::unpack() const {
  std::vector<bool> bits(nbits_);
  for (std::size_t i = 0; i < nbits_; ++i) bits[i] = bit(i);
  return bits;
}

Barcode Barcode::complement() const {
  Barcode out(nbits_);
  for (std::size_t w = 0; w < words_.size(); ++w) out.words_[w] = ~words_[w];
  if (nbits_ % 64 != 0) out.words_.back() &= (std::uint64_t{1} << (nbits_ % 64)) - 1;
  return out;
}

std::uint32_t hamming(const Barcode& a, const Barcode& b) {
  if (a.nbits() != b.nbits()) {
    throw DataError("hamming: length mismatch (" + std::to_string(a.nbits()) + " vs " + std::to_string(b.nbits()) +
                    " bits)");
  }
  const auto& wa = a.words();
  const auto& wb = b.words();
  std::uint32_t d = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) d += static_cast<std::uint32_t>(std::popcount(wa[i] ^ wb[i]));
  return d;
}

void BunchOfBarcodes::validate() const {
  if (barcodes.empty()) throw DataError("bunch '" + wsi_id + "': no barcodes");
  if (coords.size() != barcodes.size()) throw DataError("bunch '" + wsi_id + "': coords and barcodes differ in length");
  for (const auto& b : barcodes) {
    if (b.nbits() != barcodes.front().nbits()) throw DataError("bunch '" + wsi_id + "': mixed barcode lengths");
  }
  if (barcodes.front().nbits() == 0) throw DataError("bunch '" + wsi_id + "': zero-length barcodes");
}

BunchOfBarcodes barcode_slide(const std::string& wsi_id, const SlideEmbeddings& slide) {
  BunchOfBarcodes bunch;
  bunch.wsi_id = wsi_id;
  const auto rows = slide.vectors();
  for (std::size_t i = 0; i < slide.size(); ++i) {
    bunch.barcodes.push_back(barcode_from_embedding(rows.row(static_cast<Eigen::Index>(i))));
    bunch.coords.push_back({slide.keys()[i].x, slide.keys()[i].y});
  }
  return bunch;
}

}  // namespace wsr
