#ifndef WSR_BARCODE_HPP
#define WSR_BARCODE_HPP

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsr/embedding.hpp"
#include "wsr/error.hpp"

namespace wsr {

/// Bit-packed binary code. Bit i lives in bit (i % 64) of word i / 64;
/// unused high bits of the last word are always zero.
class Barcode {
 public:
  Barcode() = default;
  /// All-zero code of nbits bits.
  explicit Barcode(std::size_t nbits);
  /// Adopts packed words; throws FormatError if the word count is wrong or a
  /// trailing bit is set.
  Barcode(std::size_t nbits, std::vector<std::uint64_t> words);

  static Barcode from_bits(std::span<const bool> bits);
  static Barcode from_bits(std::initializer_list<bool> bits) {
    return from_bits(std::span<const bool>(bits.begin(), bits.size()));
  }

  static constexpr std::size_t words_for(std::size_t nbits) { return (nbits + 63) / 64; }

  std::size_t nbits() const { return nbits_; }
  const std::vector<std::uint64_t>& words() const { return words_; }
  bool bit(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
  void set(std::size_t i, bool value);
  std::vector<bool> unpack() const;
  Barcode complement() const;

  friend bool operator==(const Barcode&, const Barcode&) = default;

 private:
  std::size_t nbits_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Bit i is 1 iff v[i+1] - v[i] >= 0 (ties map to 1); nbits = d - 1.
template <typename Derived>
Barcode barcode_from_embedding(const Eigen::DenseBase<Derived>& v) {
  const Eigen::Index d = v.size();
  if (d < 2) throw DataError("barcode: embedding needs at least 2 components, got " + std::to_string(d));
  Barcode code(static_cast<std::size_t>(d - 1));
  for (Eigen::Index i = 0; i + 1 < d; ++i) {
    const auto a = v.derived().coeff(i);
    const auto b = v.derived().coeff(i + 1);
    if (!std::isfinite(a) || !std::isfinite(b))
      throw DataError("barcode: non-finite embedding component near index " + std::to_string(i));
    if (b - a >= 0) code.set(static_cast<std::size_t>(i), true);
  }
  return code;
}

/// Number of differing bits; XOR plus popcount over the packed words.
std::uint32_t hamming(const Barcode& a, const Barcode& b);

struct PatchOrigin {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

/// The index payload of one slide: one barcode per mosaic patch.
struct BunchOfBarcodes {
  std::string wsi_id;
  std::vector<Barcode> barcodes;
  std::vector<PatchOrigin> coords;

  std::size_t nbits() const { return barcodes.empty() ? 0 : barcodes.front().nbits(); }
  /// Throws DataError unless non-empty, parallel and of uniform length.
  void validate() const;

  friend bool operator==(const BunchOfBarcodes&, const BunchOfBarcodes&) = default;
};

/// Barcodes every row of a slide's embeddings, in row order.
BunchOfBarcodes barcode_slide(const std::string& wsi_id, const SlideEmbeddings& slide);

}  // namespace wsr

#endif  // WSR_BARCODE_HPP
