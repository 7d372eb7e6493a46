#ifndef WSR_PERSISTENCE_HPP
#define WSR_PERSISTENCE_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "wsr/search.hpp"

namespace wsr {

/// `YXIX` v1, little-endian throughout:
///
///   "YXIX" | u16 version = 1 | u32 nbits | u32 slide count
///   per slide, ascending wsi_id:
///     wsi_id, patient_id, organ, primary_diagnosis  (u32 length + UTF-8 bytes)
///     u32 patch count
///     per patch: u32 x | u32 y | ceil(nbits / 64) x u64 barcode words
///
/// Slide vectors and source paths are not stored.
std::vector<std::uint8_t> encode_index(const SlideIndex& index);
SlideIndex decode_index(const std::vector<std::uint8_t>& bytes);

void write_index(const SlideIndex& index, const std::filesystem::path& path);
SlideIndex read_index(const std::filesystem::path& path);

}  // namespace wsr

#endif  // WSR_PERSISTENCE_HPP
