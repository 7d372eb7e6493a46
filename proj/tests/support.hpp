// Shared helpers and independent oracles for the test suites. Nothing here
// calls into the code path it is used to check.

#ifndef WSR_TESTS_SUPPORT_HPP
#define WSR_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "wsr/barcode.hpp"
#include "wsr/raster.hpp"

namespace wsr::test {

inline std::filesystem::path data_dir() { return WSR_DATA_DIR; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("wsr-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<bool> random_bits(std::mt19937_64& rng, std::size_t n) {
  std::vector<bool> bits(n);
  for (std::size_t i = 0; i < n; ++i) bits[i] = (rng() >> 63) != 0;
  return bits;
}

inline Barcode random_barcode(std::mt19937_64& rng, std::size_t n) {
  const auto bits = random_bits(rng, n);
  Barcode b(n);
  for (std::size_t i = 0; i < n; ++i) b.set(i, bits[i]);
  return b;
}

/// Per-bit comparison through bit(), no word arithmetic.
inline std::uint32_t naive_hamming(const Barcode& a, const Barcode& b) {
  std::uint32_t d = 0;
  for (std::size_t i = 0; i < a.nbits(); ++i) d += a.bit(i) != b.bit(i);
  return d;
}

/// Double loop of naive Hamming distances, full sort, textbook median.
inline double naive_median_of_minimums(const std::vector<Barcode>& query, const std::vector<Barcode>& cand) {
  std::vector<double> minima;
  for (const auto& q : query) {
    std::uint32_t best = UINT32_MAX;
    for (const auto& c : cand) best = std::min(best, naive_hamming(q, c));
    minima.push_back(best);
  }
  std::sort(minima.begin(), minima.end());
  const auto n = minima.size();
  return n % 2 ? minima[n / 2] : (minima[n / 2 - 1] + minima[n / 2]) / 2.0;
}

inline RgbImage random_image(std::mt19937_64& rng, int w, int h) {
  RgbImage img(w, h);
  for (Eigen::Index i = 0; i < img.pixels.size(); ++i) img.pixels.data()[i] = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

/// Slide-like raster: white background with rectangular patches of a few
/// tissue colours plus pixel noise.
inline RgbImage synthetic_slide(std::uint64_t seed, int tiles_x, int tiles_y, int patch = 224) {
  std::mt19937_64 rng(seed);
  RgbImage img(tiles_x * patch, tiles_y * patch);
  img.pixels.setConstant(245);
  const std::uint8_t palette[][3] = {{200, 80, 150}, {150, 40, 110}, {230, 170, 200}, {120, 60, 160},
                                     {90, 30, 80},   {210, 120, 120}, {170, 150, 190}, {60, 20, 60}};
  const int blobs = 6 + static_cast<int>(rng() % 6);
  for (int b = 0; b < blobs; ++b) {
    const auto& c = palette[rng() % 8];
    const int bw = (2 + static_cast<int>(rng() % 6)) * patch;
    const int bh = (2 + static_cast<int>(rng() % 6)) * patch;
    const int x0 = static_cast<int>(rng() % static_cast<std::uint64_t>(img.width));
    const int y0 = static_cast<int>(rng() % static_cast<std::uint64_t>(img.height));
    img.fill_rect(x0, y0, std::min(bw, img.width - x0), std::min(bh, img.height - y0), c[0], c[1], c[2]);
  }
  for (Eigen::Index i = 0; i < img.pixels.size(); ++i) {
    const int v = img.pixels.data()[i] + static_cast<int>(rng() % 9) - 4;
    img.pixels.data()[i] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
  }
  return img;
}

}  // namespace wsr::test

#endif  // WSR_TESTS_SUPPORT_HPP
