#include "wsr/raster.hpp"

#include <cctype>
#include <fstream>
#include <regex>
#include <string>

#include "wsr/error.hpp"

namespace wsr {

void RgbImage::fill_rect(int x, int y, int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  for (int yy = y; yy < y + h; ++yy) {
    for (int xx = x; xx < x + w; ++xx) pixel(xx, yy) << r, g, b;
  }
}

void RasterSource::check_bounds(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > width() || y + h > height()) {
    throw DataError("raster: rectangle (" + std::to_string(x) + ", " + std::to_string(y) + ", " +
                    std::to_string(w) + "x" + std::to_string(h) + ") outside " + std::to_string(width()) + "x" +
                    std::to_string(height()) + " image");
  }
}

PixelBlock MemoryRaster::read(int x, int y, int w, int h) const {
  check_bounds(x, y, w, h);
  PixelBlock out(Eigen::Index(w) * h, 3);
  for (int r = 0; r < h; ++r) {
    out.middleRows(Eigen::Index(r) * w, w) = image_.pixels.middleRows(Eigen::Index(y + r) * image_.width + x, w);
  }
  return out;
}

RawRaster::RawRaster(std::filesystem::path path, int width, int height, double magnification)
    : path_(std::move(path)), width_(width), height_(height), magnification_(magnification) {
  if (width_ < 1 || height_ < 1) throw DataError("raw raster: non-positive dimensions");
  std::error_code ec;
  const auto size = std::filesystem::file_size(path_, ec);
  if (ec) throw Error("raw raster: cannot stat '" + path_.string() + "'");
  const auto expected = static_cast<std::uintmax_t>(width_) * height_ * 3;
  if (size != expected) {
    throw FormatError("raw raster: '" + path_.string() + "' has " + std::to_string(size) + " bytes, expected " +
                      std::to_string(expected));
  }
}

PixelBlock RawRaster::read(int x, int y, int w, int h) const {
  check_bounds(x, y, w, h);
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error("raw raster: cannot open '" + path_.string() + "'");
  PixelBlock out(Eigen::Index(w) * h, 3);
  for (int r = 0; r < h; ++r) {
    in.seekg(static_cast<std::streamoff>((static_cast<std::int64_t>(y + r) * width_ + x) * 3));
    in.read(reinterpret_cast<char*>(out.row(Eigen::Index(r) * w).data()), static_cast<std::streamsize>(w) * 3);
    if (!in) throw FormatError("raw raster: short read in '" + path_.string() + "'");
  }
  return out;
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("ppm: cannot open '" + path.string() + "'");
  if (next_token(in) != "P6") throw FormatError("ppm: '" + path.string() + "' is not a binary P6 file");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token(in));
    h = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw FormatError("ppm: malformed header in '" + path.string() + "'");
  }
  if (w < 1 || h < 1 || maxval != 255) throw FormatError("ppm: unsupported header in '" + path.string() + "'");
  RgbImage img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw FormatError("ppm: truncated pixel data in '" + path.string() + "'");
  return img;
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("ppm: cannot open '" + path.string() + "' for writing");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw Error("ppm: write failed for '" + path.string() + "'");
}

std::unique_ptr<RasterSource> open_raster(const std::filesystem::path& path, double magnification) {
  const auto name = path.filename().string();
  static const std::regex raw_name(R"(.*\.(\d+)x(\d+)\.rgb$)");
  std::smatch m;
  if (std::regex_match(name, m, raw_name)) {
    return std::make_unique<RawRaster>(path, std::stoi(m[1]), std::stoi(m[2]), magnification);
  }
  if (path.extension() == ".ppm") return std::make_unique<MemoryRaster>(read_ppm(path), magnification);
  throw FormatError("raster: unsupported file '" + path.string() + "' (expected .ppm or .<W>x<H>.rgb)");
}

}  // namespace wsr
