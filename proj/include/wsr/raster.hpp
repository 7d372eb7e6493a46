#ifndef WSR_RASTER_HPP
#define WSR_RASTER_HPP

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <memory>

namespace wsr {

/// One RGB pixel per row, pixels in raster order (row y, then column x).
using PixelBlock = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct RgbImage {
  int width = 0;
  int height = 0;
  PixelBlock pixels;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(PixelBlock::Zero(Eigen::Index(w) * h, 3)) {}

  auto pixel(int x, int y) { return pixels.row(Eigen::Index(y) * width + x); }
  auto pixel(int x, int y) const { return pixels.row(Eigen::Index(y) * width + x); }
  void fill_rect(int x, int y, int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

/// Single-resolution access to slide pixels. Implementations must be safe to
/// read from several threads at once.
class RasterSource {
 public:
  virtual ~RasterSource() = default;
  virtual int width() const = 0;
  virtual int height() const = 0;
  virtual double magnification() const = 0;
  /// Returns exactly the w*h pixels of the rectangle; throws DataError when
  /// the rectangle leaves the image.
  virtual PixelBlock read(int x, int y, int w, int h) const = 0;

 protected:
  void check_bounds(int x, int y, int w, int h) const;
};

class MemoryRaster final : public RasterSource {
 public:
  explicit MemoryRaster(RgbImage image, double magnification = 20.0)
      : image_(std::move(image)), magnification_(magnification) {}

  int width() const override { return image_.width; }
  int height() const override { return image_.height; }
  double magnification() const override { return magnification_; }
  PixelBlock read(int x, int y, int w, int h) const override;

  const RgbImage& image() const { return image_; }

 private:
  RgbImage image_;
  double magnification_;
};

/// Headerless interleaved 8-bit RGB file, rows top to bottom. Pixels are read
/// from disk on demand.
class RawRaster final : public RasterSource {
 public:
  RawRaster(std::filesystem::path path, int width, int height, double magnification = 20.0);

  int width() const override { return width_; }
  int height() const override { return height_; }
  double magnification() const override { return magnification_; }
  PixelBlock read(int x, int y, int w, int h) const override;

 private:
  std::filesystem::path path_;
  int width_;
  int height_;
  double magnification_;
};

/// Binary PPM (P6, maxval 255).
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);

/// Opens `*.ppm` as an in-memory raster and `*.<W>x<H>.rgb` as a RawRaster.
std::unique_ptr<RasterSource> open_raster(const std::filesystem::path& path, double magnification = 20.0);

}  // namespace wsr

#endif  // WSR_RASTER_HPP
