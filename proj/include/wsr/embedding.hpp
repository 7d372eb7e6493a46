#ifndef WSR_EMBEDDING_HPP
#define WSR_EMBEDDING_HPP

#include <Eigen/Core>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wsr/raster.hpp"

namespace wsr {

using Embedding = Eigen::VectorXf;
using EmbeddingRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PatchKey {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  friend auto operator<=>(const PatchKey&, const PatchKey&) = default;
};

/// The patch embeddings of one slide, one row per patch in file order.
class SlideEmbeddings {
 public:
  SlideEmbeddings() = default;
  explicit SlideEmbeddings(int dim);
  SlideEmbeddings(std::vector<PatchKey> keys, EmbeddingRows vectors);

  int dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  const std::vector<PatchKey>& keys() const { return keys_; }
  Eigen::Map<const EmbeddingRows> vectors() const {
    return {data_.data(), static_cast<Eigen::Index>(keys_.size()), dim_};
  }

  /// Appends one patch; throws DataError on a dimension mismatch, a duplicate
  /// key or a non-finite component.
  void add(PatchKey key, const Eigen::Ref<const Eigen::VectorXf>& v);
  /// Exact-coordinate lookup; a miss is a DataError.
  Eigen::Ref<const Eigen::RowVectorXf> at(PatchKey key) const;
  bool contains(PatchKey key) const { return index_.count(key) != 0; }

  friend bool operator==(const SlideEmbeddings& a, const SlideEmbeddings& b) {
    return a.dim_ == b.dim_ && a.keys_ == b.keys_ && a.data_ == b.data_;
  }

 private:
  int dim_ = 0;
  std::vector<PatchKey> keys_;
  std::vector<float> data_;
  std::map<PatchKey, Eigen::Index> index_;
};

/// Patch embeddings of many slides sharing one dimension.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(int dim = 0) : dim_(dim) {}

  int dim() const { return dim_; }
  void insert(const std::string& wsi_id, SlideEmbeddings slide);
  const SlideEmbeddings& at(const std::string& wsi_id) const;
  bool contains(const std::string& wsi_id) const { return slides_.count(wsi_id) != 0; }
  const std::map<std::string, SlideEmbeddings>& slides() const { return slides_; }

 private:
  int dim_;
  std::map<std::string, SlideEmbeddings> slides_;
};

struct SlideVector {
  std::string wsi_id;
  Embedding vector;
};

/// `YXEB` v1: magic, u16 version, u32 dim, u32 count, then count x
/// [u32 x, u32 y, dim x f32], all little-endian.
SlideEmbeddings decode_embeddings(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_embeddings(const SlideEmbeddings& slide);
SlideEmbeddings load_embeddings(const std::filesystem::path& path);
void write_embeddings(const SlideEmbeddings& slide, const std::filesystem::path& path);

/// `YXSV` v1: magic, u16 version, u32 dim, dim x f32.
Embedding decode_slide_vector(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_slide_vector(const Embedding& v);
SlideVector load_slide_vector(const std::filesystem::path& path, std::string wsi_id);
void write_slide_vector(const SlideVector& sv, const std::filesystem::path& path);

constexpr int kColorHistogramBins = 512;

/// Bin of an RGB pixel in the 8x8x8 colour histogram: (r/32)*64 + (g/32)*8 + b/32.
constexpr int color_bin(std::uint8_t r, std::uint8_t g, std::uint8_t b) { return (r >> 5) * 64 + (g >> 5) * 8 + (b >> 5); }

/// L1-normalised 512-bin colour histogram.
Eigen::VectorXf color_histogram(const PixelBlock& block);

/// Deterministic stand-in encoder: colour histogram projected by a seeded
/// d x 512 matrix of +-1/sqrt(512) entries (filled column by column from
/// mt19937_64(seed), sign = top bit of each draw).
class BuiltinEmbedder {
 public:
  BuiltinEmbedder(int dim, std::uint64_t seed);

  int dim() const { return static_cast<int>(projection_.rows()); }
  const Eigen::MatrixXf& projection() const { return projection_; }
  Embedding operator()(const PixelBlock& block) const;

 private:
  Eigen::MatrixXf projection_;
};

Embedding builtin_embed(const PixelBlock& block, int dim, std::uint64_t seed);

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace wsr

#endif  // WSR_EMBEDDING_HPP
