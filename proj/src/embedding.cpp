#include "wsr/embedding.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "binary_io.hpp"
#include "wsr/error.hpp"

namespace wsr {

namespace {

constexpr std::string_view kEmbeddingMagic = "YXEB";
constexpr std::string_view kSlideVectorMagic = "YXSV";
constexpr std::uint16_t kFormatVersion = 1;

void check_header(detail::ByteReader& in, std::string_view magic, const std::string& what) {
  in.set_context("header");
  if (in.bytes(4) != magic) throw FormatError(what + ": bad magic, expected '" + std::string(magic) + "'");
  if (auto v = in.u16(); v != kFormatVersion) throw FormatError(what + ": unsupported version " + std::to_string(v));
}

}  // namespace

SlideEmbeddings::SlideEmbeddings(int dim) : dim_(dim) {
  if (dim < 2) throw DataError("embedding: dimension must be >= 2, got " + std::to_string(dim));
}

SlideEmbeddings::SlideEmbeddings(std::vector<PatchKey> keys, EmbeddingRows vectors)
    : SlideEmbeddings(static_cast<int>(vectors.cols())) {
  if (static_cast<Eigen::Index>(keys.size()) != vectors.rows())
    throw DataError("embedding: key count does not match vector count");
  keys_.reserve(keys.size());
  data_.reserve(static_cast<std::size_t>(vectors.size()));
  for (std::size_t i = 0; i < keys.size(); ++i) add(keys[i], vectors.row(static_cast<Eigen::Index>(i)).transpose());
}

void SlideEmbeddings::add(PatchKey key, const Eigen::Ref<const Eigen::VectorXf>& v) {
  if (v.size() != dim_) {
    throw DataError("embedding: dimension mismatch, store has " + std::to_string(dim_) + ", vector has " +
                    std::to_string(v.size()));
  }
  if (!v.allFinite()) throw DataError("embedding: non-finite component at patch (" + std::to_string(key.x) + ", " +
                                      std::to_string(key.y) + ")");
  if (!index_.emplace(key, static_cast<Eigen::Index>(keys_.size())).second) {
    throw DataError("embedding: duplicate patch (" + std::to_string(key.x) + ", " + std::to_string(key.y) + ")");
  }
  keys_.push_back(key);
  data_.insert(data_.end(), v.data(), v.data() + v.size());
}

Eigen::Ref<const Eigen::RowVectorXf> SlideEmbeddings::at(PatchKey key) const {
  auto it = index_.find(key);
  if (it == index_.end()) {
    throw DataError("embedding: no vector for patch (" + std::to_string(key.x) + ", " + std::to_string(key.y) + ")");
  }
  return vectors().row(it->second);
}

void EmbeddingStore::insert(const std::string& wsi_id, SlideEmbeddings slide) {
  if (dim_ == 0) dim_ = slide.dim();
  if (slide.dim() != dim_) {
    throw DataError("embedding store: slide '" + wsi_id + "' has dimension " + std::to_string(slide.dim()) +
                    ", store has " + std::to_string(dim_));
  }
  if (!slides_.emplace(wsi_id, std::move(slide)).second)
    throw DataError("embedding store: duplicate slide '" + wsi_id + "'");
}

const SlideEmbeddings& EmbeddingStore::at(const std::string& wsi_id) const {
  auto it = slides_.find(wsi_id);
  if (it == slides_.end()) throw DataError("embedding store: no embeddings for slide '" + wsi_id + "'");
  return it->second;
}

SlideEmbeddings decode_embeddings(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes, "YXEB");
  check_header(in, kEmbeddingMagic, "YXEB");
  const auto dim = in.u32();
  const auto count = in.u32();
  if (dim < 2) throw FormatError("YXEB: dimension must be >= 2, got " + std::to_string(dim));
  SlideEmbeddings out(static_cast<int>(dim));
  Eigen::VectorXf v(dim);
  for (std::uint32_t r = 0; r < count; ++r) {
    in.set_context("record " + std::to_string(r));
    PatchKey key;
    key.x = in.u32();
    key.y = in.u32();
    in.need(std::size_t{dim} * 4);
    for (std::uint32_t j = 0; j < dim; ++j) v[j] = in.f32();
    out.add(key, v);
  }
  if (!in.at_end()) throw FormatError("YXEB: " + std::to_string(in.remaining()) + " trailing bytes after last record");
  return out;
}

std::vector<std::uint8_t> encode_embeddings(const SlideEmbeddings& slide) {
  detail::ByteWriter out;
  out.bytes(kEmbeddingMagic);
  out.u16(kFormatVersion);
  out.u32(static_cast<std::uint32_t>(slide.dim()));
  out.u32(static_cast<std::uint32_t>(slide.size()));
  for (std::size_t r = 0; r < slide.size(); ++r) {
    out.u32(slide.keys()[r].x);
    out.u32(slide.keys()[r].y);
    for (float f : slide.vectors().row(static_cast<Eigen::Index>(r))) out.f32(f);
  }
  return out.take();
}

SlideEmbeddings load_embeddings(const std::filesystem::path& path) {
  try {
    return decode_embeddings(read_binary_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_embeddings(const SlideEmbeddings& slide, const std::filesystem::path& path) {
  write_binary_file(path, encode_embeddings(slide));
}

Embedding decode_slide_vector(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes, "YXSV");
  check_header(in, kSlideVectorMagic, "YXSV");
  const auto dim = in.u32();
  if (dim < 2) throw FormatError("YXSV: dimension must be >= 2, got " + std::to_string(dim));
  in.set_context("vector");
  in.need(std::size_t{dim} * 4);
  Embedding v(dim);
  for (std::uint32_t j = 0; j < dim; ++j) v[j] = in.f32();
  if (!in.at_end()) throw FormatError("YXSV: trailing bytes after vector");
  if (!v.allFinite()) throw DataError("YXSV: non-finite component");
  return v;
}

std::vector<std::uint8_t> encode_slide_vector(const Embedding& v) {
  detail::ByteWriter out;
  out.bytes(kSlideVectorMagic);
  out.u16(kFormatVersion);
  out.u32(static_cast<std::uint32_t>(v.size()));
  for (float f : v) out.f32(f);
  return out.take();
}

SlideVector load_slide_vector(const std::filesystem::path& path, std::string wsi_id) {
  try {
    return SlideVector{std::move(wsi_id), decode_slide_vector(read_binary_file(path))};
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_slide_vector(const SlideVector& sv, const std::filesystem::path& path) {
  write_binary_file(path, encode_slide_vector(sv.vector));
}

Eigen::VectorXf color_histogram(const PixelBlock& block) {
  Eigen::VectorXf hist = Eigen::VectorXf::Zero(kColorHistogramBins);
  for (Eigen::Index i = 0; i < block.rows(); ++i) hist[color_bin(block(i, 0), block(i, 1), block(i, 2))] += 1.0f;
  if (block.rows() > 0) hist /= static_cast<float>(block.rows());
  return hist;
}

BuiltinEmbedder::BuiltinEmbedder(int dim, std::uint64_t seed) {
  if (dim < 2) throw DataError("builtin embedder: dimension must be >= 2, got " + std::to_string(dim));
  const float scale = 1.0f / std::sqrt(static_cast<float>(kColorHistogramBins));
  projection_.resize(dim, kColorHistogramBins);
  std::mt19937_64 rng(seed);
  for (Eigen::Index j = 0; j < projection_.cols(); ++j) {
    for (Eigen::Index i = 0; i < projection_.rows(); ++i) projection_(i, j) = (rng() >> 63) ? scale : -scale;
  }
}

Embedding BuiltinEmbedder::operator()(const PixelBlock& block) const { return projection_ * color_histogram(block); }

Embedding builtin_embed(const PixelBlock& block, int dim, std::uint64_t seed) {
  return BuiltinEmbedder(dim, seed)(block);
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace wsr
