#include "wsr/mosaic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "wsr/error.hpp"
#include "wsr/kmeans.hpp"
#include "wsr/parallel.hpp"
#include "wsr/random.hpp"

namespace wsr {

namespace {

// Median of a 256-bin histogram; mean of the two central values for even counts.
double histogram_median(const std::array<Eigen::Index, 256>& hist, Eigen::Index n) {
  const Eigen::Index lo_rank = (n - 1) / 2;
  const Eigen::Index hi_rank = n / 2;
  int lo = -1, hi = -1;
  Eigen::Index seen = 0;
  for (int v = 0; v < 256 && hi < 0; ++v) {
    seen += hist[v];
    if (lo < 0 && seen > lo_rank) lo = v;
    if (seen > hi_rank) hi = v;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

ColorFeature color_features(const PixelBlock& block) {
  ColorFeature f = ColorFeature::Zero();
  const Eigen::Index n = block.rows();
  if (n == 0) return f;
  const Eigen::MatrixX3d px = block.cast<double>();
  const Eigen::RowVector3d mean = px.colwise().mean();
  const Eigen::RowVector3d var = (px.rowwise() - mean).array().square().colwise().mean();
  for (int ch = 0; ch < 3; ++ch) {
    std::array<Eigen::Index, 256> hist{};
    for (Eigen::Index i = 0; i < n; ++i) ++hist[block(i, ch)];
    f[ch] = mean[ch] / 255.0;
    f[3 + ch] = std::sqrt(var[ch]) / 255.0;
    f[6 + ch] = histogram_median(hist, n) / 255.0;
  }
  return f;
}

bool is_tissue(const PixelBlock& block, const MosaicConfig& cfg) {
  const auto thr = static_cast<std::uint8_t>(cfg.background_white_threshold);
  Eigen::Index white = 0;
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    if (block(i, 0) > thr && block(i, 1) > thr && block(i, 2) > thr) ++white;
  }
  return static_cast<double>(white) < cfg.background_max_fraction * static_cast<double>(block.rows());
}

std::vector<TilePatch> tile_grid(const RasterSource& source, const MosaicConfig& cfg, int threads) {
  cfg.validate();
  const int p = cfg.patch_size;
  const int cols = source.width() / p;
  const int rows = source.height() / p;
  if (cols < 1 || rows < 1) {
    throw DataError("mosaic: slide of " + std::to_string(source.width()) + "x" + std::to_string(source.height()) +
                    " is smaller than one " + std::to_string(p) + "px patch");
  }
  std::vector<TilePatch> tiles(static_cast<std::size_t>(cols) * rows);
  parallel_for(tiles.size(), threads, [&](std::size_t i) {
    const int gx = static_cast<int>(i % cols);
    const int gy = static_cast<int>(i / cols);
    const PixelBlock block = source.read(gx * p, gy * p, p, p);
    TilePatch& t = tiles[i];
    t.coordinate = PatchCoordinate{static_cast<std::uint32_t>(gx * p), static_cast<std::uint32_t>(gy * p),
                                   static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(p), cfg.magnification};
    t.color_feature = color_features(block);
    t.tissue = is_tissue(block, cfg);
  });
  return tiles;
}

int spatial_cluster_count(int n, double select_fraction) {
  return std::max(1, static_cast<int>(std::llround(select_fraction * n)));
}

Mosaic select_mosaic(const std::vector<TilePatch>& tiles, const MosaicConfig& cfg, std::string wsi_id) {
  cfg.validate();
  std::vector<const TilePatch*> tissue;
  for (const auto& t : tiles) {
    if (t.tissue) tissue.push_back(&t);
  }
  if (tissue.empty()) throw DataError("mosaic: slide '" + wsi_id + "' has no tissue tiles");

  const auto n = static_cast<Eigen::Index>(tissue.size());
  PointMatrix<double> colors(n, ColorFeature::RowsAtCompileTime);
  for (Eigen::Index i = 0; i < n; ++i) colors.row(i) = tissue[i]->color_feature.transpose();
  const int k_color = static_cast<int>(std::min<Eigen::Index>(cfg.k_color, n));
  const auto color = kmeans(colors, k_color, cfg.kmeans_max_iter, derive_seed(cfg.seed, 0));

  Mosaic mosaic;
  mosaic.wsi_id = std::move(wsi_id);
  mosaic.color_cluster_sizes.assign(color.k(), 0);
  struct Pick {
    int cluster;
    const TilePatch* tile;
  };
  std::vector<Pick> picks;

  for (int c = 0; c < color.k(); ++c) {
    std::vector<const TilePatch*> members;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (color.assignments[i] == c) members.push_back(tissue[i]);
    }
    mosaic.color_cluster_sizes[c] = static_cast<int>(members.size());
    if (members.empty()) continue;

    const auto m = static_cast<Eigen::Index>(members.size());
    PointMatrix<double> xy(m, 2);
    for (Eigen::Index i = 0; i < m; ++i) xy.row(i) << members[i]->coordinate.x, members[i]->coordinate.y;
    const int k_s = spatial_cluster_count(static_cast<int>(m), cfg.select_fraction);
    const auto spatial = kmeans(xy, k_s, cfg.kmeans_max_iter, derive_seed(cfg.seed, 1 + static_cast<std::uint64_t>(c)));

    for (int s = 0; s < spatial.k(); ++s) {
      const TilePatch* best = nullptr;
      double best_d = 0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (spatial.assignments[i] != s) continue;
        const double d = (xy.row(i) - spatial.centroids.row(s)).squaredNorm();
        const auto* t = members[i];
        if (!best || d < best_d ||
            (d == best_d && std::tie(t->coordinate.y, t->coordinate.x) <
                                std::tie(best->coordinate.y, best->coordinate.x))) {
          best = t;
          best_d = d;
        }
      }
      if (best) picks.push_back({c, best});
    }
  }

  std::sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) {
    return std::tie(a.cluster, a.tile->coordinate.y, a.tile->coordinate.x) <
           std::tie(b.cluster, b.tile->coordinate.y, b.tile->coordinate.x);
  });
  for (const auto& p : picks) {
    mosaic.patches.push_back(p.tile->coordinate);
    mosaic.color_cluster_of_patch.push_back(p.cluster);
  }
  return mosaic;
}

std::string format_mosaic_csv(const std::vector<Mosaic>& mosaics) {
  std::ostringstream out;
  out << "wsi_id,x,y,width,height,magnification,color_cluster\n";
  for (const auto& m : mosaics) {
    for (std::size_t i = 0; i < m.patches.size(); ++i) {
      const auto& p = m.patches[i];
      out << csv_escape(m.wsi_id) << ',' << p.x << ',' << p.y << ',' << p.width << ',' << p.height << ','
          << p.magnification << ',' << m.color_cluster_of_patch[i] << '\n';
    }
  }
  return out.str();
}

std::vector<Mosaic> parse_mosaic_csv(std::string_view text) {
  auto rows = parse_csv(text);
  if (rows.empty() || rows[0].fields.size() != 7 || trim(rows[0].fields[0]) != "wsi_id")
    throw FormatError("mosaic csv: missing or malformed header");
  std::vector<Mosaic> out;
  std::map<std::string, std::size_t> slot;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    const auto where = "mosaic csv: line " + std::to_string(rows[r].line) + ": ";
    if (f.size() != 7) throw FormatError(where + "expected 7 fields");
    PatchCoordinate p;
    int cluster = 0;
    try {
      p.x = static_cast<std::uint32_t>(std::stoul(f[1]));
      p.y = static_cast<std::uint32_t>(std::stoul(f[2]));
      p.width = static_cast<std::uint32_t>(std::stoul(f[3]));
      p.height = static_cast<std::uint32_t>(std::stoul(f[4]));
      p.magnification = std::stod(f[5]);
      cluster = std::stoi(f[6]);
    } catch (const std::exception&) {
      throw FormatError(where + "non-numeric field");
    }
    const auto id = trim(f[0]);
    auto [it, inserted] = slot.try_emplace(id, out.size());
    if (inserted) out.push_back(Mosaic{id, {}, {}, {}});
    out[it->second].patches.push_back(p);
    out[it->second].color_cluster_of_patch.push_back(cluster);
  }
  return out;
}

}  // namespace wsr
