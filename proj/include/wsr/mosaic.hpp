#ifndef WSR_MOSAIC_HPP
#define WSR_MOSAIC_HPP

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "wsr/core.hpp"
#include "wsr/raster.hpp"

namespace wsr {

/// mean R,G,B; std R,G,B; median R,G,B -- each divided by 255.
using ColorFeature = Eigen::Matrix<double, 9, 1>;

struct TilePatch {
  PatchCoordinate coordinate;
  ColorFeature color_feature = ColorFeature::Zero();
  bool tissue = false;
};

struct Mosaic {
  std::string wsi_id;
  std::vector<PatchCoordinate> patches;
  std::vector<int> color_cluster_of_patch;
  /// Number of tissue tiles in each colour cluster.
  std::vector<int> color_cluster_sizes;

  friend bool operator==(const Mosaic&, const Mosaic&) = default;
};

ColorFeature color_features(const PixelBlock& block);

/// Background iff at least background_max_fraction of the pixels have every
/// channel strictly above background_white_threshold.
bool is_tissue(const PixelBlock& block, const MosaicConfig& cfg);

/// Non-overlapping patch_size grid over the raster, tiles in (y, x) order.
/// Throws DataError when the raster is smaller than one patch.
std::vector<TilePatch> tile_grid(const RasterSource& source, const MosaicConfig& cfg, int threads = 1);

/// Stage 1 colour k-means over tissue tiles, stage 2 spatial k-means inside
/// every colour cluster with max(1, round(select_fraction * n_c)) centres; the
/// member tile closest to each spatial centre is kept. Output is sorted by
/// (colour cluster, y, x).
Mosaic select_mosaic(const std::vector<TilePatch>& tiles, const MosaicConfig& cfg, std::string wsi_id = {});

/// Number of patches select_mosaic keeps for a colour cluster of n tiles.
int spatial_cluster_count(int n, double select_fraction);

/// CSV `wsi_id,x,y,width,height,magnification,color_cluster`, one row per patch.
std::string format_mosaic_csv(const std::vector<Mosaic>& mosaics);
std::vector<Mosaic> parse_mosaic_csv(std::string_view text);

}  // namespace wsr

#endif  // WSR_MOSAIC_HPP
