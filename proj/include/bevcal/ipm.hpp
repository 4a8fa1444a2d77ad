#pragma once

#include <span>
#include <vector>

#include "bevcal/projective.hpp"
#include "bevcal/raster.hpp"

namespace bevcal {

enum class Interpolation { Nearest, Bilinear };

/// Feature-map grid: feature cell i has its center at input pixel
/// offset + stride * i.
struct GridSpec {
    double stride = 1.0;
    double offset = 0.0;

    /// Default pyramid alignment, offset (stride - 1) / 2.
    static GridSpec for_stride(double stride) { return {stride, (stride - 1.0) / 2.0}; }

    /// Feature coordinates -> input pixel coordinates.
    Matrix3 to_input() const;
};

/// Inverse-mapping warp of `src` through `h` (dst <- src) onto an
/// out_w x out_h raster. Pixel (ix, iy) has its center at (ix, iy). Samples
/// whose preimage leaves the source (or maps to infinity) get `fill`.
///
/// Bilinear interpolation runs in single precision, lerping along y first
/// and then x, so row partitioning across `threads` never changes a bit.
RasterImage warp_image(const RasterImage& src, const Homography& h, int out_w, int out_h,
                       double fill = 0.0, Interpolation interp = Interpolation::Bilinear,
                       int threads = 1);

/// Feature-grid homography S_bev^-1 * H * S_ori (ori_f -> bev_f).
Homography grid_homography(const Homography& h_bev_ori, const GridSpec& ori_grid, const GridSpec& bev_grid);

/// Element-wise apply(); PointAtInfinity carries the offending index.
std::vector<PlanePoint> warp_points(const Homography& h, std::span<const PlanePoint> pts);

/// Similarity world -> bev: x east, y south, `ppm` pixels per meter, with
/// `origin` the world coordinate of BEV pixel (0, 0).
Homography bev_from_world(double ppm, PlanePoint origin);

}  // namespace bevcal
