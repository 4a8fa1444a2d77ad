#include "bevcal/ipm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <thread>

namespace bevcal {

namespace {

// Source coordinates this close to an integer are treated as exact.
constexpr double kSnapTolerance = 1e-9;

double snap(double v) {
    const double r = std::round(v);
    return std::abs(v - r) <= kSnapTolerance ? r : v;
}

template <typename T>
T convert_sample(float v);

template <>
std::uint8_t convert_sample<std::uint8_t>(float v) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5f), 0.0f, 255.0f));
}

template <>
float convert_sample<float>(float v) {
    return v;
}

template <typename T>
T fill_value(double fill) {
    if constexpr (std::is_same_v<T, std::uint8_t>) {
        return static_cast<std::uint8_t>(std::clamp(std::floor(fill + 0.5), 0.0, 255.0));
    } else {
        return static_cast<float>(fill);
    }
}

template <typename T>
void warp_rows(const RasterImage& src, const std::vector<T>& in, std::vector<T>& out, const Matrix3& inv,
               int out_w, int row_begin, int row_end, T fill, Interpolation interp) {
    const int c = src.channels;
    const int w = src.width;
    const int h = src.height;
    for (int iy = row_begin; iy < row_end; ++iy) {
        for (int ix = 0; ix < out_w; ++ix) {
            const std::size_t o = (static_cast<std::size_t>(iy) * static_cast<std::size_t>(out_w) +
                                   static_cast<std::size_t>(ix)) *
                                  static_cast<std::size_t>(c);
            const auto p = try_apply(inv, PlanePoint{static_cast<double>(ix), static_cast<double>(iy)});
            if (!p) {
                std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(o), c, fill);
                continue;
            }
            const double sx = snap(p->x);
            const double sy = snap(p->y);

            if (interp == Interpolation::Nearest) {
                const double nx = std::floor(sx + 0.5);
                const double ny = std::floor(sy + 0.5);
                if (!(nx >= 0.0 && nx < w && ny >= 0.0 && ny < h)) {
                    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(o), c, fill);
                    continue;
                }
                const std::size_t s = src.index(static_cast<int>(nx), static_cast<int>(ny), 0);
                std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(s), c,
                            out.begin() + static_cast<std::ptrdiff_t>(o));
                continue;
            }

            if (!(sx >= 0.0 && sx <= w - 1 && sy >= 0.0 && sy <= h - 1)) {
                std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(o), c, fill);
                continue;
            }
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const int x1 = std::min(x0 + 1, w - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const float fx = static_cast<float>(sx - x0);
            const float fy = static_cast<float>(sy - y0);
            for (int k = 0; k < c; ++k) {
                const float v00 = static_cast<float>(in[src.index(x0, y0, k)]);
                const float v01 = static_cast<float>(in[src.index(x0, y1, k)]);
                const float v10 = static_cast<float>(in[src.index(x1, y0, k)]);
                const float v11 = static_cast<float>(in[src.index(x1, y1, k)]);
                const float c0 = v00 + (v01 - v00) * fy;
                const float c1 = v10 + (v11 - v10) * fy;
                out[o + static_cast<std::size_t>(k)] = convert_sample<T>(c0 + (c1 - c0) * fx);
            }
        }
    }
}

template <typename T>
void warp_typed(const RasterImage& src, RasterImage& dst, const Matrix3& inv, double fill,
                Interpolation interp, int threads) {
    const auto& in = std::get<std::vector<T>>(src.data);
    auto& out = std::get<std::vector<T>>(dst.data);
    const T fill_t = fill_value<T>(fill);
    const int rows = dst.height;
    const int workers = std::clamp(threads, 1, std::max(1, rows));
    if (workers == 1) {
        warp_rows<T>(src, in, out, inv, dst.width, 0, rows, fill_t, interp);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) {
        const int begin = rows * i / workers;
        const int end = rows * (i + 1) / workers;
        pool.emplace_back([&, begin, end] {
            warp_rows<T>(src, in, out, inv, dst.width, begin, end, fill_t, interp);
        });
    }
}

}  // namespace

Matrix3 GridSpec::to_input() const {
    Matrix3 s;
    s << stride, 0.0, offset, 0.0, stride, offset, 0.0, 0.0, 1.0;
    return s;
}

RasterImage warp_image(const RasterImage& src, const Homography& h, int out_w, int out_h, double fill,
                       Interpolation interp, int threads) {
    src.validate();
    if (out_w < 0 || out_h < 0) throw Error(ErrorCode::InvalidArgument, "output size must be non-negative");
    const Matrix3 inv = invert(h).matrix();

    if (src.type() == SampleType::U8) {
        RasterImage dst = RasterImage::make_u8(out_w, out_h, src.channels);
        warp_typed<std::uint8_t>(src, dst, inv, fill, interp, threads);
        return dst;
    }
    RasterImage dst = RasterImage::make_f32(out_w, out_h, src.channels);
    warp_typed<float>(src, dst, inv, fill, interp, threads);
    return dst;
}

Homography grid_homography(const Homography& h_bev_ori, const GridSpec& ori_grid, const GridSpec& bev_grid) {
    if (!(ori_grid.stride > 0.0) || !(bev_grid.stride > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "grid stride must be positive");
    }
    const Homography s_ori(ori_grid.to_input(), Frame::OriF, Frame::Ori);
    const Homography s_bev(bev_grid.to_input(), Frame::BevF, Frame::Bev);
    return compose(invert(s_bev), compose(h_bev_ori, s_ori));
}

std::vector<PlanePoint> warp_points(const Homography& h, std::span<const PlanePoint> pts) {
    std::vector<PlanePoint> out;
    out.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto q = try_apply(h.matrix(), pts[i]);
        if (!q) throw Error(ErrorCode::PointAtInfinity, "point maps to the line at infinity", i);
        out.push_back(*q);
    }
    return out;
}

Homography bev_from_world(double ppm, PlanePoint origin) {
    if (!(ppm > 0.0) || !std::isfinite(ppm)) throw Error(ErrorCode::InvalidArgument, "ppm must be positive");
    Matrix3 m;
    m << ppm, 0.0, -ppm * origin.x, 0.0, -ppm, ppm * origin.y, 0.0, 0.0, 1.0;
    return Homography(m, Frame::World, Frame::Bev);
}

}  // namespace bevcal
