#include <doctest.h>

#include <cmath>
#include <random>

#include "bevcal/ipm.hpp"
#include "oracles.hpp"

using namespace bevcal;

namespace {

RasterImage noise_image(int w, int h, int channels, std::uint64_t seed) {
    RasterImage img = RasterImage::make_u8(w, h, channels);
    std::mt19937_64 rng(seed);
    for (auto& v : img.u8()) v = static_cast<std::uint8_t>(rng() & 0xFF);
    return img;
}

RasterImage noise_image_f32(int w, int h, int channels, std::uint64_t seed) {
    RasterImage img = RasterImage::make_f32(w, h, channels);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-3.0f, 3.0f);
    for (auto& v : img.f32()) v = u(rng);
    return img;
}

double smooth_value(double x, double y) { return 128.0 + 60.0 * std::sin(x / 17.0) * std::cos(y / 23.0) + 0.2 * x; }

RasterImage smooth_image(int w, int h) {
    RasterImage img = RasterImage::make_u8(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) img.u8()[img.index(x, y, 0)] = static_cast<std::uint8_t>(std::lround(smooth_value(x, y)));
    }
    return img;
}

Homography translation(double tx, double ty) {
    Matrix3 m = Matrix3::Identity();
    m(0, 2) = tx;
    m(1, 2) = ty;
    return Homography(m, Frame::Ori, Frame::Bev);
}

// Mild rotation, scale and perspective about the image center.
Matrix3 mild_perspective(double cx, double cy) {
    const double a = 0.08;
    Matrix3 to_center = Matrix3::Identity();
    to_center(0, 2) = -cx;
    to_center(1, 2) = -cy;
    Matrix3 core;
    core << 1.05 * std::cos(a), -std::sin(a), 0, std::sin(a), 1.05 * std::cos(a), 0, 2e-4, -1e-4, 1;
    Matrix3 back = Matrix3::Identity();
    back(0, 2) = cx + 2.5;
    back(1, 2) = cy - 1.5;
    return back * core * to_center;
}

bool well_inside(PlanePoint p, int w, int h, double margin) {
    return p.x >= margin && p.y >= margin && p.x <= w - 1 - margin && p.y <= h - 1 - margin;
}

}  // namespace

TEST_CASE("identity warp is bit exact") {
    for (Interpolation mode : {Interpolation::Nearest, Interpolation::Bilinear}) {
        for (int channels : {1, 3, 4}) {
            const RasterImage img = noise_image(37, 23, channels, 5);
            CHECK(warp_image(img, Homography::identity(Frame::Ori), 37, 23, 0.0, mode) == img);
            const RasterImage fimg = noise_image_f32(19, 11, channels, 6);
            CHECK(warp_image(fimg, Homography::identity(Frame::Ori), 19, 11, 0.0, mode) == fimg);
        }
    }
}

TEST_CASE("integer translation is bit exact where in bounds") {
    const RasterImage img = noise_image(40, 30, 3, 9);
    for (Interpolation mode : {Interpolation::Nearest, Interpolation::Bilinear}) {
        const RasterImage out = warp_image(img, translation(5, 3), 40, 30, 17.0, mode);
        for (int y = 0; y < 30; ++y) {
            for (int x = 0; x < 40; ++x) {
                for (int c = 0; c < 3; ++c) {
                    const std::uint8_t got = out.u8()[out.index(x, y, c)];
                    if (x >= 5 && y >= 3) {
                        REQUIRE(got == img.u8()[img.index(x - 5, y - 3, c)]);
                    } else {
                        REQUIRE(got == 17);
                    }
                }
            }
        }
    }
}

TEST_CASE("forward then inverse warp stays within one level") {
    const int w = 200;
    const int h = 150;
    const RasterImage img = smooth_image(w, h);
    const Matrix3 fwd = mild_perspective(w / 2.0, h / 2.0);
    const Homography hf(fwd, Frame::Ori, Frame::Bev);
    const RasterImage there = warp_image(img, hf, w, h);
    const RasterImage back = warp_image(there, invert(hf), w, h);

    // Doubly in bounds: the intermediate sample point and its source
    // preimage both keep a one-pixel margin.
    double sum = 0.0;
    long count = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const PlanePoint mid = oracle::map_point(fwd, {double(x), double(y)});
            if (!well_inside(mid, w, h, 1.0)) continue;
            const PlanePoint src = oracle::map_point(fwd.inverse(), mid);
            if (!well_inside(src, w, h, 1.0)) continue;
            const double d = double(back.u8()[back.index(x, y, 0)]) - double(img.u8()[img.index(x, y, 0)]);
            sum += d * d;
            ++count;
        }
    }
    REQUIRE(count > w * h / 2);
    CHECK(std::sqrt(sum / count) < 1.0);
}

TEST_CASE("composed warp stays close to two successive warps") {
    const int w = 180;
    const int h = 140;
    const RasterImage img = smooth_image(w, h);
    const Matrix3 m1 = mild_perspective(w / 2.0, h / 2.0);
    Matrix3 m2 = Matrix3::Identity();
    m2(0, 0) = 0.95;
    m2(1, 1) = 0.97;
    m2(0, 2) = 4.0;
    m2(1, 2) = 2.0;
    const Homography h1(m1, Frame::Ori, Frame::Bev);
    const Homography h2(m2, Frame::Bev, Frame::Bev);
    const RasterImage once = warp_image(img, compose(h2, h1), w, h);
    const RasterImage twice = warp_image(warp_image(img, h1, w, h), h2, w, h);
    double sum = 0.0;
    long count = 0;
    const Matrix3 m2inv = m2.inverse();
    const Matrix3 m1inv = m1.inverse();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const PlanePoint mid = oracle::map_point(m2inv, {double(x), double(y)});
            if (!well_inside(mid, w, h, 1.0)) continue;
            if (!well_inside(oracle::map_point(m1inv, mid), w, h, 1.0)) continue;
            const double d = double(once.u8()[once.index(x, y, 0)]) - double(twice.u8()[twice.index(x, y, 0)]);
            sum += d * d;
            ++count;
        }
    }
    REQUIRE(count > 1000);
    CHECK(std::sqrt(sum / count) < 2.0);
}

TEST_CASE("pixels with an out-of-bounds preimage get exactly the fill value") {
    const RasterImage img = noise_image(30, 30, 1, 3);
    const Matrix3 m = mild_perspective(15.0, 15.0);
    for (Interpolation mode : {Interpolation::Nearest, Interpolation::Bilinear}) {
        const RasterImage out = warp_image(img, Homography(m, Frame::Ori, Frame::Bev), 60, 60, 201.0, mode);
        const Matrix3 inv = m.inverse();
        long outside = 0;
        for (int y = 0; y < 60; ++y) {
            for (int x = 0; x < 60; ++x) {
                const PlanePoint p = oracle::map_point(inv, {double(x), double(y)});
                if (p.x < -1.0 || p.y < -1.0 || p.x > 30.0 || p.y > 30.0) {
                    ++outside;
                    CHECK(out.u8()[out.index(x, y, 0)] == 201);
                }
            }
        }
        CHECK(outside > 0);
    }
}

TEST_CASE("preimages at infinity are filled") {
    // The inverse map sends output column x = 10 to the line at infinity.
    Matrix3 inverse_map = Matrix3::Identity();
    inverse_map(2, 0) = -0.1;
    const Homography h(inverse_map.inverse(), Frame::Ori, Frame::Bev);
    const RasterImage img = noise_image(30, 10, 1, 1);
    for (Interpolation mode : {Interpolation::Nearest, Interpolation::Bilinear}) {
        const RasterImage out = warp_image(img, h, 20, 10, 9.0, mode);
        for (int y = 0; y < 10; ++y) CHECK(out.u8()[out.index(10, y, 0)] == 9);
        CHECK(out.u8()[out.index(0, 0, 0)] == img.u8()[img.index(0, 0, 0)]);
    }
}

TEST_CASE("parallel and serial warps agree bit for bit") {
    const RasterImage img = noise_image(64, 48, 3, 21);
    const RasterImage fimg = noise_image_f32(64, 48, 2, 22);
    const Homography h(mild_perspective(32.0, 24.0), Frame::Ori, Frame::Bev);
    for (Interpolation mode : {Interpolation::Nearest, Interpolation::Bilinear}) {
        const RasterImage serial = warp_image(img, h, 70, 50, 0.0, mode, 1);
        const RasterImage fserial = warp_image(fimg, h, 70, 50, 0.0, mode, 1);
        for (int threads : {2, 3, 7}) {
            CHECK(warp_image(img, h, 70, 50, 0.0, mode, threads) == serial);
            CHECK(warp_image(fimg, h, 70, 50, 0.0, mode, threads) == fserial);
        }
        CHECK(warp_image(img, h, 70, 50, 0.0, mode, 1) == serial);
    }
}

TEST_CASE("grid homography") {
    std::mt19937_64 rng(12);
    const Homography h_bev_ori(oracle::random_well_conditioned(rng), Frame::Ori, Frame::Bev);

    SUBCASE("unit grids leave H unchanged") {
        const Homography g = grid_homography(h_bev_ori, {1.0, 0.0}, {1.0, 0.0});
        CHECK(g.src() == Frame::OriF);
        CHECK(g.dst() == Frame::BevF);
        CHECK(projective_distance(g.matrix(), h_bev_ori.matrix()) < 1e-15);
    }
    SUBCASE("equal strides cancel around the identity") {
        const Homography g =
            grid_homography(Homography(Matrix3::Identity(), Frame::Ori, Frame::Bev), {8.0, 0.0}, {8.0, 0.0});
        CHECK(projective_distance(g.matrix(), Matrix3::Identity()) < 1e-15);
    }
    SUBCASE("pointwise agreement with explicit scaling") {
        const GridSpec grid{8.0, 3.5};
        CHECK(GridSpec::for_stride(8.0).offset == 3.5);
        const Homography g = grid_homography(h_bev_ori, grid, grid);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int i = 0; i < 100; ++i) {
            const PlanePoint f{u(rng), u(rng)};
            const PlanePoint input{8.0 * f.x + 3.5, 8.0 * f.y + 3.5};
            const PlanePoint mapped = oracle::map_point(h_bev_ori.matrix(), input);
            const PlanePoint expected{(mapped.x - 3.5) / 8.0, (mapped.y - 3.5) / 8.0};
            CHECK(oracle::distance(apply(g, f), expected) < 1e-9);
        }
    }
}

TEST_CASE("warp_points") {
    std::mt19937_64 rng(44);
    const Homography h(oracle::random_well_conditioned(rng), Frame::Ori, Frame::Bev);
    CHECK(warp_points(h, {}).empty());

    const std::vector<PlanePoint> pts{{1, 2}, {-3, 4.5}, {0, 0}};
    const auto same = warp_points(Homography::identity(Frame::Ori), pts);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(oracle::distance(same[i], pts[i]) < 1e-14);

    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::vector<PlanePoint> many;
    for (int i = 0; i < 1000; ++i) many.push_back({u(rng), u(rng)});
    const auto warped = warp_points(h, many);
    for (std::size_t i = 0; i < many.size(); ++i) CHECK(warped[i] == apply(h, many[i]));

    Matrix3 m = Matrix3::Identity();
    m(2, 0) = 0.01;
    try {
        warp_points(Homography(m, Frame::Ori, Frame::Bev), std::vector<PlanePoint>{{1, 1}, {2, 2}, {-100, 0}});
        FAIL("expected PointAtInfinity");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::PointAtInfinity);
        REQUIRE(e.index().has_value());
        CHECK(*e.index() == 2);
    }
}

TEST_CASE("world to BEV similarity runs x east and y south") {
    const Homography s = bev_from_world(10.0, {100.0, 50.0});
    CHECK(s.src() == Frame::World);
    CHECK(s.dst() == Frame::Bev);
    CHECK(oracle::distance(apply(s, {100.0, 50.0}), {0.0, 0.0}) < 1e-12);
    CHECK(oracle::distance(apply(s, {101.0, 50.0}), {10.0, 0.0}) < 1e-12);
    CHECK(oracle::distance(apply(s, {100.0, 49.0}), {0.0, 10.0}) < 1e-12);
}
