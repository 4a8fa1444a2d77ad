#pragma once

// Shared scenario fixtures for the scene, evaluation, CLI and acceptance tests.

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "bevcal/scene.hpp"
#include "oracles.hpp"

namespace fixture {

// Road camera 12 m up at (-25, -25), aimed at the middle of the lot and
// pitched 20 degrees down. The yaw is off-axis so both vanishing points are finite.
inline oracle::PinholeCamera road_camera() {
    return oracle::tilted_camera(1000.0, 960.0, 540.0, 20.0 * std::numbers::pi / 180.0, 12.0, std::atan2(45.0, 25.0),
                                 {-25.0, -25.0});
}

inline bevcal::Homography road_homography() {
    return bevcal::Homography(road_camera().ground_homography(), bevcal::Frame::World, bevcal::Frame::Ori);
}

// 40 m x 40 m lot north of the origin, 20 vehicles, BEV at 10 px/m.
inline bevcal::ScenarioSpec road_scenario(std::uint64_t seed, int n_vehicles = 20) {
    bevcal::ScenarioSpec spec(road_homography());
    spec.bev.ppm = 10.0;
    spec.bev.origin = {-25.0, 45.0};
    spec.bev.width = 500;
    spec.bev.height = 500;
    spec.n_vehicles = n_vehicles;
    spec.placement = {{-20.0, 0.0}, {20.0, 0.0}, {20.0, 40.0}, {-20.0, 40.0}};
    spec.seed = seed;
    return spec;
}

// Landmarks clicked on a north-up map at 0.1 m per pixel whose pixel (0, 0)
// sits at world (-30, 50), paired with their exact road-camera projections.
inline constexpr double kMapScale = 0.1;
inline constexpr bevcal::PlanePoint kMapOrigin{-30.0, 50.0};

struct MapClick {
    bevcal::PlanePoint map_px;
    bevcal::PlanePoint image_px;
};

inline std::vector<MapClick> map_clicks(int n = 6) {
    static constexpr std::array<bevcal::PlanePoint, 8> kMap{
        {{150, 150}, {450, 160}, {420, 480}, {130, 460}, {300, 300}, {220, 390}, {380, 250}, {260, 470}}};
    const Eigen::Matrix3d h = road_camera().ground_homography();
    std::vector<MapClick> out;
    for (int i = 0; i < n; ++i) {
        const bevcal::PlanePoint m = kMap[static_cast<std::size_t>(i)];
        const bevcal::PlanePoint w{kMapOrigin.x + kMapScale * m.x, kMapOrigin.y - kMapScale * m.y};
        out.push_back({m, oracle::map_point(h, w)});
    }
    return out;
}

}  // namespace fixture
