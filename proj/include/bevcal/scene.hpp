#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "bevcal/camera.hpp"
#include "bevcal/evaluation.hpp"
#include "bevcal/rbox.hpp"

namespace bevcal {

struct Range {
    double lo;
    double hi;
};

/// BEV raster definition: `ppm` pixels per meter, `origin` is the world
/// coordinate of BEV pixel (0, 0), x east and y south.
struct BevSpec {
    double ppm = 10.0;
    PlanePoint origin;
    int width = 0;
    int height = 0;

    Homography h_bev_world() const;
};

struct ScenarioSpec {
    explicit ScenarioSpec(Homography world_to_ori) : homography(std::move(world_to_ori)) {}

    Homography homography;  // world -> ori
    int image_width = 1920;
    int image_height = 1080;
    BevSpec bev;
    int n_vehicles = 0;
    Range length{3.5, 5.5};
    Range width{1.6, 2.1};
    Range height{1.4, 2.0};
    std::vector<PlanePoint> placement;  // polygon in world meters
    std::uint64_t seed = 0;
    std::optional<PrincipalPoint> pp_center;  // default: image center
    std::optional<double> pp_radius;          // default: 5% of the image width

    Homography h_bev_ori() const;
    PrincipalPoint principal_center() const;
    double principal_radius() const;
};

struct OriginalViewLabel {
    std::array<PlanePoint, 4> bottom;
    std::array<PlanePoint, 4> top;
};

struct SyntheticFrame {
    std::int64_t frame_id = 0;
    CameraSample camera;
    std::vector<SceneBox3D> boxes;
    std::vector<TailedRBox> labels_bev;
    std::vector<OriginalViewLabel> labels_ori;
    BevSpec bev;
};

/// Projects a fixed scene through one camera into BEV and original-view labels.
SyntheticFrame label_scene(const ScenarioSpec& spec, const CameraSample& camera, std::vector<SceneBox3D> boxes);

/// One camera from the spec's principal-point family (seeded by
/// `camera_seed`) plus rejection-sampled non-overlapping vehicles (seeded by
/// spec.seed). frame_id is set to camera_seed.
SyntheticFrame generate_frame(const ScenarioSpec& spec, std::uint64_t camera_seed);

struct PerturbParams {
    double sigma_center = 0.0;  // meters, per axis
    double sigma_angle = 0.0;   // radians
    double drop_rate = 0.0;
    double spurious_rate = 0.0;
};

/// Oracle detector over BEV boxes in pixels. Confidence of a perturbed copy
/// is exp(-(|d_center| in meters + |d_angle| in radians)); spurious boxes get
/// confidence in [0, 0.5).
std::vector<Detection> perturb_boxes(std::span<const RBox> gts, std::int64_t frame, double ppm, int bev_width,
                                     int bev_height, const PerturbParams& params, std::uint64_t seed);

std::vector<Detection> perturb_labels(const SyntheticFrame& frame, const PerturbParams& params, std::uint64_t seed);

}  // namespace bevcal
