#include "bevcal/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "bevcal/ipm.hpp"

namespace bevcal {

namespace {

constexpr double kDegenerateArea = 1e-12;
constexpr long kRejectionsPerVehicle = 1000;

bool inside_polygon(std::span<const PlanePoint> poly, PlanePoint p) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const PlanePoint a = poly[i];
        const PlanePoint b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
    }
    return inside;
}

std::array<Vector3, 4> footprint(const SceneBox3D& b, double z) {
    const double c = std::cos(b.yaw);
    const double s = std::sin(b.yaw);
    const double hl = b.l / 2.0;
    const double hw = b.w / 2.0;
    const std::array<std::pair<double, double>, 4> offsets{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
    std::array<Vector3, 4> out;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto [dx, dy] = offsets[i];
        out[i] = Vector3(b.center_ground.x + dx * c - dy * s, b.center_ground.y + dx * s + dy * c, z);
    }
    return out;
}

bool fully_in_front(const SceneBox3D& b, const Extrinsics& e) {
    for (double z : {0.0, b.h}) {
        for (const auto& corner : footprint(b, z)) {
            if (!(depth_of(e, corner) > 0.0)) return false;
        }
    }
    return depth_of(e, Vector3(b.center_ground.x, b.center_ground.y, 0.0)) > 0.0 &&
           depth_of(e, Vector3(b.center_ground.x, b.center_ground.y, b.h)) > 0.0;
}

OriginalViewLabel project_box(const SceneBox3D& b, const CameraSample& cam) {
    OriginalViewLabel label;
    const auto bottom = footprint(b, 0.0);
    const auto top = footprint(b, b.h);
    for (std::size_t i = 0; i < 4; ++i) {
        label.bottom[i] = project(cam.intrinsics, cam.extrinsics, bottom[i]);
        label.top[i] = project(cam.intrinsics, cam.extrinsics, top[i]);
    }
    return label;
}

double uniform_in(std::mt19937_64& rng, Range r) {
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

Homography BevSpec::h_bev_world() const { return bev_from_world(ppm, origin); }

Homography ScenarioSpec::h_bev_ori() const { return compose(bev.h_bev_world(), invert(homography)); }

PrincipalPoint ScenarioSpec::principal_center() const {
    return pp_center.value_or(PrincipalPoint{image_width / 2.0, image_height / 2.0});
}

double ScenarioSpec::principal_radius() const { return pp_radius.value_or(0.05 * image_width); }

SyntheticFrame label_scene(const ScenarioSpec& spec, const CameraSample& camera, std::vector<SceneBox3D> boxes) {
    SyntheticFrame frame;
    frame.camera = camera;
    frame.bev = spec.bev;
    const Homography h_bev_ori = spec.h_bev_ori();
    for (const auto& b : boxes) {
        frame.labels_bev.push_back(tailed_rbox_from_scene(b, camera.intrinsics, camera.extrinsics, h_bev_ori));
        frame.labels_ori.push_back(project_box(b, camera));
    }
    frame.boxes = std::move(boxes);
    return frame;
}

SyntheticFrame generate_frame(const ScenarioSpec& spec, std::uint64_t camera_seed) {
    if (spec.n_vehicles < 0) throw Error(ErrorCode::InvalidArgument, "n_vehicles must be >= 0");
    if (spec.placement.empty()) throw Error(ErrorCode::InvalidArgument, "placement polygon is empty");
    if (!(spec.length.lo > 0.0 && spec.width.lo > 0.0 && spec.height.lo > 0.0) || spec.length.hi < spec.length.lo ||
        spec.width.hi < spec.width.lo || spec.height.hi < spec.height.lo) {
        throw Error(ErrorCode::InvalidArgument, "vehicle size ranges must be positive and ordered");
    }

    const auto cameras = sample_camera_family(spec.homography, spec.principal_center(), spec.principal_radius(), 1,
                                              camera_seed);
    const CameraSample& cam = cameras.front();
    const Homography h_bev_ori = spec.h_bev_ori();

    const std::span<const PlanePoint> poly(spec.placement);
    PlanePoint lo = poly.front();
    PlanePoint hi = poly.front();
    PlanePoint centroid{0.0, 0.0};
    for (const auto& p : poly) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
        centroid.x += p.x;
        centroid.y += p.y;
    }
    centroid = {centroid.x / static_cast<double>(poly.size()), centroid.y / static_cast<double>(poly.size())};
    const bool degenerate = std::abs(polygon_area(poly)) < kDegenerateArea;

    std::mt19937_64 rng(spec.seed);
    std::vector<SceneBox3D> accepted;
    std::vector<TailedRBox> labels;
    long rejections = 0;
    const long cap = kRejectionsPerVehicle * spec.n_vehicles;
    while (static_cast<int>(accepted.size()) < spec.n_vehicles) {
        if (rejections >= cap) {
            throw Error(ErrorCode::PlacementExhausted, "placed " + std::to_string(accepted.size()) + " of " +
                                                           std::to_string(spec.n_vehicles) + " vehicles");
        }
        SceneBox3D box;
        box.center_ground = degenerate ? centroid : PlanePoint{uniform_in(rng, {lo.x, hi.x}), uniform_in(rng, {lo.y, hi.y})};
        box.l = uniform_in(rng, spec.length);
        box.w = uniform_in(rng, spec.width);
        box.h = uniform_in(rng, spec.height);
        box.yaw = uniform_in(rng, {0.0, 2.0 * std::numbers::pi});

        if (!degenerate && !inside_polygon(poly, box.center_ground)) {
            ++rejections;
            continue;
        }
        if (!fully_in_front(box, cam.extrinsics)) {
            ++rejections;
            continue;
        }
        TailedRBox label = tailed_rbox_from_scene(box, cam.intrinsics, cam.extrinsics, h_bev_ori);
        const bool overlaps = std::any_of(labels.begin(), labels.end(),
                                          [&](const TailedRBox& other) { return rbox_iou(label.box, other.box) > 0.0; });
        if (overlaps) {
            ++rejections;
            continue;
        }
        accepted.push_back(box);
        labels.push_back(label);
    }

    SyntheticFrame frame = label_scene(spec, cam, std::move(accepted));
    frame.frame_id = static_cast<std::int64_t>(camera_seed);
    return frame;
}

std::vector<Detection> perturb_boxes(std::span<const RBox> gts, std::int64_t frame, double ppm, int bev_width,
                                     int bev_height, const PerturbParams& params, std::uint64_t seed) {
    if (!(params.drop_rate >= 0.0 && params.drop_rate <= 1.0) ||
        !(params.spurious_rate >= 0.0 && params.spurious_rate < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "drop rate must lie in [0, 1], spurious rate in [0, 1)");
    }
    if (!(ppm > 0.0)) throw Error(ErrorCode::InvalidArgument, "ppm must be positive");
    if (params.spurious_rate > 0.0 && (bev_width <= 0 || bev_height <= 0)) {
        throw Error(ErrorCode::InvalidArgument, "spurious boxes need a BEV extent");
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Detection> out;
    for (const RBox& gt : gts) {
        if (unit(rng) >= params.drop_rate) {
            const double dx = params.sigma_center * ppm * normal(rng);
            const double dy = params.sigma_center * ppm * normal(rng);
            const double dr = params.sigma_angle * normal(rng);
            const double magnitude = std::hypot(dx, dy) / ppm + std::abs(dr);
            out.push_back({RBox(gt.cx() + dx, gt.cy() + dy, gt.l(), gt.w(), gt.r() + dr), std::exp(-magnitude), frame});
        }
        if (unit(rng) < params.spurious_rate) {
            const double cx = unit(rng) * bev_width;
            const double cy = unit(rng) * bev_height;
            const double l = uniform_in(rng, {3.5, 5.5}) * ppm;
            const double w = uniform_in(rng, {1.6, 2.1}) * ppm;
            const double r = unit(rng) * std::numbers::pi;
            out.push_back({RBox(cx, cy, l, w, r), 0.5 * unit(rng), frame});
        }
    }
    return out;
}

std::vector<Detection> perturb_labels(const SyntheticFrame& frame, const PerturbParams& params, std::uint64_t seed) {
    std::vector<RBox> gts;
    gts.reserve(frame.labels_bev.size());
    for (const auto& label : frame.labels_bev) gts.push_back(label.box);
    return perturb_boxes(gts, frame.frame_id, frame.bev.ppm, frame.bev.width, frame.bev.height, params, seed);
}

}  // namespace bevcal
