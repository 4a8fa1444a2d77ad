#include "bevcal/rbox.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <tuple>

namespace bevcal {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMinArea = 1e-12;
// Keeps decoded offsets strictly inside (-pi/4, pi/4) once sigmoid saturates.
constexpr double kDecodeMargin = 1e-12;

double cross(PlanePoint o, PlanePoint a, PlanePoint b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

std::vector<PlanePoint> clip_convex(const std::vector<PlanePoint>& subject, const std::array<PlanePoint, 4>& clip) {
    std::vector<PlanePoint> poly = subject;
    for (std::size_t e = 0; e < clip.size() && !poly.empty(); ++e) {
        const PlanePoint p = clip[e];
        const PlanePoint q = clip[(e + 1) % clip.size()];
        std::vector<PlanePoint> next;
        next.reserve(poly.size() + 2);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const PlanePoint a = poly[i];
            const PlanePoint b = poly[(i + 1) % poly.size()];
            const double da = cross(p, q, a);
            const double db = cross(p, q, b);
            if (da >= 0.0) next.push_back(a);
            if ((da >= 0.0) != (db >= 0.0)) {
                const double t = da / (da - db);
                next.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
            }
        }
        poly = std::move(next);
    }
    return poly;
}

auto as_tuple(const RBox& b) {
    return std::make_tuple(b.cx(), b.cy(), b.l(), b.w(), b.r());
}

}  // namespace

double normalize_half_turn(double r) {
    double m = std::fmod(r, kPi);
    if (m < 0.0) m += kPi;
    if (m >= kPi) m = 0.0;
    return m;
}

RBox::RBox(double cx, double cy, double l, double w, double r) : cx_(cx), cy_(cy), l_(l), w_(w), r_(r) {
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(l) || !std::isfinite(w) || !std::isfinite(r)) {
        throw Error(ErrorCode::InvalidArgument, "r-box fields must be finite");
    }
    if (!(l > 0.0) || !(w > 0.0)) throw Error(ErrorCode::InvalidArgument, "r-box sides must be positive");
    if (w_ > l_) {
        std::swap(l_, w_);
        r_ += kPi / 2.0;
    }
    r_ = normalize_half_turn(r_);
}

AnchorSet AnchorSet::from_sizes(std::span<const std::pair<double, double>, kLayers> sizes) {
    AnchorSet set;
    for (int layer = 0; layer < kLayers; ++layer) {
        for (int k = 0; k < kPerLayer; ++k) {
            set.layers[static_cast<std::size_t>(layer)][static_cast<std::size_t>(k)] =
                Anchor{sizes[static_cast<std::size_t>(layer)].first, sizes[static_cast<std::size_t>(layer)].second,
                       k * kPi / kPerLayer};
        }
    }
    return set;
}

std::array<PlanePoint, 4> rbox_corners(const RBox& b) {
    const double c = std::cos(b.r());
    const double s = std::sin(b.r());
    const double hl = b.l() / 2.0;
    const double hw = b.w() / 2.0;
    const std::array<std::pair<double, double>, 4> offsets{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
    std::array<PlanePoint, 4> out;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto [dx, dy] = offsets[i];
        out[i] = {b.cx() + dx * c - dy * s, b.cy() + dx * s + dy * c};
    }
    return out;
}

double polygon_area(std::span<const PlanePoint> poly) {
    double twice = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const PlanePoint a = poly[i];
        const PlanePoint b = poly[(i + 1) % poly.size()];
        twice += a.x * b.y - b.x * a.y;
    }
    return twice / 2.0;
}

double rbox_iou(const RBox& a, const RBox& b) {
    const RBox& first = as_tuple(b) < as_tuple(a) ? b : a;
    const RBox& second = &first == &a ? b : a;
    const double area_a = first.area();
    const double area_b = second.area();
    if (area_a < kMinArea || area_b < kMinArea) return 0.0;

    const auto ca = rbox_corners(first);
    const auto cb = rbox_corners(second);
    const auto inter_poly = clip_convex(std::vector<PlanePoint>(ca.begin(), ca.end()), cb);
    const double inter = inter_poly.size() < 3 ? 0.0 : std::max(0.0, polygon_area(inter_poly));
    const double uni = area_a + area_b - inter;
    if (!(uni > 0.0)) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> rotated_nms(std::span<const RBox> boxes, std::span<const double> scores,
                                     double iou_thresh) {
    if (boxes.size() != scores.size()) {
        throw Error(ErrorCode::LengthMismatch, "boxes and scores differ in length");
    }
    if (!(iou_thresh >= 0.0 && iou_thresh <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "iou threshold must lie in [0, 1]");
    }
    std::vector<std::size_t> order(boxes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });

    std::vector<std::size_t> kept;
    std::vector<bool> suppressed(boxes.size(), false);
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const std::size_t i = order[oi];
        if (suppressed[i]) continue;
        kept.push_back(i);
        for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
            const std::size_t j = order[oj];
            if (!suppressed[j] && rbox_iou(boxes[i], boxes[j]) > iou_thresh) suppressed[j] = true;
        }
    }
    return kept;
}

double angle_decode(double x, double r0) {
    // sigmoid(x) - 0.5 == tanh(x / 2) / 2
    double offset = (kPi / 4.0) * std::tanh(x / 2.0);
    const double bound = kPi / 4.0 - kDecodeMargin;
    offset = std::clamp(offset, -bound, bound);
    return normalize_half_turn(r0 + offset);
}

double angle_residual(double a, double b) {
    double m = std::fmod(a - b + kPi / 2.0, kPi);
    if (m < 0.0) m += kPi;
    if (m >= kPi) m -= kPi;
    return m - kPi / 2.0;
}

RotationLoss rotation_loss(double r_pred, double r_gt) {
    const double d = angle_residual(r_pred, r_gt);
    const double s = std::sin(d);
    return {s * s, std::sin(2.0 * d)};
}

bool angle_eligible(double r_anchor, double r_gt) {
    return std::abs(angle_residual(r_anchor, r_gt)) < kPi / 4.0;
}

std::vector<AnchorAssignment> assign_anchors(const RBox& gt, const AnchorSet& anchors) {
    std::vector<AnchorAssignment> out;
    out.reserve(AnchorSet::kLayers * AnchorSet::kPerLayer);
    for (int i = 0; i < AnchorSet::kLayers * AnchorSet::kPerLayer; ++i) {
        const Anchor& a = anchors.at(i);
        const double ratio = std::max({gt.l() / a.l, a.l / gt.l(), gt.w() / a.w, a.w / gt.w()});
        out.push_back({i, angle_eligible(a.r, gt.r()) && ratio < kAnchorSizeRatioBound});
    }
    return out;
}

TailedRBox tailed_rbox_from_scene(const SceneBox3D& b, const Intrinsics& k, const Extrinsics& e,
                                  const Homography& h_bev_ori) {
    if (!(b.l > 0.0) || !(b.w > 0.0) || !(b.h >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "scene box needs l, w > 0 and h >= 0");
    }
    const Homography h_bev_world = compose(h_bev_ori, homography_from_camera(k, e));

    const Vector3 bottom(b.center_ground.x, b.center_ground.y, 0.0);
    const Vector3 top(b.center_ground.x, b.center_ground.y, b.h);
    if (!(depth_of(e, bottom) > 0.0) || !(depth_of(e, top) > 0.0)) {
        throw Error(ErrorCode::ProjectionBehindCamera, "box center behind the camera");
    }
    const PlanePoint center = apply(h_bev_ori, project(k, e, bottom));
    const PlanePoint tail_end = apply(h_bev_ori, project(k, e, top));

    const double c = std::cos(b.yaw);
    const double s = std::sin(b.yaw);
    const PlanePoint g = b.center_ground;
    const PlanePoint mid = apply(h_bev_world, g);
    const PlanePoint front = apply(h_bev_world, {g.x + b.l / 2.0 * c, g.y + b.l / 2.0 * s});
    const PlanePoint side = apply(h_bev_world, {g.x - b.w / 2.0 * s, g.y + b.w / 2.0 * c});
    const double l_bev = 2.0 * std::hypot(front.x - mid.x, front.y - mid.y);
    const double w_bev = 2.0 * std::hypot(side.x - mid.x, side.y - mid.y);
    const double heading = std::atan2(front.y - mid.y, front.x - mid.x);

    return {RBox(center.x, center.y, l_bev, w_bev, heading), tail_end.x - center.x, tail_end.y - center.y};
}

}  // namespace bevcal
