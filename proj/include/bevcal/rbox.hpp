#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "bevcal/camera.hpp"
#include "bevcal/projective.hpp"

namespace bevcal {

/// Wraps an angle into [0, pi).
double normalize_half_turn(double r);

/// Undirected rotated box. The length is always the longer side and the
/// heading r (of the long axis, CCW from +x) lies in [0, pi).
class RBox {
public:
    /// Throws InvalidArgument for non-finite values or non-positive sides.
    /// Swaps l and w (rotating r by pi/2) when w > l.
    RBox(double cx, double cy, double l, double w, double r);

    double cx() const noexcept { return cx_; }
    double cy() const noexcept { return cy_; }
    double l() const noexcept { return l_; }
    double w() const noexcept { return w_; }
    double r() const noexcept { return r_; }
    double area() const noexcept { return l_ * w_; }

    friend bool operator==(const RBox&, const RBox&) = default;

private:
    double cx_;
    double cy_;
    double l_;
    double w_;
    double r_;
};

struct TailedRBox {
    RBox box;
    double u_tail = 0.0;  // tail end minus box center
    double v_tail = 0.0;
};

struct Anchor {
    double l;
    double w;
    double r;
};

/// Three detection layers of nine anchors each; layer i holds one (l, w)
/// size rotated to k * pi / 9, k = 0..8.
struct AnchorSet {
    static constexpr int kLayers = 3;
    static constexpr int kPerLayer = 9;
    std::array<std::array<Anchor, kPerLayer>, kLayers> layers;

    static AnchorSet from_sizes(std::span<const std::pair<double, double>, kLayers> sizes);
    const Anchor& at(int index) const { return layers[static_cast<std::size_t>(index / kPerLayer)][static_cast<std::size_t>(index % kPerLayer)]; }
};

/// Vehicle box standing on the z = 0 road plane, in world meters.
struct SceneBox3D {
    PlanePoint center_ground;
    double l = 0.0;
    double w = 0.0;
    double h = 0.0;
    double yaw = 0.0;  // [0, 2pi), direction of the length axis
};

std::array<PlanePoint, 4> rbox_corners(const RBox& b);

/// Signed shoelace area; positive for counterclockwise (y-up) vertex order.
double polygon_area(std::span<const PlanePoint> poly);

/// Intersection over union by clipping one rectangle against the other's
/// four half-planes. Symmetric bit-for-bit.
double rbox_iou(const RBox& a, const RBox& b);

/// Greedy rotated NMS; a box is suppressed when its IoU with a kept box
/// exceeds `iou_thresh`. Returns kept indices by descending score.
std::vector<std::size_t> rotated_nms(std::span<const RBox> boxes, std::span<const double> scores,
                                     double iou_thresh);

/// r = (pi/2)(sigmoid(x) - 0.5) + r0, wrapped into [0, pi).
double angle_decode(double x, double r0);

/// pi-periodic signed difference a - b in [-pi/2, pi/2).
double angle_residual(double a, double b);

struct RotationLoss {
    double loss;
    double grad;  // d loss / d r_pred
};

/// sin^2(r_pred - r_gt) and its derivative sin(2 (r_pred - r_gt)).
RotationLoss rotation_loss(double r_pred, double r_gt);

bool angle_eligible(double r_anchor, double r_gt);

struct AnchorAssignment {
    int anchor;
    bool positive;
};

inline constexpr double kAnchorSizeRatioBound = 4.0;

/// One entry per anchor. Positive iff the anchor is angle-eligible and the
/// length and width ratios to the ground truth stay below 4.
std::vector<AnchorAssignment> assign_anchors(const RBox& gt, const AnchorSet& anchors);

/// BEV tailed r-box of a 3D box seen by camera (k, e): the bottom rectangle
/// mapped by H^bev_world, with the tail running from the warped bottom
/// center to the warped top center.
TailedRBox tailed_rbox_from_scene(const SceneBox3D& b, const Intrinsics& k, const Extrinsics& e,
                                  const Homography& h_bev_ori);

}  // namespace bevcal
