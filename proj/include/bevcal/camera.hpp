#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

#include "bevcal/projective.hpp"

namespace bevcal {

using Vector3 = Eigen::Vector3d;
using PrincipalPoint = PlanePoint;

/// Zero-skew, square-pixel pinhole intrinsics K = [f 0 px; 0 f py; 0 0 1].
struct Intrinsics {
    double f = 1.0;
    double px = 0.0;
    double py = 0.0;

    Matrix3 matrix() const;
};

/// World -> camera transform x_cam = R * x_world + t. World z is up.
struct Extrinsics {
    Matrix3 r = Matrix3::Identity();
    Vector3 t = Vector3::Zero();

    /// Camera center in world coordinates, -R^T t.
    Vector3 center() const { return -r.transpose() * t; }
};

struct VanishingPair {
    PlanePoint u;  // image of the world x axis direction
    PlanePoint v;  // image of the world y axis direction
};

/// Per-axis vanishing points; an axis is nullopt when its point is at infinity.
struct VanishingAxes {
    std::optional<PlanePoint> u;
    std::optional<PlanePoint> v;
};

struct CameraSample {
    Intrinsics intrinsics;
    Extrinsics extrinsics;
    double h_check_residual = 0.0;  // projective_distance(K[r1 r2 t], H)
};

VanishingAxes try_vanishing_points(const Homography& h);

/// U = (h11/h31, h21/h31), V = (h12/h32, h22/h32) for h: world -> ori.
/// Throws VanishingAtInfinity naming the failing axes.
VanishingPair vanishing_points(const Homography& h);

/// f = sqrt(-<U-P, V-P>). Throws ImaginaryFocal when the inner product is >= 0.
double focal_from_vps(const VanishingPair& vp, PrincipalPoint p);

/// Decomposes h (world -> ori) into R, t given K, choosing the sign that puts
/// the camera above the road plane.
Extrinsics recover_extrinsics(const Homography& h, const Intrinsics& k);

/// Canonical K [r1 r2 t], mapping world -> ori.
Homography homography_from_camera(const Intrinsics& k, const Extrinsics& e);

/// Closest principal point to `p` for which a zero-skew square-pixel camera
/// reproduces `h` exactly. With U, V fixed by h, K^-1 h1 and K^-1 h2 have
/// equal norm only on a line perpendicular to the horizon through U and V.
PrincipalPoint consistent_principal_point(const Homography& h, PrincipalPoint p);

/// Draws principal points uniformly in the disc (center, radius), moves each
/// onto the consistency line and recovers (K, R, t). Deterministic in `seed`.
std::vector<CameraSample> sample_camera_family(const Homography& h, PrincipalPoint center,
                                               double radius, int n, std::uint64_t seed);

/// Camera at `center` looking along heading `yaw` (radians from world +x
/// toward +y), pitched down by `tilt` radians below the horizon.
Extrinsics look_from(const Vector3& center, double yaw, double tilt);

/// Depth of a world point along the optical axis.
double depth_of(const Extrinsics& e, const Vector3& x_world);

/// Pinhole projection. Throws ProjectionBehindCamera for non-positive depth.
PlanePoint project(const Intrinsics& k, const Extrinsics& e, const Vector3& x_world);

}  // namespace bevcal
