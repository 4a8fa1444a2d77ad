#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bevcal/error.hpp"

namespace bevcal {

using Matrix3 = Eigen::Matrix3d;

/// A point on a plane: meters in the world frame, pixels in image frames.
struct PlanePoint {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const PlanePoint&, const PlanePoint&) = default;
};

/// Coordinate frames a homography can map between.
enum class Frame { World, Ori, Bev, OriF, BevF };

std::string_view to_string(Frame frame) noexcept;
Frame frame_from_string(std::string_view name);

/// Scale representative of a projective 3x3 matrix: unit Frobenius norm and
/// the entry of largest magnitude (first in row-major order) positive.
/// Idempotent bit-for-bit.
Matrix3 canonicalize(const Matrix3& m);

/// Frobenius distance between the canonical forms of `a` and `b`, taken over
/// both signs so that near-ties in the sign rule do not matter.
double projective_distance(const Matrix3& a, const Matrix3& b);

/// Invertible plane-to-plane projective map, stored in canonical scale.
/// `src` and `dst` tag the frames so s * p_dst = m * p_src.
class Homography {
public:
    /// Throws SingularMatrix when |det| <= 1e-12 after canonicalization.
    Homography(const Matrix3& m, Frame src, Frame dst);

    static Homography identity(Frame frame);

    const Matrix3& matrix() const noexcept { return m_; }
    Frame src() const noexcept { return src_; }
    Frame dst() const noexcept { return dst_; }

private:
    Matrix3 m_;
    Frame src_;
    Frame dst_;
};

struct Correspondence {
    PlanePoint world;  // meters
    PlanePoint image;  // pixels
    std::string label;
};

struct CorrespondenceSet {
    std::vector<Correspondence> pairs;
};

struct ErrorReport {
    std::vector<double> residuals;  // pixels, +inf when the world point maps to infinity
    double rms = 0.0;
    double max = 0.0;
};

/// Normalized DLT estimate of H (world -> ori) from at least four pairs.
Homography estimate_homography_dlt(const CorrespondenceSet& c);

/// Maps `p` through `h`. Throws PointAtInfinity when |w| <= 1e-12.
PlanePoint apply(const Homography& h, PlanePoint p);

/// Non-throwing variant of apply(); nullopt where apply() would throw.
std::optional<PlanePoint> try_apply(const Matrix3& m, PlanePoint p) noexcept;

/// a * b, mapping b.src() -> a.dst(). Requires b.dst() == a.src().
Homography compose(const Homography& a, const Homography& b);

Homography invert(const Homography& h);

/// Per-pair pixel residuals of a world -> ori homography.
ErrorReport reprojection_report(const Homography& h, const CorrespondenceSet& c);

namespace detail {

/// Ratio of the largest to the eighth singular value of the 2n x 9 DLT design
/// matrix, built from either normalized or raw coordinates.
double dlt_condition_number(const CorrespondenceSet& c, bool normalized);

}  // namespace detail

}  // namespace bevcal
