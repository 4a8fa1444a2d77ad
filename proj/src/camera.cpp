#include "bevcal/camera.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <random>

namespace bevcal {

namespace {

constexpr double kAxisTolerance = 1e-12;
constexpr double kColumnTolerance = 1e-12;
constexpr double kReproductionTolerance = 1e-6;

void check_intrinsics(const Intrinsics& k) {
    if (!(k.f > 0.0) || !std::isfinite(k.f) || !std::isfinite(k.px) || !std::isfinite(k.py)) {
        throw Error(ErrorCode::InvalidArgument, "intrinsics need finite f > 0");
    }
}

}  // namespace

Matrix3 Intrinsics::matrix() const {
    Matrix3 k;
    k << f, 0.0, px, 0.0, f, py, 0.0, 0.0, 1.0;
    return k;
}

VanishingAxes try_vanishing_points(const Homography& h) {
    const Matrix3& m = h.matrix();
    VanishingAxes axes;
    if (std::abs(m(2, 0)) > kAxisTolerance) axes.u = PlanePoint{m(0, 0) / m(2, 0), m(1, 0) / m(2, 0)};
    if (std::abs(m(2, 1)) > kAxisTolerance) axes.v = PlanePoint{m(0, 1) / m(2, 1), m(1, 1) / m(2, 1)};
    return axes;
}

VanishingPair vanishing_points(const Homography& h) {
    const VanishingAxes axes = try_vanishing_points(h);
    if (!axes.u && !axes.v) throw Error(ErrorCode::VanishingAtInfinity, "U and V at infinity");
    if (!axes.u) throw Error(ErrorCode::VanishingAtInfinity, "U at infinity");
    if (!axes.v) throw Error(ErrorCode::VanishingAtInfinity, "V at infinity");
    return {*axes.u, *axes.v};
}

double focal_from_vps(const VanishingPair& vp, PrincipalPoint p) {
    const double dot = (vp.u.x - p.x) * (vp.v.x - p.x) + (vp.u.y - p.y) * (vp.v.y - p.y);
    if (!(dot < 0.0)) {
        throw Error(ErrorCode::ImaginaryFocal, "vanishing points do not subtend an obtuse angle at P");
    }
    return std::sqrt(-dot);
}

Extrinsics recover_extrinsics(const Homography& h, const Intrinsics& k) {
    check_intrinsics(k);
    const Matrix3 m = k.matrix().inverse() * h.matrix();
    const Vector3 m1 = m.col(0);
    const Vector3 m2 = m.col(1);
    const double n1 = m1.norm();
    const double n2 = m2.norm();
    if (n1 < kColumnTolerance || n2 < kColumnTolerance) {
        throw Error(ErrorCode::DegenerateHomography, "K^-1 H has a vanishing column");
    }
    const double s = 2.0 / (n1 + n2);

    // Polar factor of [r1' r2']: nearest orthonormal pair in Frobenius norm.
    Eigen::Matrix<double, 3, 2> a;
    a.col(0) = s * m1;
    a.col(1) = s * m2;
    Eigen::JacobiSVD<Eigen::Matrix<double, 3, 2>> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix<double, 3, 2> q = svd.matrixU().leftCols<2>() * svd.matrixV().transpose();

    Extrinsics e;
    e.r.col(0) = q.col(0);
    e.r.col(1) = q.col(1);
    e.r.col(2) = q.col(0).cross(q.col(1));
    e.t = s * m.col(2);

    const double height = e.center().z();
    if (!(std::abs(height) > kColumnTolerance * std::max(1.0, e.t.norm()))) {
        throw Error(ErrorCode::BehindPlane, "camera center lies on the road plane");
    }
    if (height < 0.0) {
        // s -> -s flips r1, r2 and t; r3 = r1 x r2 is unchanged and the height changes sign.
        e.r.col(0) = -e.r.col(0);
        e.r.col(1) = -e.r.col(1);
        e.t = -e.t;
    }
    return e;
}

Homography homography_from_camera(const Intrinsics& k, const Extrinsics& e) {
    check_intrinsics(k);
    Matrix3 rt;
    rt.col(0) = e.r.col(0);
    rt.col(1) = e.r.col(1);
    rt.col(2) = e.t;
    return Homography(k.matrix() * rt, Frame::World, Frame::Ori);
}

PrincipalPoint consistent_principal_point(const Homography& h, PrincipalPoint p) {
    const VanishingPair vp = vanishing_points(h);
    const double wu = h.matrix()(2, 0) * h.matrix()(2, 0);
    const double wv = h.matrix()(2, 1) * h.matrix()(2, 1);
    const double dx = vp.u.x - vp.v.x;
    const double dy = vp.u.y - vp.v.y;
    const double dd = dx * dx + dy * dy;
    if (!(dd > 0.0)) return p;
    const double target = (wu * (vp.u.x * dx + vp.u.y * dy) + wv * (vp.v.x * dx + vp.v.y * dy)) / (wu + wv);
    const double shift = (target - (p.x * dx + p.y * dy)) / dd;
    return {p.x + shift * dx, p.y + shift * dy};
}

std::vector<CameraSample> sample_camera_family(const Homography& h, PrincipalPoint center,
                                               double radius, int n, std::uint64_t seed) {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be >= 1");
    if (!(radius >= 0.0)) throw Error(ErrorCode::InvalidArgument, "radius must be >= 0");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<CameraSample> out;
    out.reserve(static_cast<std::size_t>(n));
    const VanishingPair vp = vanishing_points(h);

    const long max_attempts = 100L * n;
    for (long attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < n; ++attempt) {
        const double rho = radius * std::sqrt(unit(rng));
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        const PrincipalPoint drawn{center.x + rho * std::cos(theta), center.y + rho * std::sin(theta)};
        const PrincipalPoint p = consistent_principal_point(h, drawn);

        CameraSample sample;
        try {
            sample.intrinsics = Intrinsics{focal_from_vps(vp, p), p.x, p.y};
            sample.extrinsics = recover_extrinsics(h, sample.intrinsics);
        } catch (const Error& err) {
            if (err.code() == ErrorCode::ImaginaryFocal || err.code() == ErrorCode::BehindPlane) continue;
            throw;
        }
        sample.h_check_residual = projective_distance(
            homography_from_camera(sample.intrinsics, sample.extrinsics).matrix(), h.matrix());
        if (sample.h_check_residual > kReproductionTolerance) continue;
        out.push_back(sample);
    }
    if (static_cast<int>(out.size()) < n) {
        throw Error(ErrorCode::SamplingExhausted, "found " + std::to_string(out.size()) + " of " +
                                                      std::to_string(n) + " valid cameras");
    }
    return out;
}

Extrinsics look_from(const Vector3& center, double yaw, double tilt) {
    const Vector3 forward(std::cos(tilt) * std::cos(yaw), std::cos(tilt) * std::sin(yaw), -std::sin(tilt));
    const Vector3 right(std::sin(yaw), -std::cos(yaw), 0.0);
    const Vector3 down = forward.cross(right);
    Extrinsics e;
    e.r.row(0) = right.transpose();
    e.r.row(1) = down.transpose();
    e.r.row(2) = forward.transpose();
    e.t = -e.r * center;
    return e;
}

double depth_of(const Extrinsics& e, const Vector3& x_world) {
    return e.r.row(2).dot(x_world) + e.t.z();
}

PlanePoint project(const Intrinsics& k, const Extrinsics& e, const Vector3& x_world) {
    const Vector3 xc = e.r * x_world + e.t;
    if (!(xc.z() > 0.0)) throw Error(ErrorCode::ProjectionBehindCamera, "point has non-positive depth");
    return {k.f * xc.x() / xc.z() + k.px, k.f * xc.y() / xc.z() + k.py};
}

}  // namespace bevcal
