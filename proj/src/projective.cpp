#include "bevcal/projective.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace bevcal {

namespace {

constexpr double kDetTolerance = 1e-12;
constexpr double kInfinityTolerance = 1e-12;
constexpr double kCoincidentTolerance = 1e-9;
constexpr double kCollinearTolerance = 1e-9;
constexpr double kSingularGapTolerance = 1e-12;

// Hartley normalization: zero centroid, mean distance sqrt(2).
Matrix3 normalizing_transform(const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());

    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - centroid).norm();
    mean_dist /= static_cast<double>(pts.size());

    const double scale = mean_dist > 0.0 ? std::numbers::sqrt2 / mean_dist : 1.0;
    Matrix3 t = Matrix3::Identity();
    t(0, 0) = scale;
    t(1, 1) = scale;
    t(0, 2) = -scale * centroid.x();
    t(1, 2) = -scale * centroid.y();
    return t;
}

Eigen::Vector2d transform_point(const Matrix3& t, const Eigen::Vector2d& p) {
    return (t * p.homogeneous()).hnormalized();
}

// Rows are padded with zeros to at least 9 so the SVD always exposes the null space.
Eigen::MatrixXd design_matrix(const std::vector<Eigen::Vector2d>& src,
                              const std::vector<Eigen::Vector2d>& dst) {
    const auto n = static_cast<Eigen::Index>(src.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(2 * n, 9), 9);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = src[i].x();
        const double y = src[i].y();
        const double u = dst[i].x();
        const double v = dst[i].y();
        a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }
    return a;
}

void check_finite(const PlanePoint& p, std::size_t index) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw Error(ErrorCode::InvalidArgument, "non-finite coordinate in pair", index);
    }
}

void check_spread(const std::vector<Eigen::Vector2d>& pts, const char* what) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            if ((pts[i] - pts[j]).norm() <= kCoincidentTolerance) {
                throw Error(ErrorCode::DegenerateConfiguration,
                            std::string("coincident ") + what + " points", j);
            }
        }
    }
    Eigen::MatrixXd centered(static_cast<Eigen::Index>(pts.size()), 2);
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        centered.row(static_cast<Eigen::Index>(i)) = (pts[i] - centroid).transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
    if (svd.singularValues()(1) <= kCollinearTolerance) {
        throw Error(ErrorCode::DegenerateConfiguration, std::string("collinear ") + what + " points");
    }
}

struct SplitPoints {
    std::vector<Eigen::Vector2d> world;
    std::vector<Eigen::Vector2d> image;
};

SplitPoints split(const CorrespondenceSet& c) {
    SplitPoints out;
    out.world.reserve(c.pairs.size());
    out.image.reserve(c.pairs.size());
    for (std::size_t i = 0; i < c.pairs.size(); ++i) {
        check_finite(c.pairs[i].world, i);
        check_finite(c.pairs[i].image, i);
        out.world.emplace_back(c.pairs[i].world.x, c.pairs[i].world.y);
        out.image.emplace_back(c.pairs[i].image.x, c.pairs[i].image.y);
    }
    return out;
}

}  // namespace

std::string_view to_string(Frame frame) noexcept {
    switch (frame) {
        case Frame::World: return "world";
        case Frame::Ori: return "ori";
        case Frame::Bev: return "bev";
        case Frame::OriF: return "ori_f";
        case Frame::BevF: return "bev_f";
    }
    return "world";
}

Frame frame_from_string(std::string_view name) {
    for (Frame f : {Frame::World, Frame::Ori, Frame::Bev, Frame::OriF, Frame::BevF}) {
        if (to_string(f) == name) return f;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown frame tag '" + std::string(name) + "'");
}

Matrix3 canonicalize(const Matrix3& m) {
    const double norm = m.norm();
    if (!std::isfinite(norm) || norm == 0.0) {
        throw Error(ErrorCode::SingularMatrix, "matrix is zero or non-finite");
    }
    // Already unit norm up to rounding: leave the bits alone.
    Matrix3 out = std::abs(norm - 1.0) <= 8.0 * std::numeric_limits<double>::epsilon() ? m : Matrix3(m / norm);

    int best = 0;
    for (int k = 1; k < 9; ++k) {
        if (std::abs(out(k / 3, k % 3)) > std::abs(out(best / 3, best % 3))) best = k;
    }
    if (out(best / 3, best % 3) < 0.0) out = -out;
    return out;
}

double projective_distance(const Matrix3& a, const Matrix3& b) {
    const Matrix3 ca = canonicalize(a);
    const Matrix3 cb = canonicalize(b);
    return std::min((ca - cb).norm(), (ca + cb).norm());
}

Homography::Homography(const Matrix3& m, Frame src, Frame dst)
    : m_(canonicalize(m)), src_(src), dst_(dst) {
    if (!(std::abs(m_.determinant()) > kDetTolerance)) {
        throw Error(ErrorCode::SingularMatrix, "homography determinant below tolerance");
    }
}

Homography Homography::identity(Frame frame) {
    return Homography(Matrix3::Identity(), frame, frame);
}

Homography estimate_homography_dlt(const CorrespondenceSet& c) {
    if (c.pairs.size() < 4) {
        throw Error(ErrorCode::TooFewPoints,
                    "need at least 4 pairs, got " + std::to_string(c.pairs.size()));
    }
    const SplitPoints pts = split(c);
    check_spread(pts.world, "world");
    check_spread(pts.image, "image");

    const Matrix3 t_world = normalizing_transform(pts.world);
    const Matrix3 t_image = normalizing_transform(pts.image);
    std::vector<Eigen::Vector2d> world_n(pts.world.size());
    std::vector<Eigen::Vector2d> image_n(pts.image.size());
    std::transform(pts.world.begin(), pts.world.end(), world_n.begin(),
                   [&](const Eigen::Vector2d& p) { return transform_point(t_world, p); });
    std::transform(pts.image.begin(), pts.image.end(), image_n.begin(),
                   [&](const Eigen::Vector2d& p) { return transform_point(t_image, p); });

    const Eigen::MatrixXd a = design_matrix(world_n, image_n);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv(7) - sv(8) < kSingularGapTolerance) {
        throw Error(ErrorCode::NumericalFailure, "null space of the DLT system is not one-dimensional");
    }

    const Eigen::VectorXd h = svd.matrixV().col(8);
    Matrix3 h_norm;
    h_norm << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    const Matrix3 m = t_image.inverse() * h_norm * t_world;
    try {
        return Homography(m, Frame::World, Frame::Ori);
    } catch (const Error&) {
        throw Error(ErrorCode::DegenerateConfiguration, "estimated homography is singular");
    }
}

std::optional<PlanePoint> try_apply(const Matrix3& m, PlanePoint p) noexcept {
    const double w = m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2);
    if (!(std::abs(w) > kInfinityTolerance)) return std::nullopt;
    return PlanePoint{(m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2)) / w,
                      (m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2)) / w};
}

PlanePoint apply(const Homography& h, PlanePoint p) {
    auto q = try_apply(h.matrix(), p);
    if (!q) throw Error(ErrorCode::PointAtInfinity, "point maps to the line at infinity");
    return *q;
}

Homography compose(const Homography& a, const Homography& b) {
    if (b.dst() != a.src()) {
        throw Error(ErrorCode::FrameMismatch,
                    "cannot compose " + std::string(to_string(a.src())) + "->" +
                        std::string(to_string(a.dst())) + " after " + std::string(to_string(b.src())) +
                        "->" + std::string(to_string(b.dst())));
    }
    return Homography(a.matrix() * b.matrix(), b.src(), a.dst());
}

Homography invert(const Homography& h) {
    Eigen::FullPivLU<Matrix3> lu(h.matrix());
    if (!(std::abs(lu.determinant()) > kDetTolerance)) {
        throw Error(ErrorCode::SingularMatrix, "cannot invert singular homography");
    }
    return Homography(lu.inverse(), h.dst(), h.src());
}

ErrorReport reprojection_report(const Homography& h, const CorrespondenceSet& c) {
    if (h.src() != Frame::World || h.dst() != Frame::Ori) {
        throw Error(ErrorCode::FrameMismatch, "reprojection report needs a world->ori homography");
    }
    ErrorReport report;
    report.residuals.reserve(c.pairs.size());
    double sum_sq = 0.0;
    for (const auto& pair : c.pairs) {
        double r = std::numeric_limits<double>::infinity();
        if (auto q = try_apply(h.matrix(), pair.world)) {
            r = std::hypot(q->x - pair.image.x, q->y - pair.image.y);
        }
        report.residuals.push_back(r);
        sum_sq += r * r;
        report.max = std::max(report.max, r);
    }
    if (!c.pairs.empty()) report.rms = std::sqrt(sum_sq / static_cast<double>(c.pairs.size()));
    return report;
}

namespace detail {

double dlt_condition_number(const CorrespondenceSet& c, bool normalized) {
    SplitPoints pts = split(c);
    if (normalized) {
        const Matrix3 t_world = normalizing_transform(pts.world);
        const Matrix3 t_image = normalizing_transform(pts.image);
        for (auto& p : pts.world) p = transform_point(t_world, p);
        for (auto& p : pts.image) p = transform_point(t_image, p);
    }
    const Eigen::MatrixXd a = design_matrix(pts.world, pts.image);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    return svd.singularValues()(0) / svd.singularValues()(7);
}

}  // namespace detail

}  // namespace bevcal
