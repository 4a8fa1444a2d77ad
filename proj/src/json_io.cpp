#include "bevcal/json_io.hpp"

#include <algorithm>
#include <fstream>

namespace bevcal {

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
    throw Error(ErrorCode::InvalidArgument, "field '" + field + "': " + why);
}

const Json& require(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) bad_field(key, "missing");
    return j.at(key);
}

double number(const Json& j, const std::string& field) {
    if (!j.is_number()) bad_field(field, "expected a number");
    return j.get<double>();
}

PlanePoint point(const Json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 2) bad_field(field, "expected [x, y]");
    return {number(j[0], field), number(j[1], field)};
}

Json point_json(PlanePoint p) { return Json::array({p.x, p.y}); }

Range range(const Json& j, const std::string& field) {
    const PlanePoint p = point(j, field);
    return {p.x, p.y};
}

Json matrix_json(const Matrix3& m) {
    Json rows = Json::array();
    for (int r = 0; r < 3; ++r) rows.push_back(Json::array({m(r, 0), m(r, 1), m(r, 2)}));
    return rows;
}

Matrix3 matrix_from(const Json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 3) bad_field(field, "expected a 3x3 row-major array");
    Matrix3 m;
    for (int r = 0; r < 3; ++r) {
        const Json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || row.size() != 3) bad_field(field, "expected a 3x3 row-major array");
        for (int c = 0; c < 3; ++c) m(r, c) = number(row[static_cast<std::size_t>(c)], field);
    }
    return m;
}

}  // namespace

Json homography_to_json(const Homography& h) {
    return {{"src", std::string(to_string(h.src()))}, {"dst", std::string(to_string(h.dst()))}, {"m", matrix_json(h.matrix())}};
}

Homography homography_from_json(const Json& j) {
    const Json& src = require(j, "src");
    const Json& dst = require(j, "dst");
    if (!src.is_string()) bad_field("src", "expected a frame name");
    if (!dst.is_string()) bad_field("dst", "expected a frame name");
    return Homography(matrix_from(require(j, "m"), "m"), frame_from_string(src.get<std::string>()),
                      frame_from_string(dst.get<std::string>()));
}

Json correspondences_to_json(const CorrespondenceSet& c) {
    Json pairs = Json::array();
    for (const auto& p : c.pairs) {
        pairs.push_back({{"world", point_json(p.world)}, {"image", point_json(p.image)}, {"label", p.label}});
    }
    return {{"pairs", pairs}};
}

CorrespondenceSet correspondences_from_json(const Json& j) {
    const Json& pairs = require(j, "pairs");
    if (!pairs.is_array()) bad_field("pairs", "expected an array");
    CorrespondenceSet c;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const std::string prefix = "pairs[" + std::to_string(i) + "].";
        Correspondence pair;
        pair.world = point(require(pairs[i], "world"), prefix + "world");
        pair.image = point(require(pairs[i], "image"), prefix + "image");
        if (pairs[i].contains("label")) {
            if (!pairs[i]["label"].is_string()) bad_field(prefix + "label", "expected a string");
            pair.label = pairs[i]["label"].get<std::string>();
        }
        c.pairs.push_back(std::move(pair));
    }
    return c;
}

Json error_report_to_json(const ErrorReport& r) {
    Json residuals = Json::array();
    // JSON has no infinity; pairs mapping to infinity are reported as null.
    for (double v : r.residuals) residuals.push_back(std::isfinite(v) ? Json(v) : Json(nullptr));
    return {{"residuals", residuals},
            {"rms", std::isfinite(r.rms) ? Json(r.rms) : Json(nullptr)},
            {"max", std::isfinite(r.max) ? Json(r.max) : Json(nullptr)}};
}

Json camera_to_json(const CameraSample& cam) {
    const auto& e = cam.extrinsics;
    return {{"f", cam.intrinsics.f},
            {"px", cam.intrinsics.px},
            {"py", cam.intrinsics.py},
            {"R", matrix_json(e.r)},
            {"t", Json::array({e.t.x(), e.t.y(), e.t.z()})},
            {"H_check_residual", cam.h_check_residual}};
}

CameraSample camera_from_json(const Json& j) {
    CameraSample cam;
    cam.intrinsics = {number(require(j, "f"), "f"), number(require(j, "px"), "px"), number(require(j, "py"), "py")};
    cam.extrinsics.r = matrix_from(require(j, "R"), "R");
    const Json& t = require(j, "t");
    if (!t.is_array() || t.size() != 3) bad_field("t", "expected [x, y, z]");
    cam.extrinsics.t = Vector3(number(t[0], "t"), number(t[1], "t"), number(t[2], "t"));
    if (j.contains("H_check_residual")) cam.h_check_residual = number(j["H_check_residual"], "H_check_residual");
    return cam;
}

Json label_file_to_json(const LabelFile& f) {
    Json boxes = Json::array();
    for (std::size_t i = 0; i < f.boxes.size(); ++i) {
        const auto& b = f.boxes[i];
        Json entry = {{"cx", b.box.cx()}, {"cy", b.box.cy()}, {"l", b.box.l()}, {"w", b.box.w()}, {"r", b.box.r()},
                      {"u_tail", b.u_tail}, {"v_tail", b.v_tail}, {"unit", "bev_px"}};
        if (i < f.confidences.size()) entry["confidence"] = f.confidences[i];
        boxes.push_back(std::move(entry));
    }
    Json out = {{"frame", f.frame}, {"boxes", boxes}};
    if (f.ppm > 0.0) out["ppm"] = f.ppm;
    if (f.bev_width > 0 && f.bev_height > 0) out["bev_size"] = Json::array({f.bev_width, f.bev_height});
    return out;
}

LabelFile label_file_from_json(const Json& j) {
    LabelFile f;
    const Json& frame = require(j, "frame");
    if (!frame.is_number_integer()) bad_field("frame", "expected an integer");
    f.frame = frame.get<std::int64_t>();
    const Json& boxes = require(j, "boxes");
    if (!boxes.is_array()) bad_field("boxes", "expected an array");
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const Json& b = boxes[i];
        const std::string prefix = "boxes[" + std::to_string(i) + "].";
        auto get = [&](const char* key) { return number(require(b, key), prefix + key); };
        const double u = b.contains("u_tail") ? get("u_tail") : 0.0;
        const double v = b.contains("v_tail") ? get("v_tail") : 0.0;
        f.boxes.push_back({RBox(get("cx"), get("cy"), get("l"), get("w"), get("r")), u, v});
        if (b.contains("confidence")) f.confidences.push_back(get("confidence"));
    }
    if (!f.confidences.empty() && f.confidences.size() != f.boxes.size()) {
        bad_field("boxes", "confidence must be given for every box or none");
    }
    if (j.contains("ppm")) f.ppm = number(j["ppm"], "ppm");
    if (j.contains("bev_size")) {
        const PlanePoint size = point(j["bev_size"], "bev_size");
        f.bev_width = static_cast<int>(size.x);
        f.bev_height = static_cast<int>(size.y);
    }
    return f;
}

LabelFile labels_of(const SyntheticFrame& frame) {
    LabelFile f;
    f.frame = frame.frame_id;
    f.boxes = frame.labels_bev;
    f.ppm = frame.bev.ppm;
    f.bev_width = frame.bev.width;
    f.bev_height = frame.bev.height;
    return f;
}

LabelFile detections_file(std::int64_t frame, std::span<const Detection> dets, const LabelFile& gt) {
    LabelFile f;
    f.frame = frame;
    f.ppm = gt.ppm;
    f.bev_width = gt.bev_width;
    f.bev_height = gt.bev_height;
    for (const auto& d : dets) {
        f.boxes.push_back({d.box, 0.0, 0.0});
        f.confidences.push_back(d.confidence);
    }
    return f;
}

std::vector<Detection> detections_of(const LabelFile& f) {
    std::vector<Detection> out;
    for (std::size_t i = 0; i < f.boxes.size(); ++i) {
        out.push_back({f.boxes[i].box, i < f.confidences.size() ? f.confidences[i] : 1.0, f.frame});
    }
    return out;
}

std::vector<RBox> boxes_of(const LabelFile& f) {
    std::vector<RBox> out;
    for (const auto& b : f.boxes) out.push_back(b.box);
    return out;
}

ScenarioSpec scenario_from_json(const Json& j, const std::filesystem::path& base_dir) {
    const Json& hj = require(j, "homography");
    Homography h = hj.is_string() ? homography_from_json(read_json_file(base_dir / hj.get<std::string>()))
                                  : homography_from_json(hj);
    if (h.src() == Frame::Ori && h.dst() == Frame::World) h = invert(h);
    if (h.src() != Frame::World || h.dst() != Frame::Ori) bad_field("homography", "expected a world->ori homography");

    ScenarioSpec spec(h);
    if (j.contains("image_size")) {
        const PlanePoint size = point(j["image_size"], "image_size");
        spec.image_width = static_cast<int>(size.x);
        spec.image_height = static_cast<int>(size.y);
    }
    const Json& bev = require(j, "bev");
    spec.bev.ppm = number(require(bev, "ppm"), "bev.ppm");
    spec.bev.origin = point(require(bev, "origin"), "bev.origin");
    const PlanePoint bev_size = point(require(bev, "size"), "bev.size");
    spec.bev.width = static_cast<int>(bev_size.x);
    spec.bev.height = static_cast<int>(bev_size.y);

    const Json& n = require(j, "n_vehicles");
    if (!n.is_number_integer() || n.get<int>() < 0) bad_field("n_vehicles", "expected a non-negative integer");
    spec.n_vehicles = n.get<int>();
    if (j.contains("length")) spec.length = range(j["length"], "length");
    if (j.contains("width")) spec.width = range(j["width"], "width");
    if (j.contains("height")) spec.height = range(j["height"], "height");

    const Json& placement = require(j, "placement");
    if (!placement.is_array() || placement.empty()) bad_field("placement", "expected a non-empty polygon");
    for (const auto& p : placement) spec.placement.push_back(point(p, "placement"));

    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) bad_field("seed", "expected an integer");
        spec.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("pp_center")) spec.pp_center = point(j["pp_center"], "pp_center");
    if (j.contains("pp_radius")) spec.pp_radius = number(j["pp_radius"], "pp_radius");
    return spec;
}

Json evaluation_report(std::span<const FrameResult> frames, const MatchCriterion& crit) {
    const ApResult ap = average_precision(frames);
    Json curve = Json::array();
    for (const auto& p : ap.curve) curve.push_back(Json::array({p.recall, p.precision}));

    std::vector<const FrameResult*> ordered;
    for (const auto& f : frames) ordered.push_back(&f);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const FrameResult* a, const FrameResult* b) { return a->frame < b->frame; });
    Json per_frame = Json::array();
    for (const FrameResult* f : ordered) {
        std::size_t tp = 0;
        for (const auto& d : f->detections) tp += d.true_positive ? 1 : 0;
        per_frame.push_back({{"frame", f->frame},
                             {"tp", tp},
                             {"fp", f->detections.size() - tp},
                             {"fn", f->n_gt - tp}});
    }
    const OperatingPoint all = precision_recall_at(frames, 0.0);
    return {{"criterion", crit.to_string()},
            {"ap", ap.ap},
            {"precision", all.precision},
            {"recall", all.recall},
            {"precision_convention", "precision is 1 when no detection passes the threshold"},
            {"pr_curve", curve},
            {"frames", per_frame}};
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

}  // namespace bevcal
