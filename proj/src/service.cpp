#include "bevcal/service.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <mutex>
#include <random>
#include <sstream>

#include <httplib.h>

#include "bevcal/camera.hpp"
#include "bevcal/image_io.hpp"
#include "bevcal/ipm.hpp"
#include "bevcal/json_io.hpp"

namespace bevcal {

namespace {

constexpr int kMaxPreviewSide = 8192;

struct MapPair {
    PlanePoint map_px;
    PlanePoint image_px;
    std::string label;
};

enum class CalibrationStatus { Ok, InsufficientPoints, Degenerate };

std::string_view status_name(CalibrationStatus s) {
    switch (s) {
        case CalibrationStatus::Ok: return "ok";
        case CalibrationStatus::InsufficientPoints: return "insufficient_points";
        case CalibrationStatus::Degenerate: return "degenerate";
    }
    return "degenerate";
}

struct Calibration {
    CalibrationStatus status = CalibrationStatus::InsufficientPoints;
    std::optional<Homography> world_to_ori;
    ErrorReport report;
    std::string detail;
};

ServiceResponse json_response(int status, Json body, std::uint64_t revision) {
    body["revision"] = revision;
    ServiceResponse r;
    r.status = status;
    r.body = body.dump();
    r.headers["X-Session-Revision"] = std::to_string(revision);
    return r;
}

ServiceResponse error_response(int status, const std::string& message, std::optional<std::string> field = {},
                               std::optional<std::uint64_t> revision = {}) {
    Json body{{"error", message}};
    if (field) body["field"] = *field;
    ServiceResponse r;
    r.status = status;
    if (revision) {
        body["revision"] = *revision;
        r.headers["X-Session-Revision"] = std::to_string(*revision);
    }
    r.body = body.dump();
    return r;
}

ServiceResponse unknown_session(const std::string& id) { return error_response(404, "unknown session " + id); }

// Strict number parsing for query strings; rejects trailing garbage.
std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<int> parse_int(const std::string& s) {
    int v = 0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

PlanePoint point_field(const Json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw Error(ErrorCode::InvalidArgument, field + " must be a [x, y] pair of numbers");
    }
    const PlanePoint p{j[0].get<double>(), j[1].get<double>()};
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error(ErrorCode::InvalidArgument, field + " must be finite");
    return p;
}

std::string random_id() {
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mutex);
    std::ostringstream out;
    out << std::hex;
    for (int i = 0; i < 2; ++i) {
        const std::uint64_t v = rng();
        for (int shift = 60; shift >= 0; shift -= 4) out << ((v >> shift) & 0xF);
    }
    return out.str();
}

bool valid_id(const std::string& id) {
    return !id.empty() && id.size() <= 64 &&
           std::all_of(id.begin(), id.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

PlanePoint map_to_world(PlanePoint map_px, double scale, PlanePoint origin) {
    return {origin.x + scale * map_px.x, origin.y - scale * map_px.y};
}

struct CalibrationService::Session {
    mutable std::shared_mutex mutex;
    std::filesystem::path dir;
    std::string id;
    std::string name;
    std::uint64_t revision = 0;
    std::optional<RasterImage> camera;
    std::vector<std::uint8_t> camera_png;
    std::vector<std::uint8_t> map_png;
    std::optional<double> map_scale;
    std::optional<PlanePoint> map_origin;
    std::vector<MapPair> pairs;
    Calibration calibration;

    CorrespondenceSet world_pairs() const {
        CorrespondenceSet c;
        if (!map_scale || !map_origin) return c;
        for (const auto& p : pairs) c.pairs.push_back({map_to_world(p.map_px, *map_scale, *map_origin), p.image_px, p.label});
        return c;
    }

    void recalibrate() {
        Calibration cal;
        const CorrespondenceSet c = world_pairs();
        if (c.pairs.size() < 4) {
            cal.status = CalibrationStatus::InsufficientPoints;
        } else {
            try {
                Homography h = estimate_homography_dlt(c);
                cal.report = reprojection_report(h, c);
                cal.world_to_ori = std::move(h);
                cal.status = CalibrationStatus::Ok;
            } catch (const Error& e) {
                if (e.code() == ErrorCode::TooFewPoints) {
                    cal.status = CalibrationStatus::InsufficientPoints;
                } else {
                    cal.status = CalibrationStatus::Degenerate;
                }
                cal.detail = e.what();
            }
        }
        calibration = std::move(cal);
    }

    Json to_json() const {
        Json pair_list = Json::array();
        for (const auto& p : pairs) {
            pair_list.push_back({{"map_px", {p.map_px.x, p.map_px.y}},
                                 {"image_px", {p.image_px.x, p.image_px.y}},
                                 {"label", p.label}});
        }
        Json j{{"id", id}, {"name", name}, {"revision", revision}, {"pairs", pair_list}};
        if (map_scale) j["map_scale"] = *map_scale;
        if (map_origin) j["map_origin"] = {map_origin->x, map_origin->y};
        return j;
    }

    void persist() const {
        std::filesystem::create_directories(dir);
        const auto tmp = dir / "session.json.tmp";
        write_json_file(tmp, to_json());
        std::filesystem::rename(tmp, dir / "session.json");
    }
};

namespace {

std::vector<MapPair> parse_pairs(const Json& body) {
    const Json* list = &body;
    if (body.is_object()) {
        if (!body.contains("pairs")) throw Error(ErrorCode::InvalidArgument, "missing field pairs");
        list = &body["pairs"];
    }
    if (!list->is_array()) throw Error(ErrorCode::InvalidArgument, "pairs must be an array");
    std::vector<MapPair> out;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const Json& item = (*list)[i];
        const std::string where = "pairs[" + std::to_string(i) + "]";
        if (!item.is_object()) throw Error(ErrorCode::InvalidArgument, where + " must be an object");
        if (!item.contains("map_px")) throw Error(ErrorCode::InvalidArgument, "missing field " + where + ".map_px");
        if (!item.contains("image_px")) throw Error(ErrorCode::InvalidArgument, "missing field " + where + ".image_px");
        MapPair p;
        p.map_px = point_field(item["map_px"], where + ".map_px");
        p.image_px = point_field(item["image_px"], where + ".image_px");
        if (item.contains("label")) {
            if (!item["label"].is_string()) throw Error(ErrorCode::InvalidArgument, where + ".label must be a string");
            p.label = item["label"].get<std::string>();
        }
        out.push_back(std::move(p));
    }
    return out;
}

// Extracts "pairs[3].map_px"-style field names from parser messages.
std::optional<std::string> field_of(const std::string& message) {
    const auto pos = message.find("pairs");
    if (pos == std::string::npos) return std::nullopt;
    const auto end = message.find(' ', pos);
    return message.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
}

}  // namespace

CalibrationService::CalibrationService(std::filesystem::path data_dir) : data_dir_(std::move(data_dir)) {
    std::filesystem::create_directories(data_dir_);
    load_existing();
}

CalibrationService::~CalibrationService() = default;

void CalibrationService::load_existing() {
    for (const auto& entry : std::filesystem::directory_iterator(data_dir_)) {
        if (!entry.is_directory()) continue;
        const auto file = entry.path() / "session.json";
        if (!std::filesystem::exists(file)) continue;
        auto s = std::make_shared<Session>();
        try {
            const Json j = read_json_file(file);
            s->dir = entry.path();
            s->id = j.at("id").get<std::string>();
            s->name = j.value("name", "");
            s->revision = j.value("revision", std::uint64_t{0});
            if (j.contains("map_scale")) s->map_scale = j["map_scale"].get<double>();
            if (j.contains("map_origin")) s->map_origin = point_field(j["map_origin"], "map_origin");
            s->pairs = parse_pairs(j);
            if (std::filesystem::exists(entry.path() / "camera.png")) {
                s->camera_png = read_file_bytes(entry.path() / "camera.png");
                s->camera = decode_png(s->camera_png);
            }
            if (std::filesystem::exists(entry.path() / "map.png")) s->map_png = read_file_bytes(entry.path() / "map.png");
        } catch (const std::exception&) {
            continue;  // a corrupt session directory is skipped, not fatal
        }
        s->recalibrate();
        sessions_[s->id] = std::move(s);
    }
}

std::shared_ptr<CalibrationService::Session> CalibrationService::find(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::size_t CalibrationService::session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
}

ServiceResponse CalibrationService::create_session(const std::string& body) {
    std::string name;
    if (!body.empty()) {
        const Json j = Json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) return error_response(400, "body must be a JSON object");
        if (j.contains("name")) {
            if (!j["name"].is_string()) return error_response(400, "name must be a string", "name");
            name = j["name"].get<std::string>();
        }
    }
    auto s = std::make_shared<Session>();
    s->name = std::move(name);
    {
        std::unique_lock lock(sessions_mutex_);
        do {
            s->id = random_id();
        } while (sessions_.count(s->id) != 0);
        s->dir = data_dir_ / s->id;
        s->persist();
        sessions_[s->id] = s;
    }
    ServiceResponse r = json_response(201, {{"id", s->id}, {"name", s->name}}, s->revision);
    return r;
}

ServiceResponse CalibrationService::put_images(const std::string& id, const ImagesUpload& upload) {
    auto s = valid_id(id) ? find(id) : nullptr;
    if (!s) return unknown_session(id);
    std::unique_lock lock(s->mutex);
    if (!upload.camera_png && !upload.map_png && !upload.map_scale && !upload.map_origin) {
        return error_response(400, "no image fields supplied", std::nullopt, s->revision);
    }
    if (upload.map_scale && !(*upload.map_scale > 0.0 && std::isfinite(*upload.map_scale))) {
        return error_response(400, "map_scale must be a positive number", "map_scale", s->revision);
    }
    std::optional<RasterImage> camera;
    if (upload.camera_png) {
        try {
            camera = decode_png(*upload.camera_png);
        } catch (const Error& e) {
            return error_response(400, std::string("camera is not a readable PNG: ") + e.what(), "camera", s->revision);
        }
    }
    if (upload.map_png) {
        try {
            (void)decode_png(*upload.map_png);
        } catch (const Error& e) {
            return error_response(400, std::string("map is not a readable PNG: ") + e.what(), "map", s->revision);
        }
    }

    if (camera) {
        s->camera = std::move(camera);
        s->camera_png = *upload.camera_png;
        write_file_bytes(s->dir / "camera.png", s->camera_png);
    }
    if (upload.map_png) {
        s->map_png = *upload.map_png;
        write_file_bytes(s->dir / "map.png", s->map_png);
    }
    if (upload.map_scale) s->map_scale = upload.map_scale;
    if (upload.map_origin) s->map_origin = upload.map_origin;
    ++s->revision;
    s->recalibrate();
    s->persist();
    ServiceResponse r;
    r.status = 204;
    r.content_type.clear();
    r.headers["X-Session-Revision"] = std::to_string(s->revision);
    return r;
}

ServiceResponse CalibrationService::put_correspondences(const std::string& id, const std::string& body) {
    auto s = valid_id(id) ? find(id) : nullptr;
    if (!s) return unknown_session(id);
    const Json j = Json::parse(body, nullptr, false);
    std::unique_lock lock(s->mutex);
    if (j.is_discarded()) return error_response(400, "body is not valid JSON", std::nullopt, s->revision);
    std::vector<MapPair> pairs;
    try {
        pairs = parse_pairs(j);
    } catch (const Error& e) {
        return error_response(400, e.what(), field_of(e.what()), s->revision);
    }
    if (!s->map_scale || !s->map_origin) {
        return error_response(409, "map_scale and map_origin must be uploaded before correspondences", std::nullopt,
                              s->revision);
    }
    s->pairs = std::move(pairs);
    ++s->revision;
    s->recalibrate();
    s->persist();
    return json_response(200, {{"pairs", s->pairs.size()}, {"status", status_name(s->calibration.status)}}, s->revision);
}

ServiceResponse CalibrationService::get_calibration(const std::string& id) const {
    auto s = valid_id(id) ? find(id) : nullptr;
    if (!s) return unknown_session(id);
    std::shared_lock lock(s->mutex);
    const Calibration& cal = s->calibration;
    Json body{{"status", status_name(cal.status)}, {"pairs", s->pairs.size()}};
    if (cal.world_to_ori) {
        body["H_world_ori"] = homography_to_json(*cal.world_to_ori);
        const Json report = error_report_to_json(cal.report);
        for (const auto& [key, value] : report.items()) body[key] = value;
    } else {
        body["H_world_ori"] = nullptr;
        if (!cal.detail.empty()) body["detail"] = cal.detail;
    }
    return json_response(200, std::move(body), s->revision);
}

ServiceResponse CalibrationService::get_bev_preview(const std::string& id, const QueryParams& query) const {
    auto s = valid_id(id) ? find(id) : nullptr;
    if (!s) return unknown_session(id);

    double ppm = 10.0;
    int width = 512;
    int height = 512;
    std::optional<PlanePoint> origin;
    std::optional<double> ox;
    std::optional<double> oy;
    if (auto v = query.get("ppm")) {
        auto parsed = parse_double(*v);
        if (!parsed || !(*parsed > 0.0)) return error_response(400, "ppm must be a positive number", "ppm");
        ppm = *parsed;
    }
    for (auto [key, target] : {std::pair{"w", &width}, std::pair{"h", &height}}) {
        if (auto v = query.get(key)) {
            auto parsed = parse_int(*v);
            if (!parsed || *parsed < 1 || *parsed > kMaxPreviewSide) {
                return error_response(400, std::string(key) + " must be an integer in [1, 8192]", key);
            }
            *target = *parsed;
        }
    }
    for (auto [key, target] : {std::pair{"origin_x", &ox}, std::pair{"origin_y", &oy}}) {
        if (auto v = query.get(key)) {
            auto parsed = parse_double(*v);
            if (!parsed) return error_response(400, std::string(key) + " must be a number", key);
            *target = *parsed;
        }
    }
    if (ox.has_value() != oy.has_value()) return error_response(400, "origin_x and origin_y go together", "origin_x");
    if (ox) origin = PlanePoint{*ox, *oy};

    std::shared_lock lock(s->mutex);
    if (!s->calibration.world_to_ori) {
        return error_response(404, "session is not calibrated", std::nullopt, s->revision);
    }
    if (!s->camera) return error_response(404, "no camera image uploaded", std::nullopt, s->revision);
    if (!origin) {
        // Center the preview on the centroid of the clicked world points.
        PlanePoint centroid{0.0, 0.0};
        const CorrespondenceSet c = s->world_pairs();
        for (const auto& p : c.pairs) {
            centroid.x += p.world.x / static_cast<double>(c.pairs.size());
            centroid.y += p.world.y / static_cast<double>(c.pairs.size());
        }
        origin = PlanePoint{centroid.x - width / (2.0 * ppm), centroid.y + height / (2.0 * ppm)};
    }
    const Homography h_bev_ori = compose(bev_from_world(ppm, *origin), invert(*s->calibration.world_to_ori));
    const RasterImage bev = warp_image(*s->camera, h_bev_ori, width, height, 0.0, Interpolation::Bilinear);
    const auto png = encode_png(bev);
    ServiceResponse r;
    r.content_type = "image/png";
    r.body.assign(png.begin(), png.end());
    r.headers["X-Session-Revision"] = std::to_string(s->revision);
    return r;
}

ServiceResponse CalibrationService::get_camera(const std::string& id, const QueryParams& query) const {
    auto s = valid_id(id) ? find(id) : nullptr;
    if (!s) return unknown_session(id);
    std::optional<double> px;
    std::optional<double> py;
    for (auto [key, target] : {std::pair{"px", &px}, std::pair{"py", &py}}) {
        if (auto v = query.get(key)) {
            auto parsed = parse_double(*v);
            if (!parsed) return error_response(400, std::string(key) + " must be a number", key);
            *target = *parsed;
        }
    }
    if (px.has_value() != py.has_value()) return error_response(400, "px and py go together", "px");

    std::shared_lock lock(s->mutex);
    if (!s->calibration.world_to_ori) {
        return json_response(200, {{"status", "uncalibrated"}}, s->revision);
    }
    PrincipalPoint p;
    if (px) {
        p = {*px, *py};
    } else if (s->camera) {
        p = {s->camera->width / 2.0, s->camera->height / 2.0};
    } else {
        return error_response(400, "px and py are required when no camera image is uploaded", "px", s->revision);
    }
    const Homography& h = *s->calibration.world_to_ori;
    try {
        const VanishingPair vp = vanishing_points(h);
        CameraSample cam;
        cam.intrinsics = {focal_from_vps(vp, p), p.x, p.y};
        cam.extrinsics = recover_extrinsics(h, cam.intrinsics);
        cam.h_check_residual =
            projective_distance(homography_from_camera(cam.intrinsics, cam.extrinsics).matrix(), h.matrix());
        Json body = camera_to_json(cam);
        body["status"] = "ok";
        const PrincipalPoint consistent = consistent_principal_point(h, p);
        body["consistent_principal_point"] = {consistent.x, consistent.y};
        return json_response(200, std::move(body), s->revision);
    } catch (const Error& e) {
        std::string status;
        switch (e.code()) {
            case ErrorCode::ImaginaryFocal: status = "imaginary_focal"; break;
            case ErrorCode::VanishingAtInfinity: status = "vanishing_at_infinity"; break;
            case ErrorCode::BehindPlane: status = "behind_plane"; break;
            default: status = "degenerate"; break;
        }
        return json_response(200, {{"status", status}, {"detail", e.what()}}, s->revision);
    }
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
    explicit Impl(CalibrationService& svc) : service(svc) {}
    CalibrationService& service;
    httplib::Server server;
};

namespace {

void send(httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    if (r.status != 204) res.set_content(r.body, r.content_type);
}

QueryParams query_of(const httplib::Request& req) {
    QueryParams q;
    for (const auto& [k, v] : req.params) q.values.emplace(k, v);
    return q;
}

std::optional<PlanePoint> parse_origin(const std::string& text) {
    const Json j = Json::parse(text, nullptr, false);
    if (!j.is_discarded() && j.is_array()) {
        try {
            return point_field(j, "map_origin");
        } catch (const Error&) {
            return std::nullopt;
        }
    }
    const auto comma = text.find(',');
    if (comma == std::string::npos) return std::nullopt;
    auto x = parse_double(text.substr(0, comma));
    auto y = parse_double(text.substr(comma + 1));
    if (!x || !y) return std::nullopt;
    return PlanePoint{*x, *y};
}

}  // namespace

HttpServer::HttpServer(CalibrationService& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(service)) {
    auto& srv = impl_->server;
    CalibrationService& svc = impl_->service;

    srv.Post("/api/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.create_session(req.body));
    });
    srv.Put(R"(/api/sessions/([^/]+)/images)", [&svc](const httplib::Request& req, httplib::Response& res) {
        ImagesUpload up;
        if (!req.is_multipart_form_data()) {
            send(res, error_response(400, "images must be sent as multipart/form-data"));
            return;
        }
        auto bytes_of = [&](const char* field) -> std::optional<std::vector<std::uint8_t>> {
            if (!req.has_file(field)) return std::nullopt;
            const auto& content = req.get_file_value(field).content;
            return std::vector<std::uint8_t>(content.begin(), content.end());
        };
        up.camera_png = bytes_of("camera");
        up.map_png = bytes_of("map");
        if (req.has_file("map_scale")) {
            auto v = parse_double(req.get_file_value("map_scale").content);
            if (!v) {
                send(res, error_response(400, "map_scale must be a number", "map_scale"));
                return;
            }
            up.map_scale = v;
        }
        if (req.has_file("map_origin")) {
            auto v = parse_origin(req.get_file_value("map_origin").content);
            if (!v) {
                send(res, error_response(400, "map_origin must be \"x,y\" or [x, y]", "map_origin"));
                return;
            }
            up.map_origin = v;
        }
        send(res, svc.put_images(req.matches[1], up));
    });
    srv.Put(R"(/api/sessions/([^/]+)/correspondences)", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.put_correspondences(req.matches[1], req.body));
    });
    srv.Get(R"(/api/sessions/([^/]+)/calibration)", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.get_calibration(req.matches[1]));
    });
    srv.Get(R"(/api/sessions/([^/]+)/bev-preview)", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.get_bev_preview(req.matches[1], query_of(req)));
    });
    srv.Get(R"(/api/sessions/([^/]+)/camera)", [&svc](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.get_camera(req.matches[1], query_of(req)));
    });
    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
        }
        send(res, error_response(500, message));
    });
    if (static_dir) srv.set_mount_point("/", static_dir->string());
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool HttpServer::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace bevcal
