#include <doctest.h>

#include <filesystem>
#include <thread>

#include "bevcal/image_io.hpp"
#include "bevcal/ipm.hpp"
#include "bevcal/json_io.hpp"
#include "bevcal/service.hpp"
#include "fixtures.hpp"

// After Eigen: <resolv.h> defines a _res macro that collides with Eigen internals.
#include <httplib.h>

using namespace bevcal;

namespace {

class ScratchDir {
public:
    explicit ScratchDir(const std::string& name) : path_(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path_);
    }
    ~ScratchDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

Json body_of(const ServiceResponse& r) { return Json::parse(r.body); }

Json pairs_body(const std::vector<fixture::MapClick>& clicks) {
    Json list = Json::array();
    for (std::size_t i = 0; i < clicks.size(); ++i) {
        list.push_back({{"map_px", {clicks[i].map_px.x, clicks[i].map_px.y}},
                        {"image_px", {clicks[i].image_px.x, clicks[i].image_px.y}},
                        {"label", "p" + std::to_string(i)}});
    }
    return list;
}

CorrespondenceSet world_pairs(const std::vector<fixture::MapClick>& clicks) {
    CorrespondenceSet c;
    for (std::size_t i = 0; i < clicks.size(); ++i) {
        c.pairs.push_back(
            {map_to_world(clicks[i].map_px, fixture::kMapScale, fixture::kMapOrigin), clicks[i].image_px, "p" + std::to_string(i)});
    }
    return c;
}

RasterImage camera_frame() {
    RasterImage img = RasterImage::make_u8(320, 180, 3);
    auto px = img.u8();
    for (int y = 0; y < 180; ++y) {
        for (int x = 0; x < 320; ++x) {
            for (int c = 0; c < 3; ++c) {
                px[static_cast<std::size_t>((y * 320 + x) * 3 + c)] = static_cast<std::uint8_t>((x * (c + 1) + y * 3) & 0xFF);
            }
        }
    }
    return img;
}

ImagesUpload map_only() {
    ImagesUpload up;
    up.map_scale = fixture::kMapScale;
    up.map_origin = fixture::kMapOrigin;
    return up;
}

std::string new_session(CalibrationService& svc) {
    const ServiceResponse r = svc.create_session(R"({"name":"corner"})");
    REQUIRE(r.status == 201);
    return body_of(r)["id"].get<std::string>();
}

std::uint64_t revision_of(const ServiceResponse& r) { return std::stoull(r.headers.at("X-Session-Revision")); }

}  // namespace

TEST_CASE("map clicks become world meters") {
    const PlanePoint w = map_to_world({100, 200}, 0.5, {10, 20});
    CHECK(w.x == 60.0);
    CHECK(w.y == -80.0);
}

TEST_CASE("session creation") {
    ScratchDir dir("bevcal_service_create");
    CalibrationService svc(dir.path());
    const ServiceResponse r = svc.create_session(R"({"name":"north gate"})");
    CHECK(r.status == 201);
    const Json j = body_of(r);
    CHECK(j["name"] == "north gate");
    CHECK(j["revision"] == 0);
    CHECK(j["id"].get<std::string>().size() == 32);
    CHECK(svc.create_session("").status == 201);
    CHECK(svc.create_session("[1]").status == 400);
    const ServiceResponse bad_name = svc.create_session(R"({"name":5})");
    CHECK(bad_name.status == 400);
    CHECK(body_of(bad_name)["field"] == "name");
    CHECK(svc.session_count() == 2);
}

TEST_CASE("unknown sessions are 404") {
    ScratchDir dir("bevcal_service_unknown");
    CalibrationService svc(dir.path());
    CHECK(svc.get_calibration("abc123").status == 404);
    CHECK(svc.get_calibration("../etc").status == 404);
    CHECK(svc.put_correspondences("ffff", "[]").status == 404);
    CHECK(svc.put_images("ffff", map_only()).status == 404);
    CHECK(svc.get_bev_preview("ffff", {}).status == 404);
    CHECK(svc.get_camera("ffff", {}).status == 404);
}

TEST_CASE("correspondences need the map placement first") {
    ScratchDir dir("bevcal_service_order");
    CalibrationService svc(dir.path());
    const std::string id = new_session(svc);
    CHECK(svc.put_correspondences(id, pairs_body(fixture::map_clicks(4)).dump()).status == 409);
    CHECK(svc.put_images(id, {}).status == 400);
    ImagesUpload bad_scale = map_only();
    bad_scale.map_scale = -1.0;
    const ServiceResponse r = svc.put_images(id, bad_scale);
    CHECK(r.status == 400);
    CHECK(body_of(r)["field"] == "map_scale");
    ImagesUpload bad_png;
    bad_png.camera_png = std::vector<std::uint8_t>{1, 2, 3};
    CHECK(body_of(svc.put_images(id, bad_png))["field"] == "camera");
}

TEST_CASE("calibration status follows the pair count") {
    ScratchDir dir("bevcal_service_status");
    CalibrationService svc(dir.path());
    const std::string id = new_session(svc);
    REQUIRE(svc.put_images(id, map_only()).status == 204);

    const ServiceResponse three = svc.put_correspondences(id, pairs_body(fixture::map_clicks(3)).dump());
    CHECK(three.status == 200);
    CHECK(body_of(three)["status"] == "insufficient_points");
    const Json cal3 = body_of(svc.get_calibration(id));
    CHECK(cal3["status"] == "insufficient_points");
    CHECK(cal3["H_world_ori"].is_null());

    svc.put_correspondences(id, Json{{"pairs", pairs_body(fixture::map_clicks(4))}}.dump());
    const Json cal4 = body_of(svc.get_calibration(id));
    CHECK(cal4["status"] == "ok");
    CHECK(cal4["pairs"] == 4);
    CHECK(cal4["rms"].get<double>() <= 1e-6);

    Json collinear = Json::array();
    for (int i = 0; i < 5; ++i) collinear.push_back({{"map_px", {100 + 10 * i, 100}}, {"image_px", {5 * i, 7}}});
    svc.put_correspondences(id, collinear.dump());
    const Json degenerate = body_of(svc.get_calibration(id));
    CHECK(degenerate["status"] == "degenerate");
    CHECK(degenerate.contains("detail"));
}

TEST_CASE("the outlier carries the largest residual") {
    ScratchDir dir("bevcal_service_outlier");
    CalibrationService svc(dir.path());
    const std::string id = new_session(svc);
    svc.put_images(id, map_only());
    // Five pairs leave only two residual degrees of freedom, so dominance
    // depends on where the outlier sits; here it is the central landmark.
    auto clicks = fixture::map_clicks(5);
    clicks[4].image_px.y += 10.0;
    svc.put_correspondences(id, pairs_body(clicks).dump());
    const Json cal = body_of(svc.get_calibration(id));
    REQUIRE(cal["status"] == "ok");
    const auto residuals = cal["residuals"].get<std::vector<double>>();
    REQUIRE(residuals.size() == 5);
    const auto worst = std::max_element(residuals.begin(), residuals.end()) - residuals.begin();
    CHECK(worst == 4);
    CHECK(cal["max"].get<double>() == residuals[4]);
    for (int i = 0; i < 4; ++i) CHECK(cal["rms"].get<double>() > residuals[static_cast<std::size_t>(i)]);
}

TEST_CASE("field errors in the pair list") {
    ScratchDir dir("bevcal_service_fields");
    CalibrationService svc(dir.path());
    const std::string id = new_session(svc);
    svc.put_images(id, map_only());
    Json body = pairs_body(fixture::map_clicks(5));
    body[3]["map_px"] = {1};
    const ServiceResponse r = svc.put_correspondences(id, body.dump());
    CHECK(r.status == 400);
    CHECK(body_of(r)["field"] == "pairs[3].map_px");
    body[3].erase("map_px");
    CHECK(body_of(svc.put_correspondences(id, body.dump()))["field"] == "pairs[3].map_px");
    CHECK(svc.put_correspondences(id, "{oops").status == 400);
}

TEST_CASE("every mutation bumps the revision") {
    ScratchDir dir("bevcal_service_revision");
    CalibrationService svc(dir.path());
    const std::string id = new_session(svc);
    std::uint64_t last = revision_of(svc.get_calibration(id));
    CHECK(last == 0);
    auto step = [&](const ServiceResponse& r) {
        REQUIRE(r.status < 300);
        const std::uint64_t now = revision_of(r);
        CHECK(now == last + 1);
        last = now;
        CHECK(revision_of(svc.get_calibration(id)) == now);
    };
    step(svc.put_images(id, map_only()));
    for (int n = 3; n <= 6; ++n) step(svc.put_correspondences(id, pairs_body(fixture::map_clicks(n)).dump()));
    ImagesUpload cam;
    cam.camera_png = encode_png(camera_frame());
    step(svc.put_images(id, cam));
    CHECK(body_of(svc.get_calibration(id))["revision"] == last);
}

TEST_CASE("service calibration equals the library") {
    ScratchDir dir("bevcal_service_parity");
    CalibrationService svc(dir.path());
    const std::string id = new_session(svc);
    svc.put_images(id, map_only());
    const auto clicks = fixture::map_clicks(6);
    svc.put_correspondences(id, pairs_body(clicks).dump());
    const Json cal = body_of(svc.get_calibration(id));

    const CorrespondenceSet c = world_pairs(clicks);
    const Homography h = estimate_homography_dlt(c);
    CHECK(cal["H_world_ori"] == homography_to_json(h));
    const Json report = error_report_to_json(reprojection_report(h, c));
    CHECK(cal["residuals"] == report["residuals"]);
    CHECK(cal["rms"] == report["rms"]);
    CHECK(projective_distance(h.matrix(), fixture::road_homography().matrix()) < 1e-8);
}

TEST_CASE("BEV preview") {
    ScratchDir dir("bevcal_service_preview");
    CalibrationService svc(dir.path());
    const std::string id = new_session(svc);
    svc.put_images(id, map_only());
    svc.put_correspondences(id, pairs_body(fixture::map_clicks(6)).dump());
    CHECK(svc.get_bev_preview(id, {}).status == 404);

    const RasterImage frame = camera_frame();
    ImagesUpload cam;
    cam.camera_png = encode_png(frame);
    svc.put_images(id, cam);

    QueryParams q;
    q.values = {{"ppm", "4"}, {"w", "64"}, {"h", "48"}, {"origin_x", "-10"}, {"origin_y", "30"}};
    const ServiceResponse r = svc.get_bev_preview(id, q);
    REQUIRE(r.status == 200);
    CHECK(r.content_type == "image/png");
    const RasterImage preview = decode_png(std::vector<std::uint8_t>(r.body.begin(), r.body.end()));
    CHECK(preview.width == 64);
    CHECK(preview.height == 48);

    const Homography h = estimate_homography_dlt(world_pairs(fixture::map_clicks(6)));
    const RasterImage expected = warp_image(frame, compose(bev_from_world(4.0, {-10.0, 30.0}), invert(h)), 64, 48);
    CHECK(preview == expected);

    const std::string default_body = svc.get_bev_preview(id, {}).body;
    const RasterImage defaults = decode_png(std::vector<std::uint8_t>(default_body.begin(), default_body.end()));
    CHECK(defaults.width == 512);

    QueryParams bad;
    bad.values = {{"ppm", "-2"}};
    CHECK(svc.get_bev_preview(id, bad).status == 400);
    bad.values = {{"w", "0"}};
    CHECK(svc.get_bev_preview(id, bad).status == 400);
    bad.values = {{"origin_x", "1"}};
    CHECK(svc.get_bev_preview(id, bad).status == 400);
}

TEST_CASE("camera endpoint") {
    ScratchDir dir("bevcal_service_camera");
    CalibrationService svc(dir.path());
    const std::string id = new_session(svc);
    CHECK(body_of(svc.get_camera(id, {}))["status"] == "uncalibrated");
    svc.put_images(id, map_only());
    svc.put_correspondences(id, pairs_body(fixture::map_clicks(6)).dump());
    CHECK(svc.get_camera(id, {}).status == 400);

    QueryParams q;
    q.values = {{"px", "960"}, {"py", "540"}};
    const Json cam = body_of(svc.get_camera(id, q));
    REQUIRE(cam["status"] == "ok");
    CHECK(std::abs(cam["f"].get<double>() - 1000.0) < 1e-3);
    CHECK(std::abs(cam["px"].get<double>() - 960.0) < 1e-3);
    const auto t = cam["t"].get<std::vector<double>>();
    const auto truth = fixture::road_camera();
    CHECK(std::abs(t[2] - truth.t.z()) < 1e-3);
}

TEST_CASE("sessions survive a restart") {
    ScratchDir dir("bevcal_service_reload");
    std::string id;
    Json before;
    {
        CalibrationService svc(dir.path());
        id = new_session(svc);
        svc.put_images(id, map_only());
        ImagesUpload cam;
        cam.camera_png = encode_png(camera_frame());
        svc.put_images(id, cam);
        svc.put_correspondences(id, pairs_body(fixture::map_clicks(5)).dump());
        before = body_of(svc.get_calibration(id));
    }
    CHECK(std::filesystem::exists(dir.path() / id / "session.json"));
    CHECK(std::filesystem::exists(dir.path() / id / "camera.png"));
    CalibrationService again(dir.path());
    CHECK(again.session_count() == 1);
    CHECK(body_of(again.get_calibration(id)) == before);
    QueryParams q;
    q.values = {{"w", "16"}, {"h", "16"}};
    CHECK(again.get_bev_preview(id, q).status == 200);
}

TEST_CASE("HTTP round trip") {
    ScratchDir dir("bevcal_service_http");
    CalibrationService svc(dir.path());
    HttpServer server(svc);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread loop([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto created = client.Post("/api/sessions", R"({"name":"http"})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string id = Json::parse(created->body)["id"].get<std::string>();
    const std::string base = "/api/sessions/" + id;

    const auto png = encode_png(camera_frame());
    httplib::MultipartFormDataItems items{
        {"camera", std::string(png.begin(), png.end()), "camera.png", "image/png"},
        {"map_scale", "0.1", "", ""},
        {"map_origin", "-30,50", "", ""},
    };
    auto put = client.Put(base + "/images", items);
    REQUIRE(put);
    CHECK(put->status == 204);
    CHECK(put->get_header_value("X-Session-Revision") == "1");

    auto bad_origin = client.Put(base + "/images", httplib::MultipartFormDataItems{{"map_origin", "nope", "", ""}});
    REQUIRE(bad_origin);
    CHECK(bad_origin->status == 400);

    auto pairs = client.Put(base + "/correspondences", pairs_body(fixture::map_clicks(6)).dump(), "application/json");
    REQUIRE(pairs);
    CHECK(pairs->status == 200);

    auto cal = client.Get(base + "/calibration");
    REQUIRE(cal);
    CHECK(Json::parse(cal->body) == body_of(svc.get_calibration(id)));
    CHECK(cal->get_header_value("X-Session-Revision") == "2");

    auto preview = client.Get(base + "/bev-preview?w=32&h=32&ppm=5");
    REQUIRE(preview);
    CHECK(preview->status == 200);
    CHECK(preview->get_header_value("Content-Type") == "image/png");

    auto missing = client.Get("/api/sessions/0123/calibration");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    server.stop();
    loop.join();
}
