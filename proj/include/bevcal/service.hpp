#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "bevcal/projective.hpp"
#include "bevcal/raster.hpp"

namespace bevcal {

/// Transport-neutral response; the HTTP layer copies it verbatim.
struct ServiceResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
    std::map<std::string, std::string> headers;
};

/// Any subset of the image upload fields; absent fields keep their value.
struct ImagesUpload {
    std::optional<std::vector<std::uint8_t>> camera_png;
    std::optional<std::vector<std::uint8_t>> map_png;
    std::optional<double> map_scale;  // meters per map pixel
    std::optional<PlanePoint> map_origin;  // world coordinate of map pixel (0, 0)
};

struct QueryParams {
    std::map<std::string, std::string> values;
    std::optional<std::string> get(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end()) return std::nullopt;
        return it->second;
    }
};

/// Interactive calibration sessions persisted under a data directory, one
/// subdirectory per session. Each session is single-writer / multi-reader:
/// mutations bump the revision and recompute the calibration under an
/// exclusive lock, so a read never mixes a homography with another
/// revision's pair list.
class CalibrationService {
public:
    explicit CalibrationService(std::filesystem::path data_dir);
    ~CalibrationService();

    CalibrationService(const CalibrationService&) = delete;
    CalibrationService& operator=(const CalibrationService&) = delete;

    ServiceResponse create_session(const std::string& body);
    ServiceResponse put_images(const std::string& id, const ImagesUpload& upload);
    ServiceResponse put_correspondences(const std::string& id, const std::string& body);
    ServiceResponse get_calibration(const std::string& id) const;
    ServiceResponse get_bev_preview(const std::string& id, const QueryParams& query) const;
    ServiceResponse get_camera(const std::string& id, const QueryParams& query) const;

    std::size_t session_count() const;

    struct Session;

private:
    std::shared_ptr<Session> find(const std::string& id) const;
    void load_existing();

    std::filesystem::path data_dir_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// Maps pixel coordinates on a north-up map image to world meters:
/// x = origin.x + scale * px, y = origin.y - scale * py.
PlanePoint map_to_world(PlanePoint map_px, double scale, PlanePoint origin);

/// HTTP/1.1 front end for CalibrationService, optionally serving static UI
/// assets from `static_dir`.
class HttpServer {
public:
    HttpServer(CalibrationService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~HttpServer();

    /// Returns the bound port, or -1 on failure.
    int bind_to_any_port(const std::string& host);
    bool bind(const std::string& host, int port);
    /// Blocks until stop() is called.
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace bevcal
