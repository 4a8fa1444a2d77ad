#include "bevcal/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <regex>

#include <CLI11.hpp>

#include "bevcal/camera.hpp"
#include "bevcal/image_io.hpp"
#include "bevcal/ipm.hpp"
#include "bevcal/json_io.hpp"
#include "bevcal/scene.hpp"
#include "bevcal/service.hpp"

namespace bevcal {

namespace {

namespace fs = std::filesystem;

// Bad flag values found after CLI11 accepted the command line; reported
// with the usage exit code rather than the data one.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::pair<int, int> parse_size(const std::string& text, const std::string& flag) {
    static const std::regex pattern(R"((\d+)[xX](\d+))");
    std::smatch m;
    if (!std::regex_match(text, m, pattern)) throw UsageError(flag + " expects WxH, got '" + text + "'");
    const int w = std::stoi(m[1]);
    const int h = std::stoi(m[2]);
    if (w < 1 || h < 1) throw UsageError(flag + " must be positive");
    return {w, h};
}

PlanePoint parse_pair(const std::string& text, const std::string& flag) {
    static const std::regex pattern(R"(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*)");
    std::smatch m;
    if (!std::regex_match(text, m, pattern)) throw UsageError(flag + " expects X,Y, got '" + text + "'");
    try {
        return {std::stod(m[1]), std::stod(m[2])};
    } catch (const std::exception&) {
        throw UsageError(flag + " expects X,Y, got '" + text + "'");
    }
}

std::string frame_file_name(std::int64_t frame) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04lld.json", static_cast<long long>(frame));
    return buf;
}

// Label files of a directory (frame_*.json, sorted) or a single file.
std::vector<LabelFile> load_labels(const fs::path& path) {
    std::vector<LabelFile> out;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            const std::string name = entry.path().filename().string();
            if (entry.is_regular_file() && name.rfind("frame_", 0) == 0 && entry.path().extension() == ".json") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) out.push_back(label_file_from_json(read_json_file(f)));
    } else {
        const Json j = read_json_file(path);
        if (j.is_array()) {
            for (const auto& item : j) out.push_back(label_file_from_json(item));
        } else {
            out.push_back(label_file_from_json(j));
        }
    }
    return out;
}

Homography load_homography(const fs::path& path) { return homography_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------

struct CalibrateArgs {
    std::string pairs;
    std::string out;
    std::string report;
};

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
    const CorrespondenceSet c = correspondences_from_json(read_json_file(a.pairs));
    const Homography h = estimate_homography_dlt(c);
    write_json_file(a.out, homography_to_json(h));
    const ErrorReport report = reprojection_report(h, c);
    if (!a.report.empty()) write_json_file(a.report, error_report_to_json(report));
    out << "pairs " << c.pairs.size() << " rms " << report.rms << " max " << report.max << '\n';
    return kExitOk;
}

struct WarpArgs {
    std::string image;
    std::string homography;
    std::string out_size;
    std::string out;
    double ppm = 10.0;
    std::string origin;
    double fill = 0.0;
    std::string interp = "bilinear";
    int threads = 1;
};

int cmd_warp(const WarpArgs& a, std::ostream& out) {
    const auto [w, h] = parse_size(a.out_size, "--out-size");
    if (!(a.ppm > 0.0)) throw UsageError("--ppm must be positive");
    if (a.threads < 1) throw UsageError("--threads must be >= 1");
    const Interpolation interp = a.interp == "nearest" ? Interpolation::Nearest : Interpolation::Bilinear;

    const Homography file_h = load_homography(a.homography);
    // Image-to-image homographies (source frame ori) are applied as given;
    // road-plane homographies go through the world -> BEV similarity.
    std::optional<Homography> h_out_src;
    if (file_h.src() == Frame::Ori && file_h.dst() != Frame::World) {
        h_out_src = file_h;
    } else {
        const PlanePoint origin = a.origin.empty() ? PlanePoint{-w / (2.0 * a.ppm), h / (2.0 * a.ppm)}
                                                   : parse_pair(a.origin, "--origin");
        const Homography world_to_bev = bev_from_world(a.ppm, origin);
        if (file_h.src() == Frame::World && file_h.dst() == Frame::Ori) {
            h_out_src = compose(world_to_bev, invert(file_h));
        } else if (file_h.src() == Frame::Ori && file_h.dst() == Frame::World) {
            h_out_src = compose(world_to_bev, file_h);
        } else {
            throw Error(ErrorCode::FrameMismatch, "warp needs an ori->bev, world->ori or ori->world homography, got " +
                                                      std::string(to_string(file_h.src())) + "->" +
                                                      std::string(to_string(file_h.dst())));
        }
    }
    const RasterImage src = read_image(a.image);
    const RasterImage dst = warp_image(src, *h_out_src, w, h, a.fill, interp, a.threads);
    write_image(a.out, dst);
    out << "wrote " << a.out << " (" << w << "x" << h << ")\n";
    return kExitOk;
}

struct SynthCamerasArgs {
    std::string homography;
    std::string center;
    double radius = -1.0;
    int n = 20;
    std::uint64_t seed = 0;
    std::string image_size = "1920x1080";
    std::string out;
};

int cmd_synth_cameras(const SynthCamerasArgs& a, std::ostream& out) {
    const auto [iw, ih] = parse_size(a.image_size, "--image-size");
    Homography h = load_homography(a.homography);
    if (h.src() == Frame::Ori && h.dst() == Frame::World) h = invert(h);
    const PrincipalPoint center = a.center.empty() ? PrincipalPoint{iw / 2.0, ih / 2.0} : parse_pair(a.center, "--center");
    const double radius = a.radius < 0.0 ? 0.05 * iw : a.radius;
    if (a.n < 1) throw UsageError("--n must be >= 1");
    const auto cams = sample_camera_family(h, center, radius, a.n, a.seed);
    Json list = Json::array();
    for (const auto& c : cams) list.push_back(camera_to_json(c));
    write_json_file(a.out, {{"homography", homography_to_json(h)}, {"seed", a.seed}, {"cameras", list}});
    out << "wrote " << cams.size() << " cameras to " << a.out << '\n';
    return kExitOk;
}

struct SynthFramesArgs {
    std::string spec;
    int n_frames = 1;
    std::uint64_t camera_seed = 0;
    std::string out;
};

int cmd_synth_frames(const SynthFramesArgs& a, std::ostream& out) {
    if (a.n_frames < 1) throw UsageError("--n-frames must be >= 1");
    const fs::path spec_path(a.spec);
    const ScenarioSpec spec = scenario_from_json(read_json_file(spec_path), spec_path.parent_path());
    const fs::path dir(a.out);
    fs::create_directories(dir);
    Json manifest = Json::array();
    for (int i = 0; i < a.n_frames; ++i) {
        const SyntheticFrame frame = generate_frame(spec, a.camera_seed + static_cast<std::uint64_t>(i));
        const std::string name = frame_file_name(frame.frame_id);
        write_json_file(dir / name, label_file_to_json(labels_of(frame)));
        manifest.push_back({{"frame", frame.frame_id}, {"file", name}, {"camera", camera_to_json(frame.camera)}});
    }
    write_json_file(dir / "cameras.json", manifest);
    out << "wrote " << a.n_frames << " frames to " << dir.string() << '\n';
    return kExitOk;
}

struct PerturbArgs {
    std::string gt;
    std::string out;
    PerturbParams params;
    std::uint64_t seed = 0;
};

int cmd_perturb(const PerturbArgs& a, std::ostream& out) {
    const std::vector<LabelFile> gts = load_labels(a.gt);
    const fs::path dir(a.out);
    fs::create_directories(dir);
    for (const auto& gt : gts) {
        if (!(gt.ppm > 0.0)) throw Error(ErrorCode::InvalidArgument, "frame " + std::to_string(gt.frame) + " has no ppm");
        const auto boxes = boxes_of(gt);
        const auto dets = perturb_boxes(boxes, gt.frame, gt.ppm, gt.bev_width, gt.bev_height, a.params,
                                        a.seed + static_cast<std::uint64_t>(gt.frame));
        write_json_file(dir / frame_file_name(gt.frame), label_file_to_json(detections_file(gt.frame, dets, gt)));
    }
    out << "perturbed " << gts.size() << " frames into " << dir.string() << '\n';
    return kExitOk;
}

struct EvalArgs {
    std::string gt;
    std::string det;
    std::string criterion = "iou:0.5";
    std::string report;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    MatchCriterion crit;
    try {
        crit = MatchCriterion::parse(a.criterion);
    } catch (const Error& e) {
        throw UsageError(std::string("--criterion: ") + e.what());
    }
    std::map<std::int64_t, LabelFile> gts;
    for (auto& f : load_labels(a.gt)) gts.insert_or_assign(f.frame, std::move(f));
    std::map<std::int64_t, LabelFile> dets;
    for (auto& f : load_labels(a.det)) dets.insert_or_assign(f.frame, std::move(f));

    std::vector<std::int64_t> ids;
    for (const auto& [id, f] : gts) ids.push_back(id);
    for (const auto& [id, f] : dets) {
        if (!gts.count(id)) ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());

    std::vector<FrameResult> results;
    for (std::int64_t id : ids) {
        const auto g = gts.find(id);
        const auto d = dets.find(id);
        const std::vector<RBox> gt_boxes = g == gts.end() ? std::vector<RBox>{} : boxes_of(g->second);
        const std::vector<Detection> det_list = d == dets.end() ? std::vector<Detection>{} : detections_of(d->second);
        results.push_back(evaluate_frame(id, det_list, gt_boxes, crit));
    }
    const Json report = evaluation_report(results, crit);
    if (!a.report.empty()) write_json_file(a.report, report);
    out << "AP " << report["ap"].get<double>() << " (" << crit.to_string() << ", " << results.size() << " frames)\n";
    return kExitOk;
}

struct ServeArgs {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir = "bevcal-data";
    std::string static_dir;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
    CalibrationService service(a.data_dir);
    std::optional<fs::path> static_dir;
    if (!a.static_dir.empty()) {
        if (!fs::is_directory(a.static_dir)) throw UsageError("--static-dir " + a.static_dir + " is not a directory");
        static_dir = fs::path(a.static_dir);
    }
    HttpServer server(service, static_dir);
    if (!server.bind(a.host, a.port)) {
        throw Error(ErrorCode::IoFailure, "cannot bind " + a.host + ":" + std::to_string(a.port));
    }
    out << "serving " << service.session_count() << " sessions on http://" << a.host << ':' << a.port << std::endl;
    return server.listen_after_bind() ? kExitOk : kExitData;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Road-plane calibration, BEV warping, synthetic labels and evaluation"};
    app.name("bevcal");
    app.require_subcommand(1);

    CalibrateArgs calibrate;
    auto* c = app.add_subcommand("calibrate", "Estimate the world->image homography from point pairs");
    c->add_option("--pairs", calibrate.pairs, "Correspondence JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--out", calibrate.out, "Output homography JSON")->required();
    c->add_option("--report", calibrate.report, "Optional residual report JSON");

    WarpArgs warp;
    auto* w = app.add_subcommand("warp", "Warp an image through a homography");
    w->add_option("--image", warp.image, "Input PNG or PFM")->required()->check(CLI::ExistingFile);
    w->add_option("--homography", warp.homography, "Homography JSON")->required()->check(CLI::ExistingFile);
    w->add_option("--out-size", warp.out_size, "Output size WxH")->required();
    w->add_option("--out", warp.out, "Output PNG or PFM")->required();
    w->add_option("--ppm", warp.ppm, "BEV pixels per meter for road-plane homographies");
    w->add_option("--origin", warp.origin, "World X,Y of BEV pixel (0,0)");
    w->add_option("--fill", warp.fill, "Value for samples outside the source");
    w->add_option("--interp", warp.interp, "nearest or bilinear")->check(CLI::IsMember({"nearest", "bilinear"}));
    w->add_option("--threads", warp.threads, "Worker threads")->envname("BEVCAL_THREADS");

    SynthCamerasArgs cams;
    auto* sc = app.add_subcommand("synth-cameras", "Sample cameras that all reproduce one homography");
    sc->add_option("--homography", cams.homography, "World->image homography JSON")->required()->check(CLI::ExistingFile);
    sc->add_option("--center", cams.center, "Principal point disc center X,Y (default: image center)");
    sc->add_option("--radius", cams.radius, "Principal point disc radius in px (default: 5% of width)");
    sc->add_option("--n", cams.n, "Number of cameras");
    sc->add_option("--seed", cams.seed, "Random seed")->envname("BEVCAL_SEED");
    sc->add_option("--image-size", cams.image_size, "Image size WxH");
    sc->add_option("--out", cams.out, "Output JSON")->required();

    SynthFramesArgs frames;
    auto* sf = app.add_subcommand("synth-frames", "Generate labelled synthetic frames from a scenario");
    sf->add_option("--spec", frames.spec, "Scenario JSON")->required()->check(CLI::ExistingFile);
    sf->add_option("--n-frames", frames.n_frames, "Number of frames");
    sf->add_option("--camera-seed", frames.camera_seed, "Camera seed of the first frame; frame i uses seed + i");
    sf->add_option("--out", frames.out, "Output directory")->required();

    PerturbArgs perturb;
    auto* pt = app.add_subcommand("perturb", "Turn ground-truth labels into noisy detections");
    pt->add_option("--gt", perturb.gt, "Label directory or file")->required()->check(CLI::ExistingPath);
    pt->add_option("--out", perturb.out, "Output directory")->required();
    pt->add_option("--sigma-center", perturb.params.sigma_center, "Center noise, meters");
    pt->add_option("--sigma-angle", perturb.params.sigma_angle, "Heading noise, radians");
    pt->add_option("--drop-rate", perturb.params.drop_rate, "Probability of dropping a box")->check(CLI::Range(0.0, 1.0));
    pt->add_option("--spurious-rate", perturb.params.spurious_rate, "Probability of a spurious box per GT box");
    pt->add_option("--seed", perturb.seed, "Random seed; frame f uses seed + f")->envname("BEVCAL_SEED");

    EvalArgs eval;
    auto* ev = app.add_subcommand("eval", "Average precision of detections against ground truth");
    ev->add_option("--gt", eval.gt, "Label directory or file")->required()->check(CLI::ExistingPath);
    ev->add_option("--det", eval.det, "Detection directory or file")->required()->check(CLI::ExistingPath);
    ev->add_option("--criterion", eval.criterion, "iou:T or center:T, where T scales the ground-truth length");
    ev->add_option("--report", eval.report, "Output report JSON");

    ServeArgs serve;
    auto* sv = app.add_subcommand("serve", "Run the interactive calibration service");
    sv->add_option("--host", serve.host, "Bind address")->envname("BEVCAL_HOST");
    sv->add_option("--port", serve.port, "TCP port")->envname("BEVCAL_PORT")->check(CLI::Range(1, 65535));
    sv->add_option("--data-dir", serve.data_dir, "Session storage directory")->envname("BEVCAL_DATA_DIR");
    sv->add_option("--static-dir", serve.static_dir, "Static UI assets")->envname("BEVCAL_STATIC_DIR");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (c->parsed()) return cmd_calibrate(calibrate, out);
        if (w->parsed()) return cmd_warp(warp, out);
        if (sc->parsed()) return cmd_synth_cameras(cams, out);
        if (sf->parsed()) return cmd_synth_frames(frames, out);
        if (pt->parsed()) return cmd_perturb(perturb, out);
        if (ev->parsed()) return cmd_eval(eval, out);
        if (sv->parsed()) return cmd_serve(serve, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    err << "error: no subcommand\n";
    return kExitUsage;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace bevcal
