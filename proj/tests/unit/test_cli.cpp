#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bevcal/cli.hpp"
#include "bevcal/image_io.hpp"
#include "bevcal/json_io.hpp"
#include "fixtures.hpp"

using namespace bevcal;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

class Workdir {
public:
    explicit Workdir(const std::string& name) : path_(fs::temp_directory_path() / name) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~Workdir() { fs::remove_all(path_); }
    std::string operator/(const std::string& leaf) const { return (path_ / leaf).string(); }

private:
    fs::path path_;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Json scenario_json(const std::string& homography_file) {
    return {{"homography", homography_file},
            {"bev", {{"ppm", 10}, {"origin", {-25, 45}}, {"size", {500, 500}}}},
            {"n_vehicles", 12},
            {"placement", {{-20, 0}, {20, 0}, {20, 40}, {-20, 40}}},
            {"seed", 31}};
}

}  // namespace

TEST_CASE("calibrate recovers the identity from a unit square") {
    Workdir dir("bevcal_cli_calibrate");
    CorrespondenceSet c;
    c.pairs = {{{0, 0}, {0, 0}, "a"}, {{1, 0}, {1, 0}, "b"}, {{1, 1}, {1, 1}, "c"}, {{0, 1}, {0, 1}, "d"}};
    write_json_file(dir / "pairs.json", correspondences_to_json(c));
    const Run r = cli({"calibrate", "--pairs", dir / "pairs.json", "--out", dir / "h.json", "--report", dir / "r.json"});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.rfind("pairs 4 rms ", 0) == 0);
    const Homography h = homography_from_json(read_json_file(dir / "h.json"));
    CHECK(h.src() == Frame::World);
    CHECK(h.dst() == Frame::Ori);
    CHECK(projective_distance(h.matrix(), Matrix3::Identity()) < 1e-9);
    CHECK(read_json_file(dir / "r.json")["residuals"].size() == 4);
}

TEST_CASE("identity warp reproduces the image bit for bit") {
    Workdir dir("bevcal_cli_warp");
    RasterImage img = RasterImage::make_u8(37, 21, 3);
    std::uint8_t v = 0;
    for (auto& p : img.u8()) p = v += 37;
    write_image(dir / "in.png", img);
    write_json_file(dir / "id.json", homography_to_json(Homography(Matrix3::Identity(), Frame::Ori, Frame::Bev)));
    for (const std::string interp : {"nearest", "bilinear"}) {
        const Run r = cli({"warp", "--image", dir / "in.png", "--homography", dir / "id.json", "--out-size", "37x21",
                           "--out", dir / "out.png", "--interp", interp, "--threads", "3"});
        REQUIRE(r.code == kExitOk);
        CHECK(read_image(dir / "out.png") == img);
    }
}

TEST_CASE("road-plane warp uses the BEV similarity") {
    Workdir dir("bevcal_cli_warp_road");
    RasterImage img = RasterImage::make_u8(64, 48, 1, 200);
    write_image(dir / "in.png", img);
    write_json_file(dir / "h.json", homography_to_json(fixture::road_homography()));
    const Run r = cli({"warp", "--image", dir / "in.png", "--homography", dir / "h.json", "--out-size", "40x30", "--out",
                       dir / "bev.png", "--ppm", "2", "--origin", "-10,30"});
    REQUIRE(r.code == kExitOk);
    CHECK(read_image(dir / "bev.png").width == 40);

    write_json_file(dir / "odd.json", homography_to_json(Homography(Matrix3::Identity(), Frame::Bev, Frame::Ori)));
    const Run mismatch = cli({"warp", "--image", dir / "in.png", "--homography", dir / "odd.json", "--out-size", "4x4",
                              "--out", dir / "x.png"});
    CHECK(mismatch.code == kExitData);
    CHECK(mismatch.err.find("FrameMismatch") != std::string::npos);
}

TEST_CASE("usage and data errors have distinct exit codes") {
    Workdir dir("bevcal_cli_errors");
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"frobnicate"}).code == kExitUsage);
    const Run missing = cli({"calibrate", "--out", dir / "h.json"});
    CHECK(missing.code == kExitUsage);
    CHECK(missing.err.rfind("error: ", 0) == 0);
    CHECK(cli({"calibrate", "--pairs", dir / "absent.json", "--out", dir / "h.json"}).code == kExitUsage);

    CorrespondenceSet three;
    three.pairs = {{{0, 0}, {0, 0}, ""}, {{1, 0}, {1, 0}, ""}, {{1, 1}, {1, 1}, ""}};
    write_json_file(dir / "three.json", correspondences_to_json(three));
    const Run few = cli({"calibrate", "--pairs", dir / "three.json", "--out", dir / "h.json"});
    CHECK(few.code == kExitData);
    CHECK(few.err.rfind("error: TooFewPoints", 0) == 0);

    write_json_file(dir / "id.json", homography_to_json(Homography(Matrix3::Identity(), Frame::Ori, Frame::Bev)));
    write_image(dir / "in.png", RasterImage::make_u8(4, 4, 1));
    const Run bad_size = cli({"warp", "--image", dir / "in.png", "--homography", dir / "id.json", "--out-size", "4by4",
                              "--out", dir / "o.png"});
    CHECK(bad_size.code == kExitUsage);
    CHECK(cli({"eval", "--gt", dir / "id.json", "--det", dir / "id.json", "--criterion", "giou:1"}).code == kExitUsage);
    CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("scripted pipeline matches the in-process computation") {
    Workdir dir("bevcal_cli_pipeline");
    write_json_file(dir / "h.json", homography_to_json(fixture::road_homography()));
    write_json_file(dir / "scenario.json", scenario_json("h.json"));

    REQUIRE(cli({"synth-cameras", "--homography", dir / "h.json", "--n", "5", "--seed", "4", "--out", dir / "cams.json"})
                .code == kExitOk);
    const Json cams = read_json_file(dir / "cams.json");
    const auto lib_cams = sample_camera_family(fixture::road_homography(), {960, 540}, 96.0, 5, 4);
    REQUIRE(cams["cameras"].size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(cams["cameras"][i] == camera_to_json(lib_cams[i]));

    REQUIRE(cli({"synth-frames", "--spec", dir / "scenario.json", "--n-frames", "4", "--camera-seed", "10", "--out",
                 dir / "gt"})
                .code == kExitOk);
    REQUIRE(cli({"perturb", "--gt", dir / "gt", "--out", dir / "det", "--sigma-center", "0.4", "--sigma-angle", "0.1",
                 "--drop-rate", "0.1", "--spurious-rate", "0.2", "--seed", "77"})
                .code == kExitOk);
    const Run ev = cli({"eval", "--gt", dir / "gt", "--det", dir / "det", "--criterion", "center:0.5", "--report",
                        dir / "report.json"});
    REQUIRE(ev.code == kExitOk);
    CHECK(ev.out.rfind("AP ", 0) == 0);

    const ScenarioSpec spec = fixture::road_scenario(31, 12);
    PerturbParams p;
    p.sigma_center = 0.4;
    p.sigma_angle = 0.1;
    p.drop_rate = 0.1;
    p.spurious_rate = 0.2;
    const MatchCriterion crit{CriterionKind::CenterDistance, 0.5};
    std::vector<FrameResult> results;
    for (std::uint64_t i = 0; i < 4; ++i) {
        const SyntheticFrame f = generate_frame(spec, 10 + i);
        CHECK(read_json_file(dir / ("gt/frame_00" + std::to_string(10 + i) + ".json")) == label_file_to_json(labels_of(f)));
        const auto dets = perturb_labels(f, p, 77 + f.frame_id);
        std::vector<RBox> gts;
        for (const auto& l : f.labels_bev) gts.push_back(l.box);
        results.push_back(evaluate_frame(f.frame_id, dets, gts, crit));
    }
    CHECK(slurp(dir / "report.json") == evaluation_report(results, crit).dump(2) + "\n");
}

TEST_CASE("the installed binary runs") {
    Workdir dir("bevcal_cli_binary");
    const std::string cmd = std::string("\"") + BEVCAL_CLI_PATH + "\" --help > \"" + (dir / "help.txt") + "\"";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(slurp(dir / "help.txt").find("calibrate") != std::string::npos);
}
