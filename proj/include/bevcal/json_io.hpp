#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "bevcal/camera.hpp"
#include "bevcal/evaluation.hpp"
#include "bevcal/projective.hpp"
#include "bevcal/scene.hpp"

namespace bevcal {

using Json = nlohmann::json;

// Parsers throw Error(InvalidArgument) naming the offending field.

Json homography_to_json(const Homography& h);
Homography homography_from_json(const Json& j);

Json correspondences_to_json(const CorrespondenceSet& c);
CorrespondenceSet correspondences_from_json(const Json& j);

Json error_report_to_json(const ErrorReport& r);

Json camera_to_json(const CameraSample& cam);
CameraSample camera_from_json(const Json& j);

/// Per-frame BEV label document shared by synthesis output and evaluation
/// input. Boxes carry `confidence` when they are detections.
struct LabelFile {
    std::int64_t frame = 0;
    std::vector<TailedRBox> boxes;
    std::vector<double> confidences;  // empty for ground truth
    double ppm = 0.0;                 // 0 when unknown
    int bev_width = 0;
    int bev_height = 0;
};

Json label_file_to_json(const LabelFile& f);
LabelFile label_file_from_json(const Json& j);

LabelFile labels_of(const SyntheticFrame& frame);
LabelFile detections_file(std::int64_t frame, std::span<const Detection> dets, const LabelFile& gt);
std::vector<Detection> detections_of(const LabelFile& f);
std::vector<RBox> boxes_of(const LabelFile& f);

/// `base_dir` resolves a homography given as a relative file path.
ScenarioSpec scenario_from_json(const Json& j, const std::filesystem::path& base_dir = {});

/// Evaluation report: AP, PR curve, and per-frame TP/FP/FN counts.
/// `frames` are reported in ascending frame id.
Json evaluation_report(std::span<const FrameResult> frames, const MatchCriterion& crit);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace bevcal
