#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bevcal/rbox.hpp"

namespace bevcal {

struct Detection {
    RBox box;
    double confidence = 0.0;
    std::int64_t frame = 0;
};

enum class CriterionKind { Iou, CenterDistance };

/// IoU >= threshold, or center distance <= threshold * l_gt.
struct MatchCriterion {
    CriterionKind kind = CriterionKind::Iou;
    double threshold = 0.5;

    /// Parses "iou:0.5" or "center:0.5".
    static MatchCriterion parse(const std::string& text);
    std::string to_string() const;
};

struct Match {
    std::size_t det;
    std::optional<std::size_t> gt;
};

/// Greedy single-assignment matching in descending confidence (ties: lower
/// det index). Each det takes its best eligible unmatched GT (ties: lower GT
/// index). Result is indexed by det.
std::vector<Match> match_frame(std::span<const Detection> dets, std::span<const RBox> gts,
                               const MatchCriterion& crit);

struct ScoredDetection {
    double confidence = 0.0;
    std::int64_t frame = 0;
    std::size_t index = 0;
    bool true_positive = false;
};

struct FrameResult {
    std::int64_t frame = 0;
    std::size_t n_gt = 0;
    std::vector<ScoredDetection> detections;
};

FrameResult evaluate_frame(std::int64_t frame, std::span<const Detection> dets, std::span<const RBox> gts,
                           const MatchCriterion& crit);

struct PrPoint {
    double recall;
    double precision;
};

struct ApResult {
    double ap = 0.0;
    std::vector<PrPoint> curve;     // raw cumulative points, one per detection
    std::vector<PrPoint> envelope;  // monotone non-increasing upper hull of `curve`
};

/// All-point interpolated AP over a dataset. Detections are ranked by
/// confidence, then frame id, then det index. Throws NoGroundTruth.
ApResult average_precision(std::span<const FrameResult> frames);

struct OperatingPoint {
    double precision = 1.0;  // 1 by convention when nothing passes the threshold
    double recall = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

/// Counts detections with confidence >= threshold. Throws NoGroundTruth.
OperatingPoint precision_recall_at(std::span<const FrameResult> frames, double threshold);

}  // namespace bevcal
