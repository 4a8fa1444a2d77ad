#include "bevcal/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace bevcal {

MatchCriterion MatchCriterion::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "criterion must look like iou:0.5 or center:0.5");
    }
    const std::string kind = text.substr(0, colon);
    MatchCriterion crit;
    if (kind == "iou") {
        crit.kind = CriterionKind::Iou;
    } else if (kind == "center") {
        crit.kind = CriterionKind::CenterDistance;
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown criterion kind '" + kind + "'");
    }
    try {
        std::size_t used = 0;
        crit.threshold = std::stod(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "bad criterion threshold in '" + text + "'");
    }
    if (!(crit.threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "criterion threshold must be > 0");
    return crit;
}

std::string MatchCriterion::to_string() const {
    std::ostringstream os;
    os << (kind == CriterionKind::Iou ? "iou:" : "center:") << threshold;
    return os.str();
}

std::vector<Match> match_frame(std::span<const Detection> dets, std::span<const RBox> gts,
                               const MatchCriterion& crit) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });

    std::vector<Match> matches(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) matches[i].det = i;
    std::vector<bool> taken(gts.size(), false);

    for (std::size_t d : order) {
        std::optional<std::size_t> best;
        double best_score = 0.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g]) continue;
            double score = 0.0;
            bool eligible = false;
            if (crit.kind == CriterionKind::Iou) {
                score = rbox_iou(dets[d].box, gts[g]);
                eligible = score >= crit.threshold;
            } else {
                const double dist = std::hypot(dets[d].box.cx() - gts[g].cx(), dets[d].box.cy() - gts[g].cy());
                eligible = dist <= crit.threshold * gts[g].l();
                score = -dist;
            }
            if (eligible && (!best || score > best_score)) {
                best = g;
                best_score = score;
            }
        }
        if (best) {
            taken[*best] = true;
            matches[d].gt = best;
        }
    }
    return matches;
}

FrameResult evaluate_frame(std::int64_t frame, std::span<const Detection> dets, std::span<const RBox> gts,
                           const MatchCriterion& crit) {
    FrameResult result;
    result.frame = frame;
    result.n_gt = gts.size();
    const auto matches = match_frame(dets, gts, crit);
    for (std::size_t i = 0; i < dets.size(); ++i) {
        result.detections.push_back({dets[i].confidence, frame, i, matches[i].gt.has_value()});
    }
    return result;
}

namespace {

std::size_t total_gt(std::span<const FrameResult> frames) {
    std::size_t n = 0;
    for (const auto& f : frames) n += f.n_gt;
    if (n == 0) throw Error(ErrorCode::NoGroundTruth, "dataset has no ground-truth boxes");
    return n;
}

}  // namespace

ApResult average_precision(std::span<const FrameResult> frames) {
    const std::size_t n_gt = total_gt(frames);

    std::vector<ScoredDetection> ranked;
    for (const auto& f : frames) ranked.insert(ranked.end(), f.detections.begin(), f.detections.end());
    std::sort(ranked.begin(), ranked.end(), [](const ScoredDetection& a, const ScoredDetection& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.index < b.index;
    });

    ApResult result;
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const auto& d : ranked) {
        (d.true_positive ? tp : fp) += 1;
        result.curve.push_back({static_cast<double>(tp) / static_cast<double>(n_gt),
                                static_cast<double>(tp) / static_cast<double>(tp + fp)});
    }

    result.envelope = result.curve;
    for (std::size_t i = result.envelope.size(); i-- > 1;) {
        result.envelope[i - 1].precision = std::max(result.envelope[i - 1].precision, result.envelope[i].precision);
    }
    double prev_recall = 0.0;
    for (const auto& p : result.envelope) {
        result.ap += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    return result;
}

OperatingPoint precision_recall_at(std::span<const FrameResult> frames, double threshold) {
    const std::size_t n_gt = total_gt(frames);
    OperatingPoint op;
    for (const auto& f : frames) {
        for (const auto& d : f.detections) {
            if (d.confidence < threshold) continue;
            (d.true_positive ? op.tp : op.fp) += 1;
        }
    }
    op.fn = n_gt - op.tp;
    op.recall = static_cast<double>(op.tp) / static_cast<double>(n_gt);
    if (op.tp + op.fp > 0) op.precision = static_cast<double>(op.tp) / static_cast<double>(op.tp + op.fp);
    return op;
}

}  // namespace bevcal
