#pragma once

#include <string>
#include <vector>

#include "spoofdet/errors.hpp"

namespace spoofdet {

/// Scoring convention: higher score means more likely spoof; a sample is
/// predicted spoof when score > threshold.
struct ScoreRecord {
    std::string id;
    std::string group;  // per-video aggregation key
    int label = 0;      // genuine=0, spoof=1
    double score = 0.0;
};

using ScoreSet = std::vector<ScoreRecord>;

struct RocPoint {
    double threshold = 0.0;
    double far = 0.0;  // genuine scored above threshold
    double frr = 0.0;  // spoof scored at or below threshold
};

/// ROC at every distinct score plus -inf/+inf sentinels, ordered by
/// increasing threshold. FAR is non-increasing, FRR non-decreasing.
std::vector<RocPoint> roc_curve(const ScoreSet& scores);

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

/// FAR/FRR crossing with linear interpolation between bracketing ROC points.
EerResult eer(const ScoreSet& scores);

struct LabelCounts {
    int genuine = 0;
    int spoof = 0;
};

struct EvalReport {
    double eer = 0.0;             // test-set EER
    double eer_threshold = 0.0;
    double hter = 0.0;            // at the applied (dev) threshold
    double applied_threshold = 0.0;
    double far = 0.0, frr = 0.0;  // at the applied threshold
    LabelCounts counts;
    std::vector<RocPoint> roc;

    std::string to_json() const;
    static EvalReport from_json(const std::string& text);
};

/// FAR/FRR of `scores` at a fixed threshold.
void rates_at_threshold(const ScoreSet& scores, double threshold, double& far, double& frr);

/// Threshold from the dev set's EER point; HTER = (FAR+FRR)/2 on test.
EvalReport evaluate(const ScoreSet& dev, const ScoreSet& test);

/// Per-group mean score; label taken from the group's records (must agree).
ScoreSet aggregate_by_group(const ScoreSet& scores);

/// CSV identifier,group,label,score (with header).
ScoreSet load_scores(const std::string& path);
void save_scores(const ScoreSet& scores, const std::string& path);

void save_roc_csv(const std::vector<RocPoint>& roc, const std::string& path);

}  // namespace spoofdet
