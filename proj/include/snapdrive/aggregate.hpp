#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "snapdrive/ingest.hpp"
#include "snapdrive/types.hpp"

namespace snapdrive {

inline constexpr int kDefaultFps = 30;
inline constexpr double kDefaultFrameCutoff = 0.5;

enum class SamplingStrategy { kEvery30th, kRandomPerSecond };

/// One frame per whole second of video (at least one for sub-second clips).
/// kEvery30th takes the first frame of each second; kRandomPerSecond draws
/// one frame uniformly from each second's block, reproducibly from `seed`.
/// Throws kInvalidDuration for duration_s <= 0.
std::vector<int> sample_frame_indices(double duration_s, int fps = kDefaultFps,
                                      SamplingStrategy strategy = SamplingStrategy::kEvery30th,
                                      std::uint64_t seed = 0);

/// Strict: a score equal to the cutoff is non-driving.
inline Label frame_label(double score, double cutoff = kDefaultFrameCutoff) noexcept {
  return score > cutoff ? Label::kDriving : Label::kNonDriving;
}

/// Thresholds offered by the precision/recall sweep.
inline constexpr int kSweepThresholds[] = {10, 30, 50, 70, 90};

class VotingRule {
 public:
  enum class Kind { kSingle, kMajority, kThreshold };

  static VotingRule single() noexcept { return VotingRule(Kind::kSingle, 0); }
  static VotingRule majority() noexcept { return VotingRule(Kind::kMajority, 50); }
  /// Throws kInvalidArgument unless pct is one of 10, 30, 50, 70, 90.
  static VotingRule threshold(int pct);
  /// Parses "single", "majority" or "threshold" (with `pct`).
  static VotingRule parse(const std::string& name, int pct = 50);

  Kind kind() const noexcept { return kind_; }
  int threshold_pct() const noexcept { return pct_; }
  std::string name() const;

 private:
  VotingRule(Kind kind, int pct) noexcept : kind_(kind), pct_(pct) {}
  Kind kind_;
  int pct_;
};

/// single: any driving frame. majority: driving fraction > 1/2.
/// threshold(p): driving fraction > p/100. Throws kEmptyInput on no frames.
Label aggregate_votes(std::span<const Label> frame_labels, const VotingRule& rule);

/// Frame scores -> per-frame labels -> clip label.
Label classify_scores(std::span<const double> scores, const VotingRule& rule,
                      double cutoff = kDefaultFrameCutoff);

/// Pluggable per-frame classifier.
class FrameScorer {
 public:
  virtual ~FrameScorer() = default;
  virtual double score(std::span<const double> features) const = 0;
};

/// Logistic squash of a fixed positive-weight linear functional:
/// sigmoid(sum_i f_i / (i + 1)). Stand-in for a trained image model.
class ReferenceScorer final : public FrameScorer {
 public:
  /// Throws kEmptyInput for an empty feature vector.
  double score(std::span<const double> features) const override;
};

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t total() const noexcept { return tp + fp + fn + tn; }
};

/// Precision, recall and F1 are for `minor_class` treated as positive.
struct EvalReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Confusion confusion;
  Label minor_class = Label::kDriving;
};

/// Throws kShape on length mismatch and kEmptyInput on empty input.
EvalReport evaluate(std::span<const Label> predictions, std::span<const Label> truths,
                    Label minor_class = Label::kDriving);

struct SweepPoint {
  std::string rule;
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision/recall of the driving class for single voting and each sweep
/// threshold, over clips given as frame-score series.
std::vector<SweepPoint> threshold_sweep(std::span<const std::vector<double>> clips, std::span<const Label> truths,
                                        double cutoff = kDefaultFrameCutoff);

struct CityExtent {
  std::string city_id;
  std::size_t driving = 0;
  std::size_t total = 0;
  double fraction = 0.0;
};

struct ExtentReport {
  /// Sorted by fraction descending, then city id.
  std::vector<CityExtent> cities;
  std::size_t driving = 0;
  std::size_t total = 0;
  double pooled_fraction = 0.0;
};

/// Driving fraction per city and pooled. Every record must carry a label
/// (kInvalidArgument otherwise). When `required_cities` is non-empty the
/// report is restricted to those cities and each must have at least one
/// record (kMissingCity).
ExtentReport extent(std::span<const SnapRecord> records, std::span<const std::string> required_cities = {});

}  // namespace snapdrive
