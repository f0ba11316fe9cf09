#include "snapdrive/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "snapdrive/error.hpp"

namespace snapdrive {

std::vector<int> sample_frame_indices(double duration_s, int fps, SamplingStrategy strategy, std::uint64_t seed) {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    fail(ErrorCode::kInvalidDuration, "clip duration must be positive");
  }
  if (fps <= 0) fail(ErrorCode::kInvalidArgument, "fps must be positive");
  const long seconds = std::max(1L, static_cast<long>(std::floor(duration_s)));
  // A sub-second clip only has ceil(duration * fps) frames to draw from.
  const int block = duration_s < 1.0
                             ? std::max(1, static_cast<int>(std::ceil(duration_s * fps)))
                             : fps;
  std::vector<int> indices;
  indices.reserve(static_cast<std::size_t>(seconds));
  std::mt19937_64 rng(seed);
  for (long s = 0; s < seconds; ++s) {
    const int base = static_cast<int>(s) * fps;
    if (strategy == SamplingStrategy::kEvery30th) {
      indices.push_back(base);
    } else {
      std::uniform_int_distribution<int> offset(0, block - 1);
      indices.push_back(base + offset(rng));
    }
  }
  return indices;
}

VotingRule VotingRule::threshold(int pct) {
  if (std::find(std::begin(kSweepThresholds), std::end(kSweepThresholds), pct) == std::end(kSweepThresholds)) {
    fail(ErrorCode::kInvalidArgument, "threshold must be one of 10, 30, 50, 70, 90");
  }
  return VotingRule(Kind::kThreshold, pct);
}

VotingRule VotingRule::parse(const std::string& name, int pct) {
  if (name == "single") return single();
  if (name == "majority") return majority();
  if (name == "threshold") return threshold(pct);
  fail(ErrorCode::kInvalidArgument, "unknown voting rule '" + name + "'");
}

std::string VotingRule::name() const {
  switch (kind_) {
    case Kind::kSingle: return "single";
    case Kind::kMajority: return "majority";
    case Kind::kThreshold: return "threshold" + std::to_string(pct_);
  }
  return "unknown";
}

Label aggregate_votes(std::span<const Label> frame_labels, const VotingRule& rule) {
  if (frame_labels.empty()) fail(ErrorCode::kEmptyInput, "no frame labels to aggregate");
  const auto n = static_cast<long long>(frame_labels.size());
  const auto driving =
      static_cast<long long>(std::count(frame_labels.begin(), frame_labels.end(), Label::kDriving));
  bool positive = false;
  switch (rule.kind()) {
    case VotingRule::Kind::kSingle: positive = driving >= 1; break;
    case VotingRule::Kind::kMajority: positive = 2 * driving > n; break;
    // driving / n > pct / 100, in integers.
    case VotingRule::Kind::kThreshold: positive = 100 * driving > rule.threshold_pct() * n; break;
  }
  return positive ? Label::kDriving : Label::kNonDriving;
}

Label classify_scores(std::span<const double> scores, const VotingRule& rule, double cutoff) {
  std::vector<Label> labels;
  labels.reserve(scores.size());
  for (double s : scores) labels.push_back(frame_label(s, cutoff));
  return aggregate_votes(labels, rule);
}

double ReferenceScorer::score(std::span<const double> features) const {
  if (features.empty()) fail(ErrorCode::kEmptyInput, "feature vector is empty");
  double z = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) z += features[i] / static_cast<double>(i + 1);
  return 1.0 / (1.0 + std::exp(-z));
}

EvalReport evaluate(std::span<const Label> predictions, std::span<const Label> truths, Label minor_class) {
  if (predictions.size() != truths.size()) fail(ErrorCode::kShape, "prediction and truth lengths differ");
  if (predictions.empty()) fail(ErrorCode::kEmptyInput, "nothing to evaluate");
  EvalReport r;
  r.minor_class = minor_class;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred = predictions[i] == minor_class;
    const bool truth = truths[i] == minor_class;
    if (pred && truth) ++r.confusion.tp;
    else if (pred) ++r.confusion.fp;
    else if (truth) ++r.confusion.fn;
    else ++r.confusion.tn;
  }
  const auto& c = r.confusion;
  r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  r.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  r.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

std::vector<SweepPoint> threshold_sweep(std::span<const std::vector<double>> clips, std::span<const Label> truths,
                                        double cutoff) {
  if (clips.size() != truths.size()) fail(ErrorCode::kShape, "clip and truth counts differ");
  std::vector<VotingRule> rules{VotingRule::single()};
  for (int pct : kSweepThresholds) rules.push_back(VotingRule::threshold(pct));
  std::vector<SweepPoint> out;
  for (const auto& rule : rules) {
    std::vector<Label> preds;
    preds.reserve(clips.size());
    for (const auto& clip : clips) preds.push_back(classify_scores(clip, rule, cutoff));
    const auto report = evaluate(preds, truths, Label::kDriving);
    out.push_back({rule.name(), report.precision, report.recall});
  }
  return out;
}

ExtentReport extent(std::span<const SnapRecord> records, std::span<const std::string> required_cities) {
  std::map<std::string, CityExtent> by_city;
  for (const auto& id : required_cities) by_city[id].city_id = id;
  ExtentReport report;
  for (const auto& r : records) {
    if (!r.label) fail(ErrorCode::kInvalidArgument, "record '" + r.id + "' has no label");
    if (!required_cities.empty() && !by_city.contains(r.city_id)) continue;
    auto& c = by_city[r.city_id];
    c.city_id = r.city_id;
    ++c.total;
    ++report.total;
    if (*r.label == Label::kDriving) {
      ++c.driving;
      ++report.driving;
    }
  }
  for (auto& [id, c] : by_city) {
    if (c.total == 0) fail(ErrorCode::kMissingCity, "no records for city '" + id + "'");
    c.fraction = static_cast<double>(c.driving) / static_cast<double>(c.total);
    report.cities.push_back(c);
  }
  std::stable_sort(report.cities.begin(), report.cities.end(),
                   [](const CityExtent& a, const CityExtent& b) { return a.fraction > b.fraction; });
  report.pooled_fraction =
      report.total == 0 ? 0.0 : static_cast<double>(report.driving) / static_cast<double>(report.total);
  return report;
}

}  // namespace snapdrive
