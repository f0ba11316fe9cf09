#include "snapdrive/annotation.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>

#include "csv.hpp"
#include "snapdrive/error.hpp"

namespace snapdrive {

AnnotationMatrix::AnnotationMatrix(std::vector<std::vector<int>> counts, std::vector<std::string> item_ids,
                                   std::vector<std::string> categories)
    : counts_(std::move(counts)), item_ids_(std::move(item_ids)), category_names_(std::move(categories)) {
  if (counts_.empty()) fail(ErrorCode::kInvalidArgument, "annotation matrix has no items");
  const std::size_t k = counts_.front().size();
  if (k < 2) fail(ErrorCode::kInvalidArgument, "annotation matrix needs at least two categories");
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    const auto& row = counts_[i];
    if (row.size() != k) fail(ErrorCode::kShape, "annotation row " + std::to_string(i) + " has wrong width");
    int sum = 0;
    for (int c : row) {
      if (c < 0) fail(ErrorCode::kInvalidArgument, "negative rater count");
      sum += c;
    }
    if (i == 0) {
      raters_ = sum;
    } else if (sum != raters_) {
      fail(ErrorCode::kHeterogeneousRaters, "item " + std::to_string(i) + " has " + std::to_string(sum) +
                                                " ratings, expected " + std::to_string(raters_));
    }
  }
  if (raters_ < 2) fail(ErrorCode::kInvalidArgument, "need at least two raters per item");
  if (item_ids_.empty()) {
    item_ids_.reserve(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i) item_ids_.push_back(std::to_string(i));
  } else if (item_ids_.size() != counts_.size()) {
    fail(ErrorCode::kShape, "item id count does not match rows");
  }
  if (!category_names_.empty() && category_names_.size() != k) {
    fail(ErrorCode::kShape, "category name count does not match columns");
  }
}

std::vector<GroundTruthLabel> adjudicate(const AnnotationMatrix& matrix, std::size_t positive_category,
                                         int min_agree) {
  if (matrix.categories() != 2) fail(ErrorCode::kUnsupportedCategories, "adjudication requires two categories");
  if (positive_category >= 2) fail(ErrorCode::kInvalidArgument, "positive category out of range");
  if (min_agree < 1 || min_agree > matrix.raters_per_item()) {
    fail(ErrorCode::kInvalidArgument, "min_agree must be in [1, raters per item]");
  }
  std::vector<GroundTruthLabel> out;
  out.reserve(matrix.items());
  for (std::size_t i = 0; i < matrix.items(); ++i) {
    const int positive = matrix.count(i, positive_category);
    GroundTruthLabel g;
    g.item_id = matrix.item_ids()[i];
    if (positive >= min_agree) {
      g.label = Label::kDriving;
      g.support = positive;
    } else {
      g.label = Label::kNonDriving;
      g.support = matrix.raters_per_item() - positive;
    }
    out.push_back(std::move(g));
  }
  return out;
}

FleissKappa fleiss_kappa_detail(const AnnotationMatrix& matrix) {
  const double n = matrix.raters_per_item();
  const double items = static_cast<double>(matrix.items());
  const std::size_t k = matrix.categories();
  std::vector<double> column_totals(k, 0.0);
  double agreement_sum = 0.0;
  for (const auto& row : matrix.counts()) {
    double squares = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      squares += static_cast<double>(row[j]) * row[j];
      column_totals[j] += row[j];
    }
    agreement_sum += (squares - n) / (n * (n - 1.0));
  }
  FleissKappa out;
  out.observed = agreement_sum / items;
  for (double total : column_totals) {
    const double p = total / (items * n);
    out.expected += p * p;
  }
  if (out.expected >= 1.0) {
    out.degenerate = true;
    out.kappa = 1.0;
    return out;
  }
  out.kappa = (out.observed - out.expected) / (1.0 - out.expected);
  return out;
}

std::vector<Rating> read_ratings_csv(std::istream& in) {
  std::vector<Rating> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto f = detail::split_csv_line(line);
    if (line_no == 1 && !f.empty() && f[0] == "item_id") continue;
    if (f.size() != 3) {
      fail(ErrorCode::kCorruptInput, "annotation line " + std::to_string(line_no) + ": expected 3 columns");
    }
    out.push_back({std::move(f[0]), std::move(f[1]), std::string(detail::trim(f[2]))});
  }
  if (in.bad()) fail(ErrorCode::kIo, "read error on annotation stream");
  return out;
}

void write_ratings_csv(std::ostream& out, std::span<const Rating> ratings) {
  out << "item_id,rater_id,category\n";
  for (const auto& r : ratings) {
    out << detail::csv_field(r.item_id) << ',' << detail::csv_field(r.rater_id) << ','
        << detail::csv_field(r.category) << '\n';
  }
}

AnnotationMatrix pivot_ratings(std::span<const Rating> ratings, const std::vector<std::string>& categories,
                               int raters_per_item) {
  if (ratings.empty()) fail(ErrorCode::kEmptyInput, "no ratings");
  if (raters_per_item < 2) fail(ErrorCode::kInvalidArgument, "raters_per_item must be >= 2");
  std::map<std::string, std::size_t> category_index;
  for (std::size_t j = 0; j < categories.size(); ++j) category_index[categories[j]] = j;

  std::unordered_map<std::string, std::size_t> item_row;
  std::vector<std::string> item_ids;
  std::vector<std::vector<int>> counts;
  std::vector<int> used;
  std::set<std::pair<std::string, std::string>> seen;

  for (const auto& r : ratings) {
    if (!seen.emplace(r.item_id, r.rater_id).second) {
      fail(ErrorCode::kInvalidArgument, "duplicate rating for item '" + r.item_id + "' by rater '" + r.rater_id + "'");
    }
    auto cat = category_index.find(r.category);
    if (cat == category_index.end()) {
      fail(ErrorCode::kUnsupportedCategories, "unknown category '" + r.category + "'");
    }
    auto [it, inserted] = item_row.try_emplace(r.item_id, counts.size());
    if (inserted) {
      item_ids.push_back(r.item_id);
      counts.emplace_back(categories.size(), 0);
      used.push_back(0);
    }
    const std::size_t row = it->second;
    if (used[row] >= raters_per_item) continue;
    ++counts[row][cat->second];
    ++used[row];
  }
  for (std::size_t i = 0; i < used.size(); ++i) {
    if (used[i] < raters_per_item) {
      fail(ErrorCode::kHeterogeneousRaters, "item '" + item_ids[i] + "' has " + std::to_string(used[i]) +
                                                " ratings, need " + std::to_string(raters_per_item));
    }
  }
  return AnnotationMatrix(std::move(counts), std::move(item_ids), categories);
}

}  // namespace snapdrive
