#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "snapdrive/types.hpp"

namespace snapdrive {

/// Items x categories table of rater counts, with the same number of raters
/// on every item.
class AnnotationMatrix {
 public:
  /// Throws kInvalidArgument for empty/ragged/negative input, fewer than two
  /// categories, or fewer than two raters. Throws kHeterogeneousRaters when
  /// row sums differ.
  AnnotationMatrix(std::vector<std::vector<int>> counts, std::vector<std::string> item_ids = {},
                   std::vector<std::string> categories = {});

  std::size_t items() const noexcept { return counts_.size(); }
  std::size_t categories() const noexcept { return counts_.front().size(); }
  int raters_per_item() const noexcept { return raters_; }
  int count(std::size_t item, std::size_t category) const { return counts_.at(item).at(category); }
  const std::vector<std::vector<int>>& counts() const noexcept { return counts_; }
  const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }
  const std::vector<std::string>& category_names() const noexcept { return category_names_; }

 private:
  std::vector<std::vector<int>> counts_;
  std::vector<std::string> item_ids_;
  std::vector<std::string> category_names_;
  int raters_ = 0;
};

struct GroundTruthLabel {
  std::string item_id;
  Label label = Label::kNonDriving;
  int support = 0;  // raters agreeing with `label`
};

/// Positive iff at least `min_agree` raters chose `positive_category`.
/// Throws kUnsupportedCategories for non-binary matrices.
std::vector<GroundTruthLabel> adjudicate(const AnnotationMatrix& matrix, std::size_t positive_category,
                                         int min_agree = 2);

struct FleissKappa {
  double kappa = 0.0;
  double observed = 0.0;  // mean per-item agreement
  double expected = 0.0;  // chance agreement from category marginals
  /// All ratings fell in one category (expected agreement 1); kappa is
  /// reported as 1.
  bool degenerate = false;
};

FleissKappa fleiss_kappa_detail(const AnnotationMatrix& matrix);
inline double fleiss_kappa(const AnnotationMatrix& matrix) { return fleiss_kappa_detail(matrix).kappa; }

/// One row of the long-format annotation CSV (item_id,rater_id,category).
struct Rating {
  std::string item_id;
  std::string rater_id;
  std::string category;
};

std::vector<Rating> read_ratings_csv(std::istream& in);
void write_ratings_csv(std::ostream& out, std::span<const Rating> ratings);

/// Pivots long-format ratings into a matrix with exactly `raters_per_item`
/// ratings per item. Extra ratings beyond the first `raters_per_item` (in
/// input order) are dropped. Items are ordered by first appearance.
/// Errors: duplicate (item, rater) -> kInvalidArgument; unknown category ->
/// kUnsupportedCategories; an item with too few ratings -> kHeterogeneousRaters.
AnnotationMatrix pivot_ratings(std::span<const Rating> ratings, const std::vector<std::string>& categories,
                               int raters_per_item = 3);

}  // namespace snapdrive
