#pragma once

// Segmentation quality and certification metrics. All accumulation is in
// integer counts; division happens only when a metric is read out, so merge
// order never changes a result.

#include <cstdint>
#include <optional>
#include <vector>

#include "patchcert/certifier.hpp"
#include "patchcert/grid.hpp"

namespace patchcert::metrics {

struct ClassCounts {
  std::int64_t tp = 0;
  std::int64_t fn = 0;
  std::int64_t fp = 0;
  std::int64_t ctp = 0;  // certified true positives

  std::int64_t positives() const noexcept { return tp + fn; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Per-class counts, indexed by class.
using ClassStats = std::vector<ClassCounts>;

BinaryMap accuracy_map(const SegMap& pred, const SegMap& gt);

/// Fraction of non-ignored pixels where pred == gt.
double global_accuracy(const SegMap& pred, const SegMap& gt);

/// TP/FN/FP per class; pixels carrying gt's ignore label are skipped.
ClassStats confusion_counts(const SegMap& pred, const SegMap& gt, int num_classes);

/// Confusion counts of cert.segmentation plus cTP (certified and correct).
ClassStats certified_recall(const CertifiedOutput& cert, const SegMap& gt);

/// Certified-and-correct pixels over non-ignored pixels of one image.
double percent_certified_correct(const CertifiedOutput& cert, const SegMap& gt);

struct ImageStats {
  ClassStats classes;
  std::int64_t evaluated_pixels = 0;
  std::int64_t certified_correct = 0;
  bool has_cert = false;
  /// Ground-truth pixel count per class.
  std::vector<std::int64_t> class_pixels;
};

ImageStats evaluate_image(const SegMap& pred, const BinaryMap* cert, const SegMap& gt,
                          int num_classes);

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return den > 0 ? static_cast<double>(num) / den : 0.0; }
  friend auto operator<=>(const Fraction&, const Fraction&) = default;
};

class DatasetAggregate {
 public:
  explicit DatasetAggregate(int num_classes);

  void add(const ImageStats& image);
  void merge(const DatasetAggregate& other);

  int num_classes() const noexcept { return static_cast<int>(totals_.size()); }
  const ClassStats& totals() const noexcept { return totals_; }
  /// Images with at least one non-ignored pixel.
  std::size_t image_count() const noexcept { return per_image_certified_.size(); }
  const std::vector<Fraction>& per_image_certified() const noexcept {
    return per_image_certified_;
  }

  /// Mean over images where the class appears of its pixel fraction;
  /// nullopt for classes never present.
  std::vector<std::optional<double>> presence() const;

 private:
  ClassStats totals_;
  std::vector<Fraction> per_image_certified_;
  std::vector<std::vector<Fraction>> presence_;
};

/// Mean IoU over classes with TP + FN + FP > 0.
double miou(const DatasetAggregate& agg);
double miou(const ClassStats& stats);

struct RecallPair {
  double mean_recall = 0.0;
  double certified_mean_recall = 0.0;
};

/// Pooled per-class recall sum(TP)/sum(P) and sum(cTP)/sum(P), averaged over
/// the subset. Classes with P = 0 are dropped; empty subset throws.
RecallPair mean_recall(const DatasetAggregate& agg, const std::vector<int>& class_subset);
RecallPair mean_recall(const DatasetAggregate& agg);

/// Unweighted mean of per-image certified-correct fractions.
double percent_certified(const DatasetAggregate& agg);

std::vector<int> select_big_classes(const std::vector<std::optional<double>>& presence,
                                    double threshold = 0.20);

}  // namespace patchcert::metrics
