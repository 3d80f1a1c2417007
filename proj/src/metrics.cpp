#include "patchcert/metrics.hpp"

#include <algorithm>

#include "patchcert/errors.hpp"

namespace patchcert::metrics {

namespace {

void check_pair(const SegMap& pred, const SegMap& gt) {
  if (!pred.same_shape(gt)) {
    throw DimensionError("prediction " + std::to_string(pred.height()) + "x" +
                         std::to_string(pred.width()) + " does not match ground truth " +
                         std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
  }
}

void check_label(Label l, int num_classes) {
  if (l >= num_classes) {
    throw Error("label " + std::to_string(l) + " out of range for " +
                std::to_string(num_classes) + " classes");
  }
}

// Sum of fractions in a canonical order.
double sum_sorted(std::vector<Fraction> fractions) {
  std::sort(fractions.begin(), fractions.end());
  double sum = 0.0;
  for (const auto& f : fractions) sum += f.value();
  return sum;
}

}  // namespace

BinaryMap accuracy_map(const SegMap& pred, const SegMap& gt) {
  check_pair(pred, gt);
  BinaryMap out(pred.height(), pred.width());
  for (int r = 0; r < pred.height(); ++r)
    for (int c = 0; c < pred.width(); ++c) out.set(r, c, pred.at(r, c) == gt.at(r, c));
  return out;
}

double global_accuracy(const SegMap& pred, const SegMap& gt) {
  check_pair(pred, gt);
  std::int64_t correct = 0;
  std::int64_t total = 0;
  for (int r = 0; r < pred.height(); ++r) {
    for (int c = 0; c < pred.width(); ++c) {
      if (gt.ignored(r, c) || pred.ignored(r, c)) continue;
      ++total;
      correct += pred.at(r, c) == gt.at(r, c) ? 1 : 0;
    }
  }
  return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

ImageStats evaluate_image(const SegMap& pred, const BinaryMap* cert, const SegMap& gt,
                          int num_classes) {
  check_pair(pred, gt);
  if (cert != nullptr && (cert->height() != gt.height() || cert->width() != gt.width())) {
    throw DimensionError("certification map does not match ground truth");
  }
  ImageStats s;
  s.classes.resize(static_cast<std::size_t>(num_classes));
  s.class_pixels.assign(static_cast<std::size_t>(num_classes), 0);
  s.has_cert = cert != nullptr;
  for (int r = 0; r < gt.height(); ++r) {
    for (int c = 0; c < gt.width(); ++c) {
      if (gt.ignored(r, c)) continue;
      const Label truth = gt.at(r, c);
      const Label guess = pred.at(r, c);
      check_label(truth, num_classes);
      check_label(guess, num_classes);
      ++s.evaluated_pixels;
      ++s.class_pixels[truth];
      if (guess == truth) {
        ++s.classes[truth].tp;
        if (cert != nullptr && cert->at(r, c)) {
          ++s.classes[truth].ctp;
          ++s.certified_correct;
        }
      } else {
        ++s.classes[truth].fn;
        ++s.classes[guess].fp;
      }
    }
  }
  return s;
}

ClassStats confusion_counts(const SegMap& pred, const SegMap& gt, int num_classes) {
  return evaluate_image(pred, nullptr, gt, num_classes).classes;
}

ClassStats certified_recall(const CertifiedOutput& cert, const SegMap& gt) {
  return evaluate_image(cert.segmentation, &cert.cert_map, gt, cert.segmentation.num_classes())
      .classes;
}

double percent_certified_correct(const CertifiedOutput& cert, const SegMap& gt) {
  const auto s =
      evaluate_image(cert.segmentation, &cert.cert_map, gt, cert.segmentation.num_classes());
  return s.evaluated_pixels > 0
             ? static_cast<double>(s.certified_correct) / static_cast<double>(s.evaluated_pixels)
             : 0.0;
}

DatasetAggregate::DatasetAggregate(int num_classes)
    : totals_(static_cast<std::size_t>(num_classes)),
      presence_(static_cast<std::size_t>(num_classes)) {
  if (num_classes < 1) throw Error("aggregate needs at least one class");
}

void DatasetAggregate::add(const ImageStats& image) {
  if (image.classes.size() != totals_.size()) {
    throw Error("image statistics have a different class count");
  }
  for (std::size_t k = 0; k < totals_.size(); ++k) {
    totals_[k].tp += image.classes[k].tp;
    totals_[k].fn += image.classes[k].fn;
    totals_[k].fp += image.classes[k].fp;
    totals_[k].ctp += image.classes[k].ctp;
    if (image.class_pixels[k] > 0) {
      presence_[k].push_back({image.class_pixels[k], image.evaluated_pixels});
    }
  }
  if (image.evaluated_pixels > 0) {
    per_image_certified_.push_back({image.certified_correct, image.evaluated_pixels});
  }
}

void DatasetAggregate::merge(const DatasetAggregate& other) {
  if (other.totals_.size() != totals_.size()) throw Error("class count mismatch in merge");
  for (std::size_t k = 0; k < totals_.size(); ++k) {
    totals_[k].tp += other.totals_[k].tp;
    totals_[k].fn += other.totals_[k].fn;
    totals_[k].fp += other.totals_[k].fp;
    totals_[k].ctp += other.totals_[k].ctp;
    presence_[k].insert(presence_[k].end(), other.presence_[k].begin(), other.presence_[k].end());
  }
  per_image_certified_.insert(per_image_certified_.end(), other.per_image_certified_.begin(),
                              other.per_image_certified_.end());
}

std::vector<std::optional<double>> DatasetAggregate::presence() const {
  std::vector<std::optional<double>> out(presence_.size());
  for (std::size_t k = 0; k < presence_.size(); ++k) {
    if (!presence_[k].empty()) {
      out[k] = sum_sorted(presence_[k]) / static_cast<double>(presence_[k].size());
    }
  }
  return out;
}

double miou(const ClassStats& stats) {
  double sum = 0.0;
  int evaluable = 0;
  for (const auto& c : stats) {
    const auto denom = c.tp + c.fn + c.fp;
    if (denom == 0) continue;
    sum += static_cast<double>(c.tp) / static_cast<double>(denom);
    ++evaluable;
  }
  if (evaluable == 0) throw Error("no class has any predicted or ground-truth pixels");
  return sum / evaluable;
}

double miou(const DatasetAggregate& agg) { return miou(agg.totals()); }

RecallPair mean_recall(const DatasetAggregate& agg, const std::vector<int>& class_subset) {
  RecallPair out;
  int used = 0;
  for (int k : class_subset) {
    if (k < 0 || k >= agg.num_classes()) throw Error("class " + std::to_string(k) + " out of range");
    const auto& c = agg.totals()[static_cast<std::size_t>(k)];
    if (c.positives() == 0) continue;
    out.mean_recall += static_cast<double>(c.tp) / static_cast<double>(c.positives());
    out.certified_mean_recall += static_cast<double>(c.ctp) / static_cast<double>(c.positives());
    ++used;
  }
  if (used == 0) throw Error("mean recall over an empty class subset");
  out.mean_recall /= used;
  out.certified_mean_recall /= used;
  return out;
}

RecallPair mean_recall(const DatasetAggregate& agg) {
  std::vector<int> all(static_cast<std::size_t>(agg.num_classes()));
  for (int k = 0; k < agg.num_classes(); ++k) all[static_cast<std::size_t>(k)] = k;
  return mean_recall(agg, all);
}

double percent_certified(const DatasetAggregate& agg) {
  if (agg.image_count() == 0) return 0.0;
  return sum_sorted(agg.per_image_certified()) / static_cast<double>(agg.image_count());
}

std::vector<int> select_big_classes(const std::vector<std::optional<double>>& presence,
                                    double threshold) {
  std::vector<int> out;
  for (std::size_t k = 0; k < presence.size(); ++k) {
    if (presence[k] && *presence[k] > threshold) out.push_back(static_cast<int>(k));
  }
  return out;
}

}  // namespace patchcert::metrics
