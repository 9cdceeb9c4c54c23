#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "refmap/classify.hpp"
#include "refmap/cloud.hpp"

namespace refmap::eval {

inline constexpr std::size_t kTruthClasses = 4;      // N, G, R, O
inline constexpr std::size_t kPredictedClasses = 5;  // N, G, R, O, removed

/// Collapses the ground-truth channel: glass, mirror and other reflective
/// surfaces all count as G.
std::size_t truth_class(TruthLabel label);
std::size_t truth_class(int raw_label);

const char* class_name(std::size_t cls);

struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kPredictedClasses>, kTruthClasses> counts{};

  void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1);
  void add(TruthLabel truth, PointLabel predicted) {
    add(truth_class(truth), static_cast<std::size_t>(predicted));
  }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t column_sum(std::size_t predicted) const;
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// nullopt marks 0/0.
using Metric = std::optional<double>;

struct ClassPR {
  Metric precision;
  Metric recall;
};

std::array<ClassPR, kTruthClasses> precision_recall(const ConfusionMatrix& cm);
std::array<Metric, kTruthClasses> iou(const ConfusionMatrix& cm);
/// Pooled TP / (TP + FP + FN) over the four classes.
Metric iou_micro(const ConfusionMatrix& cm);

struct RemovalMetrics {
  Metric non_reflection_precision;
  Metric indoor_precision;
  Metric reflection_removal_rate;
};

RemovalMetrics removal_metrics(const ConfusionMatrix& cm);

/// Fraction of diagonal entries; predicted-removed counts as wrong.
Metric accuracy(const ConfusionMatrix& cm);

std::string format_report_table(const ConfusionMatrix& cm);
std::string format_report_kv(const ConfusionMatrix& cm);

}  // namespace refmap::eval
