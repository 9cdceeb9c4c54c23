#include "refmap/eval.hpp"

#include <cstdio>

#include "refmap/errors.hpp"
#include "refmap/text_io.hpp"

namespace refmap::eval {

namespace {

constexpr std::size_t N = 0, G = 1, R = 2, O = 3, U = 4;

Metric ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string fmt(const Metric& m) {
  if (!m) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *m);
  return buf;
}

}  // namespace

std::size_t truth_class(TruthLabel label) {
  switch (label) {
    case TruthLabel::Normal: return N;
    case TruthLabel::Glass:
    case TruthLabel::Mirror:
    case TruthLabel::OtherRef: return G;
    case TruthLabel::Reflection: return R;
    case TruthLabel::Obstacle: return O;
  }
  throw Error(ErrorCode::ParseError, "unknown truth label");
}

std::size_t truth_class(int raw_label) {
  if (raw_label < 0 || raw_label > 5) throw Error(ErrorCode::ParseError, "truth label out of range");
  return truth_class(static_cast<TruthLabel>(raw_label));
}

const char* class_name(std::size_t cls) {
  static constexpr const char* names[] = {"Normal", "Surface", "Reflection", "Obstacle", "Removed"};
  return cls < 5 ? names[cls] : "?";
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t n) {
  if (truth >= kTruthClasses || predicted >= kPredictedClasses) {
    throw Error(ErrorCode::ShapeError, "confusion matrix index out of range");
  }
  counts[truth][predicted] += n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (std::size_t t = 0; t < kTruthClasses; ++t)
    for (std::size_t p = 0; p < kPredictedClasses; ++p) counts[t][p] += other.counts[t][p];
  return *this;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < kTruthClasses; ++t) s += row_sum(t);
  return s;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (auto c : counts[truth]) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t predicted) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < kTruthClasses; ++t) s += counts[t][predicted];
  return s;
}

std::array<ClassPR, kTruthClasses> precision_recall(const ConfusionMatrix& cm) {
  std::array<ClassPR, kTruthClasses> out;
  for (std::size_t c = 0; c < kTruthClasses; ++c) {
    out[c].precision = ratio(cm.counts[c][c], cm.column_sum(c));
    out[c].recall = ratio(cm.counts[c][c], cm.row_sum(c));
  }
  return out;
}

std::array<Metric, kTruthClasses> iou(const ConfusionMatrix& cm) {
  std::array<Metric, kTruthClasses> out;
  for (std::size_t c = 0; c < kTruthClasses; ++c) {
    const std::uint64_t tp = cm.counts[c][c];
    const std::uint64_t fp = cm.column_sum(c) - tp;
    const std::uint64_t fn = cm.row_sum(c) - tp;
    out[c] = ratio(tp, tp + fp + fn);
  }
  return out;
}

Metric iou_micro(const ConfusionMatrix& cm) {
  std::uint64_t tp = 0, den = 0;
  for (std::size_t c = 0; c < kTruthClasses; ++c) {
    const std::uint64_t t = cm.counts[c][c];
    tp += t;
    den += cm.column_sum(c) + cm.row_sum(c) - t;
  }
  return ratio(tp, den);
}

RemovalMetrics removal_metrics(const ConfusionMatrix& cm) {
  RemovalMetrics m;
  std::uint64_t retained = 0, retained_ok = 0;
  for (std::size_t t = 0; t < kTruthClasses; ++t) {
    for (std::size_t p : {N, G, O}) {
      retained += cm.counts[t][p];
      if (t != R) retained_ok += cm.counts[t][p];
    }
  }
  m.non_reflection_precision = ratio(retained_ok, retained);
  std::uint64_t indoor = 0, indoor_ok = 0;
  for (std::size_t t = 0; t < kTruthClasses; ++t) {
    for (std::size_t p : {N, G}) {
      indoor += cm.counts[t][p];
      if (t == N || t == G) indoor_ok += cm.counts[t][p];
    }
  }
  m.indoor_precision = ratio(indoor_ok, indoor);
  m.reflection_removal_rate = ratio(cm.counts[R][R] + cm.counts[R][U], cm.row_sum(R));
  return m;
}

Metric accuracy(const ConfusionMatrix& cm) {
  std::uint64_t diag = 0;
  for (std::size_t c = 0; c < kTruthClasses; ++c) diag += cm.counts[c][c];
  return ratio(diag, cm.total());
}

std::string format_report_table(const ConfusionMatrix& cm) {
  std::string out = "confusion matrix (rows: truth, columns: predicted)\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s", "");
  out += buf;
  for (std::size_t p = 0; p < kPredictedClasses; ++p) {
    std::snprintf(buf, sizeof buf, "%12s", class_name(p));
    out += buf;
  }
  out += "\n";
  for (std::size_t t = 0; t < kTruthClasses; ++t) {
    std::snprintf(buf, sizeof buf, "%-12s", class_name(t));
    out += buf;
    for (std::size_t p = 0; p < kPredictedClasses; ++p) {
      std::snprintf(buf, sizeof buf, "%12llu", static_cast<unsigned long long>(cm.counts[t][p]));
      out += buf;
    }
    out += "\n";
  }
  out += "\n";
  std::snprintf(buf, sizeof buf, "%-12s%12s%12s%12s\n", "class", "precision", "recall", "IoU");
  out += buf;
  const auto pr = precision_recall(cm);
  const auto j = iou(cm);
  for (std::size_t c = 0; c < kTruthClasses; ++c) {
    std::snprintf(buf, sizeof buf, "%-12s%12s%12s%12s\n", class_name(c), fmt(pr[c].precision).c_str(),
                  fmt(pr[c].recall).c_str(), fmt(j[c]).c_str());
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-12s%12s%12s%12s\n", "total", "", "", fmt(iou_micro(cm)).c_str());
  out += buf;
  out += "(total IoU is micro-averaged over pooled counts)\n\n";
  const auto rm = removal_metrics(cm);
  out += "non_reflection_precision " + fmt(rm.non_reflection_precision) + "\n";
  out += "indoor_precision         " + fmt(rm.indoor_precision) + "\n";
  out += "reflection_removal_rate  " + fmt(rm.reflection_removal_rate) + "\n";
  out += "accuracy                 " + fmt(accuracy(cm)) + "\n";
  return out;
}

std::string format_report_kv(const ConfusionMatrix& cm) {
  auto val = [](const Metric& m) { return m ? text::format_double(*m) : std::string("undefined"); };
  std::string out;
  out += "points=" + std::to_string(cm.total()) + "\n";
  for (std::size_t t = 0; t < kTruthClasses; ++t)
    for (std::size_t p = 0; p < kPredictedClasses; ++p)
      out += std::string("cm.") + class_name(t) + "." + class_name(p) + "=" + std::to_string(cm.counts[t][p]) + "\n";
  const auto pr = precision_recall(cm);
  const auto j = iou(cm);
  for (std::size_t c = 0; c < kTruthClasses; ++c) {
    out += std::string("precision.") + class_name(c) + "=" + val(pr[c].precision) + "\n";
    out += std::string("recall.") + class_name(c) + "=" + val(pr[c].recall) + "\n";
    out += std::string("iou.") + class_name(c) + "=" + val(j[c]) + "\n";
  }
  out += "iou.total_micro=" + val(iou_micro(cm)) + "\n";
  const auto rm = removal_metrics(cm);
  out += "non_reflection_precision=" + val(rm.non_reflection_precision) + "\n";
  out += "indoor_precision=" + val(rm.indoor_precision) + "\n";
  out += "reflection_removal_rate=" + val(rm.reflection_removal_rate) + "\n";
  out += "accuracy=" + val(accuracy(cm)) + "\n";
  return out;
}

}  // namespace refmap::eval
