#include "geoshape/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "geoshape/errors.hpp"

namespace geoshape {

std::vector<RocPoint> roc_curve(const std::vector<std::pair<double, int>>& scored) {
  long pos = 0, neg = 0;
  for (const auto& [s, y] : scored) (y ? pos : neg) += 1;
  std::vector<RocPoint> roc;
  if (pos == 0 || neg == 0) return roc;
  std::vector<std::pair<double, int>> sorted = scored;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  roc.push_back({0.0, 0.0});
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    double s = sorted[i].first;
    while (i < sorted.size() && sorted[i].first == s) {
      (sorted[i].second ? tp : fp) += 1;
      ++i;
    }
    roc.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
  }
  return roc;
}

double trapezoid_auc(const std::vector<RocPoint>& roc) {
  double area = 0.0;
  for (std::size_t k = 1; k < roc.size(); ++k)
    area += (roc[k].fpr - roc[k - 1].fpr) * 0.5 * (roc[k].tpr + roc[k - 1].tpr);
  return area;
}

MetricsReport compute_metrics(const std::vector<std::vector<double>>& scores,
                              const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw ContractViolation("compute_metrics: need matching, non-empty scores and labels");
  const std::size_t n = scores.size();
  const std::size_t n_classes = scores[0].size();
  if (n_classes < 1) throw ContractViolation("compute_metrics: need at least one class score");
  for (const auto& s : scores)
    if (s.size() != n_classes) throw ContractViolation("compute_metrics: ragged scores");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes)
      throw ContractViolation("compute_metrics: label out of range");

  MetricsReport m;
  std::vector<long> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0), tn(n_classes, 0);
  long correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t pred = 0;
    for (std::size_t c = 1; c < n_classes; ++c)
      if (scores[i][c] > scores[i][pred]) pred = c;
    std::size_t truth = static_cast<std::size_t>(labels[i]);
    if (pred == truth) ++correct;
    for (std::size_t c = 0; c < n_classes; ++c) {
      bool is_pred = (c == pred), is_truth = (c == truth);
      if (is_pred && is_truth) ++tp[c];
      else if (is_pred) ++fp[c];
      else if (is_truth) ++fn[c];
      else ++tn[c];
    }
  }
  m.accuracy = static_cast<double>(correct) / n;

  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  long TP = 0, FP = 0, FN = 0, TN = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    double p = ratio(tp[c], tp[c] + fp[c]);
    double s = ratio(tp[c], tp[c] + fn[c]);
    double sp = ratio(tn[c], tn[c] + fp[c]);
    m.per_class_precision.push_back(p);
    m.per_class_sensitivity.push_back(s);
    m.per_class_specificity.push_back(sp);
    m.per_class_f1.push_back(ratio(2.0 * p * s, p + s));
    TP += tp[c];
    FP += fp[c];
    FN += fn[c];
    TN += tn[c];
  }
  m.precision = ratio(TP, TP + FP);
  m.sensitivity = ratio(TP, TP + FN);
  m.specificity = ratio(TN, TN + FP);
  m.f1 = ratio(2.0 * m.precision * m.sensitivity, m.precision + m.sensitivity);

  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n * n_classes);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < n_classes; ++c)
      pooled.emplace_back(scores[i][c], labels[i] == static_cast<int>(c) ? 1 : 0);
  m.roc = roc_curve(pooled);
  if (!m.roc.empty()) m.auc = trapezoid_auc(m.roc);
  return m;
}

std::string metrics_to_json(const MetricsReport& m) {
  nlohmann::json j;
  j["accuracy"] = m.accuracy;
  if (m.auc)
    j["auc"] = *m.auc;
  else
    j["auc"] = nullptr;
  j["f1"] = m.f1;
  j["precision"] = m.precision;
  j["sensitivity"] = m.sensitivity;
  j["specificity"] = m.specificity;
  j["per_class"] = {{"precision", m.per_class_precision},
                    {"sensitivity", m.per_class_sensitivity},
                    {"specificity", m.per_class_specificity},
                    {"f1", m.per_class_f1}};
  return j.dump(2) + "\n";
}

namespace {

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace

std::string roc_to_csv(const std::vector<RocPoint>& roc) {
  std::string out = "fpr,tpr\n";
  for (const RocPoint& p : roc) out += fmt(p.fpr) + "," + fmt(p.tpr) + "\n";
  return out;
}

std::string robustness_to_csv(const std::vector<std::pair<double, double>>& rows) {
  std::string out = "epsilon,accuracy\n";
  for (const auto& [eps, acc] : rows) out += fmt(eps) + "," + fmt(acc) + "\n";
  return out;
}

}  // namespace geoshape
