#pragma once
#include <optional>
#include <string>
#include <vector>

namespace geoshape {

struct RocPoint {
  double fpr = 0.0, tpr = 0.0;
};

struct MetricsReport {
  double accuracy = 0.0;
  std::optional<double> auc;  // empty when only one class is present
  double f1 = 0.0, precision = 0.0, sensitivity = 0.0, specificity = 0.0;
  std::vector<double> per_class_precision, per_class_sensitivity, per_class_specificity,
      per_class_f1;
  std::vector<RocPoint> roc;  // micro-averaged one-vs-rest polyline
};

// Binary ROC polyline from (score, is_positive) pairs: thresholds swept from
// +inf downward, tied scores collapsed into a single step, endpoints (0,0)
// and (1,1) included.
std::vector<RocPoint> roc_curve(const std::vector<std::pair<double, int>>& scored);
double trapezoid_auc(const std::vector<RocPoint>& roc);

// scores[i] holds one score per class for sample i; prediction is the argmax
// (lowest class index wins ties).  Aggregate metrics are micro-averaged over
// the per-class one-vs-rest confusion counts; the AUC pools every
// (score, class) pair into one binary problem.
MetricsReport compute_metrics(const std::vector<std::vector<double>>& scores,
                              const std::vector<int>& labels);

// JSON object with keys: accuracy, auc (number or null), f1, precision,
// sensitivity, specificity, per_class.  Stable formatting, fit for
// byte-comparison across runs.
std::string metrics_to_json(const MetricsReport& m);

std::string roc_to_csv(const std::vector<RocPoint>& roc);                      // fpr,tpr
std::string robustness_to_csv(const std::vector<std::pair<double, double>>&);  // epsilon,accuracy

}  // namespace geoshape
