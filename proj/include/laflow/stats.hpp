#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "laflow/fields.hpp"
#include "laflow/trace.hpp"

namespace laflow {

struct CohortRow {
  std::string subject_id;
  std::string group;
  double age = 0.0;
  std::map<std::string, double> metrics;
};

/// subject x group x age x metric table feeding the statistics layer.
/// CSV schema: subject_id, group, age, then metric columns.
struct CohortTable {
  std::vector<CohortRow> rows;

  static CohortTable from_csv(const std::filesystem::path& file);

  std::vector<std::string> group_names() const;
  std::vector<double> metric_for_group(const std::string& group,
                                       const std::string& metric) const;
};

struct EffectResult {
  std::string name;  // "group" or "age"
  double ss = 0.0;
  int df = 0;
  double F = 0.0;
  double p = 1.0;
  double partial_eta_sq = 0.0;
};

struct PosthocResult {
  std::string group_a, group_b;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  double cohens_d = 0.0;
  bool reject = false;
};

struct StatResult {
  std::vector<EffectResult> effects;
  double ss_residual = 0.0;
  int df_residual = 0;
  std::vector<PosthocResult> posthoc;
};

/// Linear model metric ~ group + age, Type II sums of squares,
/// partial eta squared per effect.
StatResult ancova(const CohortTable& table, const std::string& metric);

/// Omnibus ANCOVA followed, when the group effect is significant at
/// alpha, by pairwise Tukey + Cohen's d with Benjamini-Hochberg
/// correction across the pairs.
StatResult cohort_analysis(const CohortTable& table,
                           const std::string& metric, double alpha = 0.05);

/// Studentized-range CDF P(q_range <= q) for k groups and df degrees of
/// freedom, by Gauss-Legendre quadrature (abs tolerance ~1e-6).
double studentized_range_cdf(double q, int k, int df);

/// Inverse of the above at probability p (e.g. 0.95 for alpha = 0.05).
double studentized_range_quantile(double p, int k, int df);

/// Pairwise Tukey-Kramer p-values, pooled within-group variance.
/// Result is ordered (0,1), (0,2), ..., (k-2,k-1).
std::vector<double> tukey_hsd(const std::vector<std::vector<double>>& groups);

double cohens_d(const std::vector<double>& a, const std::vector<double>& b);

struct BhResult {
  std::vector<double> adjusted;
  std::vector<bool> reject;
};

/// Benjamini-Hochberg step-up procedure.
BhResult bh_adjust(const std::vector<double>& pvals, double alpha = 0.05);

struct PearsonCi {
  double r = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool degenerate = false;  // |r| = 1, Fisher interval undefined
};

PearsonCi pearson_ci(const std::vector<double>& x,
                     const std::vector<double>& y, double level = 0.95);

struct BlandAltman {
  double bias = 0.0;
  double loa_low = 0.0;
  double loa_high = 0.0;
};

BlandAltman bland_altman(const std::vector<double>& a,
                         const std::vector<double>& b);

double dice(const Mask& a, const Mask& b, int label);

/// 95th percentile (nearest rank) of the pooled directed surface
/// distances, mm, boundaries via 6-connectivity, exact Euclidean
/// distance transform.
double hausdorff95(const Mask& a, const Mask& b, int label);

/// Periodic cubic (Catmull-Rom) resampling of one cycle to n_out samples.
TimeTrace resample_cycle(const TimeTrace& trace, int n_out);

}  // namespace laflow
