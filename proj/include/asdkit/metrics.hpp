#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "asdkit/machine_key.hpp"

namespace asdkit::metrics {

struct ScoredSample {
  double score = 0.0;
  bool anomalous = false;
  std::string name;
};

/// H(a): 1 when a > 0, else 0.
inline int hard_threshold(double a) { return a > 0.0 ? 1 : 0; }

enum class TieRule {
  kZero,  // H(0) = 0: a tied pair earns nothing (challenge definition)
  kHalf,  // Mann-Whitney convention, for comparison with external tools
};

/// Fraction of (normal, anomalous) pairs in which the anomalous sample scores
/// strictly higher. Exact integer counting, one division at the end.
double auc(std::span<const ScoredSample> samples, TieRule ties = TieRule::kZero);

/// floor(p * n_normal), tolerant of binary rounding in p * n (0.29 * 100 is 28.999...).
std::size_t pauc_normal_count(double p, std::size_t n_normal);

/// AUC restricted to the floor(p N-) highest-scoring normal samples, i.e. the
/// FPR range [0, p]. Throws DataError when that count is zero.
double pauc(std::span<const ScoredSample> samples, double p, TieRule ties = TieRule::kZero);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Empirical ROC: (0, 0), then one point per distinct score threshold in
/// descending order, ending at (1, 1).
std::vector<RocPoint> roc_curve(std::span<const ScoredSample> samples);
/// Trapezoidal area under a piecewise-linear curve.
double trapezoid_area(std::span<const RocPoint> curve);

struct MetricReport {
  MachineKey machine;
  double auc = 0.0;
  double pauc = 0.0;
  double p = 0.1;
  std::size_t n_normal = 0;
  std::size_t n_anomalous = 0;
};

MetricReport evaluate(const MachineKey& machine, std::span<const ScoredSample> samples, double p = 0.1,
                      TieRule ties = TieRule::kZero);

/// {"machine_type", "machine_id", "auc", "pauc", "p", "n_normal", "n_anomalous"}
std::string report_to_json(const MetricReport& r);
std::string reports_to_json(std::span<const MetricReport> reports);
std::vector<MetricReport> reports_from_json(const std::string& text);

/// Per-machine table, one row per ID: machine_type,machine_id,auc,pauc,n_normal,n_anomalous
std::string reports_to_csv(std::span<const MetricReport> reports);

/// How a Machine Type's AUC and pAUC are blended into the ranking metric:
/// auc_weight * AUC + (1 - auc_weight) * pAUC, averaged over the type's IDs.
struct RankWeighting {
  double auc_weight = 0.5;
};

struct LeaderboardEntry {
  std::string system;
  std::map<std::string, double> type_metric;  // per Machine Type
  std::map<std::string, double> type_rank;    // 1 = best, ties share the mean rank
  double average_rank = 0.0;
};

using SystemResults = std::map<std::string, std::map<MachineKey, MetricReport>>;

/// Ranks systems per Machine Type and averages the ranks. Entries come back
/// ordered by average rank, then system name. Throws DataError when systems
/// cover different MachineKeys.
std::vector<LeaderboardEntry> rank_systems(const SystemResults& results, RankWeighting weighting = {});

std::string leaderboard_to_json(std::span<const LeaderboardEntry> board);
std::string leaderboard_to_csv(std::span<const LeaderboardEntry> board);

}  // namespace asdkit::metrics
