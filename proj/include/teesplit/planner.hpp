#pragma once

#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "teesplit/cost_model.hpp"
#include "teesplit/error.hpp"
#include "teesplit/model_graph.hpp"
#include "teesplit/privacy.hpp"

namespace teesplit {

struct PlanRequest {
  std::string model_name;
  CostProfile profile;
  PrivacyReport privacy;
  /// One assignment per partition point, in partition order; supplies the
  /// exposed tensor size for the transfer term.
  std::vector<PartitionAssignment> partitions;
  double threshold = kDefaultSsimThreshold;
  double slack = kDefaultSlack;

  /// Throws InvalidArgument unless profile, privacy report and partitions
  /// list the same boundary labels in the same order.
  void validate() const {
    if (partitions.empty()) throw InvalidArgument("plan request for " + model_name + " has no boundaries");
    if (!(threshold > 0)) throw InvalidArgument("threshold must be positive");
    if (!(slack >= 0)) throw InvalidArgument("slack must be nonnegative");
    const auto mismatch = [&](const std::string& what) {
      return InvalidArgument("plan request for " + model_name + ": " + what +
                             " boundary labels differ from the model's partition points");
    };
    if (profile.per_point.size() != partitions.size()) throw mismatch("cost profile");
    if (privacy.per_point.size() != partitions.size()) throw mismatch("privacy report");
    for (std::size_t i = 0; i < partitions.size(); ++i) {
      if (profile.per_point[i].boundary_label != partitions[i].boundary_label) throw mismatch("cost profile");
      if (privacy.per_point[i].boundary_label != partitions[i].boundary_label) throw mismatch("privacy report");
    }
  }
};

struct PlanAlternative {
  std::string boundary_label;
  RuntimeBreakdown breakdown;
  double mean_ssim = 0.0;
  bool feasible = false;
};

struct PartitionPlan {
  std::string model_name;
  /// Absent when no boundary is private enough; run everything in the enclave.
  std::optional<std::string> chosen_boundary;
  RuntimeBreakdown breakdown;
  std::optional<double> privacy_score_at_choice;
  double full_enclave_seconds = 0.0;
  std::vector<PlanAlternative> alternatives;

  bool feasible() const { return chosen_boundary.has_value(); }

  bool operator==(const PartitionPlan& o) const {
    if (chosen_boundary != o.chosen_boundary || privacy_score_at_choice != o.privacy_score_at_choice ||
        breakdown.total_seconds != o.breakdown.total_seconds || alternatives.size() != o.alternatives.size())
      return false;
    for (std::size_t i = 0; i < alternatives.size(); ++i)
      if (alternatives[i].feasible != o.alternatives[i].feasible) return false;
    return true;
  }
};

inline PlanRequest make_plan_request(const ModelGraph& model, CostProfile profile, PrivacyReport privacy,
                                     double threshold = kDefaultSsimThreshold,
                                     double slack = kDefaultSlack) {
  PlanRequest r;
  r.model_name = model.name();
  r.profile = std::move(profile);
  r.privacy = std::move(privacy);
  r.partitions = enumerate_partitions(model);
  r.threshold = threshold;
  r.slack = slack;
  return r;
}

namespace detail {

inline PartitionPlan plan_from_feasibility(const PlanRequest& req, const std::vector<bool>& feasible) {
  PartitionPlan plan;
  plan.model_name = req.model_name;
  plan.full_enclave_seconds = req.profile.full_enclave_seconds;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < req.partitions.size(); ++i) {
    PlanAlternative alt;
    alt.boundary_label = req.partitions[i].boundary_label;
    alt.breakdown = predict(req.profile, req.partitions[i]);
    alt.mean_ssim = req.privacy.per_point[i].mean_ssim;
    alt.feasible = feasible[i];
    // Strict comparison keeps the earlier boundary on ties.
    if (alt.feasible && (!best || alt.breakdown.total_seconds < plan.alternatives[*best].breakdown.total_seconds))
      best = i;
    plan.alternatives.push_back(std::move(alt));
  }
  if (best) {
    plan.chosen_boundary = plan.alternatives[*best].boundary_label;
    plan.breakdown = plan.alternatives[*best].breakdown;
    plan.privacy_score_at_choice = plan.alternatives[*best].mean_ssim;
  } else {
    plan.breakdown = full_enclave_breakdown(req.profile);
  }
  return plan;
}

}  // namespace detail

/// Fastest boundary among those that pass the privacy rule: own score at or
/// below the threshold, and no later score above threshold + slack.
inline PartitionPlan plan(const PlanRequest& req) {
  req.validate();
  std::vector<double> scores;
  for (const auto& p : req.privacy.per_point) scores.push_back(p.mean_ssim);
  return detail::plan_from_feasibility(req, qualifying_points(scores, req.threshold, req.slack));
}

/// Quadratic reference for plan(): checks the privacy rule independently at
/// every boundary.
inline PartitionPlan brute_force_plan(const PlanRequest& req) {
  req.validate();
  const auto& pts = req.privacy.per_point;
  std::vector<bool> feasible(pts.size(), false);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool ok = pts[i].mean_ssim <= req.threshold;
    for (std::size_t j = i + 1; ok && j < pts.size(); ++j) ok = pts[j].mean_ssim <= req.threshold + req.slack;
    feasible[i] = ok;
  }
  return detail::plan_from_feasibility(req, feasible);
}

inline const char* kPlanCsvHeader =
    "model,total_partition_points,optimal_point,full_enclave_seconds,partitioned_seconds,speedup_percent";

inline std::string plan_csv_row(const PartitionPlan& p) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  const double speedup = p.feasible() ? p.breakdown.speedup_vs_full_enclave * 100.0 : 0.0;
  os << p.model_name << ',' << p.alternatives.size() << ',' << p.chosen_boundary.value_or("full-enclave") << ','
     << p.full_enclave_seconds << ',' << p.breakdown.total_seconds << ',' << std::setprecision(2) << speedup;
  return os.str();
}

inline void write_plan_csv(std::ostream& os, const std::vector<PartitionPlan>& plans) {
  os << kPlanCsvHeader << '\n';
  for (const auto& p : plans) os << plan_csv_row(p) << '\n';
}

}  // namespace teesplit
