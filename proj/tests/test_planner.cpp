#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "support.hpp"
#include "teesplit/teesplit.hpp"

using namespace teesplit;

namespace {

// Privacy report whose points at index >= first_private sit well below the
// threshold and everything earlier well above it.
PrivacyReport step_curve(const ModelGraph& g, std::size_t first_private) {
  PrivacyReport r;
  r.model_name = g.name();
  const auto& pts = g.partition_points();
  for (std::size_t i = 0; i < pts.size(); ++i)
    r.per_point.push_back({pts[i].label, pts[i].boundary, i < first_private ? 0.6 : 0.1, 20, {}, {}});
  return r;
}

PartitionPlan plan_for(const std::string& arch, std::size_t first_private) {
  const ModelGraph g = build_architecture(arch);
  return plan(make_plan_request(g, shipped_profile(arch), step_curve(g, first_private)));
}

}  // namespace

TEST(Planner, ReferenceOptimaFromStepCurves) {
  const auto vgg = plan_for("vgg16", 7);
  ASSERT_TRUE(vgg.feasible());
  EXPECT_EQ(*vgg.chosen_boundary, "Layer 8");
  EXPECT_NEAR(vgg.breakdown.total_seconds, 1.4, 1e-9);
  EXPECT_NEAR(vgg.breakdown.speedup_vs_full_enclave * 100, 66.6, 0.5);
  EXPECT_EQ(vgg.alternatives.size(), 13u);

  const auto res = plan_for("resnet50", 3);
  ASSERT_TRUE(res.feasible());
  EXPECT_EQ(*res.chosen_boundary, "Layer 4");
  EXPECT_NEAR(res.breakdown.speedup_vs_full_enclave * 100, 10.4, 0.5);

  const auto eff = plan_for("efficientnetb0", 3);
  EXPECT_EQ(eff.chosen_boundary, "Layer 4");
  EXPECT_NEAR(eff.breakdown.speedup_vs_full_enclave * 100, 32.4, 0.5);
}

TEST(Planner, NothingPrivateFallsBackToFullEnclave) {
  const auto p = plan_for("resnet50", 99);
  EXPECT_FALSE(p.feasible());
  EXPECT_EQ(p.breakdown.total_seconds, p.full_enclave_seconds);
  EXPECT_EQ(p.breakdown.speedup_vs_full_enclave, 0.0);
  EXPECT_FALSE(p.privacy_score_at_choice.has_value());
  EXPECT_EQ(plan_csv_row(p), "resnet50,5,full-enclave,4.020,4.020,0.00");
}

TEST(Planner, SingleBoundaryModels) {
  PlanRequest r = oracle::random_plan_request(7, 1);
  r.privacy.per_point[0].mean_ssim = r.threshold;
  const auto ok = plan(r);
  EXPECT_EQ(ok.chosen_boundary, "P1");
  r.privacy.per_point[0].mean_ssim = r.threshold + 1e-9;
  EXPECT_FALSE(plan(r).feasible());
}

TEST(Planner, SlackToleratesHoveringCurve) {
  const ModelGraph g = build_architecture("efficientnetb0");
  PrivacyReport pr = step_curve(g, 0);
  const std::vector<double> v{0.7, 0.5, 0.19, 0.22, 0.21, 0.2, 0.18, 0.2};
  for (std::size_t i = 0; i < v.size(); ++i) pr.per_point[i].mean_ssim = v[i];
  const auto loose = plan(make_plan_request(g, shipped_profile("efficientnetb0"), pr, 0.2, 0.05));
  EXPECT_EQ(loose.chosen_boundary, "Layer 3");
  const auto strict = plan(make_plan_request(g, shipped_profile("efficientnetb0"), pr, 0.2, 0.0));
  EXPECT_EQ(strict.chosen_boundary, "Layer 6");
}

TEST(Planner, MatchesBruteForceAndIsSound) {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const PlanRequest r = oracle::random_plan_request(seed, 1 + seed % 15);
    const PartitionPlan fast = plan(r), slow = brute_force_plan(r);
    ASSERT_EQ(fast, slow) << "seed " << seed;
    if (!fast.feasible()) {
      EXPECT_EQ(fast.breakdown.total_seconds, r.profile.full_enclave_seconds);
      continue;
    }
    // Soundness: the chosen point meets the threshold and nothing after it
    // exceeds threshold + slack.
    std::size_t idx = 0;
    while (r.partitions[idx].boundary_label != *fast.chosen_boundary) ++idx;
    EXPECT_LE(r.privacy.per_point[idx].mean_ssim, r.threshold);
    for (std::size_t j = idx + 1; j < r.partitions.size(); ++j)
      EXPECT_LE(r.privacy.per_point[j].mean_ssim, r.threshold + r.slack);
    // Optimality with earliest-on-tie.
    for (std::size_t j = 0; j < fast.alternatives.size(); ++j) {
      if (!fast.alternatives[j].feasible) continue;
      if (j < idx) EXPECT_GT(fast.alternatives[j].breakdown.total_seconds, fast.breakdown.total_seconds);
      else EXPECT_GE(fast.alternatives[j].breakdown.total_seconds, fast.breakdown.total_seconds);
    }
  }
}

TEST(Planner, LooserThresholdNeverSlowsThePlan) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    PlanRequest r = oracle::random_plan_request(seed, 2 + seed % 10);
    double prev = 1e300;
    for (double thr = 0.05; thr <= 1.0; thr += 0.05) {
      r.threshold = thr;
      const double t = plan(r).breakdown.total_seconds;
      EXPECT_LE(t, prev + 1e-12) << "seed " << seed << " threshold " << thr;
      prev = t;
    }
  }
}

TEST(Planner, ReportsPrivatePartitionEvenWhenSlowerThanBaseline) {
  PlanRequest r = oracle::random_plan_request(5, 3);
  for (auto& p : r.privacy.per_point) p.mean_ssim = 0.5;
  r.threshold = 0.2;
  const PartitionPlan before = plan(r);
  ASSERT_FALSE(before.feasible());
  r.profile.full_enclave_seconds = 0.5 * predict(r.profile, r.partitions.back()).total_seconds;
  r.privacy.per_point.back().mean_ssim = 0.1;
  const PartitionPlan after = plan(r);
  ASSERT_EQ(after.chosen_boundary, "P3");
  EXPECT_LT(after.breakdown.speedup_vs_full_enclave, 0.0);
  EXPECT_EQ(after.breakdown.speedup_vs_full_enclave, -1.0);
}

TEST(Planner, RejectsMismatchedInputs) {
  PlanRequest r = oracle::random_plan_request(3, 4);
  r.privacy.per_point[2].boundary_label = "other";
  EXPECT_THROW(plan(r), InvalidArgument);
  r = oracle::random_plan_request(3, 4);
  r.profile.per_point.pop_back();
  EXPECT_THROW(plan(r), InvalidArgument);
  r = oracle::random_plan_request(3, 4);
  r.partitions.clear();
  r.profile.per_point.clear();
  r.privacy.per_point.clear();
  EXPECT_THROW(plan(r), InvalidArgument);
  r = oracle::random_plan_request(3, 4);
  r.threshold = 0;
  EXPECT_THROW(plan(r), InvalidArgument);

  const ModelGraph vgg = build_architecture("vgg16");
  EXPECT_THROW(plan(make_plan_request(vgg, shipped_profile("resnet50"), step_curve(vgg, 7))), InvalidArgument);
}

TEST(Planner, CsvRows) {
  std::ostringstream os;
  write_plan_csv(os, {plan_for("vgg16", 7), plan_for("resnet50", 3)});
  EXPECT_EQ(os.str(),
            "model,total_partition_points,optimal_point,full_enclave_seconds,partitioned_seconds,speedup_percent\n"
            "vgg16,13,Layer 8,4.200,1.400,66.67\n"
            "resnet50,5,Layer 4,4.020,3.600,10.45\n");
}
