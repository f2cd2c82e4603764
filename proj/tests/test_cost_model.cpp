#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "support.hpp"
#include "teesplit/teesplit.hpp"

using namespace teesplit;

namespace {

RuntimeBreakdown predict_at(const std::string& arch, const std::string& label) {
  return predict(shipped_profile(arch), assignment_for(build_architecture(arch), label));
}

}  // namespace

TEST(CostModel, ShippedProfilesReproduceReferenceTotals) {
  const auto vgg = predict_at("vgg16", "Layer 8");
  EXPECT_NEAR(vgg.total_seconds, 1.4, 1e-9);
  EXPECT_NEAR(vgg.speedup_vs_full_enclave * 100, 66.6, 0.5);

  const auto r4 = predict_at("resnet50", "Layer 4");
  EXPECT_NEAR(r4.total_seconds, 3.6, 1e-9);
  EXPECT_NEAR(r4.speedup_vs_full_enclave * 100, 10.4, 0.5);

  const auto r3 = predict_at("resnet50", "Layer 3");
  EXPECT_NEAR(r3.total_seconds, 3.04, 1e-9);
  EXPECT_NEAR(r3.speedup_vs_full_enclave * 100, 24.3, 0.5);

  const auto e4 = predict_at("efficientnetb0", "Layer 4");
  EXPECT_NEAR(e4.total_seconds, 2.5, 1e-9);
  EXPECT_NEAR(e4.speedup_vs_full_enclave * 100, 32.4, 0.5);
}

TEST(CostModel, BreakdownInvariants) {
  for (const auto& arch : profiled_architectures()) {
    const CostProfile p = shipped_profile(arch);
    EXPECT_NO_THROW(p.validate());
    double prev = 0;
    for (const auto& a : enumerate_partitions(build_architecture(arch))) {
      const auto b = predict(p, a);
      EXPECT_DOUBLE_EQ(b.total_seconds, b.enclave_seconds + b.transfer_seconds + b.accelerator_seconds);
      EXPECT_DOUBLE_EQ(b.speedup_vs_full_enclave, (p.full_enclave_seconds - b.total_seconds) / p.full_enclave_seconds);
      EXPECT_LT(b.speedup_vs_full_enclave, 1.0);
      EXPECT_GE(b.enclave_seconds, prev);
      prev = b.enclave_seconds;
      EXPECT_EQ(b, predict(p, a));
    }
  }
}

TEST(CostModel, TransferTimesStayInReferenceRange) {
  const TransferModel& t = builtin_transfer_model();
  std::uint64_t lo = UINT64_MAX, hi = 0;
  for (const auto& arch : builtin_architectures())
    for (const auto& a : enumerate_partitions(build_architecture(arch, {3, 224, 224}))) {
      const double s = t.seconds(a.exposed_tensor_bytes);
      EXPECT_GE(s, 0.02) << arch << ' ' << a.boundary_label;
      EXPECT_LE(s, 0.1) << arch << ' ' << a.boundary_label;
      if (arch != "toy4") lo = std::min(lo, a.exposed_tensor_bytes), hi = std::max(hi, a.exposed_tensor_bytes);
    }
  EXPECT_NEAR(t.seconds(lo), 0.02, 1e-12);
  EXPECT_NEAR(t.seconds(hi), 0.1, 1e-12);
  EXPECT_EQ(t.seconds(0), 0.02);
  EXPECT_EQ(t.seconds(UINT64_MAX / 2), 0.1);
}

TEST(CostModel, MacCountDefinitions) {
  LayerSpec fc;
  fc.kind = LayerKind::kFullyConnected;
  fc.name = "fc";
  fc.units = 5;
  EXPECT_EQ(mac_count(ModelGraph("fc", {10}, {fc}, {{"p", 1}}), "p"), 50u);

  LayerSpec conv;
  conv.kind = LayerKind::kConv2d;
  conv.name = "conv";
  conv.out_channels = 1;
  conv.kernel = 3;
  EXPECT_EQ(mac_count(ModelGraph("conv", {1, 6, 6}, {conv}, {{"p", 1}}), "p"), 144u);
  EXPECT_THROW(mac_count(ModelGraph("conv", {1, 6, 6}, {conv}, {{"p", 1}}), "q"), LookupError);
}

TEST(CostModel, Vgg16TotalMacsMatchHandTabulation) {
  EXPECT_EQ(total_macs(build_architecture("vgg16")), oracle::vgg16_macs_by_hand());
}

TEST(CostModel, ResNet50Layer2MacsMatchHandTabulation) {
  EXPECT_EQ(mac_count(build_architecture("resnet50"), "Layer 2"), oracle::resnet50_layer2_macs_by_hand());
}

TEST(CostModel, CalibrationReproducesEveryMeasuredTotal) {
  const ModelGraph g = build_architecture("vgg16");
  const TransferModel& t = builtin_transfer_model();
  std::vector<std::pair<std::string, double>> ms;
  double total = 0.75;
  for (const auto& p : g.partition_points()) ms.emplace_back(p.label, total += 0.25);
  const CostProfile prof = calibrate(g, ms, 4.2, 0.5, t);
  for (const auto& [label, secs] : ms) EXPECT_NEAR(predict(prof, assignment_for(g, label)).total_seconds, secs, 1e-12);
}

TEST(CostModel, TwoPointCalibrationInterpolatesBetweenEndpoints) {
  const ModelGraph g = build_architecture("vgg16");
  const CostProfile prof = calibrate(g, {{"Layer 1", 0.8}, {"Layer 13", 4.0}}, 4.2, 0.5, builtin_transfer_model());
  const double first = prof.per_point.front().enclave_prefix_seconds;
  const double last = prof.per_point.back().enclave_prefix_seconds;
  const double mid = prof.at("Layer 8").enclave_prefix_seconds;
  EXPECT_GT(mid, first);
  EXPECT_LT(mid, last);
  // Linear in cumulative MACs.
  const double m1 = static_cast<double>(mac_count(g, "Layer 1"));
  const double m8 = static_cast<double>(mac_count(g, "Layer 8"));
  const double m13 = static_cast<double>(mac_count(g, "Layer 13"));
  EXPECT_NEAR(mid, first + (last - first) * (m8 - m1) / (m13 - m1), 1e-12);
}

TEST(CostModel, CalibrationErrors) {
  const ModelGraph g = build_architecture("resnet50");
  const TransferModel& t = builtin_transfer_model();
  EXPECT_THROW(calibrate(g, {{"Layer 1", 1.0}}, 4.0, 0.5, t), InvalidArgument);
  EXPECT_THROW(calibrate(g, {{"Layer 1", 1.0}, {"Layer 5", 0.3}}, 4.0, 0.5, t), InvalidArgument);
  EXPECT_THROW(calibrate(g, {{"Layer 1", 1.0}, {"Layer 9", 2.0}, {"Layer 5", 3.0}}, 4.0, 0.5, t), LookupError);
  EXPECT_THROW(calibrate(g, {{"Layer 1", 1.0}, {"Layer 5", -3.0}}, 4.0, 0.5, t), InvalidArgument);
  EXPECT_THROW(calibrate(g, {{"Layer 1", 1.0}, {"Layer 5", 3.0}}, 0.0, 0.5, t), InvalidArgument);
  EXPECT_THROW(calibrate(g, {{"Layer 1", 0.01}, {"Layer 5", 3.0}}, 4.0, 0.5, t), InvalidArgument);
}

TEST(CostModel, UnknownBoundaryInPredict) {
  const CostProfile p = shipped_profile("resnet50");
  const auto a = assignment_for(build_architecture("vgg16"), "Layer 9");
  EXPECT_THROW(predict(p, a), LookupError);
  EXPECT_THROW(shipped_profile("toy4"), LookupError);
}

TEST(CostModel, SpeedupAntitoneWhenAcceleratorIsFaster) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 9;
    CostProfile p;
    p.model_name = "r";
    p.full_accelerator_seconds = 0.5;
    p.transfer = {0.0, 0.0, std::nullopt, std::nullopt};
    std::vector<double> enc(n), acc(n);
    for (std::size_t i = 0; i < n; ++i) {
      enc[i] = 0.1 + u(rng);
      acc[i] = enc[i] * u(rng);  // each layer no slower on the accelerator
    }
    double acc_total = 0;
    for (double a : acc) acc_total += a;
    double prefix = 0, acc_done = 0, enc_total = 0;
    for (double e : enc) enc_total += e;
    p.full_enclave_seconds = enc_total;
    std::vector<PartitionAssignment> as;
    for (std::size_t i = 0; i < n; ++i) {
      prefix += enc[i];
      acc_done += acc[i];
      const std::string label = "P" + std::to_string(i);
      p.per_point.push_back({label, prefix, acc_total - acc_done});
      PartitionAssignment a;
      a.boundary_label = label;
      a.exposed_tensor_bytes = 1000;
      as.push_back(a);
    }
    double prev = 2.0;
    for (const auto& a : as) {
      const double s = predict(p, a).speedup_vs_full_enclave;
      EXPECT_LE(s, prev + 1e-12);
      prev = s;
    }
  }
}

TEST(CostModel, JsonRoundTripAndLoading) {
  const CostProfile p = shipped_profile("efficientnetb0");
  const CostProfile back = profile_from_json(nlohmann::json::parse(to_json(p).dump()));
  EXPECT_EQ(to_json(back), to_json(p));

  const auto path = std::filesystem::temp_directory_path() / "teesplit_profile_test.json";
  {
    std::ofstream out(path);
    out << to_json(p).dump(2);
  }
  EXPECT_EQ(to_json(load_profile(path.string())), to_json(p));
  EXPECT_EQ(to_json(load_profile("builtin:efficientnetb0")), to_json(p));
  std::filesystem::remove(path);
  EXPECT_THROW(load_profile("/nonexistent/profile.json"), LookupError);
  EXPECT_THROW(load_profile("builtin:alexnet"), LookupError);
  EXPECT_THROW(profile_from_json(nlohmann::json::parse(R"({"model_name": "x"})")), InvalidArgument);
}

TEST(CostModel, ValidateRejectsDecreasingPrefix) {
  CostProfile p = shipped_profile("vgg16");
  std::swap(p.per_point[2].enclave_prefix_seconds, p.per_point[3].enclave_prefix_seconds);
  EXPECT_THROW(p.validate(), InvalidArgument);
}
