#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "teesplit/architectures.hpp"
#include "teesplit/error.hpp"
#include "teesplit/model_graph.hpp"

namespace teesplit {

/// Feature-map save/transfer/load cost, affine in bytes, optionally clamped.
struct TransferModel {
  double base_seconds = 0.0;
  double seconds_per_byte = 0.0;
  std::optional<double> min_seconds;
  std::optional<double> max_seconds;

  double seconds(std::uint64_t bytes) const {
    double t = base_seconds + seconds_per_byte * static_cast<double>(bytes);
    if (min_seconds) t = std::max(t, *min_seconds);
    if (max_seconds) t = std::min(t, *max_seconds);
    return t;
  }
};

struct PointCost {
  std::string boundary_label;
  double enclave_prefix_seconds = 0.0;
  double accelerator_suffix_seconds = 0.0;
};

struct CostProfile {
  std::string model_name;
  double full_enclave_seconds = 0.0;
  double full_accelerator_seconds = 0.0;
  std::vector<PointCost> per_point;
  TransferModel transfer;

  const PointCost& at(const std::string& label) const {
    for (const auto& p : per_point)
      if (p.boundary_label == label) return p;
    throw LookupError("cost profile for " + model_name + " has no boundary '" + label + "'");
  }

  /// Checks the profile invariants; throws InvalidArgument on violation.
  void validate() const {
    if (!(full_enclave_seconds > 0) || !(full_accelerator_seconds > 0))
      throw InvalidArgument("profile " + model_name + ": full runtimes must be positive");
    if (transfer.base_seconds < 0 || transfer.seconds_per_byte < 0)
      throw InvalidArgument("profile " + model_name + ": transfer coefficients must be nonnegative");
    double prev = 0.0;
    for (const auto& p : per_point) {
      if (!(p.enclave_prefix_seconds > 0) || p.accelerator_suffix_seconds < 0)
        throw InvalidArgument("profile " + model_name + ": bad timings at '" + p.boundary_label + "'");
      if (p.enclave_prefix_seconds < prev)
        throw InvalidArgument("profile " + model_name + ": enclave prefix time decreases at '" +
                              p.boundary_label + "'");
      prev = p.enclave_prefix_seconds;
    }
  }
};

struct RuntimeBreakdown {
  std::string boundary_label;
  double enclave_seconds = 0.0;
  double transfer_seconds = 0.0;
  double accelerator_seconds = 0.0;
  double total_seconds = 0.0;
  double speedup_vs_full_enclave = 0.0;  // fraction; x100 for percent

  friend bool operator==(const RuntimeBreakdown&, const RuntimeBreakdown&) = default;
};

/// Predicted runtime of one split. The kernel switch is charged exactly once.
inline RuntimeBreakdown predict(const CostProfile& profile, const PartitionAssignment& a) {
  const PointCost& pc = profile.at(a.boundary_label);
  RuntimeBreakdown r;
  r.boundary_label = a.boundary_label;
  r.enclave_seconds = pc.enclave_prefix_seconds;
  r.transfer_seconds = profile.transfer.seconds(a.exposed_tensor_bytes);
  r.accelerator_seconds = pc.accelerator_suffix_seconds;
  r.total_seconds = r.enclave_seconds + r.transfer_seconds + r.accelerator_seconds;
  r.speedup_vs_full_enclave =
      (profile.full_enclave_seconds - r.total_seconds) / profile.full_enclave_seconds;
  return r;
}

/// Breakdown of running every layer in the enclave (no transfer).
inline RuntimeBreakdown full_enclave_breakdown(const CostProfile& profile) {
  RuntimeBreakdown r;
  r.boundary_label = "full-enclave";
  r.enclave_seconds = profile.full_enclave_seconds;
  r.total_seconds = profile.full_enclave_seconds;
  return r;
}

inline std::uint64_t mac_count_prefix(const ModelGraph& model, std::size_t boundary) {
  if (boundary > model.layers().size()) throw InvalidArgument("boundary past end of model");
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < boundary; ++i) total += layer_macs(model.layers()[i]);
  return total;
}

/// Multiply-accumulates of the enclave prefix ending at `up_to_boundary`.
inline std::uint64_t mac_count(const ModelGraph& model, const std::string& up_to_boundary) {
  return mac_count_prefix(model, model.point(up_to_boundary).boundary);
}

inline std::uint64_t total_macs(const ModelGraph& model) {
  return mac_count_prefix(model, model.layers().size());
}

/// Fills a profile from measured end-to-end totals.
///
/// The accelerator suffix is modelled as full_accelerator_seconds scaled by the
/// suffix's share of MACs; the enclave prefix at a measured boundary is the
/// residual total - transfer - suffix. Unmeasured boundaries interpolate the
/// prefix linearly in cumulative MACs between the neighbouring measurements.
/// The first and last boundaries must be measured.
inline CostProfile calibrate(const ModelGraph& model,
                             const std::vector<std::pair<std::string, double>>& measurements,
                             double full_enclave_seconds, double full_accelerator_seconds,
                             const TransferModel& transfer) {
  const auto& points = model.partition_points();
  if (points.empty()) throw InvalidArgument("model " + model.name() + " has no partition points");
  if (!(full_enclave_seconds > 0) || !(full_accelerator_seconds > 0))
    throw InvalidArgument("full runtimes must be positive");

  std::map<std::string, double> measured;
  for (const auto& [label, secs] : measurements) {
    model.point(label);
    if (!(secs > 0)) throw InvalidArgument("measurement at '" + label + "' must be positive");
    if (!measured.emplace(label, secs).second)
      throw InvalidArgument("duplicate measurement at '" + label + "'");
  }
  if (!measured.contains(points.front().label) || !measured.contains(points.back().label))
    throw InvalidArgument("calibration needs measurements at the first ('" + points.front().label +
                          "') and last ('" + points.back().label + "') boundaries");

  const auto total = static_cast<double>(total_macs(model));
  const std::size_t n = points.size();
  std::vector<double> macs(n), suffix(n), prefix(n, 0.0);
  std::vector<bool> known(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    macs[i] = static_cast<double>(mac_count_prefix(model, points[i].boundary));
    suffix[i] = total > 0 ? full_accelerator_seconds * (total - macs[i]) / total : 0.0;
    auto it = measured.find(points[i].label);
    if (it == measured.end()) continue;
    const PartitionAssignment a = make_assignment(model, points[i]);
    prefix[i] = it->second - transfer.seconds(a.exposed_tensor_bytes) - suffix[i];
    if (!(prefix[i] > 0))
      throw InvalidArgument("measured total at '" + points[i].label +
                            "' leaves no time for the enclave prefix");
    known[i] = true;
  }

  std::size_t lo = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (!known[i]) continue;
    if (prefix[i] < prefix[lo])
      throw InvalidArgument("measured enclave prefix times are not monotone at '" +
                            points[i].label + "'");
    for (std::size_t j = lo + 1; j < i; ++j) {
      const double span = macs[i] - macs[lo];
      const double w = span > 0 ? (macs[j] - macs[lo]) / span : 0.0;
      prefix[j] = prefix[lo] + (prefix[i] - prefix[lo]) * w;
    }
    lo = i;
  }

  CostProfile p;
  p.model_name = model.name();
  p.full_enclave_seconds = full_enclave_seconds;
  p.full_accelerator_seconds = full_accelerator_seconds;
  p.transfer = transfer;
  for (std::size_t i = 0; i < n; ++i) p.per_point.push_back({points[i].label, prefix[i], suffix[i]});
  p.validate();
  return p;
}

/// Transfer model shared by the shipped profiles: affine in bytes, pinned so
/// the smallest exposed map over all built-in 3x224x224 boundaries costs
/// 0.02 s and the largest 0.1 s, and clamped to that range.
inline const TransferModel& builtin_transfer_model() {
  static const TransferModel model = [] {
    std::uint64_t lo = UINT64_MAX, hi = 0;
    for (const auto& arch : profiled_architectures())
      for (const auto& a : enumerate_partitions(build_architecture(arch))) {
        lo = std::min(lo, a.exposed_tensor_bytes);
        hi = std::max(hi, a.exposed_tensor_bytes);
      }
    TransferModel t;
    t.seconds_per_byte = (0.1 - 0.02) / static_cast<double>(hi - lo);
    t.base_seconds = 0.02 - t.seconds_per_byte * static_cast<double>(lo);
    t.min_seconds = 0.02;
    t.max_seconds = 0.1;
    return t;
  }();
  return model;
}

/// Measured average runtimes the shipped profiles are anchored to.
struct ProfileAnchors {
  std::string arch;
  double full_enclave_seconds;
  double full_accelerator_seconds;  // not reported; assumed
  std::vector<std::pair<std::string, double>> partitioned_totals;
};

inline const std::vector<ProfileAnchors>& shipped_anchors() {
  static const std::vector<ProfileAnchors> anchors{
      {"vgg16", 4.2, 0.5, {{"Layer 8", 1.4}}},
      {"resnet50", 4.02, 0.5, {{"Layer 3", 3.04}, {"Layer 4", 3.6}}},
      {"efficientnetb0", 3.7, 2.0, {{"Layer 4", 2.5}}},
  };
  return anchors;
}

/// Calibrated profile for a built-in architecture at 3x224x224.
///
/// Endpoints are synthesised from the anchors: the first boundary extends the
/// enclave rate (seconds per MAC) of the shallowest anchor through the origin,
/// the last boundary extrapolates the rate of the deepest anchor segment.
inline CostProfile shipped_profile(const std::string& arch) {
  const ProfileAnchors* anchors = nullptr;
  for (const auto& a : shipped_anchors())
    if (a.arch == arch) anchors = &a;
  if (!anchors) throw LookupError("no shipped cost profile for '" + arch + "'");

  const ModelGraph model = build_architecture(arch);
  const TransferModel& transfer = builtin_transfer_model();
  const auto total = static_cast<double>(total_macs(model));
  auto macs_at = [&](const std::string& label) {
    return static_cast<double>(mac_count(model, label));
  };
  auto suffix_at = [&](const std::string& label) {
    return anchors->full_accelerator_seconds * (total - macs_at(label)) / total;
  };
  auto transfer_at = [&](const std::string& label) {
    return transfer.seconds(assignment_for(model, label).exposed_tensor_bytes);
  };
  auto prefix_at = [&](const std::pair<std::string, double>& m) {
    return m.second - transfer_at(m.first) - suffix_at(m.first);
  };

  const auto& anchor_list = anchors->partitioned_totals;
  const auto& first = anchor_list.front();
  const auto& last = anchor_list.back();
  const std::string first_label = model.partition_points().front().label;
  const std::string last_label = model.partition_points().back().label;

  double last_rate = prefix_at(last) / macs_at(last.first);
  if (anchor_list.size() > 1) {
    const auto& prev = anchor_list[anchor_list.size() - 2];
    last_rate = (prefix_at(last) - prefix_at(prev)) / (macs_at(last.first) - macs_at(prev.first));
  }
  const double first_prefix = prefix_at(first) / macs_at(first.first) * macs_at(first_label);
  const double last_prefix = prefix_at(last) + last_rate * (macs_at(last_label) - macs_at(last.first));

  std::vector<std::pair<std::string, double>> measurements;
  if (first.first != first_label)
    measurements.emplace_back(first_label, first_prefix + transfer_at(first_label) + suffix_at(first_label));
  measurements.insert(measurements.end(), anchor_list.begin(), anchor_list.end());
  if (last.first != last_label)
    measurements.emplace_back(last_label, last_prefix + transfer_at(last_label) + suffix_at(last_label));

  return calibrate(model, measurements, anchors->full_enclave_seconds,
                   anchors->full_accelerator_seconds, transfer);
}

// JSON round trip ---------------------------------------------------------

inline nlohmann::json to_json(const CostProfile& p) {
  nlohmann::json j;
  j["model_name"] = p.model_name;
  j["full_enclave_seconds"] = p.full_enclave_seconds;
  j["full_accelerator_seconds"] = p.full_accelerator_seconds;
  j["per_point"] = nlohmann::json::array();
  for (const auto& pc : p.per_point)
    j["per_point"].push_back({{"boundary_label", pc.boundary_label},
                              {"enclave_prefix_seconds", pc.enclave_prefix_seconds},
                              {"accelerator_suffix_seconds", pc.accelerator_suffix_seconds}});
  nlohmann::json t{{"base_seconds", p.transfer.base_seconds},
                   {"seconds_per_byte", p.transfer.seconds_per_byte}};
  if (p.transfer.min_seconds) t["min_seconds"] = *p.transfer.min_seconds;
  if (p.transfer.max_seconds) t["max_seconds"] = *p.transfer.max_seconds;
  j["transfer"] = t;
  return j;
}

inline CostProfile profile_from_json(const nlohmann::json& j) {
  CostProfile p;
  try {
    p.model_name = j.at("model_name").get<std::string>();
    p.full_enclave_seconds = j.at("full_enclave_seconds").get<double>();
    p.full_accelerator_seconds = j.at("full_accelerator_seconds").get<double>();
    for (const auto& e : j.at("per_point"))
      p.per_point.push_back({e.at("boundary_label").get<std::string>(),
                             e.at("enclave_prefix_seconds").get<double>(),
                             e.at("accelerator_suffix_seconds").get<double>()});
    const auto& t = j.at("transfer");
    p.transfer.base_seconds = t.at("base_seconds").get<double>();
    p.transfer.seconds_per_byte = t.at("seconds_per_byte").get<double>();
    if (t.contains("min_seconds")) p.transfer.min_seconds = t["min_seconds"].get<double>();
    if (t.contains("max_seconds")) p.transfer.max_seconds = t["max_seconds"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed cost profile: ") + e.what());
  }
  p.validate();
  return p;
}

/// Resolves "builtin:<arch>" or a JSON file path.
inline CostProfile load_profile(const std::string& spec) {
  constexpr std::string_view prefix = "builtin:";
  if (spec.starts_with(prefix)) return shipped_profile(spec.substr(prefix.size()));
  std::ifstream in(spec);
  if (!in) throw LookupError("cannot open cost profile " + spec);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("cost profile " + spec + " is not valid JSON: " + e.what());
  }
  return profile_from_json(j);
}

}  // namespace teesplit
