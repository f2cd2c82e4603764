#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "teesplit/cost_model.hpp"
#include "teesplit/error.hpp"
#include "teesplit/model_graph.hpp"
#include "teesplit/network.hpp"

namespace teesplit {

enum class Zone { kTee, kUntrusted };

enum class Artifact { kCriticalPartition, kNoncriticalPartition, kInput, kFeatureMap, kOutput };

inline const char* to_string(Zone z) { return z == Zone::kTee ? "tee" : "untrusted"; }

inline const char* to_string(Artifact a) {
  switch (a) {
    case Artifact::kCriticalPartition: return "model_partition_critical";
    case Artifact::kNoncriticalPartition: return "model_partition_noncritical";
    case Artifact::kInput: return "input";
    case Artifact::kFeatureMap: return "feature_map";
    case Artifact::kOutput: return "output";
  }
  return "?";
}

struct LedgerEvent {
  int step = 0;
  Zone zone = Zone::kTee;
  Artifact artifact = Artifact::kInput;
  std::uint64_t bytes = 0;
  /// True when the artifact moved from the enclave into `zone` at this step.
  bool crossing = false;
};

class TrustLedger {
 public:
  void record(int step, Zone zone, Artifact artifact, std::uint64_t bytes, bool crossing = false) {
    if (step < 1 || step > 6) throw LedgerViolation("ledger step " + std::to_string(step) + " out of range");
    if (!events_.empty() && step < events_.back().step)
      throw LedgerViolation("ledger steps must be recorded in order");
    events_.push_back({step, zone, artifact, bytes, crossing});
  }

  const std::vector<LedgerEvent>& events() const { return events_; }

  std::size_t crossings(Artifact a) const {
    std::size_t n = 0;
    for (const auto& e : events_)
      if (e.crossing && e.artifact == a) ++n;
    return n;
  }

  /// Throws LedgerViolation if anything other than the feature map and the
  /// non-critical partition reached the untrusted zone, or if the feature map
  /// did not cross exactly once.
  void audit() const {
    std::vector<Artifact> released;
    for (const auto& e : events_) {
      if (e.crossing && e.zone != Zone::kUntrusted)
        throw LedgerViolation("crossing into the enclave is not part of the pipeline");
      if (e.zone != Zone::kUntrusted) continue;
      if (e.artifact == Artifact::kInput || e.artifact == Artifact::kCriticalPartition)
        throw LedgerViolation(std::string(to_string(e.artifact)) + " reached the untrusted zone at step " +
                              std::to_string(e.step));
      if (e.crossing) {
        if (e.artifact != Artifact::kFeatureMap && e.artifact != Artifact::kNoncriticalPartition)
          throw LedgerViolation(std::string(to_string(e.artifact)) + " may not leave the enclave");
        released.push_back(e.artifact);
      } else if (e.artifact != Artifact::kOutput) {
        bool ok = false;
        for (Artifact r : released) ok = ok || r == e.artifact;
        if (!ok)
          throw LedgerViolation(std::string(to_string(e.artifact)) +
                                " used in the untrusted zone before it was released");
      }
    }
    if (crossings(Artifact::kFeatureMap) != 1)
      throw LedgerViolation("the feature map must cross the trust boundary exactly once");
  }

 private:
  std::vector<LedgerEvent> events_;
};

inline void write_ledger_csv(std::ostream& os, const TrustLedger& ledger) {
  os << "step,zone,artifact,bytes,crossing\n";
  for (const auto& e : ledger.events())
    os << e.step << ',' << to_string(e.zone) << ',' << to_string(e.artifact) << ',' << e.bytes << ','
       << (e.crossing ? 1 : 0) << '\n';
}

inline std::uint64_t parameter_bytes(const Network& net) {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < net.graph().layers().size(); ++i)
    n += (net.params(i).weight.size() + net.params(i).bias.size()) * kElementBytes;
  return n;
}

struct PipelineResult {
  Tensor output;
  TrustLedger ledger;
  std::optional<RuntimeBreakdown> breakdown;
};

namespace detail {

// What leaves the enclave. The untrusted phase sees nothing else.
struct ReleasedArtifacts {
  Network noncritical;
  Tensor feature_map;
};

inline ReleasedArtifacts enclave_phase(const Network& net, const std::string& boundary_label,
                                       const Tensor& input, TrustLedger& ledger) {
  ledger.record(2, Zone::kTee, Artifact::kInput, input.bytes());
  auto [critical, noncritical] = split(net, boundary_label);
  ledger.record(3, Zone::kTee, Artifact::kCriticalPartition, parameter_bytes(critical));
  ledger.record(3, Zone::kTee, Artifact::kNoncriticalPartition, parameter_bytes(noncritical));
  Tensor fm = forward(critical, input);
  ledger.record(4, Zone::kTee, Artifact::kFeatureMap, fm.bytes());
  ledger.record(5, Zone::kUntrusted, Artifact::kFeatureMap, fm.bytes(), true);
  ledger.record(5, Zone::kUntrusted, Artifact::kNoncriticalPartition, parameter_bytes(noncritical), true);
  return {std::move(noncritical), std::move(fm)};
}

inline Tensor untrusted_phase(const ReleasedArtifacts& released, TrustLedger& ledger) {
  ledger.record(6, Zone::kUntrusted, Artifact::kNoncriticalPartition, parameter_bytes(released.noncritical));
  ledger.record(6, Zone::kUntrusted, Artifact::kFeatureMap, released.feature_map.bytes());
  Tensor out = forward(released.noncritical, released.feature_map);
  ledger.record(6, Zone::kUntrusted, Artifact::kOutput, out.bytes());
  return out;
}

}  // namespace detail

/// Runs the split model in two isolated phases (enclave, then untrusted
/// accelerator), recording every artifact on a trust ledger. The ledger is
/// audited before returning; a violation throws LedgerViolation.
inline PipelineResult simulate_pipeline(const Network& net, const std::string& boundary_label,
                                        const Tensor& input, const CostProfile* profile = nullptr) {
  detail::check_input(net.graph(), input);
  PipelineResult r;
  const auto released = detail::enclave_phase(net, boundary_label, input, r.ledger);
  r.output = detail::untrusted_phase(released, r.ledger);
  r.ledger.audit();
  if (profile) r.breakdown = predict(*profile, assignment_for(net.graph(), boundary_label));
  return r;
}

}  // namespace teesplit
