// Splits ResNet-50 at "Layer 4", runs both halves, and prints what crossed
// the trust boundary together with the predicted runtime.
#include <iostream>

#include "teesplit/teesplit.hpp"

int main() {
  using namespace teesplit;
  const Network net = Network::initialize(build_architecture("resnet50", Shape{3, 64, 64}), 1);
  const Tensor image = synthetic_image(net.graph().input_shape(), 3);
  const CostProfile profile = shipped_profile("resnet50");

  const PipelineResult r = simulate_pipeline(net, "Layer 4", image, &profile);
  write_ledger_csv(std::cout, r.ledger);
  std::cout << "output matches unsplit forward: " << (r.output == forward(net, image) ? "yes" : "no") << '\n';
  std::cout << "predicted total " << r.breakdown->total_seconds << " s vs full enclave "
            << profile.full_enclave_seconds << " s\n";
  return 0;
}
