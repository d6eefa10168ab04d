// Builds a small star network, lets the controller place 200 counting flows, pushes their packets
// through the switches and prints how well the assigned switches' sketches track the true sizes.
#include <iostream>

#include "dcm/dcm.hpp"

int main() {
  dcm::ExperimentConfig cfg;
  cfg.topology = "star:2,4,4";
  cfg.trace = "synth:flows=200,epochs=20";
  cfg.memory = {64 * 1024};
  cfg.bf_fraction = {0.05, 0.2};
  cfg.seed = 7;
  dcm::run_flow_count(cfg).write_csv(std::cout);

  cfg.method = dcm::parse_method("monitor-all");
  dcm::run_flow_count(cfg).write_csv(std::cout);
  return 0;
}
