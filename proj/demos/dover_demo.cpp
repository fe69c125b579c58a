// Runs the bundled corridor at peak flow under each routing policy and
// prints weighbridge lane shares and mean trip time over five seeds.
#include <cstdio>

#include "portsim/portsim.hpp"

int main() {
  using namespace portsim;
  const auto base = default_dover_scenario();
  const auto cfg = with_flow_rate(base, 800.0);
  const auto topo = build_topology(cfg);
  const auto seeds = seed_range(1, 5);

  std::printf("%-10s %7s %7s %7s %7s %7s %10s\n", "policy", "lane1", "lane2", "lane3", "lane4", "lane5", "trip_s");
  for (auto p : {PolicyName::ProbAverage, PolicyName::ProbFlowSpecific, PolicyName::Agent}) {
    const auto reps = replicate(cfg, make_policy(*cfg.routing, p), seeds);
    const auto cell = evaluate_cell(base, topo, p, 800.0, reps);
    std::printf("%-10s", std::string(to_string(p)).c_str());
    for (double s : cell.mean_shares) std::printf(" %7.3f", s);
    std::printf(" %10.1f\n", cell.trip_mean_s);
  }
  return 0;
}
