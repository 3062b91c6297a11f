// Draws one varied-path-loss realization and prints sum-SE and min-SE of each
// precoder at a few SU-SINR points.

#include <cstdio>

#include "mumimo/mumimo.hpp"

int main() {
  using namespace mumimo;
  ScenarioConfig sc;
  sc.seed = 7;
  const ChannelSet channels = generate_scenario(sc);
  const ChannelDecomposition decomp = decompose(channels);
  const double power = 1.0;

  std::printf("%-8s %6s %10s %10s\n", "method", "dB", "sum_se", "min_se");
  for (double db : {0.0, 12.0, 24.0}) {
    const double sigma2 = calibrate_noise(decomp, power, db);
    for (const auto& m : harness::default_methods()) {
      const auto rep = harness::evaluate_method(channels, decomp, m, sigma2, power, OptConfig{});
      std::printf("%-8s %6.1f %10.4f %10.4f\n", harness::method_name(m).c_str(), db, rep.sum_se, rep.min_se);
    }
  }
  return 0;
}
