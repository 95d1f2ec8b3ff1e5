#include <cstdint>
#include <random>

#include "doctest.h"
#include "gradient_check.hpp"
#include "ntlc/layers.hpp"
#include "ntlc/network.hpp"

// Finite-difference verification of backpropagation for every layer kind,
// including the three production stacks, across many random seeds.

TEST_CASE("analytic gradients match finite differences") {
  for (const auto& cfg : gradcheck::layer_cases()) {
    CAPTURE(cfg.name);
    const bool big = cfg.name.rfind("stack_", 0) == 0;
    const std::size_t per_tensor = big ? 5 : 8;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      CAPTURE(seed);
      auto net = cfg.build();
      net->init(seed);
      std::mt19937_64 rng(seed * 7919 + 13);
      const ntlc::Tensor x = gradcheck::random_tensor(cfg.x_shape, rng);

      // Freeze the dropout masks on a probe forward, then derive a target
      // that keeps every residual away from the MAE kink.
      net->set_dropout_frozen(true);
      const ntlc::Tensor pred = net->forward(x, ntlc::RunMode::train);
      const ntlc::Tensor target = gradcheck::offset_target(pred, rng);

      const auto res = gradcheck::check_network(*net, x, target, cfg.coeff, rng, per_tensor);
      CHECK(res.checked > 0);
      INFO("worst mismatch at " << res.worst_at);
      CHECK(res.worst_rel <= 1e-4);
    }
  }
}
