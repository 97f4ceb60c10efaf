#include <doctest.h>

#include "lamner/diagnostics.hpp"

TEST_CASE("every gradient scenario passes finite differences on a few seeds") {
  for (const auto& c : lamner::gradient_cases()) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      CAPTURE(c.name);
      CAPTURE(seed);
      CHECK(c.run(seed) < c.tolerance);
    }
  }
}
