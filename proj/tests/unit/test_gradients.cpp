#include <doctest.h>

#include "support.hpp"

using namespace mmfuse;

TEST_SUITE("gradients") {
  TEST_CASE("layer and architecture gradients match central differences") {
    for (const auto& c : testing::gradient_suite(11)) {
      CAPTURE(c.name);
      CAPTURE(c.result.worst);
      CHECK(c.result.checked > 0);
      CHECK(c.result.max_rel_error < 1e-4);
    }
  }
}
