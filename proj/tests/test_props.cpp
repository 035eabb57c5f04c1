#include <catch2/catch_amalgamated.hpp>

#include "prop_harness.hpp"

using namespace muf;

TEST_CASE("random traces match the brute-force oracles at scale") {
  Rng rng(6151);
  for (int round = 0; round < 10000; ++round) {
    Trace tr = props::random_trace(rng, 15);
    std::string bad = props::trace_mismatch(tr);
    INFO("round " << round << "\n" << bad);
    REQUIRE(bad.empty());
  }
}

TEST_CASE("structural probe holds across random op sequences at scale") {
  Rng rng(29443);
  for (int round = 0; round < 10000; ++round) {
    std::string bad = props::graph_ops_mismatch(rng, 30);
    INFO("round " << round << "\n" << bad);
    REQUIRE(bad.empty());
  }
}

TEST_CASE("accepted generated programs run bounded") {
  Rng rng(171717);
  int accepted = 0, rejected = 0;
  for (int round = 0; round < 1000; ++round) {
    std::string src = props::gen_program(rng);
    props::GenOutcome got = props::run_generated(src, 5000 + round);
    INFO("round " << round << "\n" << got.failure);
    REQUIRE(got.failure.empty());
    (got.accepted ? accepted : rejected) += 1;
  }
  // The generator must exercise both verdicts or the property is vacuous.
  CHECK(accepted >= 300);
  CHECK(rejected >= 100);
}
