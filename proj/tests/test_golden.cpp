#include "balrd/metrics.hpp"
#include "doctest.h"
#include "golden.hpp"

using namespace balrd;
namespace golden = balrd::test::golden;

namespace {

void check_all(const std::vector<golden::Check>& checks) {
  for (const auto& c : checks) {
    INFO(c.name << " got " << c.got << " expected " << c.expected);
    CHECK(golden::relative_error(c) <= 1e-12);
  }
}

}  // namespace

TEST_CASE("one trajectory-method step matches the oracle") { check_all(golden::solution1_checks()); }

TEST_CASE("one closed-form step matches the oracle") { check_all(golden::solution2_checks()); }

TEST_CASE("scalar helpers match the oracle") { check_all(golden::scalar_checks()); }

TEST_CASE("speed_trace reproduces the oracle speeds") {
  TraceRecord a, b;
  a.losses = {3.75, 0.8125};
  b.losses = {3.4170895102270594858, 0.83886141865265528242};
  const std::vector<TraceRecord> trace{a, b};
  const auto s = speed_trace(trace);
  REQUIRE(s.size() == 1);
  CHECK(balrd::test::near(s[0].rate, 0.088776130606117470445, 1e-12));
  CHECK(balrd::test::near(s[0].distortion, -0.032444822957114193744, 1e-12));
}
