#include "gvfacc/cumulants.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "gvfacc/sim.hpp"
#include "gvfacc/util.hpp"

namespace gvfacc {
namespace {

SafetyZoneParams highway_zone() { return {3.0, 4.0, 0}; }
SafetyZoneParams robot_zone() { return {1.5, 0.4, 0}; }

TEST(Headway, GrowsLinearlyWithSpeed) {
  EXPECT_DOUBLE_EQ(headway(0.0, highway_zone()), 4.0);
  EXPECT_DOUBLE_EQ(headway(30.0, highway_zone()), 94.0);
  EXPECT_DOUBLE_EQ(headway(2.0, robot_zone()), 3.4);
}

TEST(Headway, RejectsNegativeOrNonFiniteSpeed) {
  EXPECT_THROW(headway(-0.1, highway_zone()), std::invalid_argument);
  EXPECT_THROW(headway(std::nan(""), highway_zone()), std::invalid_argument);
}

TEST(FrontSafety, BoundaryGapCountsAsClear) {
  const auto zone = highway_zone();
  // At 30 m/s the zone reaches 94 m ahead.
  EXPECT_DOUBLE_EQ(front_safety_cumulant(93.9, 30.0, zone), 0.0);
  EXPECT_DOUBLE_EQ(front_safety_cumulant(94.0, 30.0, zone), 1.0);
  EXPECT_DOUBLE_EQ(front_safety_cumulant(94.1, 30.0, zone), 1.0);
}

TEST(FrontSafety, StationaryZoneIsJustMinimumDistance) {
  const auto zone = highway_zone();
  EXPECT_DOUBLE_EQ(front_safety_cumulant(3.9, 0.0, zone), 0.0);
  EXPECT_DOUBLE_EQ(front_safety_cumulant(4.0, 0.0, zone), 1.0);
}

TEST(FrontSafety, IntrusionBudgetToleratesOneVehicle) {
  SafetyZoneParams zone = highway_zone();
  zone.intrusion_budget = 1;
  // One intruder stays within budget, so the state is still labeled safe.
  EXPECT_DOUBLE_EQ(front_safety_cumulant(50.0, 30.0, zone), 1.0);
  zone.intrusion_budget = 0;
  EXPECT_DOUBLE_EQ(front_safety_cumulant(50.0, 30.0, zone), 0.0);
}

TEST(RearSafety, ZoneScalesWithRearVehicleSpeed) {
  const auto zone = highway_zone();
  // A rear vehicle doing 5 m/s projects a 19 m zone ahead of itself.
  EXPECT_DOUBLE_EQ(rear_safety_cumulant(10.0, 5.0, zone), 0.0);
  EXPECT_DOUBLE_EQ(rear_safety_cumulant(19.0, 5.0, zone), 1.0);
  // A stopped rear vehicle only claims the minimum distance.
  EXPECT_DOUBLE_EQ(rear_safety_cumulant(10.0, 0.0, zone), 1.0);
}

TEST(SpeedCumulant, IsTheEgoSpeed) {
  EXPECT_DOUBLE_EQ(speed_cumulant(0.0), 0.0);
  EXPECT_DOUBLE_EQ(speed_cumulant(23.7), 23.7);
}

TEST(Continuation, TerminatesOnlyOnMatchingCollision) {
  const ContinuationParams params{0.95};
  StepOutcome out;
  out.front_collision = true;
  EXPECT_DOUBLE_EQ(continuation(out, CumulantKind::FrontSafety, params), 0.0);
  EXPECT_DOUBLE_EQ(continuation(out, CumulantKind::RearSafety, params), 0.95);
  EXPECT_DOUBLE_EQ(continuation(out, CumulantKind::Speed, params), 0.95);

  out.front_collision = false;
  out.rear_collision = true;
  EXPECT_DOUBLE_EQ(continuation(out, CumulantKind::FrontSafety, params), 0.95);
  EXPECT_DOUBLE_EQ(continuation(out, CumulantKind::RearSafety, params), 0.0);
  EXPECT_DOUBLE_EQ(continuation(out, CumulantKind::Speed, params), 0.95);
}

TEST(ScaleCumulant, NormalizesByOneMinusGamma) {
  EXPECT_DOUBLE_EQ(scale_cumulant(1.0, 0.95), 1.0 - 0.95);
  EXPECT_DOUBLE_EQ(scale_cumulant(0.5, 0.9), 0.5 * (1.0 - 0.9));
  EXPECT_DOUBLE_EQ(scale_cumulant(0.0, 0.95), 0.0);
  // A terminating step passes its cumulant through at full weight.
  EXPECT_DOUBLE_EQ(scale_cumulant(1.0, 0.0), 1.0);
}

TEST(ScaleCumulant, ConstantSafeStreamSumsToOne) {
  // sum_k gamma^k * (1 - gamma) over an infinite safe run is exactly 1;
  // a finite prefix of N terms reaches 1 - gamma^N.
  const double gamma = 0.95;
  double total = 0.0;
  double weight = 1.0;
  const int n = 200;
  for (int k = 0; k < n; ++k) {
    total += weight * scale_cumulant(1.0, gamma);
    weight *= gamma;
  }
  EXPECT_NEAR(total, 1.0 - std::pow(gamma, n), 1e-12);
}

TEST(RawCumulant, ReadsGapsAndSpeedsFromTheState) {
  const auto zone = highway_zone();
  StepOutcome out;
  out.next_state.ego = {100.0, 30.0, 4.0};
  out.next_state.lead = VehicleState{190.0, 20.0, 4.0};
  out.next_state.rear = VehicleState{70.0, 5.0, 4.0};

  // Front gap 190 - 4 - 100 = 86 < 94: intruded.
  EXPECT_DOUBLE_EQ(raw_cumulant(out, CumulantKind::FrontSafety, zone), 0.0);
  // Rear gap 100 - 4 - 70 = 26 >= 4 + 5*3 = 19: clear.
  EXPECT_DOUBLE_EQ(raw_cumulant(out, CumulantKind::RearSafety, zone), 1.0);
  EXPECT_DOUBLE_EQ(raw_cumulant(out, CumulantKind::Speed, zone), 30.0);

  // Absent neighbors read as an unbounded gap, which is always clear.
  out.next_state.lead.reset();
  out.next_state.rear.reset();
  EXPECT_DOUBLE_EQ(raw_cumulant(out, CumulantKind::FrontSafety, zone), 1.0);
  EXPECT_DOUBLE_EQ(raw_cumulant(out, CumulantKind::RearSafety, zone), 1.0);
}

TEST(CumulantKindNames, RoundTripAndAliases) {
  EXPECT_EQ(cumulant_kind_from_string("front"), CumulantKind::FrontSafety);
  EXPECT_EQ(cumulant_kind_from_string("front_safety"),
            CumulantKind::FrontSafety);
  EXPECT_EQ(cumulant_kind_from_string("rear"), CumulantKind::RearSafety);
  EXPECT_EQ(cumulant_kind_from_string("speed"), CumulantKind::Speed);
  EXPECT_STREQ(to_string(CumulantKind::RearSafety), "rear_safety");
  EXPECT_THROW(cumulant_kind_from_string("sideways"), ConfigError);
}

}  // namespace
}  // namespace gvfacc
