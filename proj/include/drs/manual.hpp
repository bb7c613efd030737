#ifndef DRS_MANUAL_HPP
#define DRS_MANUAL_HPP

#include "drs/control.hpp"

#include <cstdint>
#include <vector>

namespace drs {

/*
 * Hand-held scanning baseline. The operator sweeps the probe back and forth
 * along a surface segment. Hand tremor is an Ornstein-Uhlenbeck process on
 * the contact height around mean_offset, and on the lateral position:
 *
 *   dX = -X / tau dt + sigma sqrt(2 / tau) dW   (stationary std sigma)
 */
struct ManualOperatorModel {
  double sigma_hand = 0.8;   // mm, stationary std of the height tremor
  double tau_hand = 0.6;     // s
  double mean_offset = 0.3;  // mm above the surface
  double sigma_xy = 1.0;     // mm, lateral wobble
  double tau_xy = 0.8;       // s
  double speed = 5.0;        // sweep speed, mm/s
  double duration = 30.0;    // s per repeat
  int repeats = 5;
  double rate_hz = 30.0;

  void validate() const;
};

/// Surface segment in world x-y, mm.
struct ScanRegion {
  Vec2 from{-40.0, 0.0};
  Vec2 to{40.0, 0.0};
};

/// One log per repeat, every tick tagged Scanning with a spectrum sample.
/// Positions leaving the tissue are clamped to its boundary.
std::vector<TrialLog> simulate_manual_scan(const SceneState& scene, const ManualOperatorModel& op,
                                           const ScanRegion& region, const TissueOpticalModel& optics,
                                           std::uint64_t seed);

}  // namespace drs

#endif  // DRS_MANUAL_HPP
