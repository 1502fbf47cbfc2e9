#pragma once

// Verification metrics over genuine/impostor similarity scores. A pair is accepted at
// threshold t when its score is >= t, so FAR(t) = share of impostors >= t and
// FRR(t) = share of genuine scores < t.

#include <span>
#include <vector>

namespace gazefuse {

struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;  // fraction
  double frr = 0.0;  // fraction
};

// One point per distinct score (ascending); all equal scores share a threshold.
std::vector<RocPoint> roc_points(std::span<const double> genuine, std::span<const double> impostor);

// Equal error rate in percent. Thresholds run over the distinct scores plus one above
// all of them; the crossing of FAR and FRR is linearly interpolated between the two
// adjacent thresholds that bracket it. Throws EmptyClass.
double eer(std::span<const double> genuine, std::span<const double> impostor);

struct FrrAtFar {
  double frr_percent = 100.0;
  double threshold = 0.0;  // +inf when no score threshold reaches the target
  double achieved_far = 0.0;
  bool reliable = false;  // impostor count >= 10 / far_target
};

// FRR at the lowest threshold whose FAR is <= far_target (a fraction in (0, 1]).
FrrAtFar frr_at_far(std::span<const double> genuine, std::span<const double> impostor,
                    double far_target);

}  // namespace gazefuse
