#include "gazefuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gazefuse/error.hpp"

namespace gazefuse {
namespace {

void require_both(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty()) fail(ErrorCode::EmptyClass, "no genuine scores");
  if (impostor.empty()) fail(ErrorCode::EmptyClass, "no impostor scores");
  for (auto s : {genuine, impostor})
    for (double v : s)
      if (!std::isfinite(v)) fail(ErrorCode::InvalidValue, "non-finite score");
}

// ROC over distinct thresholds, with a closing point above every score.
std::vector<RocPoint> sweep(std::span<const double> genuine, std::span<const double> impostor) {
  std::vector<double> g(genuine.begin(), genuine.end());
  std::vector<double> i(impostor.begin(), impostor.end());
  std::sort(g.begin(), g.end());
  std::sort(i.begin(), i.end());
  std::vector<double> thresholds;
  thresholds.reserve(g.size() + i.size());
  std::merge(g.begin(), g.end(), i.begin(), i.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double ng = static_cast<double>(g.size());
  const double ni = static_cast<double>(i.size());
  std::vector<RocPoint> points;
  points.reserve(thresholds.size() + 1);
  std::size_t g_below = 0;  // genuine scores < t
  std::size_t i_below = 0;  // impostor scores < t
  for (double t : thresholds) {
    while (g_below < g.size() && g[g_below] < t) ++g_below;
    while (i_below < i.size() && i[i_below] < t) ++i_below;
    points.push_back({t, static_cast<double>(i.size() - i_below) / ni, static_cast<double>(g_below) / ng});
  }
  points.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  return points;
}

}  // namespace

std::vector<RocPoint> roc_points(std::span<const double> genuine, std::span<const double> impostor) {
  require_both(genuine, impostor);
  auto points = sweep(genuine, impostor);
  points.pop_back();
  return points;
}

double eer(std::span<const double> genuine, std::span<const double> impostor) {
  require_both(genuine, impostor);
  const auto points = sweep(genuine, impostor);
  // FAR - FRR starts at 1 (lowest threshold accepts everything) and ends at -1.
  for (std::size_t k = 1; k < points.size(); ++k) {
    const double d = points[k].far - points[k].frr;
    if (d > 0.0) continue;
    if (d == 0.0) return 100.0 * points[k].far;
    const auto& prev = points[k - 1];
    const double d_prev = prev.far - prev.frr;
    const double lambda = d_prev / (d_prev - d);
    return 100.0 * (prev.far + lambda * (points[k].far - prev.far));
  }
  return 100.0;  // unreachable: the closing point has FAR - FRR = -1
}

FrrAtFar frr_at_far(std::span<const double> genuine, std::span<const double> impostor,
                    double far_target) {
  require_both(genuine, impostor);
  if (!(far_target > 0.0 && far_target <= 1.0))
    fail(ErrorCode::InvalidValue, "FAR target must lie in (0, 1]");
  FrrAtFar out;
  for (const auto& p : sweep(genuine, impostor)) {
    if (p.far <= far_target) {
      out.frr_percent = 100.0 * p.frr;
      out.threshold = p.threshold;
      out.achieved_far = p.far;
      break;
    }
  }
  out.reliable = static_cast<double>(impostor.size()) * far_target >= 10.0 - 1e-9;
  return out;
}

}  // namespace gazefuse
