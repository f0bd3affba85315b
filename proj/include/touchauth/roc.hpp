#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace touchauth {

struct RocPoint {
  double threshold;
  double far;  // impostor decisions accepted / impostor decisions
  double frr;  // genuine decisions rejected / genuine decisions
};

struct RocCurve {
  std::vector<RocPoint> points;  // thresholds ascending, -inf and +inf included
  double eer = 0.0;
};

// Threshold sweep over all distinct scores plus +-infinity, acceptance rule
// score >= threshold. The EER is linearly interpolated between the adjacent
// sweep points where FAR - FRR changes sign.
inline RocCurve roc_and_eer(std::span<const double> scores, const std::vector<bool>& genuine) {
  if (scores.size() != genuine.size() || scores.empty()) {
    throw std::invalid_argument("roc_and_eer: size mismatch or empty");
  }
  std::size_t total_gen = 0, total_imp = 0;
  for (bool g : genuine) (g ? total_gen : total_imp) += 1;
  if (total_gen == 0 || total_imp == 0) {
    throw std::invalid_argument("roc_and_eer: need at least one genuine and one impostor decision");
  }

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  const double inf = std::numeric_limits<double>::infinity();
  RocCurve curve;
  curve.points.push_back({-inf, 1.0, 0.0});

  // Walking thresholds upward: a threshold equal to a score value rejects
  // exactly the strictly-smaller scores.
  std::size_t gen_below = 0, imp_below = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double v = scores[order[i]];
    curve.points.push_back({v,
                            static_cast<double>(total_imp - imp_below) / static_cast<double>(total_imp),
                            static_cast<double>(gen_below) / static_cast<double>(total_gen)});
    while (i < order.size() && scores[order[i]] == v) {
      (genuine[order[i]] ? gen_below : imp_below) += 1;
      ++i;
    }
  }
  curve.points.push_back({inf, 0.0, 1.0});

  for (std::size_t k = 0; k + 1 < curve.points.size(); ++k) {
    const double dk = curve.points[k].far - curve.points[k].frr;
    const double dn = curve.points[k + 1].far - curve.points[k + 1].frr;
    if (dk == 0.0) {
      curve.eer = curve.points[k].far;
      return curve;
    }
    if (dk > 0.0 && dn < 0.0) {
      const double t = dk / (dk - dn);
      curve.eer = curve.points[k].far + t * (curve.points[k + 1].far - curve.points[k].far);
      return curve;
    }
  }
  // FAR - FRR runs from +1 to -1, so a sign change always exists; the last
  // point closes the sweep.
  curve.eer = curve.points.back().far;
  return curve;
}

struct OrientedRoc {
  RocCurve curve;
  bool flipped = false;  // true when scores were negated to keep EER <= 0.5
};

// Orients scores so the reported EER lands in [0, 0.5].
inline OrientedRoc oriented_roc_and_eer(std::span<const double> scores, const std::vector<bool>& genuine) {
  OrientedRoc out;
  out.curve = roc_and_eer(scores, genuine);
  if (out.curve.eer > 0.5) {
    std::vector<double> negated(scores.begin(), scores.end());
    for (double& s : negated) s = -s;
    out.curve = roc_and_eer(negated, genuine);
    out.flipped = true;
  }
  return out;
}

}  // namespace touchauth
