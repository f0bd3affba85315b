#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "touchauth/csv.hpp"
#include "touchauth/kdtree.hpp"

namespace touchauth {

inline double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  return std::exp(-gamma * squared_distance(a, b));
}

class SvmConvergenceError : public std::runtime_error {
 public:
  SvmConvergenceError(double c, double gamma, std::size_t cap)
      : std::runtime_error("svm solver did not converge within " + std::to_string(cap) +
                           " pair updates at C=" + format_double(c) +
                           ", gamma=" + format_double(gamma)),
        C(c),
        gamma(gamma) {}
  double C;
  double gamma;
};

struct SvmTrainOptions {
  double C = 1.0;
  double gamma = 1.0;
  double kkt_tol = 1e-3;
  std::size_t max_pair_updates = 100000;
};

// Full dual solution of one training run, mostly for verification.
struct SvmSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  double kkt_gap = 0.0;  // m - M at the final iterate
  std::size_t pair_updates = 0;
};

// 0.5 * a' Q a - sum(a) with Q_kl = y_k y_l K_kl.
inline double svm_dual_objective(const std::vector<std::vector<double>>& kernel,
                                 std::span<const int> y, std::span<const double> alpha) {
  const std::size_t n = alpha.size();
  double quad = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (alpha[k] == 0.0) continue;
    for (std::size_t l = 0; l < n; ++l) {
      if (alpha[l] == 0.0) continue;
      quad += alpha[k] * alpha[l] * y[k] * y[l] * kernel[k][l];
    }
  }
  double lin = 0.0;
  for (std::size_t k = 0; k < n; ++k) lin += alpha[k];
  return 0.5 * quad - lin;
}

// Soft-margin dual SVM via sequential minimal optimization with
// maximal-violating-pair selection. `kernel` is the full Gram matrix,
// y[k] in {+1, -1}. Stops when the KKT gap m - M drops to kkt_tol; throws
// SvmConvergenceError past the pair-update cap.
inline SvmSolution smo_solve(const std::vector<std::vector<double>>& kernel, std::span<const int> y,
                             const SvmTrainOptions& opt) {
  const std::size_t n = y.size();
  if (n < 2) throw std::invalid_argument("smo_solve: need at least 2 samples");
  if (kernel.size() != n) throw std::invalid_argument("smo_solve: kernel size mismatch");
  if (opt.C <= 0.0) throw std::invalid_argument("smo_solve: C must be positive");
  bool has_pos = false, has_neg = false;
  for (int label : y) {
    if (label == 1) has_pos = true;
    else if (label == -1) has_neg = true;
    else throw std::invalid_argument("smo_solve: labels must be +1/-1");
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("smo_solve: need both classes");

  SvmSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double> u(n, 0.0);  // u_k = sum_l alpha_l y_l K_lk

  const double inf = std::numeric_limits<double>::infinity();
  double m = 0.0, big_m = 0.0;
  while (true) {
    // Maximal violating pair over F_k = y_k - u_k.
    m = -inf;
    big_m = inf;
    std::size_t i = n, j = n;
    for (std::size_t k = 0; k < n; ++k) {
      const double f = static_cast<double>(y[k]) - u[k];
      const bool in_up = (y[k] == 1 && sol.alpha[k] < opt.C) || (y[k] == -1 && sol.alpha[k] > 0.0);
      const bool in_low = (y[k] == -1 && sol.alpha[k] < opt.C) || (y[k] == 1 && sol.alpha[k] > 0.0);
      if (in_up && f > m) {
        m = f;
        i = k;
      }
      if (in_low && f < big_m) {
        big_m = f;
        j = k;
      }
    }
    if (i == n || j == n || m - big_m <= opt.kkt_tol) break;
    if (sol.pair_updates >= opt.max_pair_updates) {
      throw SvmConvergenceError(opt.C, opt.gamma, opt.max_pair_updates);
    }

    double eta = kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j];
    if (eta <= 0.0) eta = 1e-12;
    // Step delta moves alpha_i along +y_i and alpha_j along -y_j, preserving
    // the equality constraint.
    const double allowed_i = y[i] == 1 ? opt.C - sol.alpha[i] : sol.alpha[i];
    const double allowed_j = y[j] == 1 ? sol.alpha[j] : opt.C - sol.alpha[j];
    const double delta = std::min({(m - big_m) / eta, allowed_i, allowed_j});

    if (delta == allowed_i) {
      sol.alpha[i] = y[i] == 1 ? opt.C : 0.0;
    } else {
      sol.alpha[i] += y[i] * delta;
    }
    if (delta == allowed_j) {
      sol.alpha[j] = y[j] == 1 ? 0.0 : opt.C;
    } else {
      sol.alpha[j] -= y[j] * delta;
    }
    for (std::size_t k = 0; k < n; ++k) u[k] += delta * (kernel[i][k] - kernel[j][k]);
    ++sol.pair_updates;
  }

  // Bias from unbounded support vectors when available, else the KKT
  // midpoint.
  double f_sum = 0.0;
  std::size_t f_count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (sol.alpha[k] > 0.0 && sol.alpha[k] < opt.C) {
      f_sum += static_cast<double>(y[k]) - u[k];
      ++f_count;
    }
  }
  if (f_count > 0) {
    sol.bias = f_sum / static_cast<double>(f_count);
  } else if (std::isfinite(m) && std::isfinite(big_m)) {
    sol.bias = 0.5 * (m + big_m);
  }
  sol.kkt_gap = (std::isfinite(m) && std::isfinite(big_m)) ? m - big_m : 0.0;
  return sol;
}

struct SvmModel {
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> coeffs;  // alpha_k * y_k per support vector
  double bias = 0.0;
  double gamma = 1.0;
  double C = 1.0;

  // Kernel decision value; positive means the positive class.
  double score(std::span<const double> x) const {
    double s = bias;
    for (std::size_t k = 0; k < support_vectors.size(); ++k) {
      s += coeffs[k] * rbf_kernel(support_vectors[k], x, gamma);
    }
    return s;
  }
};

inline std::vector<std::vector<double>> rbf_gram_matrix(
    const std::vector<std::vector<double>>& points, double gamma) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> kernel(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    kernel[a][a] = 1.0;
    for (std::size_t b = a + 1; b < n; ++b) {
      const double v = rbf_kernel(points[a], points[b], gamma);
      kernel[a][b] = v;
      kernel[b][a] = v;
    }
  }
  return kernel;
}

// Trains one (C, gamma) cell on already-standardized points.
inline SvmModel svm_train_single(const std::vector<std::vector<double>>& points,
                                 std::span<const int> y, const SvmTrainOptions& opt) {
  if (points.size() != y.size()) throw std::invalid_argument("svm_train_single: size mismatch");
  const auto kernel = rbf_gram_matrix(points, opt.gamma);
  const SvmSolution sol = smo_solve(kernel, y, opt);
  SvmModel model;
  model.bias = sol.bias;
  model.gamma = opt.gamma;
  model.C = opt.C;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (sol.alpha[k] > 0.0) {
      model.support_vectors.push_back(points[k]);
      model.coeffs.push_back(sol.alpha[k] * y[k]);
    }
  }
  return model;
}

}  // namespace touchauth
