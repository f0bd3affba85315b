#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "touchauth/features.hpp"
#include "touchauth/stats.hpp"

namespace touchauth {

struct BinningSpec {
  std::size_t n_bins = 50;
  double lo_quantile = 0.10;
  double hi_quantile = 0.90;

  void validate() const {
    if (n_bins < 2) throw std::invalid_argument("BinningSpec: n_bins must be >= 2");
    if (!(0.0 <= lo_quantile && lo_quantile < hi_quantile && hi_quantile <= 1.0)) {
      throw std::invalid_argument("BinningSpec: need 0 <= lo < hi <= 1");
    }
  }
};

// Equal-width bins between the lo- and hi-quantile of the values; everything
// outside the range is clamped into the first/last bin. Degenerate input
// (all values identical, or quantiles coinciding) puts everything in bin 0.
inline std::vector<std::size_t> quantile_bin(std::span<const double> values, const BinningSpec& spec = {}) {
  spec.validate();
  if (values.empty()) throw std::invalid_argument("quantile_bin: empty input");
  const double lo = percentile(values, spec.lo_quantile * 100.0);
  const double hi = percentile(values, spec.hi_quantile * 100.0);
  std::vector<std::size_t> bins(values.size(), 0);
  if (!(hi > lo)) return bins;
  const double width = (hi - lo) / static_cast<double>(spec.n_bins);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double offset = (values[i] - lo) / width;
    if (offset < 0.0) {
      bins[i] = 0;
    } else {
      auto b = static_cast<std::size_t>(offset);
      bins[i] = std::min(b, spec.n_bins - 1);
    }
  }
  return bins;
}

// Category values become bin indices in sorted-value order.
inline std::vector<std::size_t> categorical_bin(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("categorical_bin: empty input");
  std::map<double, std::size_t> index;
  for (double v : values) index.emplace(v, 0);
  std::size_t next = 0;
  for (auto& [value, idx] : index) idx = next++;
  std::vector<std::size_t> bins(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) bins[i] = index.at(values[i]);
  return bins;
}

namespace detail {
inline double entropy_from_counts(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double c : counts) {
    if (c <= 0.0) continue;
    const double p = c / total;
    h -= p * std::log(p);
  }
  return h;
}
}  // namespace detail

// Relative mutual information between a binned feature and the user
// identity: I_F = 1 - H(U|F)/H(U), natural log. Bin assignments must come
// from quantile_bin or categorical_bin on the same column.
inline double relative_mutual_information_binned(std::span<const std::size_t> bins,
                                                 std::span<const std::size_t> user_index,
                                                 std::size_t n_bins_hint,
                                                 std::size_t n_users) {
  if (bins.size() != user_index.size() || bins.empty()) {
    throw std::invalid_argument("relative_mutual_information: size mismatch or empty");
  }
  if (n_users < 2) throw std::invalid_argument("relative_mutual_information: need at least 2 users");
  const double total = static_cast<double>(bins.size());

  std::vector<double> user_counts(n_users, 0.0);
  std::vector<double> bin_counts(n_bins_hint, 0.0);
  std::vector<double> joint(n_bins_hint * n_users, 0.0);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    user_counts[user_index[i]] += 1.0;
    bin_counts[bins[i]] += 1.0;
    joint[bins[i] * n_users + user_index[i]] += 1.0;
  }
  const double h_u = detail::entropy_from_counts(user_counts, total);
  if (h_u <= 0.0) throw std::invalid_argument("relative_mutual_information: user entropy is zero");

  double h_u_given_f = 0.0;
  for (std::size_t b = 0; b < n_bins_hint; ++b) {
    if (bin_counts[b] <= 0.0) continue;
    double h_b = 0.0;
    for (std::size_t u = 0; u < n_users; ++u) {
      const double c = joint[b * n_users + u];
      if (c <= 0.0) continue;
      const double p = c / bin_counts[b];
      h_b -= p * std::log(p);
    }
    h_u_given_f += (bin_counts[b] / total) * h_b;
  }
  const double i_f = 1.0 - h_u_given_f / h_u;
  return std::clamp(i_f, 0.0, 1.0);
}

// Convenience wrapper: bins a raw feature column (categorically when asked)
// and computes I_F against string user ids.
inline double relative_mutual_information(std::span<const double> feature_column,
                                          std::span<const std::string> user_ids,
                                          const BinningSpec& spec = {},
                                          bool categorical = false) {
  if (feature_column.size() != user_ids.size() || feature_column.empty()) {
    throw std::invalid_argument("relative_mutual_information: size mismatch or empty");
  }
  std::map<std::string, std::size_t> users;
  for (const auto& u : user_ids) users.emplace(u, 0);
  if (users.size() < 2) throw std::invalid_argument("relative_mutual_information: need at least 2 users");
  std::size_t next = 0;
  for (auto& [name, idx] : users) idx = next++;
  std::vector<std::size_t> user_index(user_ids.size());
  for (std::size_t i = 0; i < user_ids.size(); ++i) user_index[i] = users.at(user_ids[i]);

  std::vector<std::size_t> bins =
      categorical ? categorical_bin(feature_column) : quantile_bin(feature_column, spec);
  const std::size_t n_bins = 1 + *std::max_element(bins.begin(), bins.end());
  return relative_mutual_information_binned(bins, user_index, n_bins, users.size());
}

// Pearson correlation over columns; constant columns correlate 0 with
// everything and 1 with themselves.
inline std::vector<std::vector<double>> correlation_matrix(
    const std::vector<std::vector<double>>& columns) {
  const std::size_t d = columns.size();
  for (const auto& c : columns) {
    if (c.size() != columns.front().size()) {
      throw std::invalid_argument("correlation_matrix: ragged columns");
    }
  }
  if (d > 0 && columns.front().size() < 2) {
    throw std::invalid_argument("correlation_matrix: need at least 2 rows");
  }
  std::vector<double> means(d, 0.0), sds(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    means[j] = mean(columns[j]);
    sds[j] = population_stddev(columns[j]);
  }
  std::vector<std::vector<double>> corr(d, std::vector<double>(d, 0.0));
  const auto n = static_cast<double>(d == 0 ? 0 : columns.front().size());
  for (std::size_t a = 0; a < d; ++a) {
    corr[a][a] = 1.0;
    for (std::size_t b = a + 1; b < d; ++b) {
      if (sds[a] == 0.0 || sds[b] == 0.0) continue;
      double cov = 0.0;
      for (std::size_t i = 0; i < columns[a].size(); ++i) {
        cov += (columns[a][i] - means[a]) * (columns[b][i] - means[b]);
      }
      cov /= n;
      corr[a][b] = corr[b][a] = cov / (sds[a] * sds[b]);
    }
  }
  return corr;
}

inline const std::set<std::string>& pruned_feature_names() {
  static const std::set<std::string> names = {"trajectory_length", "end_to_end_direction",
                                              "avg_velocity"};
  return names;
}

// Drops the fixed redundant trio from a canonical name list. Unknown names
// are an error; an already-absent prune target only warns.
inline std::vector<std::string> prune_features(const std::vector<std::string>& names,
                                               std::vector<std::string>* warnings = nullptr) {
  const std::set<std::string> canonical(kFeatureNames.begin(), kFeatureNames.end());
  std::set<std::string> seen;
  std::vector<std::string> kept;
  kept.reserve(names.size());
  for (const auto& n : names) {
    if (!canonical.count(n)) throw std::invalid_argument("prune_features: unknown feature '" + n + "'");
    seen.insert(n);
    if (!pruned_feature_names().count(n)) kept.push_back(n);
  }
  if (warnings) {
    for (const auto& target : pruned_feature_names()) {
      if (!seen.count(target)) warnings->push_back("prune target '" + target + "' not in input list");
    }
  }
  return kept;
}

// Canonical classification feature indices: the 31 features minus the pruned
// trio, in canonical order.
inline std::vector<std::size_t> classification_feature_indices() {
  std::vector<std::size_t> idx;
  idx.reserve(kFeatureCount - 3);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!pruned_feature_names().count(std::string(kFeatureNames[i]))) idx.push_back(i);
  }
  return idx;
}

struct FeatureReport {
  // (feature name, I_F) sorted by descending I_F; features with no usable
  // rows are omitted.
  std::vector<std::pair<std::string, double>> mi_ranking;
  std::vector<std::string> correlation_names;
  std::vector<std::vector<double>> correlation;
  std::vector<std::string> pruned_names;
  std::vector<std::string> warnings;
};

// Computes per-feature I_F (rows with the feature absent are dropped per
// feature), the correlation matrix over complete vectors, and the pruned
// name list.
inline FeatureReport analyze_features(std::span<const FeatureVector> features,
                                      const BinningSpec& spec = {}) {
  FeatureReport report;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    std::vector<double> column;
    std::vector<std::string> users;
    for (const auto& f : features) {
      if (!f.has(j)) continue;
      column.push_back(f.v[j]);
      users.push_back(f.user_id);
    }
    if (column.empty()) {
      report.warnings.push_back("feature '" + std::string(kFeatureNames[j]) + "' has no usable rows");
      continue;
    }
    std::set<std::string> distinct(users.begin(), users.end());
    if (distinct.size() < 2) {
      report.warnings.push_back("feature '" + std::string(kFeatureNames[j]) +
                                "' observed for fewer than 2 users");
      continue;
    }
    const double i_f = relative_mutual_information(column, users, spec, is_categorical_feature(j));
    report.mi_ranking.emplace_back(std::string(kFeatureNames[j]), i_f);
  }
  std::stable_sort(report.mi_ranking.begin(), report.mi_ranking.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::vector<double>> columns(kFeatureCount);
  for (const auto& f : features) {
    if (!f.is_complete()) continue;
    for (std::size_t j = 0; j < kFeatureCount; ++j) columns[j].push_back(f.v[j]);
  }
  if (!columns[0].empty() && columns[0].size() >= 2) {
    report.correlation_names.assign(kFeatureNames.begin(), kFeatureNames.end());
    report.correlation = correlation_matrix(columns);
  } else {
    report.warnings.push_back("fewer than 2 complete vectors; correlation matrix skipped");
  }

  std::vector<std::string> all_names(kFeatureNames.begin(), kFeatureNames.end());
  report.pruned_names = prune_features(all_names, &report.warnings);
  return report;
}

inline std::string correlation_to_csv(const FeatureReport& report) {
  std::string out = "feature";
  for (const auto& n : report.correlation_names) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (std::size_t i = 0; i < report.correlation.size(); ++i) {
    out += report.correlation_names[i];
    for (double v : report.correlation[i]) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace touchauth
