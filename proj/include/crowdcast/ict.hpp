#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdcast/trace.hpp"

namespace crowdcast {

inline constexpr double kSurvivalFloor = 1e-300;
inline constexpr std::size_t kDefaultMinIctSamples = 5;

enum class ModelSource { per_pair, aggregate_fallback };

// Per-pair inter-contact-time distribution. param1/param2 meaning by family:
// exponential: (rate, -), pareto: (shape, scale), lognormal: (log-mean, log-std).
struct IctModel {
  Family family = Family::exponential;
  double param1 = 0.0;
  double param2 = 0.0;
  std::size_t sample_count = 0;
  ModelSource source = ModelSource::per_pair;
};

inline double ict_cdf(const IctModel& m, double t) {
  if (t <= 0.0) return 0.0;
  switch (m.family) {
    case Family::exponential:
      return -std::expm1(-m.param1 * t);
    case Family::pareto:
      return t <= m.param2 ? 0.0 : 1.0 - std::pow(m.param2 / t, m.param1);
    case Family::lognormal:
      return 0.5 * std::erfc(-(std::log(t) - m.param1) / (m.param2 * std::sqrt(2.0)));
  }
  return 0.0;
}

inline double ict_survival(const IctModel& m, double t) {
  if (t <= 0.0) return 1.0;
  switch (m.family) {
    case Family::exponential:
      return std::exp(-m.param1 * t);
    case Family::pareto:
      return t <= m.param2 ? 1.0 : std::pow(m.param2 / t, m.param1);
    case Family::lognormal:
      return 0.5 * std::erfc((std::log(t) - m.param1) / (m.param2 * std::sqrt(2.0)));
  }
  return 0.0;
}

inline double ict_pdf(const IctModel& m, double t) {
  if (t <= 0.0) return 0.0;
  switch (m.family) {
    case Family::exponential:
      return m.param1 * std::exp(-m.param1 * t);
    case Family::pareto:
      return t < m.param2 ? 0.0
                          : m.param1 / t * std::pow(m.param2 / t, m.param1);
    case Family::lognormal: {
      const double z = (std::log(t) - m.param1) / m.param2;
      return std::exp(-0.5 * z * z) / (t * m.param2 * std::sqrt(2.0 * 3.14159265358979323846));
    }
  }
  return 0.0;
}

// The renewal model cannot condition any further once the survival at
// `elapsed` underflows; the next contact is treated as overdue.
inline bool ict_overdue(const IctModel& m, double elapsed) {
  if (m.family == Family::exponential) return false;  // memoryless
  return ict_survival(m, elapsed) < kSurvivalFloor;
}

// P(next contact within `window` | `elapsed` since last contact). Computed as
// 1 - S(e+w)/S(e) per family so heavy tails stay stable far past the mean.
inline double residual_window_prob(const IctModel& m, double elapsed, double window) {
  if (window <= 0.0) return 0.0;
  if (elapsed < 0.0) elapsed = 0.0;
  switch (m.family) {
    case Family::exponential:
      return -std::expm1(-m.param1 * window);
    case Family::pareto: {
      const double e = elapsed, w = window;
      if (e + w <= m.param2) return 0.0;
      if (e <= m.param2) return 1.0 - std::pow(m.param2 / (e + w), m.param1);
      return 1.0 - std::pow(e / (e + w), m.param1);
    }
    case Family::lognormal: {
      const double se = ict_survival(m, elapsed);
      if (se < kSurvivalFloor) return 1.0;
      const double r = ict_survival(m, elapsed + window) / se;
      return std::clamp(1.0 - r, 0.0, 1.0);
    }
  }
  return 0.0;
}

// Density of the forward-recurrence time: f(e+t)/S(e). Integrates to 1 over
// t in [0, inf). In the overdue corner the density degenerates and 0 is
// returned; callers treat the next contact as immediate instead.
inline double residual_density(const IctModel& m, double elapsed, double t) {
  if (t < 0.0) return 0.0;
  if (elapsed < 0.0) elapsed = 0.0;
  switch (m.family) {
    case Family::exponential:
      return m.param1 * std::exp(-m.param1 * t);
    case Family::pareto: {
      const double e = elapsed;
      if (e + t < m.param2) return 0.0;
      if (e <= m.param2) return ict_pdf(m, e + t);
      // alpha/(e+t) * (e/(e+t))^alpha
      return m.param1 / (e + t) * std::pow(e / (e + t), m.param1);
    }
    case Family::lognormal: {
      const double se = ict_survival(m, elapsed);
      if (se < kSurvivalFloor) return 0.0;
      return ict_pdf(m, elapsed + t) / se;
    }
  }
  return 0.0;
}

// Lower edge of the residual's support. Conditioning a Pareto below its scale
// leaves zero density until scale - elapsed; the other families start at 0.
inline double residual_support_start(const IctModel& m, double elapsed) {
  if (elapsed < 0.0) elapsed = 0.0;
  if (m.family == Family::pareto && elapsed < m.param2) return m.param2 - elapsed;
  return 0.0;
}

struct FamilyFit {
  bool valid = false;
  double param1 = 0.0;
  double param2 = 0.0;
  double aic = std::numeric_limits<double>::infinity();
};

namespace detail {

inline FamilyFit fit_exponential(const std::vector<double>& x) {
  FamilyFit fit;
  double sum = 0.0;
  for (double v : x) sum += v;
  if (sum <= 0.0) return fit;
  const double n = static_cast<double>(x.size());
  const double rate = n / sum;
  fit.valid = true;
  fit.param1 = rate;
  const double loglik = n * std::log(rate) - n;
  fit.aic = 2.0 * 1 - 2.0 * loglik;
  return fit;
}

inline FamilyFit fit_pareto(const std::vector<double>& x) {
  FamilyFit fit;
  const double xm = *std::min_element(x.begin(), x.end());
  if (xm <= 0.0) return fit;
  double sum_log_ratio = 0.0, sum_log = 0.0;
  for (double v : x) {
    sum_log_ratio += std::log(v / xm);
    sum_log += std::log(v);
  }
  if (sum_log_ratio < 1e-12) return fit;  // all samples equal: shape diverges
  const double n = static_cast<double>(x.size());
  const double shape = n / sum_log_ratio;
  fit.valid = true;
  fit.param1 = shape;
  fit.param2 = xm;
  const double loglik = n * std::log(shape) + n * shape * std::log(xm) - (shape + 1.0) * sum_log;
  fit.aic = 2.0 * 2 - 2.0 * loglik;
  return fit;
}

inline FamilyFit fit_lognormal(const std::vector<double>& x) {
  FamilyFit fit;
  const double n = static_cast<double>(x.size());
  double mu = 0.0;
  for (double v : x) mu += std::log(v);
  mu /= n;
  double var = 0.0;
  for (double v : x) {
    const double d = std::log(v) - mu;
    var += d * d;
  }
  var /= n;  // MLE variance
  if (var < 1e-12) return fit;
  const double sigma = std::sqrt(var);
  double sum_log = 0.0;
  for (double v : x) sum_log += std::log(v);
  fit.valid = true;
  fit.param1 = mu;
  fit.param2 = sigma;
  const double loglik =
      -sum_log - n * std::log(sigma) - 0.5 * n * std::log(2.0 * 3.14159265358979323846) - 0.5 * n;
  fit.aic = 2.0 * 2 - 2.0 * loglik;
  return fit;
}

}  // namespace detail

struct IctFitReport {
  IctModel model;
  double aic_exponential = std::numeric_limits<double>::infinity();
  double aic_pareto = std::numeric_limits<double>::infinity();
  double aic_lognormal = std::numeric_limits<double>::infinity();
};

// Maximum-likelihood fit of each family, selected by lowest AIC. Ties and
// invalid fits resolve in the order exponential, pareto, lognormal.
inline IctFitReport fit_ict_families(const std::vector<double>& samples) {
  if (samples.empty()) throw std::runtime_error("fit_ict_families: no samples");
  for (double v : samples)
    if (!(v > 0.0)) throw std::runtime_error("fit_ict_families: samples must be positive");

  IctFitReport report;
  const FamilyFit fe = detail::fit_exponential(samples);
  const FamilyFit fp = samples.size() >= 2 ? detail::fit_pareto(samples) : FamilyFit{};
  const FamilyFit fl = samples.size() >= 2 ? detail::fit_lognormal(samples) : FamilyFit{};
  report.aic_exponential = fe.aic;
  report.aic_pareto = fp.aic;
  report.aic_lognormal = fl.aic;

  const FamilyFit* best = &fe;
  Family best_family = Family::exponential;
  if (fp.valid && fp.aic < best->aic) {
    best = &fp;
    best_family = Family::pareto;
  }
  if (fl.valid && fl.aic < best->aic) {
    best = &fl;
    best_family = Family::lognormal;
  }
  if (!best->valid) throw std::runtime_error("fit_ict_families: no family admits a fit");

  report.model.family = best_family;
  report.model.param1 = best->param1;
  report.model.param2 = best->param2;
  report.model.sample_count = samples.size();
  report.model.source = ModelSource::per_pair;
  return report;
}

// Pairs below min_samples inherit the aggregate's parameters (fallback).
inline IctModel fit_pair_ict(const std::vector<double>& samples, std::size_t min_samples,
                             const IctModel& aggregate) {
  if (samples.size() < min_samples) {
    IctModel m = aggregate;
    m.sample_count = samples.size();
    m.source = ModelSource::aggregate_fallback;
    return m;
  }
  return fit_ict_families(samples).model;
}

// Kolmogorov-Smirnov statistic, reported diagnostically (never used for
// model selection).
inline double ks_statistic(const IctModel& m, std::vector<double> samples) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = ict_cdf(m, samples[i]);
    d = std::max(d, std::max((i + 1.0) / n - f, f - i / n));
  }
  return d;
}

// Pair -> model table. Pairs with zero ICT samples (fewer than two contacts)
// have no entry; the metric treats them as probability zero.
struct IctTable {
  std::map<NodePair, IctModel> models;
  std::optional<IctModel> aggregate;
  std::map<NodePair, IctFitReport> reports;  // per-pair fits only (diagnostics)

  const IctModel* lookup(const NodePair& pair) const {
    auto it = models.find(pair);
    return it == models.end() ? nullptr : &it->second;
  }
};

// Builds the table from ICT samples taken from events starting before
// `cutoff` (inclusive horizon end when cutoff < 0). The aggregate pools all
// pairs' samples and backs sparse pairs.
inline IctTable build_ict_table(const Trace& trace, std::size_t min_samples = kDefaultMinIctSamples,
                                Seconds cutoff = -1) {
  Trace clipped;
  const Trace* src = &trace;
  if (cutoff >= 0) {
    clipped.events.reserve(trace.events.size());
    for (const auto& ev : trace.events)
      if (ev.start < cutoff) clipped.events.push_back(ev);
    clipped.nodes = trace.nodes;
    src = &clipped;
  }

  std::map<NodePair, std::vector<double>> per_pair;
  std::vector<double> pooled;
  for (const auto& [pair, samples] : all_pair_ict_samples(*src)) {
    auto& dst = per_pair[pair];
    dst.reserve(samples.size());
    for (Seconds s : samples) dst.push_back(static_cast<double>(s));
    pooled.insert(pooled.end(), dst.begin(), dst.end());
  }

  IctTable table;
  if (!pooled.empty()) {
    IctFitReport agg = fit_ict_families(pooled);
    agg.model.source = ModelSource::per_pair;  // aggregate is its own fit
    table.aggregate = agg.model;
  }

  for (const auto& [pair, samples] : per_pair) {
    if (samples.size() >= min_samples) {
      IctFitReport report = fit_ict_families(samples);
      table.reports[pair] = report;
      table.models[pair] = report.model;
    } else if (table.aggregate) {
      table.models[pair] = fit_pair_ict(samples, min_samples, *table.aggregate);
    }
  }
  return table;
}

}  // namespace crowdcast
