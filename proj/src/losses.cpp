#include "duetsep/losses.hpp"

#include <algorithm>
#include <cmath>

#include "duetsep/error.hpp"
#include "duetsep/simd/kernels.hpp"

namespace duetsep::losses {

void PitLossConfig::validate() const {
  require(alpha_weight >= 0.0 && beta_weight >= 0.0 && alpha_weight + beta_weight > 0.0,
          "loss weights must be non-negative and not both zero");
}

namespace {

void check_shapes(const SourcePair& a, const SourcePair& b) {
  const std::size_t n = a.first.size();
  require(n > 0, "loss inputs are empty");
  require(a.second.size() == n && b.first.size() == n && b.second.size() == n,
          "loss inputs differ in shape");
}

double mae(std::span<const double> a, std::span<const double> b) {
  return simd::kernels().sum_abs_diff(a.data(), b.data(), a.size()) / static_cast<double>(a.size());
}

double mixture_mae(const SourcePair& est, const SourcePair& ref) {
  const std::size_t n = est.first.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::abs((est.first[i] + est.second[i]) - (ref.first[i] + ref.second[i]));
  }
  return acc / static_cast<double>(n);
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

LossValue pit_l1_mixture_loss(const SourcePair& estimates, const SourcePair& references,
                              const PitLossConfig& config) {
  config.validate();
  check_shapes(estimates, references);
  const double identity = mae(estimates.first, references.first) + mae(estimates.second, references.second);
  const double swapped = mae(estimates.second, references.first) + mae(estimates.first, references.second);
  LossValue v;
  v.pairing = swapped < identity ? Pairing::swap : Pairing::identity;
  v.permutation_term = std::min(identity, swapped);
  v.mixture_term = mixture_mae(estimates, references);
  v.loss = config.alpha_weight * v.permutation_term + config.beta_weight * v.mixture_term;
  return v;
}

LossGradient subgradient_pit_l1(const SourcePair& estimates, const SourcePair& references,
                                const PitLossConfig& config) {
  LossGradient g;
  g.value = pit_l1_mixture_loss(estimates, references, config);
  const std::size_t n = estimates.first.size();
  const double inv = 1.0 / static_cast<double>(n);
  const double a = config.alpha_weight * inv;
  const double b = config.beta_weight * inv;
  const bool swap = g.value.pairing == Pairing::swap;
  // Estimate k is matched with reference ref_of[k].
  const std::span<const double> ref_of_first = swap ? references.second : references.first;
  const std::span<const double> ref_of_second = swap ? references.first : references.second;

  g.first.resize(n);
  g.second.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mix =
        b * sign((estimates.first[i] + estimates.second[i]) - (references.first[i] + references.second[i]));
    g.first[i] = a * sign(estimates.first[i] - ref_of_first[i]) + mix;
    g.second[i] = a * sign(estimates.second[i] - ref_of_second[i]) + mix;
  }
  return g;
}

namespace {

double mean_bce(std::span<const double> p, std::span<const double> t) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
    acc -= t[i] * std::log(q) + (1.0 - t[i]) * std::log(1.0 - q);
  }
  return acc / static_cast<double>(p.size());
}

}  // namespace

LossValue pit_bce(const SourcePair& predictions, const SourcePair& targets) {
  check_shapes(predictions, targets);
  for (auto plane : {targets.first, targets.second}) {
    for (double v : plane) require(v == 0.0 || v == 1.0, "BCE targets must be binary");
  }
  const double identity = mean_bce(predictions.first, targets.first) + mean_bce(predictions.second, targets.second);
  const double swapped = mean_bce(predictions.second, targets.first) + mean_bce(predictions.first, targets.second);
  LossValue v;
  v.pairing = swapped < identity ? Pairing::swap : Pairing::identity;
  v.permutation_term = std::min(identity, swapped);
  v.loss = v.permutation_term;
  return v;
}

}  // namespace duetsep::losses
