#pragma once

#include <span>
#include <vector>

namespace duetsep::losses {

/// Two equally shaped signal planes, flattened. Non-owning.
struct SourcePair {
  std::span<const double> first;
  std::span<const double> second;
};

enum class Pairing { identity, swap };

/// Weights of the permutation term and of the mixture-consistency term.
/// L1 terms are averaged over the elements of one source, then summed over
/// the two sources.
struct PitLossConfig {
  double alpha_weight = 0.8;
  double beta_weight = 0.2;

  void validate() const;
};

struct LossValue {
  double loss = 0.0;
  Pairing pairing = Pairing::identity;
  /// Unweighted min-over-pairings L1 sum and unweighted mixture L1.
  double permutation_term = 0.0;
  double mixture_term = 0.0;
};

/// alpha * min_pairing(mae + mae) + beta * mae(est1 + est2, ref1 + ref2).
/// The mixture term compares SUMS of sources; callers working with averaged
/// mixtures must pass stems, not the mixture. Ties pick the identity.
LossValue pit_l1_mixture_loss(const SourcePair& estimates, const SourcePair& references,
                              const PitLossConfig& config = {});

struct LossGradient {
  LossValue value;
  std::vector<double> first;
  std::vector<double> second;
};

/// Subgradient with the pairing frozen at the minimizer; d|x|/dx = sign(x),
/// taken as 0 at 0.
LossGradient subgradient_pit_l1(const SourcePair& estimates, const SourcePair& references,
                                const PitLossConfig& config = {});

inline constexpr double kBceClamp = 1e-7;

/// Permutation-invariant binary cross-entropy, per-source mean summed over
/// the two sources. Predictions are clamped to [1e-7, 1 - 1e-7].
LossValue pit_bce(const SourcePair& predictions, const SourcePair& targets);

}  // namespace duetsep::losses
