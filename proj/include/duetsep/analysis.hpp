#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "duetsep/audio.hpp"
#include "duetsep/metrics.hpp"

namespace duetsep::analysis {

enum class PairLabel { monotimbral, multitimbral };
std::string to_string(PairLabel label);
PairLabel parse_pair_label(const std::string& text);

/// Metric curves of m = alpha * x1 + (1 - alpha) * x2 scored against x1.
struct SweepCurve {
  PairLabel label = PairLabel::monotimbral;
  std::vector<double> alpha;
  /// Full decomposition against the reference set {x1, x2}.
  std::vector<double> sdr;
  std::vector<double> si_sdr;
  /// 10 log10(|x1|^2 / |x1 - m|^2), without any projection.
  std::vector<double> plain_sdr;

  void validate() const;
};

/// Each track scaled to unit RMS, then both scaled by one factor so that the
/// larger peak is at most 0.9. Mono, equal length, non-silent.
std::pair<AudioBuffer, AudioBuffer> normalize_pair(const AudioBuffer& x1, const AudioBuffer& x2);

/// 0.05, 0.10, ..., 0.95.
std::vector<double> default_alpha_grid();

SweepCurve alpha_sweep(const AudioBuffer& x1, const AudioBuffer& x2, const std::vector<double>& alpha_grid,
                       const metrics::ProjectionConfig& config = {}, PairLabel label = PairLabel::monotimbral);

enum class Metric { sdr, si_sdr, plain_sdr };

/// First alpha at which the curve reaches target_db, by linear interpolation
/// between the bracketing grid points.
double crossing_alpha(const SweepCurve& curve, double target_db, Metric metric = Metric::sdr);

struct OrderingReport {
  SweepCurve mono;
  SweepCurve multi;
  /// mono - multi per grid point.
  std::vector<double> sdr_difference;
  std::vector<double> si_sdr_difference;
  /// mono >= multi for both metrics at every grid point.
  bool consistent = false;
};

OrderingReport compare_pairs(const std::pair<AudioBuffer, AudioBuffer>& mono,
                             const std::pair<AudioBuffer, AudioBuffer>& multi, const std::vector<double>& alpha_grid,
                             const metrics::ProjectionConfig& config = {});

/// The reference pairs: one homorhythmic score with frequent unisons, rendered
/// as two plucked strings (mono) and as a plucked string plus the additive
/// tone (multi). Both pairs are returned normalized.
struct StandardPairs {
  std::pair<AudioBuffer, AudioBuffer> mono;
  std::pair<AudioBuffer, AudioBuffer> multi;
};
StandardPairs standard_pairs(std::uint64_t seed = 29, double seconds = 4.0, int sample_rate = 8000);

/// alpha,sdr_db,si_sdr_db,pair_label,plain_sdr_db
std::string curve_csv(const std::vector<SweepCurve>& curves);
std::vector<SweepCurve> parse_curve_csv(const std::string& text);
std::string ordering_csv(const OrderingReport& report);

/// gnuplot script drawing SDR and SI-SDR against alpha for both labels.
std::string gnuplot_script(const std::string& csv_path, const std::string& output_png);

}  // namespace duetsep::analysis
