#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "duetsep/audio.hpp"

namespace duetsep::metrics {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Energies at or below this fraction of the estimate energy count as zero;
/// ratios past that floor are reported with the infinite sentinels.
inline constexpr double kZeroEnergyRatio = 1e-10;

struct ProjectionConfig {
  std::size_t filter_length = 512;
  /// Absolute ridge added to the Gram diagonal; unset means
  /// 1e-10 x (mean Gram diagonal).
  std::optional<double> regularization;
  /// Refinement sweeps against the unregularized Gram after the ridged solve.
  int refinement_steps = 3;
};

/// BSS decomposition of one estimate. Components live on the estimate
/// zero-padded by filter_length - 1 samples, which is where every shifted
/// reference fits completely; they sum to that padded estimate.
struct Decomposition {
  std::vector<double> target;
  std::vector<double> interference;
  std::vector<double> artifacts;
  /// Energy of the unpadded estimate.
  double estimate_energy = 0.0;
};

/// Span of filter_length time shifts of each reference, factored once and
/// reusable across estimates.
class ProjectionBasis {
 public:
  ProjectionBasis(std::vector<std::vector<double>> references, ProjectionConfig config = {});
  ~ProjectionBasis();
  ProjectionBasis(ProjectionBasis&&) noexcept;
  ProjectionBasis& operator=(ProjectionBasis&&) noexcept;

  std::size_t reference_count() const { return references_.size(); }
  std::size_t length() const { return length_; }
  const ProjectionConfig& config() const { return config_; }

  Decomposition decompose(std::span<const double> estimate, std::size_t target_index) const;

 private:
  struct Factors;
  std::vector<std::vector<double>> references_;
  ProjectionConfig config_;
  std::size_t length_ = 0;
  std::unique_ptr<Factors> factors_;
};

Decomposition decompose(const AudioBuffer& estimate, const std::vector<AudioBuffer>& references,
                        std::size_t target_index, const ProjectionConfig& config = {});

double sdr(const Decomposition& d);
double sir(const Decomposition& d);
double sar(const Decomposition& d);

double si_sdr(std::span<const double> estimate, std::span<const double> reference);
/// Mono buffers of equal length.
double si_sdr(const AudioBuffer& estimate, const AudioBuffer& reference);

struct SourceMetrics {
  double sdr = 0.0;
  double si_sdr = 0.0;
  double sar = 0.0;
  double sir = 0.0;
};

struct MetricReport {
  /// Indexed by reference; metrics of the estimate assigned to it.
  std::vector<SourceMetrics> per_source;
  /// assignment[r] = index of the estimate matched with reference r.
  std::vector<std::size_t> assignment;
  std::size_t filter_length = 0;
  std::vector<std::string> warnings;

  bool identity() const;
  /// "0:1" style rendering of the assignment.
  std::string permutation_label() const;
};

/// Evaluates both assignments of two estimates to two references and keeps
/// the one with the larger mean SI-SDR (ties keep the identity). Multichannel
/// input is evaluated per channel and averaged in dB.
MetricReport evaluate_pair(const std::vector<AudioBuffer>& estimates,
                           const std::vector<AudioBuffer>& references,
                           const ProjectionConfig& config = {});

/// Mean of dB values honoring the sentinels (-inf dominates, then +inf).
double mean_db(std::span<const double> values);

/// CSV header and rows (track_id, source, permutation, sdr, si_sdr, sar, sir).
std::string csv_header();
std::string csv_rows(const std::string& track_id, const MetricReport& report);
/// Formats a dB value with 6 decimals, "inf" or "-inf".
std::string format_db(double value);
double parse_db(const std::string& text);

}  // namespace duetsep::metrics
