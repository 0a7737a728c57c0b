#include "duetsep/metrics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "duetsep/error.hpp"
#include "duetsep/fft.hpp"
#include "duetsep/simd/kernels.hpp"

namespace duetsep::metrics {

namespace {

double energy(std::span<const double> x) { return simd::kernels().sum_squares(x.data(), x.size()); }

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct RidgedSystem {
  Matrix gram;  // unregularized
  Eigen::LLT<Matrix> llt;
  double ridge = 0.0;

  RidgedSystem(Matrix g, std::optional<double> ridge_override) : gram(std::move(g)) {
    const double mean_diag = gram.trace() / static_cast<double>(gram.rows());
    ridge = ridge_override.value_or(1e-10 * mean_diag);
    Matrix reg = gram;
    reg.diagonal().array() += ridge;
    llt.compute(reg);
    if (llt.info() != Eigen::Success) {
      fail("singular Gram matrix: references are linearly dependent beyond ridge repair");
    }
  }

  Vector solve(const Vector& rhs, int refinement_steps) const {
    Vector c = llt.solve(rhs);
    for (int i = 0; i < refinement_steps; ++i) c += llt.solve(rhs - gram * c);
    if (!c.allFinite()) fail("singular Gram matrix: projection coefficients are not finite");
    return c;
  }
};

}  // namespace

struct ProjectionBasis::Factors {
  RidgedSystem all;
  std::vector<RidgedSystem> per_target;
};

ProjectionBasis::~ProjectionBasis() = default;
ProjectionBasis::ProjectionBasis(ProjectionBasis&&) noexcept = default;
ProjectionBasis& ProjectionBasis::operator=(ProjectionBasis&&) noexcept = default;

ProjectionBasis::ProjectionBasis(std::vector<std::vector<double>> references, ProjectionConfig config)
    : references_(std::move(references)), config_(config) {
  require(!references_.empty(), "projection needs at least one reference");
  require(config_.filter_length >= 1, "filter length must be >= 1");
  length_ = references_.front().size();
  require(length_ > 0, "references are empty");
  for (const auto& r : references_) require(r.size() == length_, "reference lengths differ");
  for (std::size_t i = 0; i < references_.size(); ++i) {
    if (energy(references_[i]) == 0.0) {
      fail("singular Gram matrix: reference " + std::to_string(i) + " is silent");
    }
  }

  const std::size_t refs = references_.size();
  const auto taps = static_cast<long>(config_.filter_length);
  const long n = static_cast<long>(length_);
  Matrix gram(refs * config_.filter_length, refs * config_.filter_length);

  // Entry ((i,a),(j,b)) = sum_m r_i(m) r_j(m + a - b), read off the full
  // cross-correlation of r_j against r_i.
  for (std::size_t i = 0; i < refs; ++i) {
    for (std::size_t j = i; j < refs; ++j) {
      const auto c = fft::xcorr(references_[j], references_[i]);
      auto at_lag = [&](long lag) {
        return (lag <= -n || lag >= n) ? 0.0 : c[static_cast<std::size_t>(lag + n - 1)];
      };
      for (long a = 0; a < taps; ++a) {
        for (long b = 0; b < taps; ++b) {
          const double v = at_lag(a - b);
          gram(static_cast<long>(i) * taps + a, static_cast<long>(j) * taps + b) = v;
          gram(static_cast<long>(j) * taps + b, static_cast<long>(i) * taps + a) = v;
        }
      }
    }
  }

  std::vector<RidgedSystem> blocks;
  blocks.reserve(refs);
  for (std::size_t t = 0; t < refs; ++t) {
    const long off = static_cast<long>(t) * taps;
    blocks.emplace_back(Matrix(gram.block(off, off, taps, taps)), config_.regularization);
  }
  factors_ = std::make_unique<Factors>(Factors{RidgedSystem(std::move(gram), config_.regularization),
                                               std::move(blocks)});
}

Decomposition ProjectionBasis::decompose(std::span<const double> estimate, std::size_t target_index) const {
  require(estimate.size() == length_, "estimate and reference lengths differ");
  require(target_index < references_.size(), "target index out of range");
  const std::size_t refs = references_.size();
  const std::size_t taps = config_.filter_length;
  const std::size_t padded = length_ + taps - 1;

  // rhs((j,b)) = sum_n e(n) r_j(n - b): lags 0..taps-1 of xcorr(e, r_j).
  Vector rhs(static_cast<long>(refs * taps));
  for (std::size_t j = 0; j < refs; ++j) {
    const auto c = fft::xcorr(estimate, references_[j]);
    for (std::size_t b = 0; b < taps; ++b) {
      const std::size_t idx = b + length_ - 1;
      rhs(static_cast<long>(j * taps + b)) = idx < c.size() ? c[idx] : 0.0;
    }
  }

  auto synthesize = [&](std::size_t j, const double* coeffs) {
    auto y = fft::convolve(references_[j], std::span<const double>(coeffs, taps));
    y.resize(padded, 0.0);
    return y;
  };

  Decomposition d;
  d.estimate_energy = energy(estimate);

  const Vector rhs_target = rhs.segment(static_cast<long>(target_index * taps), static_cast<long>(taps));
  const Vector c_target = factors_->per_target[target_index].solve(rhs_target, config_.refinement_steps);
  d.target = synthesize(target_index, c_target.data());

  const Vector c_all = factors_->all.solve(rhs, config_.refinement_steps);
  std::vector<double> all(padded, 0.0);
  for (std::size_t j = 0; j < refs; ++j) {
    const auto part = synthesize(j, c_all.data() + j * taps);
    for (std::size_t n = 0; n < padded; ++n) all[n] += part[n];
  }

  d.interference.resize(padded);
  d.artifacts.resize(padded);
  for (std::size_t n = 0; n < padded; ++n) {
    d.interference[n] = all[n] - d.target[n];
    const double e = n < length_ ? estimate[n] : 0.0;
    d.artifacts[n] = e - all[n];
  }
  return d;
}

Decomposition decompose(const AudioBuffer& estimate, const std::vector<AudioBuffer>& references,
                        std::size_t target_index, const ProjectionConfig& config) {
  require(estimate.channels() == 1, "decompose expects a mono estimate");
  std::vector<std::vector<double>> refs;
  for (const auto& r : references) {
    require(r.channels() == 1, "decompose expects mono references");
    refs.emplace_back(r.channel(0).begin(), r.channel(0).end());
  }
  return ProjectionBasis(std::move(refs), config).decompose(estimate.channel(0), target_index);
}

namespace {

// 10 log10(num / den) with the zero-energy sentinels.
double ratio_db(double num, double den, double scale) {
  const double floor = kZeroEnergyRatio * scale;
  if (num <= floor) return -kInf;
  if (den <= floor) return kInf;
  return 10.0 * std::log10(num / den);
}

std::vector<double> sum(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

}  // namespace

double sdr(const Decomposition& d) {
  return ratio_db(energy(d.target), energy(sum(d.interference, d.artifacts)), d.estimate_energy);
}

double sir(const Decomposition& d) {
  return ratio_db(energy(d.target), energy(d.interference), d.estimate_energy);
}

double sar(const Decomposition& d) {
  return ratio_db(energy(sum(d.target, d.interference)), energy(d.artifacts), d.estimate_energy);
}

double si_sdr(std::span<const double> estimate, std::span<const double> reference) {
  require(estimate.size() == reference.size(), "si_sdr: length mismatch");
  const auto& k = simd::kernels();
  const double ref_energy = k.sum_squares(reference.data(), reference.size());
  if (ref_energy == 0.0) fail_argument("si_sdr: reference is silent");
  const double beta = k.dot(estimate.data(), reference.data(), estimate.size()) / ref_energy;
  std::vector<double> residual(estimate.begin(), estimate.end());
  k.axpy(-beta, reference.data(), residual.data(), residual.size());
  const double target = beta * beta * ref_energy;
  return ratio_db(target, k.sum_squares(residual.data(), residual.size()),
                  k.sum_squares(estimate.data(), estimate.size()));
}

double si_sdr(const AudioBuffer& estimate, const AudioBuffer& reference) {
  require(estimate.channels() == 1 && reference.channels() == 1, "si_sdr expects mono buffers");
  return si_sdr(estimate.channel(0), reference.channel(0));
}

double mean_db(std::span<const double> values) {
  if (values.empty()) return 0.0;
  bool pos_inf = false;
  double acc = 0.0;
  for (double v : values) {
    if (v == -kInf) return -kInf;
    if (v == kInf) pos_inf = true;
    acc += v;
  }
  return pos_inf ? kInf : acc / static_cast<double>(values.size());
}

bool MetricReport::identity() const {
  for (std::size_t r = 0; r < assignment.size(); ++r)
    if (assignment[r] != r) return false;
  return true;
}

std::string MetricReport::permutation_label() const {
  std::string out;
  for (std::size_t r = 0; r < assignment.size(); ++r) {
    if (r) out += ':';
    out += std::to_string(assignment[r]);
  }
  return out;
}

namespace {

// Bounded stand-in for ranking assignments; sentinels would otherwise make
// sums undefined.
double rank_value(double db) { return std::clamp(db, -1000.0, 1000.0); }

}  // namespace

MetricReport evaluate_pair(const std::vector<AudioBuffer>& estimates,
                           const std::vector<AudioBuffer>& references, const ProjectionConfig& config) {
  require(estimates.size() == 2 && references.size() == 2, "evaluate_pair needs two estimates and two references");
  const std::size_t channels = references[0].channels();
  const std::size_t frames = references[0].frames();
  for (const auto* list : {&estimates, &references}) {
    for (const auto& b : *list) {
      require(b.channels() == channels, "evaluate_pair: channel counts differ");
      require(b.frames() == frames, "evaluate_pair: signal lengths differ");
    }
  }

  // Pick the assignment on SI-SDR pooled over channels and sources.
  double score[2] = {0.0, 0.0};
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t r = 0; r < 2; ++r) {
      score[0] += rank_value(si_sdr(estimates[r].channel(c), references[r].channel(c)));
      score[1] += rank_value(si_sdr(estimates[1 - r].channel(c), references[r].channel(c)));
    }
  }
  MetricReport report;
  report.filter_length = config.filter_length;
  report.assignment = score[1] > score[0] ? std::vector<std::size_t>{1, 0} : std::vector<std::size_t>{0, 1};

  std::vector<std::vector<SourceMetrics>> per_channel(2);
  for (std::size_t c = 0; c < channels; ++c) {
    std::vector<std::vector<double>> refs;
    for (const auto& r : references) refs.emplace_back(r.channel(c).begin(), r.channel(c).end());
    const ProjectionBasis basis(std::move(refs), config);
    for (std::size_t r = 0; r < 2; ++r) {
      const auto est = estimates[report.assignment[r]].channel(c);
      const Decomposition d = basis.decompose(est, r);
      SourceMetrics m{sdr(d), si_sdr(est, references[r].channel(c)), sar(d), sir(d)};
      if (m.sdr == -kInf) {
        report.warnings.push_back("source " + std::to_string(r) + " channel " + std::to_string(c) +
                                  ": zero-energy target projection");
      }
      per_channel[r].push_back(m);
    }
  }

  for (std::size_t r = 0; r < 2; ++r) {
    std::vector<double> sdrs, si, sars, sirs;
    for (const auto& m : per_channel[r]) {
      sdrs.push_back(m.sdr);
      si.push_back(m.si_sdr);
      sars.push_back(m.sar);
      sirs.push_back(m.sir);
    }
    report.per_source.push_back({mean_db(sdrs), mean_db(si), mean_db(sars), mean_db(sirs)});
  }
  return report;
}

std::string format_db(double value) {
  if (value == kInf) return "inf";
  if (value == -kInf) return "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

double parse_db(const std::string& text) {
  if (text == "inf") return kInf;
  if (text == "-inf") return -kInf;
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) fail_argument("malformed dB value: " + text);
  return v;
}

std::string csv_header() { return "track_id,source,permutation,sdr,si_sdr,sar,sir\n"; }

std::string csv_rows(const std::string& track_id, const MetricReport& report) {
  std::ostringstream out;
  for (std::size_t r = 0; r < report.per_source.size(); ++r) {
    const auto& m = report.per_source[r];
    out << track_id << ",G" << (r + 1) << ',' << report.permutation_label() << ',' << format_db(m.sdr)
        << ',' << format_db(m.si_sdr) << ',' << format_db(m.sar) << ',' << format_db(m.sir) << '\n';
  }
  return out.str();
}

}  // namespace duetsep::metrics
