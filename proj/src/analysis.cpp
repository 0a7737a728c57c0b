#include "duetsep/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "duetsep/error.hpp"
#include "duetsep/toy/synth.hpp"

namespace duetsep::analysis {

std::string to_string(PairLabel label) {
  return label == PairLabel::monotimbral ? "monotimbral" : "multitimbral";
}

PairLabel parse_pair_label(const std::string& text) {
  if (text == "monotimbral") return PairLabel::monotimbral;
  if (text == "multitimbral") return PairLabel::multitimbral;
  fail_argument("unknown pair label '" + text + "'");
}

void SweepCurve::validate() const {
  require(!alpha.empty(), "sweep curve is empty");
  require(sdr.size() == alpha.size() && si_sdr.size() == alpha.size() && plain_sdr.size() == alpha.size(),
          "sweep curve columns differ in length");
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    require(alpha[i] > 0.0 && alpha[i] < 1.0, "alpha grid must lie strictly inside (0, 1)");
    require(i == 0 || alpha[i] > alpha[i - 1], "alpha grid must be strictly increasing");
  }
}

namespace {

void check_pair(const AudioBuffer& x1, const AudioBuffer& x2) {
  require(x1.channels() == 1 && x2.channels() == 1, "analysis pairs must be mono");
  require(x1.frames() == x2.frames(), "analysis pair tracks differ in length");
  require(x1.sample_rate() == x2.sample_rate(), "analysis pair tracks differ in sample rate");
}

double peak(const AudioBuffer& b) {
  double p = 0.0;
  for (double v : b.channel(0)) p = std::max(p, std::abs(v));
  return p;
}

}  // namespace

std::pair<AudioBuffer, AudioBuffer> normalize_pair(const AudioBuffer& x1, const AudioBuffer& x2) {
  check_pair(x1, x2);
  const double r1 = rms(x1.channel(0));
  const double r2 = rms(x2.channel(0));
  require(r1 > 0.0 && r2 > 0.0, "cannot normalize a silent track");
  AudioBuffer a = scaled(x1, 1.0 / r1);
  AudioBuffer b = scaled(x2, 1.0 / r2);
  const double p = std::max(peak(a), peak(b));
  if (p > 0.9) {
    a = scaled(a, 0.9 / p);
    b = scaled(b, 0.9 / p);
  }
  return {std::move(a), std::move(b)};
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 19; ++k) grid.push_back(k / 20.0);
  return grid;
}

SweepCurve alpha_sweep(const AudioBuffer& x1, const AudioBuffer& x2, const std::vector<double>& alpha_grid,
                       const metrics::ProjectionConfig& config, PairLabel label) {
  check_pair(x1, x2);
  SweepCurve curve;
  curve.label = label;
  curve.alpha = alpha_grid;
  curve.sdr.resize(alpha_grid.size());
  curve.si_sdr.resize(alpha_grid.size());
  curve.plain_sdr.resize(alpha_grid.size());
  for (double a : alpha_grid) require(std::isfinite(a), "alpha grid contains a non-finite value");
  curve.validate();

  const auto s1 = x1.channel(0);
  const auto s2 = x2.channel(0);
  const metrics::ProjectionBasis basis({{s1.begin(), s1.end()}, {s2.begin(), s2.end()}}, config);
  double ref_energy = 0.0;
  for (double v : s1) ref_energy += v * v;
  std::vector<double> m(s1.size());
  for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
    const double a = alpha_grid[k];
    double diff = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] = a * s1[i] + (1.0 - a) * s2[i];
      diff += (s1[i] - m[i]) * (s1[i] - m[i]);
    }
    curve.sdr[k] = metrics::sdr(basis.decompose(m, 0));
    curve.si_sdr[k] = metrics::si_sdr(m, s1);
    curve.plain_sdr[k] = diff > 0.0 ? 10.0 * std::log10(ref_energy / diff) : metrics::kInf;
  }
  return curve;
}

double crossing_alpha(const SweepCurve& curve, double target_db, Metric metric) {
  curve.validate();
  const auto& y = metric == Metric::sdr ? curve.sdr : metric == Metric::si_sdr ? curve.si_sdr : curve.plain_sdr;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == target_db) return curve.alpha[i];
    if (i + 1 < y.size()) {
      const double lo = std::min(y[i], y[i + 1]);
      const double hi = std::max(y[i], y[i + 1]);
      if (target_db > lo && target_db < hi) {
        const double t = (target_db - y[i]) / (y[i + 1] - y[i]);
        return curve.alpha[i] + t * (curve.alpha[i + 1] - curve.alpha[i]);
      }
    }
  }
  fail_argument("target " + metrics::format_db(target_db) + " dB lies outside the curve range");
}

OrderingReport compare_pairs(const std::pair<AudioBuffer, AudioBuffer>& mono,
                             const std::pair<AudioBuffer, AudioBuffer>& multi, const std::vector<double>& alpha_grid,
                             const metrics::ProjectionConfig& config) {
  OrderingReport report;
  report.mono = alpha_sweep(mono.first, mono.second, alpha_grid, config, PairLabel::monotimbral);
  report.multi = alpha_sweep(multi.first, multi.second, alpha_grid, config, PairLabel::multitimbral);
  report.consistent = true;
  for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
    report.sdr_difference.push_back(report.mono.sdr[k] - report.multi.sdr[k]);
    report.si_sdr_difference.push_back(report.mono.si_sdr[k] - report.multi.si_sdr[k]);
    if (!(report.sdr_difference.back() >= 0.0 && report.si_sdr_difference.back() >= 0.0)) report.consistent = false;
  }
  return report;
}

StandardPairs standard_pairs(std::uint64_t seed, double seconds, int sample_rate) {
  toy::ScoreParams params;
  params.duration = seconds;
  params.style = toy::ScoreStyle::homorhythmic;
  params.unison_probability = 0.5;
  const auto score = toy::generate_score(params, seed);
  toy::DuetRender render;
  render.sample_rate = sample_rate;
  const auto mono = toy::synth_duet(score, render, seed);
  render.voices[1] = toy::Voice::additive;
  const auto multi = toy::synth_duet(score, render, seed);
  return {normalize_pair(mono.stems[0], mono.stems[1]), normalize_pair(multi.stems[0], multi.stems[1])};
}

std::string curve_csv(const std::vector<SweepCurve>& curves) {
  std::string out = "alpha,sdr_db,si_sdr_db,pair_label,plain_sdr_db\n";
  char alpha[32];
  for (const auto& c : curves) {
    c.validate();
    for (std::size_t k = 0; k < c.alpha.size(); ++k) {
      std::snprintf(alpha, sizeof(alpha), "%.6f", c.alpha[k]);
      out += std::string(alpha) + "," + metrics::format_db(c.sdr[k]) + "," + metrics::format_db(c.si_sdr[k]) + "," +
             to_string(c.label) + "," + metrics::format_db(c.plain_sdr[k]) + "\n";
    }
  }
  return out;
}

std::vector<SweepCurve> parse_curve_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "alpha,sdr_db,si_sdr_db,pair_label,plain_sdr_db") {
    fail_argument("curve CSV header mismatch");
  }
  std::vector<SweepCurve> curves;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) fail_argument("curve CSV line " + std::to_string(line_no) + " needs 5 fields");
    const PairLabel label = parse_pair_label(f[3]);
    if (curves.empty() || curves.back().label != label) {
      curves.emplace_back();
      curves.back().label = label;
    }
    auto& c = curves.back();
    try {
      c.alpha.push_back(std::stod(f[0]));
    } catch (const std::exception&) {
      fail_argument("curve CSV line " + std::to_string(line_no) + " has a bad alpha");
    }
    c.sdr.push_back(metrics::parse_db(f[1]));
    c.si_sdr.push_back(metrics::parse_db(f[2]));
    c.plain_sdr.push_back(metrics::parse_db(f[4]));
  }
  for (const auto& c : curves) c.validate();
  return curves;
}

std::string ordering_csv(const OrderingReport& report) {
  std::string out = "alpha,sdr_difference_db,si_sdr_difference_db,sdr_sign,si_sdr_sign\n";
  auto sign = [](double v) { return v > 0.0 ? "+" : v < 0.0 ? "-" : "0"; };
  char alpha[32];
  for (std::size_t k = 0; k < report.mono.alpha.size(); ++k) {
    std::snprintf(alpha, sizeof(alpha), "%.6f", report.mono.alpha[k]);
    out += std::string(alpha) + "," + metrics::format_db(report.sdr_difference[k]) + "," +
           metrics::format_db(report.si_sdr_difference[k]) + "," + sign(report.sdr_difference[k]) + "," +
           sign(report.si_sdr_difference[k]) + "\n";
  }
  out += std::string("# consistent_ordering=") + (report.consistent ? "true" : "false") + "\n";
  return out;
}

std::string gnuplot_script(const std::string& csv_path, const std::string& output_png) {
  std::ostringstream s;
  s << "set datafile separator ','\n"
    << "set terminal pngcairo size 1000,420\n"
    << "set output '" << output_png << "'\n"
    << "set key top left\n"
    << "set xlabel 'alpha'\n"
    << "set ylabel 'dB'\n"
    << "set multiplot layout 1,2\n"
    << "set title 'SDR'\n"
    << "plot '" << csv_path << "' using 1:(strcol(4) eq 'monotimbral' ? $2 : 1/0) with linespoints title 'monotimbral', \\\n"
    << "     '' using 1:(strcol(4) eq 'multitimbral' ? $2 : 1/0) with linespoints title 'multitimbral'\n"
    << "set title 'SI-SDR'\n"
    << "plot '" << csv_path << "' using 1:(strcol(4) eq 'monotimbral' ? $3 : 1/0) with linespoints title 'monotimbral', \\\n"
    << "     '' using 1:(strcol(4) eq 'multitimbral' ? $3 : 1/0) with linespoints title 'multitimbral'\n"
    << "unset multiplot\n";
  return s.str();
}

}  // namespace duetsep::analysis
