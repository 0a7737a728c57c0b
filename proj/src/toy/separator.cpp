#include "duetsep/toy/separator.hpp"

#include <cmath>

#include "duetsep/error.hpp"
#include "duetsep/rng.hpp"

namespace duetsep::toy {

namespace {

constexpr std::size_t kKernel = 8;
constexpr std::size_t kStride = 4;
constexpr std::size_t kPad = 2;
constexpr std::array<std::size_t, 3> kTemporalChannels{16, 32, 64};
constexpr std::array<std::size_t, 2> kSpectralChannels{8, 16};
constexpr std::size_t kMaskBins = 128;
// Masks span (0, 2): mixtures are stem averages, so a source can reach twice
// its share of the mixture spectrum. The bias starts the masks at 0.5.
constexpr double kMaskRange = 2.0;
constexpr double kNyquistMask = 0.5;
// 0/1 labels are scaled up so their weights move faster under Adam.
constexpr double kConditioningGain = 10.0;
constexpr double kOwnNoteBias = 0.02;

}  // namespace

void SeparatorConfig::validate() const {
  require(sample_rate > 0, "separator sample rate must be positive");
  require(segment_samples > 0 && segment_samples % kTemporalStride == 0,
          "segment length must be a positive multiple of " + std::to_string(kTemporalStride));
  require(pitch_count == kMaskBins / 8, "the spectral encoder resolves exactly " + std::to_string(kMaskBins / 8) +
                                            " pitch positions");
}

ParameterSet separator_layout(const SeparatorConfig& config) {
  config.validate();
  const std::size_t p2 = 2 * config.pitch_count;
  const auto [c1, c2, c3] = kTemporalChannels;
  const auto [s1, s2] = kSpectralChannels;
  ParameterSet ps;
  ps.add("temporal.enc1.w", {c1, 1, kKernel});
  ps.add("temporal.enc1.b", {c1});
  ps.add("temporal.enc2.w", {c2, c1, kKernel});
  ps.add("temporal.enc2.b", {c2});
  ps.add("temporal.enc3.w", {c3, c2, kKernel});
  ps.add("temporal.enc3.b", {c3});
  ps.add("temporal.dec3.w", {c3 + p2, c2, kKernel});
  ps.add("temporal.dec3.b", {c2});
  ps.add("temporal.dec2.w", {c2, c1, kKernel});
  ps.add("temporal.dec2.b", {c1});
  ps.add("temporal.dec1.w", {c1, 2, kKernel});
  ps.add("temporal.dec1.b", {2});
  ps.add("spectral.enc1.w", {s1, 1, 8});
  ps.add("spectral.enc1.b", {s1});
  ps.add("spectral.enc2.w", {s2, s1, 4});
  ps.add("spectral.enc2.b", {s2});
  ps.add("spectral.dec.w", {2 * kMaskBins, s2 * config.pitch_count});
  ps.add("spectral.dec.b", {2 * kMaskBins});
  ps.add("spectral.cond.w", {kMaskBins, p2});
  return ps;
}

Separator::Separator(SeparatorConfig config, std::uint64_t seed)
    : config_(config), params_(separator_layout(config)) {
  init(seed);
}

Separator::Separator(SeparatorConfig config, ParameterSet params) : config_(config), params_(std::move(params)) {
  const ParameterSet layout = separator_layout(config_);
  require(layout.size() == params_.size(), "parameter count does not match the separator layout");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    require(layout[i].name == params_[i].name && layout[i].shape == params_[i].shape,
            "parameter " + params_[i].name + " " + shape_string(params_[i].shape) + " does not match expected " +
                layout[i].name + " " + shape_string(layout[i].shape));
  }
}

void Separator::init(std::uint64_t seed) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const bool is_bias = p.shape.size() == 1;
    const bool is_output =
        p.name == "temporal.dec1.w" || p.name == "spectral.dec.w" || p.name == "spectral.cond.w";
    if (is_bias || is_output) continue;
    // Fan-in: input channels x taps; transposed weights are (Cin, Cout, K).
    const bool transposed = p.name.find(".dec") != std::string::npos;
    const std::size_t fan_in = transposed ? p.shape[0] * p.shape[2] / kStride : p.shape[1] * p.shape[2];
    const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
    Rng rng(derive_seed(seed, p.name, 0));
    for (double& v : p.value) v = rng.uniform(-bound, bound);
  }
  auto& mask_bias = params_[params_.index_of("spectral.dec.b")].value;
  std::fill(mask_bias.begin(), mask_bias.end(), -std::log(kMaskRange / kNyquistMask - 1.0));
  // Own-source notes nudge that source's mask up and the other's down, so the
  // permutation-invariant loss settles on the pairing the labels imply.
  auto& cond = params_[params_.index_of("spectral.cond.w")];
  const std::size_t pc = config_.pitch_count;
  for (std::size_t f = 0; f < kMaskBins; ++f) {
    for (std::size_t p = 0; p < pc; ++p) {
      cond.value[f * 2 * pc + p] = kOwnNoteBias;
      cond.value[f * 2 * pc + pc + p] = -kOwnNoteBias;
    }
  }
  // Conditioning inputs start at zero, which also ties the two sources.
  auto& dec3 = params_[params_.index_of("temporal.dec3.w")];
  const std::size_t row = dec3.shape[1] * dec3.shape[2];
  std::fill(dec3.value.begin() + static_cast<long>(kTemporalChannels[2] * row), dec3.value.end(), 0.0);
}

scores::ConditioningPlanes Separator::zero_planes() const {
  scores::ConditioningPlanes planes;
  planes.pitches = config_.pitch_count;
  planes.temporal_frames = config_.temporal_frames();
  planes.temporal.assign(2 * planes.pitches * planes.temporal_frames, 0.0);
  planes.spectral_frames = config_.spectral_frames();
  planes.spectral.assign(2 * planes.pitches * planes.spectral_frames, 0.0);
  return planes;
}

scores::ConditioningPlanes Separator::planes(const std::array<scores::PianoRoll, 2>& rolls) const {
  require(rolls[0].pitches() == config_.pitch_count && rolls[1].pitches() == config_.pitch_count,
          "rolls must have " + std::to_string(config_.pitch_count) + " pitch rows");
  return scores::make_conditioning(rolls, config_.segment_samples, config_.sample_rate,
                                   SeparatorConfig::kTemporalStride, config_.stft());
}

std::array<Graph::Id, 2> Separator::forward(Graph& graph, std::span<const double> mixture,
                                            const scores::ConditioningPlanes& planes) const {
  const std::size_t n = config_.segment_samples;
  const std::size_t pc = config_.pitch_count;
  const std::size_t tt = config_.temporal_frames();
  const std::size_t tf = config_.spectral_frames();
  require(mixture.size() == n, "segment has " + std::to_string(mixture.size()) + " samples, expected " +
                                   std::to_string(n));
  require(planes.pitches == pc && planes.temporal_frames == tt && planes.spectral_frames == tf,
          "conditioning planes do not match the separator geometry");

  auto param = [&](const char* name) { return graph.parameter(params_.index_of(name)); };

  double mean = 0.0;
  for (double v : mixture) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : mixture) var += (v - mean) * (v - mean);
  double sd = std::sqrt(var / static_cast<double>(n));
  if (!(sd > 1e-8)) sd = 1.0;

  // Temporal branch.
  std::vector<double> normalized(mixture.begin(), mixture.end());
  for (double& v : normalized) v /= sd;
  const auto x0 = graph.constant({1, n, 1}, std::move(normalized));
  const auto e1 = graph.relu(graph.conv1d(x0, param("temporal.enc1.w"), param("temporal.enc1.b"), kStride, kPad));
  const auto e2 = graph.relu(graph.conv1d(e1, param("temporal.enc2.w"), param("temporal.enc2.b"), kStride, kPad));
  const auto e3 = graph.relu(graph.conv1d(e2, param("temporal.enc3.w"), param("temporal.enc3.b"), kStride, kPad));
  std::vector<double> tcond(planes.temporal.size(), 0.0);
  if (config_.conditioning.temporal) {
    for (std::size_t i = 0; i < tcond.size(); ++i) tcond[i] = kConditioningGain * planes.temporal[i];
  }
  const auto tc = graph.constant({2 * pc, tt, 1}, std::move(tcond));
  const auto h3 = graph.concat({e3, tc});
  const auto d3 = graph.relu(
      graph.conv_transpose1d(h3, param("temporal.dec3.w"), param("temporal.dec3.b"), kStride, kPad));
  const auto d2 = graph.relu(graph.conv_transpose1d(graph.add(d3, e2), param("temporal.dec2.w"),
                                                    param("temporal.dec2.b"), kStride, kPad));
  const auto d1 =
      graph.conv_transpose1d(graph.add(d2, e1), param("temporal.dec1.w"), param("temporal.dec1.b"), kStride, kPad);

  // Spectral branch.
  const ComplexGrid spectrum = stft(mixture, config_.sample_rate, config_.stft());
  std::vector<double> logmag(kMaskBins * tf);
  for (std::size_t f = 0; f < kMaskBins; ++f) {
    for (std::size_t t = 0; t < tf; ++t) logmag[f * tf + t] = std::log1p(std::abs(spectrum.at(f, t)) / sd);
  }
  const auto z0 = graph.constant({1, kMaskBins, tf}, std::move(logmag));
  const auto z1 = graph.relu(graph.conv1d(z0, param("spectral.enc1.w"), param("spectral.enc1.b"), 4, 2));
  const auto z2 = graph.relu(graph.conv1d(z1, param("spectral.enc2.w"), param("spectral.enc2.b"), 2, 1));
  std::vector<double> scond(planes.spectral.size(), 0.0);
  if (config_.conditioning.spectral) {
    for (std::size_t i = 0; i < scond.size(); ++i) scond[i] = kConditioningGain * planes.spectral[i];
  }
  const auto sc = graph.constant({2, pc, tf}, std::move(scond));
  const auto features = graph.reshape(
      graph.linear(graph.reshape(z2, {kSpectralChannels[1] * pc, tf}), param("spectral.dec.w"), param("spectral.dec.b")),
      {2, kMaskBins, tf});
  // Shared conditioning weights: each source sees (own plane, other plane).
  const auto cond_w = param("spectral.cond.w");
  const auto no_bias = graph.constant({kMaskBins}, std::vector<double>(kMaskBins, 0.0));
  const std::array<Graph::Id, 2> slabs{graph.select(sc, 0), graph.select(sc, 1)};
  const auto nyquist = graph.constant({1, tf}, std::vector<double>(tf, kNyquistMask));

  std::array<Graph::Id, 2> out{};
  for (std::size_t s = 0; s < 2; ++s) {
    const auto temporal = graph.scale(graph.reshape(graph.select(d1, s), {n}), sd);
    const auto cond = graph.linear(graph.concat({slabs[s], slabs[1 - s]}), cond_w, no_bias);
    const auto mask = graph.scale(graph.sigmoid(graph.add(graph.select(features, s), cond)), kMaskRange);
    const auto spectral = graph.masked_istft(graph.concat({mask, nyquist}), spectrum);
    out[s] = graph.add(temporal, spectral);
  }
  return out;
}

std::array<std::vector<double>, 2> Separator::separate(std::span<const double> mixture,
                                                       const scores::ConditioningPlanes& planes) const {
  Graph graph(&params_);
  const auto out = forward(graph, mixture, planes);
  return {graph.value(out[0]), graph.value(out[1])};
}

}  // namespace duetsep::toy
