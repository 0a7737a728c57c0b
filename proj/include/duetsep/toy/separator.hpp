#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "duetsep/scores.hpp"
#include "duetsep/stft.hpp"
#include "duetsep/toy/autodiff.hpp"

namespace duetsep::toy {

/// Which branch receives the note conditioning; a disabled branch sees zeros.
struct BranchConditioning {
  bool temporal = true;
  bool spectral = true;

  friend bool operator==(const BranchConditioning&, const BranchConditioning&) = default;
};

/// Small two-branch separator.
///
/// Temporal branch: three stride-4 convolutions (16, 32, 64 channels), the
/// 2P-row temporal plane concatenated to the bottleneck, three transposed
/// convolutions with additive skips, two output channels.
///
/// Spectral branch: log-magnitude of a 256/64 STFT, two convolutions along
/// frequency (128 -> 32 -> 16 positions, so one position per pitch), then a
/// per-frame linear layer to two mask logit planes. The 2 x P spectral plane
/// enters each source's logits through one shared matrix applied to
/// (own plane, other plane). Masks are 2 * sigmoid, because mixtures are stem
/// averages, and start at 0.5.
///
/// Each source estimate is the sum of both branch outputs.
struct SeparatorConfig {
  int sample_rate = 8000;
  std::size_t segment_samples = 16000;
  int lowest_pitch = 52;
  std::size_t pitch_count = 16;
  BranchConditioning conditioning;

  static constexpr std::size_t kTemporalStride = 64;
  static constexpr std::size_t kWindow = 256;
  static constexpr std::size_t kHop = 64;

  StftConfig stft() const { return StftConfig(kWindow, kHop, WindowKind::hann); }
  std::size_t temporal_frames() const { return segment_samples / kTemporalStride; }
  std::size_t spectral_frames() const { return stft().frame_count(segment_samples); }
  void validate() const;
};

class Separator {
 public:
  /// Random init. Output layers start at zero, so the untrained model returns
  /// about half the mixture per source.
  Separator(SeparatorConfig config, std::uint64_t seed);
  Separator(SeparatorConfig config, ParameterSet params);

  const SeparatorConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// Conditioning planes for one segment; `rolls` must span the segment.
  scores::ConditioningPlanes planes(const std::array<scores::PianoRoll, 2>& rolls) const;
  scores::ConditioningPlanes zero_planes() const;

  /// Records one segment on `graph` (which must use params()). Returns the two
  /// waveform nodes, each of length segment_samples.
  std::array<Graph::Id, 2> forward(Graph& graph, std::span<const double> mixture,
                                   const scores::ConditioningPlanes& planes) const;

  std::array<std::vector<double>, 2> separate(std::span<const double> mixture,
                                              const scores::ConditioningPlanes& planes) const;

 private:
  void init(std::uint64_t seed);

  SeparatorConfig config_;
  ParameterSet params_;
};

/// Parameter names and shapes the separator expects, in checkpoint order.
ParameterSet separator_layout(const SeparatorConfig& config);

}  // namespace duetsep::toy
