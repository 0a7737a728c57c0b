#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "duetsep/losses.hpp"
#include "duetsep/metrics.hpp"
#include "duetsep/toy/separator.hpp"
#include "duetsep/toy/synth.hpp"

namespace duetsep::toy {

/// Everything that defines a reproducible toy run.
struct BenchmarkSpec {
  std::uint64_t seed = 7;
  std::size_t train_duets = 32;
  std::size_t test_duets = 8;
  double duet_seconds = 8.0;
  double density = 7.0;
  int sample_rate = 8000;
  double label_frame_rate = 100.0;
  double val_fraction = 0.2;
  std::size_t epochs = 30;
  std::size_t batch_size = 4;
  double learning_rate = 1e-3;
  double gain_lo = 0.7;
  double gain_hi = 1.3;
  double degrade_drop = 0.3;
  std::size_t degrade_jitter_frames = 3;
  std::size_t filter_length = 512;

  void validate() const;
};

nlohmann::json spec_to_json(const BenchmarkSpec& spec);
/// Missing keys keep their defaults; unknown keys are rejected.
BenchmarkSpec spec_from_json(const nlohmann::json& json);
BenchmarkSpec load_spec(const std::filesystem::path& path);

struct NamedDuet {
  std::string id;
  Duet duet;
};

struct ToyCorpus {
  std::vector<NamedDuet> train;
  std::vector<NamedDuet> val;
  std::vector<NamedDuet> test;
};

/// Synthesizes the corpus and applies the track-level train/val split.
ToyCorpus make_corpus(const BenchmarkSpec& spec);

class Adam {
 public:
  Adam(const ParameterSet& params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParameterSet& params, const Gradients& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  Gradients m_, v_;
};

enum class ConditioningMode { none, ground_truth, degraded };
std::string to_string(ConditioningMode mode);
ConditioningMode parse_mode(const std::string& text);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double mixture_term = 0.0;
  double val_loss = 0.0;
};

struct TrainOptions {
  BranchConditioning conditioning;
  /// none trains with zero planes; degraded is an evaluation-only mode.
  ConditioningMode mode = ConditioningMode::ground_truth;
  losses::PitLossConfig loss;
  std::size_t jobs = 1;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  Separator model;
  std::vector<EpochLog> log;
};

/// Adam on random 2 s crops (frame-aligned to the labels) with per-stem gain
/// augmentation. Row 0 of the log is the untrained model on epoch 1's crops.
/// Per-item gradients are summed in item order, so results do not depend on
/// `jobs`. Throws on a non-finite loss.
TrainResult train_separator(const ToyCorpus& corpus, const BenchmarkSpec& spec, const TrainOptions& options);

std::string loss_csv(const std::vector<EpochLog>& log);

/// Rolls (whole track) -> conditioning for one separator segment.
scores::ConditioningPlanes segment_planes(const Separator& model, const std::array<scores::PianoRoll, 2>& rolls,
                                          std::size_t start_sample);

/// Separates a whole track in consecutive segments, the last one zero-padded.
std::array<std::vector<double>, 2> separate_track(const Separator& model, const AudioBuffer& mixture,
                                                  const std::array<scores::PianoRoll, 2>* rolls);

using TrackEstimator = std::function<std::array<std::vector<double>, 2>(const NamedDuet&)>;

struct TrackResult {
  std::string id;
  metrics::MetricReport report;
};

struct EvalSummary {
  std::vector<TrackResult> tracks;
  /// Per source: mean and median over tracks (dB sentinels honored).
  std::array<metrics::SourceMetrics, 2> mean{};
  std::array<metrics::SourceMetrics, 2> median{};
  /// Mean SI-SDR over both sources and all tracks.
  double si_sdr = 0.0;
};

EvalSummary evaluate_tracks(const std::vector<NamedDuet>& tracks, const TrackEstimator& estimator,
                            std::size_t filter_length);

/// Model estimator for a conditioning mode; degraded rolls use the spec's
/// drop probability and jitter with seeds derived from (seed, track, source).
TrackEstimator model_estimator(const Separator& model, ConditioningMode mode, const BenchmarkSpec& spec);

std::string summary_csv(const std::string& label, const EvalSummary& summary);
std::string summary_csv_header();

}  // namespace duetsep::toy
