#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "duetsep/audio.hpp"
#include "duetsep/metrics.hpp"
#include "duetsep/rng.hpp"

namespace duetsep::dataset {

enum class SubsetTag { real, synthetic, external };
enum class Split { train, val, test };

std::string to_string(SubsetTag tag);
std::string to_string(Split split);
SubsetTag parse_subset(const std::string& text);
Split parse_split(const std::string& text);

struct TrackEntry {
  std::string track_id;
  std::array<std::filesystem::path, 2> stems;
  std::optional<std::filesystem::path> mixture;
  std::optional<std::filesystem::path> notes;
  SubsetTag subset = SubsetTag::real;
  double duration = 0.0;
};

/// Track registry. Paths are stored relative to the manifest file so a
/// dataset directory can be moved as a whole.
struct Manifest {
  int sample_rate = 44100;
  std::vector<TrackEntry> entries;
  std::optional<std::map<std::string, Split>> splits;

  void validate() const;
  std::size_t count(Split split) const;
};

/// JSON layout:
///   { "format": "duetsep-manifest", "version": 1, "sample_rate": 44100,
///     "tracks": [ { "track_id", "stems": [a, b], "mixture"?, "notes"?,
///                   "subset": "real|synthetic|external", "duration" } ],
///     "splits"?: { "<track_id>": "train|val|test" } }
std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const std::string& text);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

/// Scans <root>/<track_id>/{guitar1.wav, guitar2.wav, mix.wav, notes.csv};
/// stems are required, the mixture and notes are optional.
Manifest scan_directory(const std::filesystem::path& root, SubsetTag subset);

/// (stem1 + stem2) / 2, the shorter stem zero-extended.
AudioBuffer make_mixture(const AudioBuffer& first, const AudioBuffer& second);

/// Shuffled track-level split of every entry not already assigned to test.
Manifest split(const Manifest& manifest, double ratio = 0.8, std::uint64_t seed = 0);

struct AugmentConfig {
  double channel_swap_probability = 0.5;
  double amplitude_lo = 0.7;
  double amplitude_hi = 1.3;
  double remix_probability = 0.25;
  /// Non-positive keeps the full (common) length.
  double crop_seconds = 4.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct StemPair {
  AudioBuffer first;
  AudioBuffer second;
  AudioBuffer mixture;
  /// Crop start of each stem in its source track, for slicing labels.
  std::array<std::size_t, 2> offsets{0, 0};
  /// Pool index of the second stem when remixed.
  std::optional<std::size_t> remix_index;
};

/// Worker stream for one (track, epoch); independent of scheduling.
Rng augmentation_rng(std::uint64_t seed, const std::string& track_id, std::uint64_t epoch);

/// remix -> crop -> gain -> channel swap, then the mixture is rebuilt from
/// the augmented stems.
StemPair augment(const AudioBuffer& first, const AudioBuffer& second, const std::vector<AudioBuffer>& pool,
                 const AugmentConfig& config, Rng& rng);

struct ReportRow {
  std::string combo;
  metrics::MetricReport report;
};

/// One line per (combo, source) in input order.
std::string emit_report(const std::vector<ReportRow>& rows);

struct ParsedReportLine {
  std::string combo;
  std::string source;
  std::string permutation;
  metrics::SourceMetrics values;
};
std::vector<ParsedReportLine> parse_report(const std::string& csv);

}  // namespace duetsep::dataset
