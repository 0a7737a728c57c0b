#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "duetsep/stft.hpp"

namespace duetsep::scores {

struct NoteEvent {
  int pitch = 60;
  double onset = 0.0;
  double offset = 0.0;
  int source = 0;

  void validate() const;
  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

std::vector<NoteEvent> read_notes_csv(const std::filesystem::path& path);
void write_notes_csv(std::span<const NoteEvent> events, const std::filesystem::path& path);
std::vector<NoteEvent> parse_notes_csv(const std::string& text);
std::string format_notes_csv(std::span<const NoteEvent> events);

/// Notes overlapping [start, start + duration), shifted to start at zero and
/// clipped to the window.
std::vector<NoteEvent> notes_in_window(std::span<const NoteEvent> events, double start, double duration);

/// Binary pitch x frame activity grid of one source. Row r holds MIDI pitch
/// lowest_pitch + r (the lowest pitch is a rasterization parameter, not part
/// of the roll).
class PianoRoll {
 public:
  PianoRoll() = default;
  PianoRoll(std::size_t pitches, std::size_t frames, double frame_rate, int source);

  std::size_t pitches() const { return pitches_; }
  std::size_t frames() const { return frames_; }
  double frame_rate() const { return frame_rate_; }
  int source() const { return source_; }
  double duration_seconds() const { return static_cast<double>(frames_) / frame_rate_; }

  bool active(std::size_t pitch, std::size_t frame) const { return values_[pitch * frames_ + frame] != 0; }
  void set(std::size_t pitch, std::size_t frame, bool on = true) {
    values_[pitch * frames_ + frame] = on ? 1 : 0;
  }
  std::span<const std::uint8_t> row(std::size_t pitch) const {
    return std::span<const std::uint8_t>(values_).subspan(pitch * frames_, frames_);
  }
  std::span<const std::uint8_t> values() const { return values_; }
  std::size_t active_count() const;

  friend bool operator==(const PianoRoll&, const PianoRoll&) = default;

 private:
  std::size_t pitches_ = 0;
  std::size_t frames_ = 0;
  double frame_rate_ = 1.0;
  int source_ = 0;
  std::vector<std::uint8_t> values_;
};

/// One roll per source (index = source). Frame k covers [k/fps, (k+1)/fps)
/// and is active for a pitch iff some note of that pitch overlaps it by a
/// positive amount. Notes past `duration` are clipped.
std::vector<PianoRoll> rasterize(std::span<const NoteEvent> events, double frame_rate, double duration,
                                 std::size_t pitch_count = 128, int lowest_pitch = 0,
                                 std::size_t source_count = 2);

/// Max-pool along time; a trailing partial group is pooled too.
PianoRoll downsample_activity(const PianoRoll& roll, std::size_t factor);

/// Conditioning planes for the two injection points.
struct ConditioningPlanes {
  std::size_t pitches = 0;
  /// (2 * pitches) x temporal_frames, row-major; source 0 in rows [0, P).
  std::size_t temporal_frames = 0;
  std::vector<double> temporal;
  /// 2 x pitches x spectral_frames, slab 0 = source 0.
  std::size_t spectral_frames = 0;
  std::vector<double> spectral;

  std::array<std::size_t, 2> temporal_shape() const { return {2 * pitches, temporal_frames}; }
  std::array<std::size_t, 3> spectral_shape() const { return {2, pitches, spectral_frames}; }
};

/// Frame count of the temporal plane for a segment of n samples.
inline std::size_t temporal_frames(std::size_t segment_samples, std::size_t stage_stride) {
  return (segment_samples + stage_stride - 1) / stage_stride;
}

/// Stacks both rolls at the resolution of a temporal encoder stage whose
/// cumulative stride is `stage_stride`: column j covers samples
/// [j*stride, (j+1)*stride) and is the max over overlapping roll frames.
std::vector<double> align_for_temporal_branch(const std::array<PianoRoll, 2>& rolls,
                                              std::size_t segment_samples, int sample_rate,
                                              std::size_t stage_stride);

/// 2 x P x T_f plane, T_f being the STFT frame count of the segment; frame t
/// pools the roll over the hop-wide interval centred on the frame.
std::vector<double> align_for_spectral_branch(const std::array<PianoRoll, 2>& rolls, const StftConfig& config,
                                              std::size_t segment_samples, int sample_rate);

ConditioningPlanes make_conditioning(const std::array<PianoRoll, 2>& rolls, std::size_t segment_samples,
                                     int sample_rate, std::size_t stage_stride, const StftConfig& config);

/// Each contiguous run of active frames is dropped with probability p or
/// shifted by a uniform integer in [-jitter, jitter] frames (clipped).
PianoRoll degrade_labels(const PianoRoll& roll, double drop_probability, std::size_t onset_jitter_frames,
                         std::uint64_t seed);

/// Frames [start, start + count) of a roll; frames past the end are inactive.
PianoRoll crop_roll(const PianoRoll& roll, std::size_t start, std::size_t count);

/// Number of contiguous active runs across all pitches.
std::size_t count_runs(const PianoRoll& roll);

/// 16-byte little-endian header (pitches, frames, frame_rate as 16.16
/// fixed point, source; all u32) followed by pitches x frames bytes.
void write_roll(const PianoRoll& roll, const std::filesystem::path& path);
PianoRoll read_roll(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_roll(const PianoRoll& roll);
PianoRoll decode_roll(std::span<const std::uint8_t> bytes);

/// Dense debug dump: a comment line with the geometry, then one line per pitch.
std::string roll_to_csv(const PianoRoll& roll);

}  // namespace duetsep::scores
