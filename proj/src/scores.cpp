#include "duetsep/scores.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "duetsep/error.hpp"
#include "duetsep/rng.hpp"

namespace duetsep::scores {

void NoteEvent::validate() const {
  require(pitch >= 0 && pitch <= 127, "note pitch out of range 0..127: " + std::to_string(pitch));
  require(onset >= 0.0, "note onset must be non-negative");
  require(offset > onset, "note offset must be after onset");
  require(source == 0 || source == 1, "note source must be 0 or 1");
}

// ---------------------------------------------------------------------------
// Note CSV

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  return out;
}

template <typename T>
T parse_number(const std::string& text, std::size_t line) {
  try {
    std::size_t used = 0;
    T value;
    if constexpr (std::is_integral_v<T>) {
      value = static_cast<T>(std::stol(text, &used));
    } else {
      value = std::stod(text, &used);
    }
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    fail_argument("malformed note CSV value '" + text + "' on line " + std::to_string(line));
  }
}

}  // namespace

std::vector<NoteEvent> parse_notes_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<NoteEvent> events;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (!header_seen) {
      if (cells != std::vector<std::string>{"source", "pitch", "onset", "offset"}) {
        fail_argument("note CSV must start with header source,pitch,onset,offset");
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != 4) fail_argument("note CSV line " + std::to_string(line_no) + " needs 4 fields");
    NoteEvent e;
    e.source = parse_number<int>(cells[0], line_no);
    e.pitch = parse_number<int>(cells[1], line_no);
    e.onset = parse_number<double>(cells[2], line_no);
    e.offset = parse_number<double>(cells[3], line_no);
    try {
      e.validate();
    } catch (const InvalidArgument& err) {
      fail_argument(std::string(err.what()) + " (line " + std::to_string(line_no) + ")");
    }
    events.push_back(e);
  }
  if (!header_seen) fail_argument("note CSV is missing its header");
  return events;
}

std::string format_notes_csv(std::span<const NoteEvent> events) {
  std::string out = "source,pitch,onset,offset\n";
  char buf[96];
  for (const auto& e : events) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f\n", e.source, e.pitch, e.onset, e.offset);
    out += buf;
  }
  return out;
}

std::vector<NoteEvent> read_notes_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open note CSV: " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_notes_csv(text);
}

void write_notes_csv(std::span<const NoteEvent> events, const std::filesystem::path& path) {
  for (const auto& e : events) e.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail("cannot write note CSV: " + path.string());
  out << format_notes_csv(events);
}

std::vector<NoteEvent> notes_in_window(std::span<const NoteEvent> events, double start, double duration) {
  std::vector<NoteEvent> out;
  const double end = start + duration;
  for (const auto& e : events) {
    if (e.offset <= start || e.onset >= end) continue;
    NoteEvent s = e;
    s.onset = std::max(e.onset, start) - start;
    s.offset = std::min(e.offset, end) - start;
    if (s.offset > s.onset) out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Piano rolls

PianoRoll::PianoRoll(std::size_t pitches, std::size_t frames, double frame_rate, int source)
    : pitches_(pitches), frames_(frames), frame_rate_(frame_rate), source_(source),
      values_(pitches * frames, 0) {
  require(frame_rate > 0.0, "piano roll frame rate must be positive");
  require(pitches > 0, "piano roll needs at least one pitch row");
}

std::size_t PianoRoll::active_count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

namespace {

// Snap values within 1e-9 of an integer so boundary-aligned times do not
// leak into the neighbouring frame.
double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

/// Frames [first, last) of a roll at `rate` with positive overlap with [a, b).
std::pair<long, long> overlapping_frames(double a, double b, double rate, std::size_t frames) {
  const long first = static_cast<long>(std::floor(snap(a * rate)));
  const long last = static_cast<long>(std::ceil(snap(b * rate)));
  return {std::max(first, 0L), std::min(last, static_cast<long>(frames))};
}

}  // namespace

std::vector<PianoRoll> rasterize(std::span<const NoteEvent> events, double frame_rate, double duration,
                                 std::size_t pitch_count, int lowest_pitch, std::size_t source_count) {
  require(frame_rate > 0.0, "frame rate must be positive");
  require(duration >= 0.0, "duration must be non-negative");
  const auto frames = static_cast<std::size_t>(std::ceil(snap(duration * frame_rate)));
  std::vector<PianoRoll> rolls;
  for (std::size_t s = 0; s < source_count; ++s) {
    rolls.emplace_back(pitch_count, frames, frame_rate, static_cast<int>(s));
  }
  for (const auto& e : events) {
    e.validate();
    require(static_cast<std::size_t>(e.source) < source_count, "note source outside roll set");
    const int row = e.pitch - lowest_pitch;
    require(row >= 0 && static_cast<std::size_t>(row) < pitch_count,
            "note pitch " + std::to_string(e.pitch) + " outside the roll's pitch range");
    const auto [first, last] = overlapping_frames(e.onset, std::min(e.offset, duration), frame_rate, frames);
    for (long k = first; k < last; ++k) rolls[e.source].set(static_cast<std::size_t>(row), static_cast<std::size_t>(k));
  }
  return rolls;
}

PianoRoll downsample_activity(const PianoRoll& roll, std::size_t factor) {
  require(factor >= 1, "downsampling factor must be >= 1");
  if (factor == 1) return roll;
  const std::size_t out_frames = (roll.frames() + factor - 1) / factor;
  PianoRoll out(roll.pitches(), out_frames, roll.frame_rate() / static_cast<double>(factor), roll.source());
  for (std::size_t p = 0; p < roll.pitches(); ++p) {
    for (std::size_t t = 0; t < roll.frames(); ++t) {
      if (roll.active(p, t)) out.set(p, t / factor);
    }
  }
  return out;
}

namespace {

void check_span(const PianoRoll& roll, std::size_t segment_samples, int sample_rate) {
  const double segment = static_cast<double>(segment_samples) / sample_rate;
  if (std::abs(roll.duration_seconds() - segment) > 1.0 / roll.frame_rate() + 1e-9) {
    fail_argument("piano roll spans " + std::to_string(roll.duration_seconds()) + " s but the segment spans " +
                  std::to_string(segment) + " s");
  }
}

// Max over roll frames overlapping [a, b) seconds, written per pitch.
void pool_interval(const PianoRoll& roll, double a, double b, double* column, std::size_t stride) {
  if (b <= a) return;
  const auto [first, last] = overlapping_frames(a, b, roll.frame_rate(), roll.frames());
  for (std::size_t p = 0; p < roll.pitches(); ++p) {
    for (long k = first; k < last; ++k) {
      if (roll.active(p, static_cast<std::size_t>(k))) {
        column[p * stride] = 1.0;
        break;
      }
    }
  }
}

}  // namespace

std::vector<double> align_for_temporal_branch(const std::array<PianoRoll, 2>& rolls, std::size_t segment_samples,
                                              int sample_rate, std::size_t stage_stride) {
  require(stage_stride >= 1, "stage stride must be >= 1");
  require(sample_rate > 0, "sample rate must be positive");
  require(rolls[0].pitches() == rolls[1].pitches(), "rolls differ in pitch count");
  const std::size_t pitches = rolls[0].pitches();
  const std::size_t cols = temporal_frames(segment_samples, stage_stride);
  std::vector<double> plane(2 * pitches * cols, 0.0);
  const double sr = sample_rate;
  for (std::size_t s = 0; s < 2; ++s) {
    check_span(rolls[s], segment_samples, sample_rate);
    for (std::size_t j = 0; j < cols; ++j) {
      const double a = static_cast<double>(j * stage_stride) / sr;
      const double b = static_cast<double>(std::min((j + 1) * stage_stride, segment_samples)) / sr;
      pool_interval(rolls[s], a, b, plane.data() + s * pitches * cols + j, cols);
    }
  }
  return plane;
}

std::vector<double> align_for_spectral_branch(const std::array<PianoRoll, 2>& rolls, const StftConfig& config,
                                              std::size_t segment_samples, int sample_rate) {
  require(sample_rate > 0, "sample rate must be positive");
  require(rolls[0].pitches() == rolls[1].pitches(), "rolls differ in pitch count");
  const std::size_t pitches = rolls[0].pitches();
  const std::size_t frames = config.frame_count(segment_samples);
  const double hop = static_cast<double>(config.hop());
  std::vector<double> plane(2 * pitches * frames, 0.0);
  const double sr = sample_rate;
  const double end = static_cast<double>(segment_samples);
  for (std::size_t s = 0; s < 2; ++s) {
    check_span(rolls[s], segment_samples, sample_rate);
    for (std::size_t t = 0; t < frames; ++t) {
      const double centre = static_cast<double>(t) * hop;
      const double a = std::clamp(centre - hop / 2.0, 0.0, end) / sr;
      const double b = std::clamp(centre + hop / 2.0, 0.0, end) / sr;
      pool_interval(rolls[s], a, b, plane.data() + s * pitches * frames + t, frames);
    }
  }
  return plane;
}

ConditioningPlanes make_conditioning(const std::array<PianoRoll, 2>& rolls, std::size_t segment_samples,
                                     int sample_rate, std::size_t stage_stride, const StftConfig& config) {
  ConditioningPlanes planes;
  planes.pitches = rolls[0].pitches();
  planes.temporal_frames = temporal_frames(segment_samples, stage_stride);
  planes.temporal = align_for_temporal_branch(rolls, segment_samples, sample_rate, stage_stride);
  planes.spectral_frames = config.frame_count(segment_samples);
  planes.spectral = align_for_spectral_branch(rolls, config, segment_samples, sample_rate);
  return planes;
}

// ---------------------------------------------------------------------------
// Label degradation

PianoRoll degrade_labels(const PianoRoll& roll, double drop_probability, std::size_t onset_jitter_frames,
                         std::uint64_t seed) {
  require(drop_probability >= 0.0 && drop_probability <= 1.0, "drop probability must be in [0, 1]");
  Rng rng(seed);
  PianoRoll out(roll.pitches(), roll.frames(), roll.frame_rate(), roll.source());
  const auto jitter = static_cast<std::int64_t>(onset_jitter_frames);
  const auto frames = static_cast<std::int64_t>(roll.frames());
  for (std::size_t p = 0; p < roll.pitches(); ++p) {
    std::int64_t t = 0;
    while (t < frames) {
      if (!roll.active(p, static_cast<std::size_t>(t))) {
        ++t;
        continue;
      }
      std::int64_t end = t;
      while (end < frames && roll.active(p, static_cast<std::size_t>(end))) ++end;
      const bool drop = rng.bernoulli(drop_probability);
      const std::int64_t shift = rng.uniform_int(-jitter, jitter);
      if (!drop) {
        for (std::int64_t k = std::max<std::int64_t>(t + shift, 0); k < std::min(end + shift, frames); ++k) {
          out.set(p, static_cast<std::size_t>(k));
        }
      }
      t = end;
    }
  }
  return out;
}

std::size_t count_runs(const PianoRoll& roll) {
  std::size_t runs = 0;
  for (std::size_t p = 0; p < roll.pitches(); ++p) {
    bool prev = false;
    for (std::size_t t = 0; t < roll.frames(); ++t) {
      const bool on = roll.active(p, t);
      if (on && !prev) ++runs;
      prev = on;
    }
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Roll serialization

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_roll(const PianoRoll& roll) {
  const double fixed = std::round(roll.frame_rate() * 65536.0);
  require(fixed >= 1.0 && fixed <= 4294967295.0, "frame rate not representable in 16.16 fixed point");
  std::vector<std::uint8_t> out;
  out.reserve(16 + roll.values().size());
  put_u32(out, static_cast<std::uint32_t>(roll.pitches()));
  put_u32(out, static_cast<std::uint32_t>(roll.frames()));
  put_u32(out, static_cast<std::uint32_t>(fixed));
  put_u32(out, static_cast<std::uint32_t>(roll.source()));
  out.insert(out.end(), roll.values().begin(), roll.values().end());
  return out;
}

PianoRoll decode_roll(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) fail("piano roll file is shorter than its header");
  const std::uint32_t pitches = get_u32(bytes.data());
  const std::uint32_t frames = get_u32(bytes.data() + 4);
  const std::uint32_t fixed = get_u32(bytes.data() + 8);
  const std::uint32_t source = get_u32(bytes.data() + 12);
  if (pitches == 0 || fixed == 0) fail("piano roll header has zero pitches or frame rate");
  if (bytes.size() != 16 + static_cast<std::size_t>(pitches) * frames) fail("piano roll payload size mismatch");
  PianoRoll roll(pitches, frames, fixed / 65536.0, static_cast<int>(source));
  for (std::size_t p = 0; p < pitches; ++p) {
    for (std::size_t t = 0; t < frames; ++t) {
      const std::uint8_t v = bytes[16 + p * frames + t];
      if (v > 1) fail("piano roll payload is not binary");
      if (v) roll.set(p, t);
    }
  }
  return roll;
}

void write_roll(const PianoRoll& roll, const std::filesystem::path& path) {
  const auto bytes = encode_roll(roll);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot write piano roll: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

PianoRoll read_roll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open piano roll: " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_roll(bytes);
}

std::string roll_to_csv(const PianoRoll& roll) {
  std::ostringstream out;
  out << "# pitches=" << roll.pitches() << " frames=" << roll.frames() << " frame_rate=" << roll.frame_rate()
      << " source=" << roll.source() << '\n';
  for (std::size_t p = 0; p < roll.pitches(); ++p) {
    for (std::size_t t = 0; t < roll.frames(); ++t) {
      if (t) out << ',';
      out << (roll.active(p, t) ? '1' : '0');
    }
    out << '\n';
  }
  return out.str();
}

PianoRoll crop_roll(const PianoRoll& roll, std::size_t start, std::size_t count) {
  PianoRoll out(roll.pitches(), count, roll.frame_rate(), roll.source());
  for (std::size_t p = 0; p < roll.pitches(); ++p) {
    for (std::size_t t = 0; t < count && start + t < roll.frames(); ++t) {
      if (roll.active(p, start + t)) out.set(p, t);
    }
  }
  return out;
}

}  // namespace duetsep::scores
