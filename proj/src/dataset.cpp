#include "duetsep/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "duetsep/error.hpp"

namespace duetsep::dataset {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(SubsetTag tag) {
  switch (tag) {
    case SubsetTag::real: return "real";
    case SubsetTag::synthetic: return "synthetic";
    case SubsetTag::external: return "external";
  }
  return "real";
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

SubsetTag parse_subset(const std::string& text) {
  if (text == "real") return SubsetTag::real;
  if (text == "synthetic") return SubsetTag::synthetic;
  if (text == "external") return SubsetTag::external;
  fail_argument("unknown subset tag: " + text);
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  fail_argument("unknown split: " + text);
}

void Manifest::validate() const {
  require(sample_rate > 0, "manifest sample rate must be positive");
  std::set<std::string> ids;
  for (const auto& e : entries) {
    require(!e.track_id.empty(), "manifest track id is empty");
    require(ids.insert(e.track_id).second, "duplicate track id in manifest: " + e.track_id);
    require(e.duration > 0.0, "track " + e.track_id + " has non-positive duration");
  }
  if (splits) {
    require(splits->size() == entries.size(), "split assignments do not cover every track exactly once");
    for (const auto& [id, _] : *splits) require(ids.count(id) == 1, "split assigned to unknown track " + id);
  }
}

std::size_t Manifest::count(Split which) const {
  if (!splits) return 0;
  return static_cast<std::size_t>(
      std::count_if(splits->begin(), splits->end(), [&](const auto& kv) { return kv.second == which; }));
}

std::string manifest_to_json(const Manifest& manifest) {
  manifest.validate();
  json doc;
  doc["format"] = "duetsep-manifest";
  doc["version"] = 1;
  doc["sample_rate"] = manifest.sample_rate;
  doc["tracks"] = json::array();
  for (const auto& e : manifest.entries) {
    json t;
    t["track_id"] = e.track_id;
    t["stems"] = {e.stems[0].generic_string(), e.stems[1].generic_string()};
    if (e.mixture) t["mixture"] = e.mixture->generic_string();
    if (e.notes) t["notes"] = e.notes->generic_string();
    t["subset"] = to_string(e.subset);
    t["duration"] = e.duration;
    doc["tracks"].push_back(std::move(t));
  }
  if (manifest.splits) {
    json s = json::object();
    for (const auto& [id, split] : *manifest.splits) s[id] = to_string(split);
    doc["splits"] = std::move(s);
  }
  return doc.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  Manifest m;
  try {
    const json doc = json::parse(text);
    if (doc.value("format", std::string{}) != "duetsep-manifest") fail_argument("not a duetsep manifest");
    if (doc.value("version", 0) != 1) fail_argument("unsupported manifest version");
    m.sample_rate = doc.at("sample_rate").get<int>();
    for (const auto& t : doc.at("tracks")) {
      TrackEntry e;
      e.track_id = t.at("track_id").get<std::string>();
      const auto& stems = t.at("stems");
      if (!stems.is_array() || stems.size() != 2) fail_argument("track " + e.track_id + " must list exactly 2 stems");
      e.stems = {fs::path(stems[0].get<std::string>()), fs::path(stems[1].get<std::string>())};
      if (t.contains("mixture")) e.mixture = fs::path(t["mixture"].get<std::string>());
      if (t.contains("notes")) e.notes = fs::path(t["notes"].get<std::string>());
      e.subset = parse_subset(t.at("subset").get<std::string>());
      e.duration = t.at("duration").get<double>();
      m.entries.push_back(std::move(e));
    }
    if (doc.contains("splits")) {
      std::map<std::string, Split> splits;
      for (const auto& [id, v] : doc["splits"].items()) splits[id] = parse_split(v.get<std::string>());
      m.splits = std::move(splits);
    }
  } catch (const json::exception& e) {
    fail_argument(std::string("malformed manifest JSON: ") + e.what());
  }
  m.validate();
  return m;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail("cannot write manifest: " + path.string());
  out << manifest_to_json(manifest);
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open manifest: " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return manifest_from_json(text);
}

Manifest scan_directory(const fs::path& root, SubsetTag subset) {
  if (!fs::is_directory(root)) fail("not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& d : fs::directory_iterator(root)) {
    if (d.is_directory()) dirs.push_back(d.path());
  }
  std::sort(dirs.begin(), dirs.end());

  Manifest m;
  bool rate_set = false;
  for (const auto& dir : dirs) {
    const fs::path g1 = dir / "guitar1.wav";
    const fs::path g2 = dir / "guitar2.wav";
    if (!fs::exists(g1) || !fs::exists(g2)) continue;
    const AudioBuffer a = read_wav(g1);
    const AudioBuffer b = read_wav(g2);
    if (a.sample_rate() != b.sample_rate()) fail("stems of " + dir.string() + " differ in sample rate");
    if (!rate_set) {
      m.sample_rate = a.sample_rate();
      rate_set = true;
    } else if (m.sample_rate != a.sample_rate()) {
      fail("tracks differ in sample rate: " + dir.string());
    }
    TrackEntry e;
    e.track_id = dir.filename().string();
    e.stems = {fs::relative(g1, root), fs::relative(g2, root)};
    if (fs::exists(dir / "mix.wav")) e.mixture = fs::relative(dir / "mix.wav", root);
    if (fs::exists(dir / "notes.csv")) e.notes = fs::relative(dir / "notes.csv", root);
    e.subset = subset;
    e.duration = std::max(a.duration_seconds(), b.duration_seconds());
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

AudioBuffer make_mixture(const AudioBuffer& first, const AudioBuffer& second) {
  if (first.sample_rate() != second.sample_rate()) fail("cannot mix stems with different sample rates");
  require(first.channels() == second.channels(), "cannot mix stems with different channel counts");
  const std::size_t n = std::max(first.frames(), second.frames());
  std::vector<std::vector<double>> out(first.channels(), std::vector<double>(n, 0.0));
  for (std::size_t c = 0; c < first.channels(); ++c) {
    const auto a = first.channel(c);
    const auto b = second.channel(c);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = i < a.size() ? a[i] : 0.0;
      const double y = i < b.size() ? b[i] : 0.0;
      out[c][i] = (x + y) / 2.0;
    }
  }
  return AudioBuffer(first.sample_rate(), std::move(out));
}

Manifest split(const Manifest& manifest, double ratio, std::uint64_t seed) {
  require(ratio > 0.0 && ratio < 1.0, "split ratio must be in (0, 1)");
  if (manifest.entries.empty()) fail_argument("cannot split an empty manifest");
  std::vector<std::string> pool;
  std::map<std::string, Split> assigned;
  for (const auto& e : manifest.entries) {
    if (manifest.splits && manifest.splits->count(e.track_id) && manifest.splits->at(e.track_id) == Split::test) {
      assigned[e.track_id] = Split::test;
    } else {
      pool.push_back(e.track_id);
    }
  }
  require(pool.size() >= 2, "split needs at least two non-test tracks");
  std::sort(pool.begin(), pool.end());
  Rng rng(seed);
  for (std::size_t i = pool.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(pool[i - 1], pool[j]);
  }
  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(pool.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, pool.size() - 1);
  for (std::size_t i = 0; i < pool.size(); ++i) assigned[pool[i]] = i < n_train ? Split::train : Split::val;

  Manifest out = manifest;
  out.splits = std::move(assigned);
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation

void AugmentConfig::validate() const {
  require(channel_swap_probability >= 0.0 && channel_swap_probability <= 1.0, "swap probability must be in [0,1]");
  require(remix_probability >= 0.0 && remix_probability <= 1.0, "remix probability must be in [0,1]");
  require(amplitude_lo > 0.0 && amplitude_lo <= amplitude_hi, "gain range must satisfy 0 < lo <= hi");
}

Rng augmentation_rng(std::uint64_t seed, const std::string& track_id, std::uint64_t epoch) {
  return Rng(derive_seed(seed, track_id, epoch));
}

namespace {

std::size_t random_offset(std::size_t length, std::size_t crop, Rng& rng) {
  if (length <= crop) return 0;
  return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(length - crop)));
}

AudioBuffer swap_channels(const AudioBuffer& x) {
  if (x.channels() != 2) return x;
  return AudioBuffer(x.sample_rate(), {x.data()[1], x.data()[0]});
}

}  // namespace

StemPair augment(const AudioBuffer& first, const AudioBuffer& second, const std::vector<AudioBuffer>& pool,
                 const AugmentConfig& config, Rng& rng) {
  config.validate();
  require(first.sample_rate() == second.sample_rate(), "stems differ in sample rate");

  AudioBuffer a = first;
  AudioBuffer b = second;
  const bool remixed = rng.bernoulli(config.remix_probability);
  std::optional<std::size_t> remix_index;
  if (remixed) {
    if (pool.empty()) fail_argument("remix selected but the remix pool is empty");
    const auto pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1));
    b = pool[pick];
    remix_index = pick;
    require(b.sample_rate() == a.sample_rate() && b.channels() == a.channels(), "remix stem has a different format");
  }

  const std::size_t full = std::max(a.frames(), b.frames());
  const std::size_t crop_len =
      config.crop_seconds > 0.0
          ? static_cast<std::size_t>(std::llround(config.crop_seconds * a.sample_rate()))
          : full;
  const std::size_t off_a = random_offset(a.frames(), crop_len, rng);
  const std::size_t off_b = remixed ? random_offset(b.frames(), crop_len, rng) : off_a;
  a = crop(a, off_a, crop_len);
  b = crop(b, off_b, crop_len);

  a = scaled(a, rng.uniform(config.amplitude_lo, config.amplitude_hi));
  b = scaled(b, rng.uniform(config.amplitude_lo, config.amplitude_hi));

  if (rng.bernoulli(config.channel_swap_probability)) a = swap_channels(a);
  if (rng.bernoulli(config.channel_swap_probability)) b = swap_channels(b);

  AudioBuffer mix = make_mixture(a, b);
  return StemPair{std::move(a), std::move(b), std::move(mix), {off_a, off_b}, remix_index};
}

// ---------------------------------------------------------------------------
// Reports

std::string emit_report(const std::vector<ReportRow>& rows) {
  std::string out = "training_combo,source,permutation,sdr,si_sdr,sar,sir\n";
  for (const auto& row : rows) out += metrics::csv_rows(row.combo, row.report);
  return out;
}

std::vector<ParsedReportLine> parse_report(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<ParsedReportLine> out;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) fail_argument("report line needs 7 fields: " + line);
    ParsedReportLine p;
    p.combo = cells[0];
    p.source = cells[1];
    p.permutation = cells[2];
    p.values = {metrics::parse_db(cells[3]), metrics::parse_db(cells[4]), metrics::parse_db(cells[5]),
                metrics::parse_db(cells[6])};
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace duetsep::dataset
