#include "duetsep/toy/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "duetsep/error.hpp"

namespace duetsep::toy {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'D', 'S', 'E', 'P', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("checkpoint is truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

nlohmann::json config_to_json(const SeparatorConfig& config) {
  return {{"sample_rate", config.sample_rate},
          {"segment_samples", config.segment_samples},
          {"lowest_pitch", config.lowest_pitch},
          {"pitch_count", config.pitch_count},
          {"condition_temporal", config.conditioning.temporal},
          {"condition_spectral", config.conditioning.spectral}};
}

SeparatorConfig config_from_json(const nlohmann::json& json) {
  try {
    SeparatorConfig c;
    c.sample_rate = json.at("sample_rate").get<int>();
    c.segment_samples = json.at("segment_samples").get<std::size_t>();
    c.lowest_pitch = json.at("lowest_pitch").get<int>();
    c.pitch_count = json.at("pitch_count").get<std::size_t>();
    c.conditioning.temporal = json.at("condition_temporal").get<bool>();
    c.conditioning.spectral = json.at("condition_spectral").get<bool>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("invalid separator config: ") + e.what());
  }
}

std::string encode_checkpoint(const Separator& model, const nlohmann::json& metadata) {
  nlohmann::json meta = metadata;
  meta["separator"] = config_to_json(model.config());
  const std::string meta_text = meta.dump();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta_text.size()));
  out += meta_text;
  const auto& params = model.params();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params.all()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.shape.size()));
    for (std::size_t d : p.shape) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(p.value.data()), p.value.size() * sizeof(double));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) fail("not a duetsep checkpoint");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) fail("unsupported checkpoint version " + std::to_string(version));
  const auto meta_len = in.get<std::uint32_t>();
  Checkpoint ck;
  try {
    ck.metadata = nlohmann::json::parse(in.take(meta_len));
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  if (!ck.metadata.contains("separator")) fail("checkpoint metadata lacks the separator config");
  ck.config = config_from_json(ck.metadata["separator"]);
  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = in.take(in.get<std::uint32_t>());
    const auto ndim = in.get<std::uint32_t>();
    if (ndim > 8) fail("checkpoint tensor " + name + " has too many dimensions");
    Shape shape(ndim);
    for (auto& d : shape) d = static_cast<std::size_t>(in.get<std::uint64_t>());
    const std::size_t idx = ck.params.add(name, shape);
    auto& value = ck.params[idx].value;
    const std::string raw = in.take(value.size() * sizeof(double));
    std::memcpy(value.data(), raw.data(), raw.size());
  }
  if (!in.done()) fail("checkpoint has trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Separator& model, const nlohmann::json& metadata) {
  const std::string bytes = encode_checkpoint(model, metadata);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace duetsep::toy
