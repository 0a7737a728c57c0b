#include "duetsep/cli.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "duetsep/analysis.hpp"
#include "duetsep/audio.hpp"
#include "duetsep/dataset.hpp"
#include "duetsep/error.hpp"
#include "duetsep/losses.hpp"
#include "duetsep/metrics.hpp"
#include "duetsep/scores.hpp"
#include "duetsep/toy/checkpoint.hpp"
#include "duetsep/toy/synth.hpp"
#include "duetsep/toy/training.hpp"

namespace duetsep::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kEnvPrefix = "DUETSEP_";

struct Context {
  std::ostream& out;
  std::ostream& err;
  CLI::App* sub = nullptr;
};

// Resolved value of every option on the subcommand, defaults included.
json echo_config(const CLI::App& sub) {
  json options = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    if (name.empty() || name == "help" || name == "help-all") continue;
    const bool flag = opt->get_expected_max() == 0;
    if (flag) {
      options[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      const auto& results = opt->results();
      if (opt->get_expected_max() > 1) {
        options[name] = results;
      } else {
        options[name] = results.empty() ? "" : results.back();
      }
    } else if (opt->get_default_str().empty()) {
      options[name] = nullptr;
    } else {
      options[name] = opt->get_default_str();
    }
  }
  return {{"subcommand", sub.get_name()}, {"options", options}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) fail("failed writing " + path.string());
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_echo(const fs::path& path, json config) { write_text(path, config.dump(2) + "\n"); }

WavEncoding parse_encoding(const std::string& text) {
  if (text == "pcm16") return WavEncoding::pcm16;
  if (text == "float32") return WavEncoding::float32;
  fail_argument("unknown encoding '" + text + "' (expected pcm16 or float32)");
}

std::uint64_t need_seed(const std::optional<std::uint64_t>& seed, const std::string& what) {
  if (!seed) fail_argument(what + " requires --seed");
  return *seed;
}

std::vector<double> flatten(const AudioBuffer& b) {
  std::vector<double> v;
  for (std::size_t c = 0; c < b.channels(); ++c) {
    const auto ch = b.channel(c);
    v.insert(v.end(), ch.begin(), ch.end());
  }
  return v;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// ---------------------------------------------------------------------------
// Subcommands

struct ManifestArgs {
  std::string root, out, subset = "real";
  std::optional<double> split;
  std::optional<std::uint64_t> seed;
};

int run_manifest(const ManifestArgs& a, Context& ctx) {
  auto manifest = dataset::scan_directory(a.root, dataset::parse_subset(a.subset));
  json echo = echo_config(*ctx.sub);
  if (a.split) {
    const auto seed = need_seed(a.seed, "manifest --split");
    manifest = dataset::split(manifest, *a.split, seed);
  }
  dataset::save_manifest(manifest, a.out);
  write_echo(a.out + ".config.json", echo);
  ctx.err << "manifest: " << manifest.entries.size() << " tracks -> " << a.out << "\n";
  return kExitOk;
}

struct MixArgs {
  std::vector<std::string> stems;
  std::string out, encoding = "pcm16";
};

int run_mix(const MixArgs& a, Context& ctx) {
  const auto mix = dataset::make_mixture(read_wav(a.stems[0]), read_wav(a.stems[1]));
  write_wav(mix, a.out, parse_encoding(a.encoding));
  write_echo(a.out + ".config.json", echo_config(*ctx.sub));
  return kExitOk;
}

struct AugmentArgs {
  std::vector<std::string> stems, pool;
  std::string out_dir, encoding = "float32";
  std::optional<std::uint64_t> seed;
  std::uint64_t epoch = 0;
  dataset::AugmentConfig config;
};

int run_augment(AugmentArgs a, Context& ctx) {
  a.config.seed = need_seed(a.seed, "augment");
  std::vector<AudioBuffer> pool;
  for (const auto& p : a.pool) pool.push_back(read_wav(p));
  if (pool.empty()) a.config.remix_probability = 0.0;
  prepare_dir(a.out_dir);
  Rng rng = dataset::augmentation_rng(a.config.seed, stem_of(a.stems[0]), a.epoch);
  const auto result = dataset::augment(read_wav(a.stems[0]), read_wav(a.stems[1]), pool, a.config, rng);
  const auto enc = parse_encoding(a.encoding);
  const fs::path dir(a.out_dir);
  write_wav(result.first, dir / "guitar1.wav", enc);
  write_wav(result.second, dir / "guitar2.wav", enc);
  write_wav(result.mixture, dir / "mix.wav", enc);
  json echo = echo_config(*ctx.sub);
  echo["resolved"] = {{"remix_probability", a.config.remix_probability},
                      {"offsets", result.offsets},
                      {"remix_index", result.remix_index ? json(*result.remix_index) : json(nullptr)}};
  write_echo(dir / "config.json", echo);
  return kExitOk;
}

struct RasterizeArgs {
  std::string notes, out_dir;
  double fps = 100.0;
  std::optional<double> duration;
  std::size_t pitches = 128;
  int lowest = 0;
  std::optional<int> sample_rate;
  std::size_t stride = 64;
  std::size_t window = 256, hop = 64;
};

int run_rasterize(const RasterizeArgs& a, Context& ctx) {
  const auto events = scores::read_notes_csv(a.notes);
  double duration = 0.0;
  for (const auto& e : events) duration = std::max(duration, e.offset);
  if (a.duration) duration = *a.duration;
  require(duration > 0.0, "cannot infer a positive duration; pass --duration");
  const auto rolls = scores::rasterize(events, a.fps, duration, a.pitches, a.lowest);
  prepare_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  for (std::size_t s = 0; s < rolls.size(); ++s) {
    const std::string name = "roll_g" + std::to_string(s + 1);
    scores::write_roll(rolls[s], dir / (name + ".bin"));
    write_text(dir / (name + ".csv"), scores::roll_to_csv(rolls[s]));
  }
  json summary = {{"pitches", a.pitches}, {"frames", rolls[0].frames()}, {"frame_rate", a.fps}};
  if (a.sample_rate) {
    const auto samples = static_cast<std::size_t>(std::llround(duration * *a.sample_rate));
    const auto planes = scores::make_conditioning({rolls[0], rolls[1]}, samples, *a.sample_rate, a.stride,
                                                  StftConfig(a.window, a.hop, WindowKind::hann));
    json p = {{"temporal_shape", planes.temporal_shape()},
              {"spectral_shape", planes.spectral_shape()},
              {"temporal", planes.temporal},
              {"spectral", planes.spectral}};
    write_text(dir / "planes.json", p.dump() + "\n");
    summary["temporal_shape"] = planes.temporal_shape();
    summary["spectral_shape"] = planes.spectral_shape();
  }
  write_echo(dir / "config.json", echo_config(*ctx.sub));
  ctx.out << summary.dump() << "\n";
  return kExitOk;
}

struct PairArgs {
  std::vector<std::string> est, ref;
  std::optional<int> sample_rate;
  bool mono = false;
};

std::vector<AudioBuffer> load_all(const std::vector<std::string>& paths, const PairArgs& a) {
  std::vector<AudioBuffer> v;
  for (const auto& p : paths) {
    AudioBuffer b = read_wav(p);
    if (a.mono) b = to_mono(b);
    if (a.sample_rate) b = resample(b, *a.sample_rate);
    v.push_back(std::move(b));
  }
  return v;
}

struct EvalArgs : PairArgs {
  std::size_t filter_length = 512;
  std::string track_id = "track";
};

int run_eval(const EvalArgs& a, Context& ctx) {
  metrics::ProjectionConfig pc;
  pc.filter_length = a.filter_length;
  const auto report = metrics::evaluate_pair(load_all(a.est, a), load_all(a.ref, a), pc);
  ctx.err << echo_config(*ctx.sub).dump() << "\n";
  for (const auto& w : report.warnings) ctx.err << "warning: " << w << "\n";
  ctx.out << metrics::csv_header() << metrics::csv_rows(a.track_id, report);
  return kExitOk;
}

struct PitArgs : PairArgs {
  losses::PitLossConfig loss;
};

int run_pit_loss(const PitArgs& a, Context& ctx) {
  const auto est = load_all(a.est, a);
  const auto ref = load_all(a.ref, a);
  const auto e1 = flatten(est[0]), e2 = flatten(est[1]), r1 = flatten(ref[0]), r2 = flatten(ref[1]);
  const auto v = losses::pit_l1_mixture_loss({e1, e2}, {r1, r2}, a.loss);
  ctx.err << echo_config(*ctx.sub).dump() << "\n";
  json j = {{"loss", v.loss},
            {"permutation", v.pairing == losses::Pairing::identity ? "0:1" : "1:0"},
            {"permutation_term", v.permutation_term},
            {"mixture_term", v.mixture_term}};
  ctx.out << j.dump() << "\n";
  return kExitOk;
}

struct SweepArgs {
  std::string x1, x2, out_dir, label = "monotimbral";
  bool standard = false;
  std::optional<std::uint64_t> seed;
  std::size_t filter_length = 512;
  std::vector<double> grid;
  double seconds = 4.0;
};

int run_alpha_sweep(const SweepArgs& a, Context& ctx) {
  metrics::ProjectionConfig pc;
  pc.filter_length = a.filter_length;
  const auto grid = a.grid.empty() ? analysis::default_alpha_grid() : a.grid;
  prepare_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  std::vector<analysis::SweepCurve> curves;
  if (a.standard) {
    const auto pairs = analysis::standard_pairs(need_seed(a.seed, "alpha-sweep --standard"), a.seconds);
    const auto report = analysis::compare_pairs(pairs.mono, pairs.multi, grid, pc);
    curves = {report.mono, report.multi};
    write_text(dir / "ordering.csv", analysis::ordering_csv(report));
    ctx.err << "alpha-sweep: consistent ordering " << (report.consistent ? "true" : "false") << "\n";
  } else {
    require(!a.x1.empty() && !a.x2.empty(), "alpha-sweep needs --x1 and --x2, or --standard");
    const auto pair = analysis::normalize_pair(to_mono(read_wav(a.x1)), to_mono(read_wav(a.x2)));
    curves = {analysis::alpha_sweep(pair.first, pair.second, grid, pc, analysis::parse_pair_label(a.label))};
  }
  const std::string csv = analysis::curve_csv(curves);
  write_text(dir / "curves.csv", csv);
  write_text(dir / "plot.gp", analysis::gnuplot_script("curves.csv", "curves.png"));
  write_echo(dir / "config.json", echo_config(*ctx.sub));
  ctx.out << csv;
  return kExitOk;
}

struct SynthArgs {
  std::optional<std::uint64_t> seed;
  std::size_t count = 8;
  std::string out_dir, style = "independent", encoding = "float32";
  double seconds = 8.0, density = 7.0, unison = 0.5, fps = 100.0;
  int sample_rate = 8000;
};

int run_synth_duets(const SynthArgs& a, Context& ctx) {
  const auto seed = need_seed(a.seed, "synth-duets");
  require(a.count >= 1, "--count must be at least 1");
  toy::ScoreParams params;
  params.duration = a.seconds;
  params.density = a.density;
  params.unison_probability = a.unison;
  if (a.style == "independent") {
    params.style = toy::ScoreStyle::independent;
  } else if (a.style == "homorhythmic") {
    params.style = toy::ScoreStyle::homorhythmic;
  } else {
    fail_argument("unknown --style '" + a.style + "' (expected independent or homorhythmic)");
  }
  toy::DuetRender render;
  render.sample_rate = a.sample_rate;
  render.roll_frame_rate = a.fps;
  const auto enc = parse_encoding(a.encoding);
  prepare_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  for (std::size_t i = 0; i < a.count; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "duet-%03zu", i);
    const auto score = toy::generate_score(params, derive_seed(seed, "score", i));
    const auto duet = toy::synth_duet(score, render, derive_seed(seed, "render", i));
    const fs::path track = dir / id;
    prepare_dir(track);
    write_wav(duet.stems[0], track / "guitar1.wav", enc);
    write_wav(duet.stems[1], track / "guitar2.wav", enc);
    write_wav(duet.mixture, track / "mix.wav", enc);
    scores::write_notes_csv(score.notes, track / "notes.csv");
    scores::write_roll(duet.rolls[0], track / "roll_g1.bin");
    scores::write_roll(duet.rolls[1], track / "roll_g2.bin");
  }
  dataset::save_manifest(dataset::scan_directory(dir, dataset::SubsetTag::synthetic), dir / "manifest.json");
  write_echo(dir / "config.json", echo_config(*ctx.sub));
  ctx.err << "synth-duets: " << a.count << " duets -> " << a.out_dir << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::optional<std::uint64_t> seed;
  std::string out_dir, spec, mode = "ground_truth", branches = "both";
  std::optional<std::size_t> epochs, batch_size;
  std::size_t jobs = 1;
};

toy::BranchConditioning parse_branches(const std::string& text) {
  if (text == "both") return {true, true};
  if (text == "temporal") return {true, false};
  if (text == "spectral") return {false, true};
  fail_argument("unknown --branches '" + text + "' (expected both, temporal or spectral)");
}

int run_toy_train(const TrainArgs& a, Context& ctx) {
  toy::BenchmarkSpec spec = a.spec.empty() ? toy::BenchmarkSpec{} : toy::load_spec(a.spec);
  spec.seed = need_seed(a.seed, "toy-train");
  if (a.epochs) spec.epochs = *a.epochs;
  if (a.batch_size) spec.batch_size = *a.batch_size;
  spec.validate();
  require(a.jobs >= 1, "--jobs must be at least 1");
  toy::TrainOptions options;
  options.mode = toy::parse_mode(a.mode);
  options.conditioning = parse_branches(a.branches);
  options.jobs = a.jobs;
  options.on_epoch = [&ctx](const toy::EpochLog& row) {
    char line[160];
    std::snprintf(line, sizeof(line), "epoch %zu train %.6f mixture %.6f val %.6f\n", row.epoch, row.train_loss,
                  row.mixture_term, row.val_loss);
    ctx.err << line << std::flush;
  };
  prepare_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  const auto corpus = toy::make_corpus(spec);
  const auto result = toy::train_separator(corpus, spec, options);
  const json meta = {{"spec", toy::spec_to_json(spec)}, {"mode", a.mode}, {"branches", a.branches}};
  toy::save_checkpoint(dir / "checkpoint.bin", result.model, meta);
  const std::string csv = toy::loss_csv(result.log);
  write_text(dir / "loss.csv", csv);
  json echo = echo_config(*ctx.sub);
  echo["spec"] = toy::spec_to_json(spec);
  write_echo(dir / "config.json", echo);
  ctx.out << csv;
  return kExitOk;
}

struct ToyEvalArgs {
  std::optional<std::uint64_t> seed;
  std::string checkpoint, out_dir, spec, mode = "ground_truth";
};

int run_toy_eval(const ToyEvalArgs& a, Context& ctx) {
  const auto ck = toy::load_checkpoint(a.checkpoint);
  toy::BenchmarkSpec spec;
  if (ck.metadata.contains("spec")) spec = toy::spec_from_json(ck.metadata["spec"]);
  if (!a.spec.empty()) spec = toy::load_spec(a.spec);
  spec.seed = need_seed(a.seed, "toy-eval");
  const toy::Separator model(ck.config, ck.params);
  const auto mode = toy::parse_mode(a.mode);
  const auto corpus = toy::make_corpus(spec);
  const auto summary = toy::evaluate_tracks(corpus.test, toy::model_estimator(model, mode, spec), spec.filter_length);
  prepare_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  std::string report = metrics::csv_header();
  for (const auto& t : summary.tracks) report += metrics::csv_rows(t.id, t.report);
  write_text(dir / "report.csv", report);
  const std::string csv = toy::summary_csv_header() + toy::summary_csv(a.mode, summary);
  write_text(dir / "summary.csv", csv);
  json echo = echo_config(*ctx.sub);
  echo["spec"] = toy::spec_to_json(spec);
  write_echo(dir / "config.json", echo);
  ctx.out << csv;
  return kExitOk;
}

std::string upper_env(const std::string& name) {
  std::string s = kEnvPrefix;
  for (char c : name) s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

void add_env(CLI::App& app) {
  for (CLI::App* sub : app.get_subcommands({})) {
    for (CLI::Option* opt : sub->get_options()) {
      if (opt->get_lnames().empty() || opt->get_lnames().front().rfind("help", 0) == 0) continue;
      opt->envname(upper_env(opt->get_lnames().front()));
    }
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"duetsep: duet separation, evaluation and toy experiments", "duetsep"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");
  Context ctx{out, err};
  std::function<int()> run;

  ManifestArgs manifest;
  auto* m = app.add_subcommand("manifest", "Scan a dataset directory into a manifest");
  m->add_option("--root", manifest.root, "Directory with one folder per track")->required();
  m->add_option("--out", manifest.out, "Manifest JSON path")->required();
  m->add_option("--subset", manifest.subset, "real, synthetic or external")->capture_default_str();
  m->add_option("--split", manifest.split, "Train fraction for a shuffled train/val split");
  m->add_option("--seed", manifest.seed, "Seed for --split");
  m->callback([&] { run = [&] { return run_manifest(manifest, ctx); }; });

  MixArgs mix;
  auto* x = app.add_subcommand("mix", "Average two stems into a mixture");
  x->add_option("--stems", mix.stems, "Two stem WAV files")->required()->expected(2);
  x->add_option("--out", mix.out, "Output WAV")->required();
  x->add_option("--encoding", mix.encoding, "pcm16 or float32")->capture_default_str();
  x->callback([&] { run = [&] { return run_mix(mix, ctx); }; });

  AugmentArgs aug;
  auto* g = app.add_subcommand("augment", "Apply one seeded augmentation draw to a stem pair");
  g->add_option("--stems", aug.stems, "Two stem WAV files")->required()->expected(2);
  g->add_option("--pool", aug.pool, "Remix pool of second-guitar stems")->expected(0, -1);
  g->add_option("--out-dir", aug.out_dir, "Output directory")->required();
  g->add_option("--seed", aug.seed, "Augmentation seed");
  g->add_option("--epoch", aug.epoch, "Epoch index for the draw")->capture_default_str();
  g->add_option("--crop", aug.config.crop_seconds, "Crop length in seconds (<= 0 keeps all)")->capture_default_str();
  g->add_option("--swap-prob", aug.config.channel_swap_probability, "Channel swap probability")
      ->capture_default_str();
  g->add_option("--gain-lo", aug.config.amplitude_lo, "Lowest gain")->capture_default_str();
  g->add_option("--gain-hi", aug.config.amplitude_hi, "Highest gain")->capture_default_str();
  g->add_option("--remix-prob", aug.config.remix_probability, "Remix probability (0 without --pool)")
      ->capture_default_str();
  g->add_option("--encoding", aug.encoding, "pcm16 or float32")->capture_default_str();
  g->callback([&] { run = [&] { return run_augment(aug, ctx); }; });

  RasterizeArgs ras;
  auto* r = app.add_subcommand("rasterize", "Turn a note CSV into piano rolls and conditioning planes");
  r->add_option("--notes", ras.notes, "Note CSV (source,pitch,onset,offset)")->required();
  r->add_option("--out-dir", ras.out_dir, "Output directory")->required();
  r->add_option("--fps", ras.fps, "Roll frame rate")->capture_default_str();
  r->add_option("--duration", ras.duration, "Duration in seconds (default: last offset)");
  r->add_option("--pitches", ras.pitches, "Pitch rows")->capture_default_str();
  r->add_option("--lowest", ras.lowest, "MIDI pitch of row 0")->capture_default_str();
  r->add_option("--sample-rate", ras.sample_rate, "Also write conditioning planes for this rate");
  r->add_option("--stride", ras.stride, "Temporal stage stride in samples")->capture_default_str();
  r->add_option("--window", ras.window, "STFT window")->capture_default_str();
  r->add_option("--hop", ras.hop, "STFT hop")->capture_default_str();
  r->callback([&] { run = [&] { return run_rasterize(ras, ctx); }; });

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "SDR/SI-SDR/SAR/SIR of two estimates against two references");
  e->add_option("--est", ev.est, "Two estimate WAV files")->required()->expected(2);
  e->add_option("--ref", ev.ref, "Two reference WAV files")->required()->expected(2);
  e->add_option("--filter-length", ev.filter_length, "Distortion filter taps")->capture_default_str();
  e->add_option("--track-id", ev.track_id, "Track id column")->capture_default_str();
  e->add_option("--sample-rate", ev.sample_rate, "Resample everything to this rate first");
  e->add_flag("--mono", ev.mono, "Downmix to mono first");
  e->callback([&] { run = [&] { return run_eval(ev, ctx); }; });

  PitArgs pit;
  auto* p = app.add_subcommand("pit-loss", "Permutation-invariant L1 plus mixture loss");
  p->add_option("--est", pit.est, "Two estimate WAV files")->required()->expected(2);
  p->add_option("--ref", pit.ref, "Two reference WAV files")->required()->expected(2);
  p->add_option("--alpha", pit.loss.alpha_weight, "Permutation term weight")->capture_default_str();
  p->add_option("--beta", pit.loss.beta_weight, "Mixture term weight")->capture_default_str();
  p->add_option("--sample-rate", pit.sample_rate, "Resample everything to this rate first");
  p->add_flag("--mono", pit.mono, "Downmix to mono first");
  p->callback([&] { run = [&] { return run_pit_loss(pit, ctx); }; });

  SweepArgs sw;
  auto* s = app.add_subcommand("alpha-sweep", "Metric curves of alpha*x1 + (1-alpha)*x2 against x1");
  s->add_option("--x1", sw.x1, "Reference track");
  s->add_option("--x2", sw.x2, "Interfering track");
  s->add_option("--label", sw.label, "monotimbral or multitimbral")->capture_default_str();
  s->add_flag("--standard", sw.standard, "Use the synthesized reference pairs");
  s->add_option("--seed", sw.seed, "Seed for --standard");
  s->add_option("--seconds", sw.seconds, "Length of the synthesized pairs")->capture_default_str();
  s->add_option("--out-dir", sw.out_dir, "Output directory")->required();
  s->add_option("--filter-length", sw.filter_length, "Distortion filter taps")->capture_default_str();
  s->add_option("--grid", sw.grid, "Alpha values (default 0.05..0.95)")->delimiter(',');
  s->callback([&] { run = [&] { return run_alpha_sweep(sw, ctx); }; });

  SynthArgs syn;
  auto* y = app.add_subcommand("synth-duets", "Render plucked-string duets with scores and rolls");
  y->add_option("--seed", syn.seed, "Corpus seed");
  y->add_option("--count", syn.count, "Number of duets")->capture_default_str();
  y->add_option("--out-dir", syn.out_dir, "Output directory")->required();
  y->add_option("--seconds", syn.seconds, "Duet length")->capture_default_str();
  y->add_option("--density", syn.density, "Combined notes per second")->capture_default_str();
  y->add_option("--style", syn.style, "independent or homorhythmic")->capture_default_str();
  y->add_option("--unison", syn.unison, "Unison probability for homorhythmic scores")->capture_default_str();
  y->add_option("--sample-rate", syn.sample_rate, "Sample rate")->capture_default_str();
  y->add_option("--fps", syn.fps, "Roll frame rate")->capture_default_str();
  y->add_option("--encoding", syn.encoding, "pcm16 or float32")->capture_default_str();
  y->callback([&] { run = [&] { return run_synth_duets(syn, ctx); }; });

  TrainArgs tr;
  auto* t = app.add_subcommand("toy-train", "Train the toy separator on synthesized duets");
  t->add_option("--seed", tr.seed, "Benchmark seed");
  t->add_option("--out-dir", tr.out_dir, "Output directory")->required();
  t->add_option("--spec", tr.spec, "Benchmark spec JSON");
  t->add_option("--epochs", tr.epochs, "Override the spec's epochs");
  t->add_option("--batch-size", tr.batch_size, "Override the spec's batch size");
  t->add_option("--mode", tr.mode, "ground_truth or none")->capture_default_str();
  t->add_option("--branches", tr.branches, "Conditioned branches: both, temporal, spectral")->capture_default_str();
  t->add_option("--jobs", tr.jobs, "Worker threads")->capture_default_str();
  t->callback([&] { run = [&] { return run_toy_train(tr, ctx); }; });

  ToyEvalArgs te;
  auto* v = app.add_subcommand("toy-eval", "Evaluate a toy checkpoint on the benchmark test duets");
  v->add_option("--checkpoint", te.checkpoint, "Checkpoint file")->required();
  v->add_option("--seed", te.seed, "Benchmark seed");
  v->add_option("--out-dir", te.out_dir, "Output directory")->required();
  v->add_option("--spec", te.spec, "Benchmark spec JSON (default: the checkpoint's)");
  v->add_option("--mode", te.mode, "none, ground_truth or degraded")->capture_default_str();
  v->callback([&] { run = [&] { return run_toy_eval(te, ctx); }; });

  add_env(app);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    std::string msg = ex.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: usage: " << msg << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  ctx.sub = app.get_subcommands().front();
  try {
    return run();
  } catch (const InvalidArgument& ex) {
    std::string msg = ex.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: invalid-argument: " << msg << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    std::string msg = ex.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: runtime: " << msg << "\n";
    return kExitFailure;
  }
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace duetsep::cli
