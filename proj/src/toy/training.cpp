#include "duetsep/toy/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "duetsep/dataset.hpp"
#include "duetsep/error.hpp"
#include "duetsep/rng.hpp"

namespace duetsep::toy {

void BenchmarkSpec::validate() const {
  require(train_duets >= 2, "need at least two training duets");
  require(test_duets >= 1, "need at least one test duet");
  require(duet_seconds >= 2.0, "duets must last at least one 2 s segment");
  require(density > 0.0, "note density must be positive");
  require(sample_rate > 0 && label_frame_rate > 0.0, "rates must be positive");
  const double per_frame = sample_rate / label_frame_rate;
  require(std::abs(per_frame - std::round(per_frame)) < 1e-9, "label frames must span a whole number of samples");
  require(val_fraction > 0.0 && val_fraction < 1.0, "validation fraction must be in (0, 1)");
  require(batch_size >= 1, "batch size must be at least 1");
  require(learning_rate > 0.0, "learning rate must be positive");
  require(gain_lo > 0.0 && gain_lo <= gain_hi, "gain range must satisfy 0 < lo <= hi");
  require(degrade_drop >= 0.0 && degrade_drop <= 1.0, "degrade drop probability must be in [0, 1]");
  require(filter_length >= 1, "filter length must be positive");
}

nlohmann::json spec_to_json(const BenchmarkSpec& s) {
  return {{"seed", s.seed},
          {"train_duets", s.train_duets},
          {"test_duets", s.test_duets},
          {"duet_seconds", s.duet_seconds},
          {"density", s.density},
          {"sample_rate", s.sample_rate},
          {"label_frame_rate", s.label_frame_rate},
          {"val_fraction", s.val_fraction},
          {"epochs", s.epochs},
          {"batch_size", s.batch_size},
          {"learning_rate", s.learning_rate},
          {"gain_lo", s.gain_lo},
          {"gain_hi", s.gain_hi},
          {"degrade_drop", s.degrade_drop},
          {"degrade_jitter_frames", s.degrade_jitter_frames},
          {"filter_length", s.filter_length}};
}

BenchmarkSpec spec_from_json(const nlohmann::json& json) {
  require(json.is_object(), "benchmark spec must be a JSON object");
  BenchmarkSpec s;
  const auto known = spec_to_json(s);
  for (const auto& [key, _] : json.items()) require(known.contains(key), "unknown benchmark spec key: " + key);
  try {
    auto get = [&](const char* key, auto& field) {
      if (json.contains(key)) field = json.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("seed", s.seed);
    get("train_duets", s.train_duets);
    get("test_duets", s.test_duets);
    get("duet_seconds", s.duet_seconds);
    get("density", s.density);
    get("sample_rate", s.sample_rate);
    get("label_frame_rate", s.label_frame_rate);
    get("val_fraction", s.val_fraction);
    get("epochs", s.epochs);
    get("batch_size", s.batch_size);
    get("learning_rate", s.learning_rate);
    get("gain_lo", s.gain_lo);
    get("gain_hi", s.gain_hi);
    get("degrade_drop", s.degrade_drop);
    get("degrade_jitter_frames", s.degrade_jitter_frames);
    get("filter_length", s.filter_length);
  } catch (const nlohmann::json::exception& e) {
    fail_argument(std::string("invalid benchmark spec: ") + e.what());
  }
  s.validate();
  return s;
}

BenchmarkSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open benchmark spec " + path.string());
  try {
    return spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    fail_argument("benchmark spec " + path.string() + " is not valid JSON: " + e.what());
  }
}

ToyCorpus make_corpus(const BenchmarkSpec& spec) {
  spec.validate();
  DuetRender render;
  render.sample_rate = spec.sample_rate;
  render.roll_frame_rate = spec.label_frame_rate;
  ScoreParams params;
  params.duration = spec.duet_seconds;
  params.density = spec.density;

  auto make = [&](const std::string& prefix, std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof(id), "%s-%03zu", prefix.c_str(), i);
    const auto score = generate_score(params, derive_seed(spec.seed, "score:" + prefix, i));
    return NamedDuet{id, synth_duet(score, render, derive_seed(spec.seed, "render:" + prefix, i))};
  };

  std::vector<NamedDuet> pool;
  dataset::Manifest manifest;
  manifest.sample_rate = spec.sample_rate;
  for (std::size_t i = 0; i < spec.train_duets; ++i) {
    pool.push_back(make("train", i));
    dataset::TrackEntry entry;
    entry.track_id = pool.back().id;
    entry.subset = dataset::SubsetTag::synthetic;
    entry.duration = spec.duet_seconds;
    manifest.entries.push_back(entry);
  }
  const auto assigned = dataset::split(manifest, 1.0 - spec.val_fraction, derive_seed(spec.seed, "split", 0));

  ToyCorpus corpus;
  for (auto& d : pool) {
    (assigned.splits->at(d.id) == dataset::Split::train ? corpus.train : corpus.val).push_back(std::move(d));
  }
  for (std::size_t i = 0; i < spec.test_duets; ++i) corpus.test.push_back(make("test", i));
  return corpus;
}

// ---------------------------------------------------------------------------
// Optimizer

Adam::Adam(const ParameterSet& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(zero_gradients(params)), v_(zero_gradients(params)) {
  require(lr > 0.0, "learning rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "Adam betas must be in [0, 1)");
}

void Adam::step(ParameterSet& params, const Gradients& grads) {
  require(grads.size() == params.size() && m_.size() == params.size(), "gradient set does not match parameters");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].value;
    const auto& g = grads[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

std::string to_string(ConditioningMode mode) {
  switch (mode) {
    case ConditioningMode::none: return "none";
    case ConditioningMode::ground_truth: return "ground_truth";
    case ConditioningMode::degraded: return "degraded";
  }
  return "?";
}

ConditioningMode parse_mode(const std::string& text) {
  if (text == "none") return ConditioningMode::none;
  if (text == "ground_truth" || text == "gt") return ConditioningMode::ground_truth;
  if (text == "degraded") return ConditioningMode::degraded;
  fail_argument("unknown conditioning mode '" + text + "' (expected none, ground_truth or degraded)");
}

// ---------------------------------------------------------------------------
// Training

scores::ConditioningPlanes segment_planes(const Separator& model, const std::array<scores::PianoRoll, 2>& rolls,
                                          std::size_t start_sample) {
  const auto& cfg = model.config();
  const double fps = rolls[0].frame_rate();
  const double per_frame = cfg.sample_rate / fps;
  const auto start = static_cast<std::size_t>(std::llround(static_cast<double>(start_sample) / per_frame));
  const auto count = static_cast<std::size_t>(std::llround(static_cast<double>(cfg.segment_samples) / per_frame));
  require(std::abs(static_cast<double>(start) * per_frame - static_cast<double>(start_sample)) < 1e-6,
          "segment start is not aligned to a label frame");
  return model.planes({scores::crop_roll(rolls[0], start, count), scores::crop_roll(rolls[1], start, count)});
}

namespace {

struct Item {
  std::vector<double> mixture;
  std::array<std::vector<double>, 2> stems;
  scores::ConditioningPlanes planes;
};

std::vector<double> slice(const AudioBuffer& buffer, std::size_t start, std::size_t length, double gain = 1.0) {
  std::vector<double> out(length, 0.0);
  const auto src = buffer.channel(0);
  for (std::size_t i = 0; i < length && start + i < src.size(); ++i) out[i] = gain * src[start + i];
  return out;
}

Item make_item(const Separator& model, const NamedDuet& d, std::size_t start, double g1, double g2, bool conditioned) {
  const std::size_t n = model.config().segment_samples;
  Item item;
  item.stems = {slice(d.duet.stems[0], start, n, g1), slice(d.duet.stems[1], start, n, g2)};
  item.mixture.resize(n);
  for (std::size_t i = 0; i < n; ++i) item.mixture[i] = 0.5 * (item.stems[0][i] + item.stems[1][i]);
  item.planes = conditioned ? segment_planes(model, d.duet.rolls, start) : model.zero_planes();
  return item;
}

struct ItemResult {
  losses::LossValue loss;
  Gradients grads;
};

ItemResult run_item(const Separator& model, const Item& item, const losses::PitLossConfig& loss, bool with_grad) {
  Graph graph(&model.params());
  const auto out = model.forward(graph, item.mixture, item.planes);
  const auto l = graph.pit_l1(out[0], out[1], item.stems[0], item.stems[1], loss);
  ItemResult r{graph.last_loss(), {}};
  if (!std::isfinite(r.loss.loss)) fail("training diverged: non-finite loss");
  if (with_grad) {
    graph.backward(l);
    r.grads = zero_gradients(model.params());
    graph.accumulate_parameter_gradients(r.grads);
  }
  return r;
}

std::vector<ItemResult> run_items(const Separator& model, const std::vector<Item>& items,
                                  const losses::PitLossConfig& loss, bool with_grad, std::size_t jobs) {
  std::vector<ItemResult> results(items.size());
  const std::size_t workers = std::min(std::max<std::size_t>(jobs, 1), items.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < items.size(); ++i) results[i] = run_item(model, items[i], loss, with_grad);
    return results;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < items.size(); i += workers) results[i] = run_item(model, items[i], loss, with_grad);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace

TrainResult train_separator(const ToyCorpus& corpus, const BenchmarkSpec& spec, const TrainOptions& options) {
  spec.validate();
  options.loss.validate();
  require(options.mode != ConditioningMode::degraded, "degraded conditioning is an evaluation mode only");
  require(!corpus.train.empty(), "training split is empty");
  const bool conditioned = options.mode == ConditioningMode::ground_truth;

  SeparatorConfig cfg;
  cfg.sample_rate = spec.sample_rate;
  cfg.segment_samples = static_cast<std::size_t>(2 * spec.sample_rate);
  cfg.conditioning = conditioned ? options.conditioning : BranchConditioning{false, false};
  TrainResult result{Separator(cfg, derive_seed(spec.seed, "init", 0)), {}};
  Separator& model = result.model;
  Adam adam(model.params(), spec.learning_rate);

  const std::size_t n = cfg.segment_samples;
  const auto per_frame = static_cast<std::size_t>(std::llround(spec.sample_rate / spec.label_frame_rate));

  auto epoch_items = [&](std::size_t epoch) {
    Rng order_rng(derive_seed(spec.seed, "order", epoch));
    std::vector<std::size_t> order(corpus.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(order_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    std::vector<Item> items;
    for (std::size_t idx : order) {
      const auto& d = corpus.train[idx];
      Rng rng(derive_seed(spec.seed, "crop:" + d.id, epoch));
      const std::size_t frames = d.duet.mixture.frames() / per_frame;
      const std::size_t seg_frames = n / per_frame;
      const auto start = frames > seg_frames
                             ? static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(frames - seg_frames)))
                             : 0;
      const double g1 = rng.uniform(spec.gain_lo, spec.gain_hi);
      const double g2 = rng.uniform(spec.gain_lo, spec.gain_hi);
      items.push_back(make_item(model, d, start * per_frame, g1, g2, conditioned));
    }
    return items;
  };

  std::vector<Item> val_items;
  for (const auto& d : corpus.val) {
    for (std::size_t start = 0; start + n <= d.duet.mixture.frames(); start += n) {
      val_items.push_back(make_item(model, d, start, 1.0, 1.0, conditioned));
    }
  }
  auto val_loss = [&] {
    if (val_items.empty()) return 0.0;
    double total = 0.0;
    for (const auto& r : run_items(model, val_items, options.loss, false, options.jobs)) total += r.loss.loss;
    return total / static_cast<double>(val_items.size());
  };

  auto log_epoch = [&](EpochLog row) {
    result.log.push_back(row);
    if (options.on_epoch) options.on_epoch(row);
  };

  std::vector<Item> items = epoch_items(1);
  {
    EpochLog row;
    for (const auto& r : run_items(model, items, options.loss, false, options.jobs)) {
      row.train_loss += r.loss.loss;
      row.mixture_term += r.loss.mixture_term;
    }
    row.train_loss /= static_cast<double>(items.size());
    row.mixture_term /= static_cast<double>(items.size());
    row.val_loss = val_loss();
    log_epoch(row);
  }

  for (std::size_t epoch = 1; epoch <= spec.epochs; ++epoch) {
    if (epoch > 1) items = epoch_items(epoch);
    EpochLog row;
    row.epoch = epoch;
    for (std::size_t b = 0; b < items.size(); b += spec.batch_size) {
      const std::size_t e = std::min(items.size(), b + spec.batch_size);
      const std::vector<Item> batch(items.begin() + static_cast<long>(b), items.begin() + static_cast<long>(e));
      auto results = run_items(model, batch, options.loss, true, options.jobs);
      Gradients total = zero_gradients(model.params());
      for (auto& r : results) {
        accumulate(total, r.grads);
        row.train_loss += r.loss.loss;
        row.mixture_term += r.loss.mixture_term;
      }
      const double inv = 1.0 / static_cast<double>(results.size());
      for (auto& g : total) {
        for (double& v : g) v *= inv;
      }
      adam.step(model.params(), total);
    }
    row.train_loss /= static_cast<double>(items.size());
    row.mixture_term /= static_cast<double>(items.size());
    row.val_loss = val_loss();
    log_epoch(row);
  }
  return result;
}

std::string loss_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch,train_loss,mixture_term,val_loss\n";
  char line[128];
  for (const auto& r : log) {
    std::snprintf(line, sizeof(line), "%zu,%.9f,%.9f,%.9f\n", r.epoch, r.train_loss, r.mixture_term, r.val_loss);
    out << line;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Evaluation

std::array<std::vector<double>, 2> separate_track(const Separator& model, const AudioBuffer& mixture,
                                                  const std::array<scores::PianoRoll, 2>* rolls) {
  require(mixture.channels() == 1, "toy separation expects a mono mixture");
  require(mixture.sample_rate() == model.config().sample_rate, "mixture sample rate does not match the model");
  const std::size_t n = model.config().segment_samples;
  const std::size_t total = mixture.frames();
  std::array<std::vector<double>, 2> out{std::vector<double>(total, 0.0), std::vector<double>(total, 0.0)};
  for (std::size_t start = 0; start < total; start += n) {
    const auto seg = slice(mixture, start, n);
    const auto planes = rolls ? segment_planes(model, *rolls, start) : model.zero_planes();
    const auto est = model.separate(seg, planes);
    for (std::size_t s = 0; s < 2; ++s) {
      for (std::size_t i = 0; i < n && start + i < total; ++i) out[s][start + i] = est[s][i];
    }
  }
  return out;
}

TrackEstimator model_estimator(const Separator& model, ConditioningMode mode, const BenchmarkSpec& spec) {
  return [&model, mode, spec](const NamedDuet& d) {
    switch (mode) {
      case ConditioningMode::none: return separate_track(model, d.duet.mixture, nullptr);
      case ConditioningMode::ground_truth: return separate_track(model, d.duet.mixture, &d.duet.rolls);
      case ConditioningMode::degraded: {
        std::array<scores::PianoRoll, 2> rolls;
        for (std::size_t s = 0; s < 2; ++s) {
          rolls[s] = scores::degrade_labels(d.duet.rolls[s], spec.degrade_drop, spec.degrade_jitter_frames,
                                            derive_seed(spec.seed, "degrade:" + d.id, s));
        }
        return separate_track(model, d.duet.mixture, &rolls);
      }
    }
    fail("unhandled conditioning mode");
  };
}

namespace {

double median_db(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  if (v.size() % 2 == 1) return v[m];
  const double pair[2] = {v[m - 1], v[m]};
  return metrics::mean_db(pair);
}

}  // namespace

EvalSummary evaluate_tracks(const std::vector<NamedDuet>& tracks, const TrackEstimator& estimator,
                            std::size_t filter_length) {
  require(!tracks.empty(), "nothing to evaluate");
  metrics::ProjectionConfig pc;
  pc.filter_length = filter_length;
  EvalSummary summary;
  for (const auto& t : tracks) {
    auto est = estimator(t);
    const int sr = t.duet.mixture.sample_rate();
    std::vector<AudioBuffer> estimates{AudioBuffer::mono(sr, std::move(est[0])), AudioBuffer::mono(sr, std::move(est[1]))};
    std::vector<AudioBuffer> refs{t.duet.stems[0], t.duet.stems[1]};
    summary.tracks.push_back({t.id, metrics::evaluate_pair(estimates, refs, pc)});
  }
  std::vector<double> all_si;
  for (std::size_t s = 0; s < 2; ++s) {
    std::array<std::vector<double>, 4> cols;
    for (const auto& t : summary.tracks) {
      const auto& m = t.report.per_source[s];
      cols[0].push_back(m.sdr);
      cols[1].push_back(m.si_sdr);
      cols[2].push_back(m.sar);
      cols[3].push_back(m.sir);
      all_si.push_back(m.si_sdr);
    }
    summary.mean[s] = {metrics::mean_db(cols[0]), metrics::mean_db(cols[1]), metrics::mean_db(cols[2]),
                       metrics::mean_db(cols[3])};
    summary.median[s] = {median_db(cols[0]), median_db(cols[1]), median_db(cols[2]), median_db(cols[3])};
  }
  summary.si_sdr = metrics::mean_db(all_si);
  return summary;
}

std::string summary_csv_header() { return "label,source,statistic,sdr,si_sdr,sar,sir\n"; }

std::string summary_csv(const std::string& label, const EvalSummary& summary) {
  std::string out;
  for (std::size_t s = 0; s < 2; ++s) {
    for (int k = 0; k < 2; ++k) {
      const auto& m = k == 0 ? summary.mean[s] : summary.median[s];
      out += label + (s == 0 ? ",G1," : ",G2,") + (k == 0 ? "mean," : "median,") + metrics::format_db(m.sdr) + "," +
             metrics::format_db(m.si_sdr) + "," + metrics::format_db(m.sar) + "," + metrics::format_db(m.sir) + "\n";
    }
  }
  return out;
}

}  // namespace duetsep::toy
