#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "duetsep/audio.hpp"
#include "duetsep/cli.hpp"
#include "support.hpp"

using namespace duetsep;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("cli usage errors exit 2") {
  auto r = run({"eval", "--bogus"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.rfind("error: ", 0) == 0);
  CHECK(r.err.find("Usage:") != std::string::npos);
  CHECK(r.out.empty());
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"nosuch"}).code == cli::kExitUsage);
  CHECK(run({"synth-duets", "--out-dir", "/tmp/unused"}).code == cli::kExitUsage);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("cli runtime failures exit 1 with one error line") {
  const auto r = run({"eval", "--est", "/nonexistent/a.wav", "/nonexistent/b.wav", "--ref", "/nonexistent/c.wav",
                      "/nonexistent/d.wav"});
  CHECK(r.code == cli::kExitFailure);
  CHECK(lines(r.err) == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
}

TEST_CASE("cli synth, mix, eval and pit-loss") {
  testing::TempDir dir("cli");
  const auto out = (dir / "duets").string();
  auto r = run({"synth-duets", "--seed", "4", "--count", "2", "--seconds", "2", "--out-dir", out});
  REQUIRE(r.code == 0);
  const auto first = testing::slurp(dir / "duets/duet-000/mix.wav");
  const auto manifest = testing::slurp(dir / "duets/manifest.json");
  CHECK(nlohmann::json::parse(manifest)["tracks"].size() == 2);
  REQUIRE(run({"synth-duets", "--seed", "4", "--count", "2", "--seconds", "2", "--out-dir", out}).code == 0);
  CHECK(testing::slurp(dir / "duets/duet-000/mix.wav") == first);
  CHECK(testing::slurp(dir / "duets/manifest.json") == manifest);

  const auto g1 = (dir / "duets/duet-000/guitar1.wav").string();
  const auto g2 = (dir / "duets/duet-000/guitar2.wav").string();
  const auto mix = (dir / "m.wav").string();
  REQUIRE(run({"mix", "--stems", g1, g2, "--out", mix, "--encoding", "float32"}).code == 0);
  // Stems are stored as float32, so the remix matches to float precision.
  const auto remixed = read_wav(mix), stored = read_wav(dir / "duets/duet-000/mix.wav");
  REQUIRE(remixed.frames() == stored.frames());
  double worst = 0.0;
  for (std::size_t i = 0; i < remixed.frames(); ++i)
    worst = std::max(worst, std::abs(remixed.channel(0)[i] - stored.channel(0)[i]));
  CHECK(worst < 1e-6);
  CHECK(std::filesystem::exists(mix + ".config.json"));

  r = run({"eval", "--est", g1, g2, "--ref", g1, g2, "--filter-length", "32", "--track-id", "d0"});
  CHECK(r.code == 0);
  CHECK(r.out == "track_id,source,permutation,sdr,si_sdr,sar,sir\nd0,G1,0:1,inf,inf,inf,inf\n"
                 "d0,G2,0:1,inf,inf,inf,inf\n");

  r = run({"pit-loss", "--est", g2, g1, "--ref", g1, g2});
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["loss"] == 0.0);
  CHECK(j["permutation"] == "1:0");
}

TEST_CASE("cli environment fallback") {
  testing::TempDir dir("cli-env");
  ::setenv("DUETSEP_SEED", "4", 1);
  const auto r = run({"synth-duets", "--count", "1", "--seconds", "2", "--out-dir", (dir / "a").string()});
  ::unsetenv("DUETSEP_SEED");
  CHECK(r.code == 0);
  const auto cfg = nlohmann::json::parse(testing::slurp(dir / "a/config.json"));
  CHECK(cfg["options"]["seed"] == "4");
}

TEST_CASE("cli rasterize writes rolls and planes") {
  testing::TempDir dir("cli-roll");
  {
    std::ofstream f(dir / "n.csv");
    f << "source,pitch,onset,offset\n0,60,0.005,0.095\n1,40,0.5,1.0\n";
  }
  const auto r = run({"rasterize", "--notes", (dir / "n.csv").string(), "--out-dir", (dir / "r").string(),
                      "--sample-rate", "44100", "--duration", "4"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["temporal_shape"] == nlohmann::json::array({256, 2757}));
  CHECK(j["spectral_shape"][0] == 2);
  CHECK(j["spectral_shape"][1] == 128);
  CHECK(std::filesystem::exists(dir / "r/roll_g1.bin"));
  CHECK(std::filesystem::exists(dir / "r/planes.json"));
}

TEST_CASE("cli alpha-sweep outputs") {
  testing::TempDir dir("cli-sweep");
  const auto r = run({"alpha-sweep", "--standard", "--seed", "29", "--out-dir", (dir / "s").string()});
  REQUIRE(r.code == 0);
  CHECK(lines(r.out) == 1 + 2 * 19);
  for (const char* f : {"curves.csv", "ordering.csv", "plot.gp", "config.json"}) CHECK(std::filesystem::exists(dir / "s" / f));
  CHECK(testing::slurp(dir / "s/ordering.csv").find("consistent_ordering=true") != std::string::npos);
  CHECK(run({"alpha-sweep", "--standard", "--out-dir", (dir / "t").string()}).code == cli::kExitUsage);
}

TEST_CASE("cli toy-train and toy-eval are byte reproducible") {
  testing::TempDir dir("cli-toy");
  {
    std::ofstream f(dir / "spec.json");
    f << R"({"train_duets": 4, "test_duets": 1, "duet_seconds": 2, "epochs": 1, "filter_length": 64})";
  }
  const auto spec = (dir / "spec.json").string();
  for (const char* out : {"a", "b"}) {
    const auto r = run({"toy-train", "--seed", "7", "--spec", spec, "--jobs", "1", "--out-dir", (dir / out).string()});
    REQUIRE(r.code == 0);
    CHECK(lines(r.out) == 3);
  }
  for (const char* f : {"checkpoint.bin", "loss.csv"}) CHECK(testing::slurp(dir / "a" / f) == testing::slurp(dir / "b" / f));
  auto ca = nlohmann::json::parse(testing::slurp(dir / "a/config.json"));
  auto cb = nlohmann::json::parse(testing::slurp(dir / "b/config.json"));
  ca["options"].erase("out-dir");
  cb["options"].erase("out-dir");
  CHECK(ca == cb);

  const auto ck = (dir / "a/checkpoint.bin").string();
  for (const char* out : {"ea", "eb"}) {
    const auto r = run({"toy-eval", "--checkpoint", ck, "--seed", "7", "--mode", "degraded", "--out-dir",
                        (dir / out).string()});
    REQUIRE(r.code == 0);
    CHECK(lines(r.out) == 5);
  }
  CHECK(testing::slurp(dir / "ea/report.csv") == testing::slurp(dir / "eb/report.csv"));
  CHECK(testing::slurp(dir / "ea/summary.csv") == testing::slurp(dir / "eb/summary.csv"));
  CHECK(run({"toy-eval", "--checkpoint", ck, "--out-dir", (dir / "ec").string()}).code == cli::kExitUsage);
  CHECK(run({"toy-train", "--seed", "7", "--mode", "degraded", "--out-dir", (dir / "x").string()}).code ==
        cli::kExitUsage);
}
