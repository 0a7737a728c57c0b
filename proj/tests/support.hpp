#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "duetsep/rng.hpp"

namespace testing {

inline std::vector<double> noise(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  duetsep::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

inline double energy(const std::vector<double>& a) { return dot(a, a); }

// Gram-Schmidt, two passes, unit norm.
inline std::vector<std::vector<double>> orthonormal_pair(std::size_t n, std::uint64_t seed) {
  auto a = noise(n, seed);
  auto b = noise(n, seed + 1);
  for (int pass = 0; pass < 2; ++pass) {
    const double na = std::sqrt(energy(a));
    for (double& x : a) x /= na;
    const double p = dot(a, b);
    for (std::size_t i = 0; i < n; ++i) b[i] -= p * a[i];
    const double nb = std::sqrt(energy(b));
    for (double& x : b) x /= nb;
  }
  return {a, b};
}

inline std::vector<double> mix(const std::vector<double>& a, const std::vector<double>& b, double alpha) {
  std::vector<double> m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) m[i] = alpha * a[i] + (1.0 - alpha) * b[i];
  return m;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("duetsep-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace testing
