#include "duetsep/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>

#include "duetsep/error.hpp"

namespace duetsep::fft {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// FFTW may pick different codelets for differently aligned arrays, so every
// transform runs on plan-owned, fftw_malloc'd scratch. That keeps results
// bit-identical from run to run.
struct Plan {
  explicit Plan(std::size_t n) : size(n) {
    real = fftw_alloc_real(n);
    spec = fftw_alloc_complex(n / 2 + 1);
    const int len = static_cast<int>(n);
    forward = fftw_plan_dft_r2c_1d(len, real, spec, FFTW_ESTIMATE);
    inverse = fftw_plan_dft_c2r_1d(len, spec, real, FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(inverse);
    fftw_free(real);
    fftw_free(spec);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;

  std::size_t size;
  double* real;
  fftw_complex* spec;
  fftw_plan forward;
  fftw_plan inverse;
};

// Each thread owns its plans and scratch; only plan creation is serialized.
Plan& plan_for(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<Plan>> plans;
  auto it = plans.find(n);
  if (it == plans.end()) {
    std::lock_guard lock(planner_mutex());
    it = plans.emplace(n, std::make_unique<Plan>(n)).first;
  }
  return *it->second;
}

}  // namespace

void rfft(std::span<const double> in, std::span<Complex> out) {
  const std::size_t n = in.size();
  require(n > 0, "rfft of empty input");
  require(out.size() == n / 2 + 1, "rfft output size must be n/2+1");
  Plan& p = plan_for(n);
  std::copy(in.begin(), in.end(), p.real);
  fftw_execute(p.forward);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = Complex(p.spec[k][0], p.spec[k][1]);
}

std::vector<Complex> rfft(std::span<const double> in) {
  std::vector<Complex> out(in.size() / 2 + 1);
  rfft(in, out);
  return out;
}

void irfft(std::span<const Complex> in, std::span<double> out) {
  const std::size_t n = out.size();
  require(n > 0, "irfft of empty output");
  require(in.size() == n / 2 + 1, "irfft input size must be n/2+1");
  Plan& p = plan_for(n);
  for (std::size_t k = 0; k < in.size(); ++k) {
    p.spec[k][0] = in[k].real();
    p.spec[k][1] = in[k].imag();
  }
  p.spec[0][1] = 0.0;
  if (n % 2 == 0) p.spec[n / 2][1] = 0.0;
  fftw_execute(p.inverse);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = p.real[i] * scale;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> xcorr(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "xcorr of empty input");
  // sum_n a[n+lag] b[n] is the convolution of a with reversed b.
  std::vector<double> rb(b.rbegin(), b.rend());
  return convolve(a, rb);
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "convolve of empty input");
  const std::size_t out_len = a.size() + b.size() - 1;
  const std::size_t n = next_pow2(out_len);
  std::vector<double> pa(n, 0.0), pb(n, 0.0);
  std::copy(a.begin(), a.end(), pa.begin());
  std::copy(b.begin(), b.end(), pb.begin());
  auto fa = rfft(pa);
  const auto fb = rfft(pb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  std::vector<double> full(n);
  irfft(fa, full);
  full.resize(out_len);
  return full;
}

}  // namespace duetsep::fft
