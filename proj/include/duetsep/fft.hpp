#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace duetsep::fft {

using Complex = std::complex<double>;

/// Forward real DFT: out has n/2+1 bins, no scaling.
void rfft(std::span<const double> in, std::span<Complex> out);

/// Inverse of rfft including the 1/n factor; imaginary parts of the DC and
/// Nyquist bins are ignored.
void irfft(std::span<const Complex> in, std::span<double> out);

std::vector<Complex> rfft(std::span<const double> in);

/// Smallest power of two >= n.
std::size_t next_pow2(std::size_t n);

/// Full linear cross-correlation c[lag] = sum_n a[n + lag] * b[n] for
/// lag in [-(b.size()-1), a.size()-1]; index 0 of the result is the most
/// negative lag.
std::vector<double> xcorr(std::span<const double> a, std::span<const double> b);

/// Linear convolution, length a.size() + b.size() - 1.
std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

}  // namespace duetsep::fft
