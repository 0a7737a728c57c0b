#include "duetsep/toy/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "duetsep/error.hpp"
#include "duetsep/simd/kernels.hpp"

namespace duetsep::toy {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::size_t ParameterSet::add(std::string name, Shape shape) {
  for (const auto& p : params_) require(p.name != name, "duplicate parameter name " + name);
  const std::size_t n = element_count(shape);
  params_.push_back({std::move(name), std::move(shape), std::vector<double>(n, 0.0)});
  return params_.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  fail_argument("no parameter named " + name);
}

std::size_t ParameterSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Gradients zero_gradients(const ParameterSet& params) {
  Gradients g;
  g.reserve(params.size());
  for (const auto& p : params.all()) g.emplace_back(p.value.size(), 0.0);
  return g;
}

void accumulate(Gradients& into, const Gradients& from) {
  require(into.size() == from.size(), "gradient sets differ in size");
  const auto& k = simd::kernels();
  for (std::size_t i = 0; i < into.size(); ++i) {
    require(into[i].size() == from[i].size(), "gradient buffers differ in size");
    k.axpy(1.0, from[i].data(), into[i].data(), into[i].size());
  }
}

Graph::Graph(const ParameterSet* params) : params_(params) {}

Graph::Id Graph::push(Shape shape, std::vector<double> value) {
  Node node;
  node.shape = std::move(shape);
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

void Graph::check(Id id) const {
  if (id >= nodes_.size()) fail_argument("unknown graph node");
}

std::vector<double>& Graph::g(Id id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

const std::vector<double>& Graph::grad(Id id) const {
  check(id);
  static const std::vector<double> empty;
  return nodes_[id].grad.empty() ? empty : nodes_[id].grad;
}

Graph::Id Graph::constant(Shape shape, std::vector<double> values) {
  require(element_count(shape) == values.size(),
          "constant of shape " + shape_string(shape) + " given " + std::to_string(values.size()) + " values");
  return push(std::move(shape), std::move(values));
}

Graph::Id Graph::parameter(std::size_t index) {
  require(params_ != nullptr && index < params_->size(), "parameter index out of range");
  const auto& p = (*params_)[index];
  const Id id = push(p.shape, p.value);
  nodes_[id].param = static_cast<long>(index);
  return id;
}

void Graph::accumulate_parameter_gradients(Gradients& into) const {
  require(params_ != nullptr && into.size() == params_->size(), "gradient set does not match parameters");
  const auto& k = simd::kernels();
  for (const auto& node : nodes_) {
    if (node.param < 0 || node.grad.empty()) continue;
    auto& dst = into[static_cast<std::size_t>(node.param)];
    k.axpy(1.0, node.grad.data(), dst.data(), dst.size());
  }
}

// ---------------------------------------------------------------------------
// Convolutions

namespace {

// Row of inputs seen by kernel tap k: out[l * B + b] = x[c, l * stride + k - pad, b].
void gather(const double* xc, std::size_t len, std::size_t batch, std::size_t out_len, std::size_t stride,
            std::size_t k, std::size_t pad, double* row) {
  for (std::size_t l = 0; l < out_len; ++l) {
    const long src = static_cast<long>(l * stride + k) - static_cast<long>(pad);
    double* dst = row + l * batch;
    if (src < 0 || src >= static_cast<long>(len)) {
      std::fill(dst, dst + batch, 0.0);
    } else {
      std::copy_n(xc + static_cast<std::size_t>(src) * batch, batch, dst);
    }
  }
}

void scatter_add(const double* row, std::size_t len, std::size_t batch, std::size_t out_len,
                 std::size_t stride, std::size_t k, std::size_t pad, double* xc) {
  for (std::size_t l = 0; l < out_len; ++l) {
    const long dst = static_cast<long>(l * stride + k) - static_cast<long>(pad);
    if (dst < 0 || dst >= static_cast<long>(len)) continue;
    double* d = xc + static_cast<std::size_t>(dst) * batch;
    const double* s = row + l * batch;
    for (std::size_t b = 0; b < batch; ++b) d[b] += s[b];
  }
}

}  // namespace

Graph::Id Graph::conv1d(Id x, Id w, Id b, std::size_t stride, std::size_t pad) {
  check(x), check(w), check(b);
  const Shape xs = shape(x), ws = shape(w), bs = shape(b);
  require(xs.size() == 3, "conv1d input must be (C, L, B), got " + shape_string(xs));
  require(ws.size() == 3 && ws[1] == xs[0], "conv1d weight " + shape_string(ws) + " does not match input " +
                                                shape_string(xs));
  require(bs.size() == 1 && bs[0] == ws[0], "conv1d bias must have one entry per output channel");
  require(stride > 0, "conv1d stride must be positive");
  const std::size_t cin = xs[0], len = xs[1], batch = xs[2], cout = ws[0], kw = ws[2];
  require(len + 2 * pad >= kw, "conv1d kernel longer than the padded input");
  const std::size_t out_len = (len + 2 * pad - kw) / stride + 1;
  const std::size_t row_n = out_len * batch;

  const auto& k = simd::kernels();
  std::vector<double> y(cout * row_n);
  for (std::size_t co = 0; co < cout; ++co) std::fill_n(y.data() + co * row_n, row_n, value(b)[co]);
  std::vector<double> row(row_n);
  const auto& xv = value(x);
  const auto& wv = value(w);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t t = 0; t < kw; ++t) {
      gather(xv.data() + ci * len * batch, len, batch, out_len, stride, t, pad, row.data());
      for (std::size_t co = 0; co < cout; ++co) {
        k.axpy(wv[(co * cin + ci) * kw + t], row.data(), y.data() + co * row_n, row_n);
      }
    }
  }
  const Id out = push({cout, out_len, batch}, std::move(y));
  nodes_[out].back = [this, x, w, b, out, cin, len, batch, cout, kw, out_len, row_n, stride, pad] {
    const auto& k = simd::kernels();
    const auto& gy = nodes_[out].grad;
    auto& gb = g(b);
    for (std::size_t co = 0; co < cout; ++co) {
      gb[co] += std::accumulate(gy.begin() + static_cast<long>(co * row_n),
                                gy.begin() + static_cast<long>((co + 1) * row_n), 0.0);
    }
    auto& gw = g(w);
    auto& gx = g(x);
    const auto& xv = value(x);
    const auto& wv = value(w);
    std::vector<double> row(row_n), grow(row_n);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t t = 0; t < kw; ++t) {
        gather(xv.data() + ci * len * batch, len, batch, out_len, stride, t, pad, row.data());
        std::fill(grow.begin(), grow.end(), 0.0);
        for (std::size_t co = 0; co < cout; ++co) {
          const double* gyc = gy.data() + co * row_n;
          const std::size_t wi = (co * cin + ci) * kw + t;
          gw[wi] += k.dot(gyc, row.data(), row_n);
          k.axpy(wv[wi], gyc, grow.data(), row_n);
        }
        scatter_add(grow.data(), len, batch, out_len, stride, t, pad, gx.data() + ci * len * batch);
      }
    }
  };
  return out;
}

Graph::Id Graph::conv_transpose1d(Id x, Id w, Id b, std::size_t stride, std::size_t crop) {
  check(x), check(w), check(b);
  const Shape xs = shape(x), ws = shape(w), bs = shape(b);
  require(xs.size() == 3, "conv_transpose1d input must be (C, L, B), got " + shape_string(xs));
  require(ws.size() == 3 && ws[0] == xs[0], "conv_transpose1d weight " + shape_string(ws) +
                                                " does not match input " + shape_string(xs));
  require(bs.size() == 1 && bs[0] == ws[1], "conv_transpose1d bias must have one entry per output channel");
  require(stride > 0, "conv_transpose1d stride must be positive");
  const std::size_t cin = xs[0], len = xs[1], batch = xs[2], cout = ws[1], kw = ws[2];
  require((len - 1) * stride + kw > 2 * crop, "conv_transpose1d crop removes the whole output");
  const std::size_t out_len = (len - 1) * stride + kw - 2 * crop;
  const std::size_t in_n = len * batch;
  const std::size_t out_n = out_len * batch;

  const auto& k = simd::kernels();
  std::vector<double> y(cout * out_n);
  for (std::size_t co = 0; co < cout; ++co) std::fill_n(y.data() + co * out_n, out_n, value(b)[co]);
  std::vector<double> tmp(in_n);
  const auto& xv = value(x);
  const auto& wv = value(w);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t t = 0; t < kw; ++t) {
      std::fill(tmp.begin(), tmp.end(), 0.0);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        k.axpy(wv[(ci * cout + co) * kw + t], xv.data() + ci * in_n, tmp.data(), in_n);
      }
      // Input position l lands on output position l * stride + t - crop.
      scatter_add(tmp.data(), out_len, batch, len, stride, t, crop, y.data() + co * out_n);
    }
  }
  const Id out = push({cout, out_len, batch}, std::move(y));
  nodes_[out].back = [this, x, w, b, out, cin, len, batch, cout, kw, out_len, in_n, out_n, stride, crop] {
    const auto& k = simd::kernels();
    const auto& gy = nodes_[out].grad;
    auto& gb = g(b);
    for (std::size_t co = 0; co < cout; ++co) {
      gb[co] += std::accumulate(gy.begin() + static_cast<long>(co * out_n),
                                gy.begin() + static_cast<long>((co + 1) * out_n), 0.0);
    }
    auto& gw = g(w);
    auto& gx = g(x);
    const auto& xv = value(x);
    const auto& wv = value(w);
    std::vector<double> gtmp(in_n);
    for (std::size_t co = 0; co < cout; ++co) {
      for (std::size_t t = 0; t < kw; ++t) {
        gather(gy.data() + co * out_n, out_len, batch, len, stride, t, crop, gtmp.data());
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const std::size_t wi = (ci * cout + co) * kw + t;
          gw[wi] += k.dot(xv.data() + ci * in_n, gtmp.data(), in_n);
          k.axpy(wv[wi], gtmp.data(), gx.data() + ci * in_n, in_n);
        }
      }
    }
  };
  return out;
}

Graph::Id Graph::linear(Id x, Id w, Id b) {
  check(x), check(w), check(b);
  const Shape xs = shape(x), ws = shape(w), bs = shape(b);
  require(xs.size() == 2, "linear input must be (In, T), got " + shape_string(xs));
  require(ws.size() == 2 && ws[1] == xs[0], "linear weight " + shape_string(ws) + " does not match input " +
                                                shape_string(xs));
  require(bs.size() == 1 && bs[0] == ws[0], "linear bias must have one entry per output");
  const std::size_t in = xs[0], cols = xs[1], outs = ws[0];
  const auto& k = simd::kernels();
  std::vector<double> y(outs * cols);
  const auto& xv = value(x);
  const auto& wv = value(w);
  for (std::size_t o = 0; o < outs; ++o) {
    double* yo = y.data() + o * cols;
    std::fill_n(yo, cols, value(b)[o]);
    for (std::size_t i = 0; i < in; ++i) {
      const double wi = wv[o * in + i];
      if (wi != 0.0) k.axpy(wi, xv.data() + i * cols, yo, cols);
    }
  }
  const Id out = push({outs, cols}, std::move(y));
  nodes_[out].back = [this, x, w, b, out, in, cols, outs] {
    const auto& k = simd::kernels();
    const auto& gy = nodes_[out].grad;
    auto& gb = g(b);
    auto& gw = g(w);
    auto& gx = g(x);
    const auto& xv = value(x);
    const auto& wv = value(w);
    for (std::size_t o = 0; o < outs; ++o) {
      const double* go = gy.data() + o * cols;
      gb[o] += std::accumulate(go, go + cols, 0.0);
      for (std::size_t i = 0; i < in; ++i) {
        gw[o * in + i] += k.dot(go, xv.data() + i * cols, cols);
        const double wi = wv[o * in + i];
        if (wi != 0.0) k.axpy(wi, go, gx.data() + i * cols, cols);
      }
    }
  };
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise and structural ops

Graph::Id Graph::relu(Id x) {
  check(x);
  std::vector<double> y(value(x).size());
  simd::kernels().relu(value(x).data(), y.data(), y.size());
  const Id out = push(shape(x), std::move(y));
  nodes_[out].back = [this, x, out] {
    const auto& gy = nodes_[out].grad;
    const auto& xv = value(x);
    auto& gx = g(x);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += gy[i];
    }
  };
  return out;
}

Graph::Id Graph::sigmoid(Id x) {
  check(x);
  std::vector<double> y(value(x).size());
  const auto& xv = value(x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  const Id out = push(shape(x), std::move(y));
  nodes_[out].back = [this, x, out] {
    const auto& gy = nodes_[out].grad;
    const auto& yv = value(out);
    auto& gx = g(x);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * yv[i] * (1.0 - yv[i]);
  };
  return out;
}

Graph::Id Graph::add(Id a, Id b) {
  check(a), check(b);
  require(shape(a) == shape(b), "add shapes differ: " + shape_string(shape(a)) + " vs " + shape_string(shape(b)));
  std::vector<double> y = value(a);
  simd::kernels().axpy(1.0, value(b).data(), y.data(), y.size());
  const Id out = push(shape(a), std::move(y));
  nodes_[out].back = [this, a, b, out] {
    const auto& k = simd::kernels();
    const auto& gy = nodes_[out].grad;
    k.axpy(1.0, gy.data(), g(a).data(), gy.size());
    k.axpy(1.0, gy.data(), g(b).data(), gy.size());
  };
  return out;
}

Graph::Id Graph::mul(Id a, Id b) {
  check(a), check(b);
  require(shape(a) == shape(b), "mul shapes differ: " + shape_string(shape(a)) + " vs " + shape_string(shape(b)));
  std::vector<double> y(value(a).size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = value(a)[i] * value(b)[i];
  const Id out = push(shape(a), std::move(y));
  nodes_[out].back = [this, a, b, out] {
    const auto& gy = nodes_[out].grad;
    auto& ga = g(a);
    auto& gb = g(b);
    const auto& av = value(a);
    const auto& bv = value(b);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i] * bv[i];
      gb[i] += gy[i] * av[i];
    }
  };
  return out;
}

Graph::Id Graph::scale(Id x, double factor) {
  check(x);
  std::vector<double> y = value(x);
  for (double& v : y) v *= factor;
  const Id out = push(shape(x), std::move(y));
  nodes_[out].back = [this, x, out, factor] {
    const auto& gy = nodes_[out].grad;
    simd::kernels().axpy(factor, gy.data(), g(x).data(), gy.size());
  };
  return out;
}

Graph::Id Graph::reshape(Id x, Shape new_shape) {
  check(x);
  require(element_count(new_shape) == value(x).size(),
          "cannot reshape " + shape_string(shape(x)) + " to " + shape_string(new_shape));
  const Id out = push(std::move(new_shape), value(x));
  nodes_[out].back = [this, x, out] {
    const auto& gy = nodes_[out].grad;
    simd::kernels().axpy(1.0, gy.data(), g(x).data(), gy.size());
  };
  return out;
}

Graph::Id Graph::concat(const std::vector<Id>& parts) {
  require(!parts.empty(), "concat needs at least one input");
  for (Id p : parts) check(p);
  const Shape first = shape(parts.front());
  require(!first.empty(), "concat inputs must have at least one axis");
  const Shape tail(first.begin() + 1, first.end());
  std::size_t rows = 0;
  std::vector<double> y;
  for (Id p : parts) {
    const Shape& s = shape(p);
    require(s.size() == first.size() && Shape(s.begin() + 1, s.end()) == tail,
            "concat shapes differ: " + shape_string(first) + " vs " + shape_string(s));
    rows += s[0];
    y.insert(y.end(), value(p).begin(), value(p).end());
  }
  Shape out_shape = first;
  out_shape[0] = rows;
  const Id out = push(std::move(out_shape), std::move(y));
  nodes_[out].back = [this, parts, out] {
    const auto& gy = nodes_[out].grad;
    std::size_t offset = 0;
    for (Id p : parts) {
      const std::size_t n = value(p).size();
      simd::kernels().axpy(1.0, gy.data() + offset, g(p).data(), n);
      offset += n;
    }
  };
  return out;
}

Graph::Id Graph::select(Id x, std::size_t index) {
  check(x);
  const Shape& s = shape(x);
  require(!s.empty() && index < s[0], "select index out of range for " + shape_string(s));
  const Shape tail(s.begin() + 1, s.end());
  const std::size_t n = element_count(tail);
  std::vector<double> y(value(x).begin() + static_cast<long>(index * n),
                        value(x).begin() + static_cast<long>((index + 1) * n));
  const Id out = push(tail.empty() ? Shape{1} : tail, std::move(y));
  nodes_[out].back = [this, x, out, index, n] {
    const auto& gy = nodes_[out].grad;
    simd::kernels().axpy(1.0, gy.data(), g(x).data() + index * n, n);
  };
  return out;
}

// ---------------------------------------------------------------------------
// Spectral mask and loss

Graph::Id Graph::masked_istft(Id mask, const ComplexGrid& spectrum) {
  check(mask);
  const std::size_t bins = spectrum.bins(), frames = spectrum.frames;
  require(shape(mask) == Shape({bins, frames}), "mask shape " + shape_string(shape(mask)) +
                                                    " does not match spectrogram " +
                                                    shape_string({bins, frames}));
  ComplexGrid masked = spectrum;
  const auto& m = value(mask);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t f = 0; f < bins; ++f) masked.at(f, t) *= m[f * frames + t];
  }
  std::vector<double> y = istft_samples(masked);
  const std::size_t length = y.size();
  const Id out = push({length}, std::move(y));
  nodes_[out].back = [this, mask, out, spectrum, bins, frames] {
    const ComplexGrid adj = istft_adjoint(nodes_[out].grad, spectrum);
    auto& gm = g(mask);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t f = 0; f < bins; ++f) {
        gm[f * frames + t] += std::real(spectrum.at(f, t) * std::conj(adj.at(f, t)));
      }
    }
  };
  return out;
}

Graph::Id Graph::pit_l1(Id first, Id second, std::span<const double> ref_first, std::span<const double> ref_second,
                        const losses::PitLossConfig& config) {
  check(first), check(second);
  require(value(first).size() == ref_first.size() && value(second).size() == ref_second.size(),
          "loss estimates and references differ in length");
  auto lg = losses::subgradient_pit_l1({value(first), value(second)}, {ref_first, ref_second}, config);
  last_loss_ = lg.value;
  const Id out = push({1}, {lg.value.loss});
  nodes_[out].back = [this, first, second, out, g1 = std::move(lg.first), g2 = std::move(lg.second)] {
    const double seed = nodes_[out].grad[0];
    simd::kernels().axpy(seed, g1.data(), g(first).data(), g1.size());
    simd::kernels().axpy(seed, g2.data(), g(second).data(), g2.size());
  };
  return out;
}

void Graph::backward(Id out) {
  check(out);
  require(value(out).size() == 1, "backward() without a seed needs a scalar output");
  const double one = 1.0;
  backward(out, std::span<const double>(&one, 1));
}

void Graph::backward(Id out, std::span<const double> seed) {
  check(out);
  require(seed.size() == value(out).size(), "backward seed does not match the output size");
  for (auto& node : nodes_) std::fill(node.grad.begin(), node.grad.end(), 0.0);
  auto& go = g(out);
  std::copy(seed.begin(), seed.end(), go.begin());
  for (Id i = out + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.back && !node.grad.empty()) node.back();
  }
}

}  // namespace duetsep::toy
