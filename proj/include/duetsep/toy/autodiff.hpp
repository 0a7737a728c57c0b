#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "duetsep/losses.hpp"
#include "duetsep/stft.hpp"

namespace duetsep::toy {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Parameter {
  std::string name;
  Shape shape;
  std::vector<double> value;
};

/// Ordered, named parameter list. Order defines checkpoint and optimizer layout.
class ParameterSet {
 public:
  std::size_t add(std::string name, Shape shape);
  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t index_of(const std::string& name) const;
  std::size_t total_elements() const;
  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

 private:
  std::vector<Parameter> params_;
};

/// Per-parameter gradient buffers matching a ParameterSet.
using Gradients = std::vector<std::vector<double>>;
Gradients zero_gradients(const ParameterSet& params);
void accumulate(Gradients& into, const Gradients& from);

/// Reverse-mode tape over double tensors stored row-major. Nodes are created
/// in topological order, so backward walks them in reverse.
///
/// Convolutions use the layout (channels, length, batch): the last axis is an
/// independent batch dimension, which lets the spectral branch convolve along
/// frequency for all frames at once.
class Graph {
 public:
  using Id = std::size_t;

  explicit Graph(const ParameterSet* params = nullptr);

  Id constant(Shape shape, std::vector<double> values);
  Id parameter(std::size_t index);

  const Shape& shape(Id id) const { return nodes_[id].shape; }
  const std::vector<double>& value(Id id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  /// x (Cin, L, B), w (Cout, Cin, K), b (Cout) -> (Cout, (L + 2 pad - K)/stride + 1, B).
  Id conv1d(Id x, Id w, Id b, std::size_t stride, std::size_t pad);
  /// x (Cin, L, B), w (Cin, Cout, K), b (Cout) -> (Cout, (L-1) stride + K - 2 crop, B).
  Id conv_transpose1d(Id x, Id w, Id b, std::size_t stride, std::size_t crop);
  /// x (In, T), w (Out, In), b (Out) -> (Out, T).
  Id linear(Id x, Id w, Id b);

  Id relu(Id x);
  Id sigmoid(Id x);
  Id add(Id a, Id b);
  Id mul(Id a, Id b);
  Id scale(Id x, double factor);
  Id reshape(Id x, Shape shape);
  /// Concatenation along axis 0; trailing dimensions must agree.
  Id concat(const std::vector<Id>& parts);
  /// Slice [index] along axis 0, dropping that axis.
  Id select(Id x, std::size_t index);

  /// mask (F, T) applied to a fixed spectrogram of the same bins/frames,
  /// then inverted to a waveform (N).
  Id masked_istft(Id mask, const ComplexGrid& spectrum);

  /// Two-source permutation-invariant L1 + mixture loss on waveform nodes.
  Id pit_l1(Id first, Id second, std::span<const double> ref_first, std::span<const double> ref_second,
            const losses::PitLossConfig& config);
  /// Last loss details recorded by pit_l1.
  const losses::LossValue& last_loss() const { return last_loss_; }

  /// Seeds d(out)/d(out) = 1 for a scalar node and runs the tape backwards.
  void backward(Id out);
  /// Seeds an arbitrary upstream gradient for node `out`.
  void backward(Id out, std::span<const double> seed);

  const std::vector<double>& grad(Id id) const;
  /// Gradient of a parameter node, added into `into` (sized like the param).
  void accumulate_parameter_gradients(Gradients& into) const;

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::function<void()> back;
    long param = -1;
  };

  Id push(Shape shape, std::vector<double> value);
  std::vector<double>& g(Id id);
  void check(Id id) const;

  const ParameterSet* params_;
  std::vector<Node> nodes_;
  losses::LossValue last_loss_{};
};

}  // namespace duetsep::toy
