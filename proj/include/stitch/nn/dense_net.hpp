#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace stitch::nn {

enum class Head : std::uint32_t { Linear = 0, Tanh = 1, Softmax = 2 };
std::string_view to_string(Head h);

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

/// Weight is (fan_in x fan_out) so a batch (rows = samples) multiplies on the left.
template <typename T>
struct Layer {
  Matrix<T> weight;
  RowVector<T> bias;
};

/// Parameters and gradients share one layout.
template <typename T>
using Params = std::vector<Layer<T>>;

template <typename T>
Params<T> zeros_like(const Params<T>& p);
template <typename T>
std::size_t parameter_count(const Params<T>& p);
/// target <- (1 - tau) * target + tau * source
template <typename T>
void soft_update(Params<T>& target, const Params<T>& source, T tau);
/// acc += scale * g
template <typename T>
void accumulate(Params<T>& acc, const Params<T>& g, T scale);

/// Which quantity `upstream` in DenseNet::backward refers to.
enum class Upstream { Output, HeadInput };

/// Fully connected ReLU network with a configurable output head.
template <typename T>
class DenseNet {
 public:
  struct Cache {
    // activations[0] is the input; activations[i] the output of layer i.
    std::vector<Matrix<T>> activations;
  };

  DenseNet() = default;
  DenseNet(std::vector<int> widths, Head head);
  /// Adopts existing parameters; throws ShapeError if they do not match `widths`.
  DenseNet(std::vector<int> widths, Head head, Params<T> layers);

  /// input -> hidden x depth -> output
  static DenseNet mlp(int input, int output, Head head, int hidden = 256, int depth = 4);

  /// He-uniform for ReLU layers, uniform(+-1e-3) for the output layer.
  void initialize(std::mt19937_64& rng);

  Matrix<T> forward(const Matrix<T>& batch) const;
  Matrix<T> forward(const Matrix<T>& batch, Cache& cache) const;

  /// Gradients of sum(upstream .* output) w.r.t. every parameter. When
  /// `input_grad` is non-null it receives the gradient w.r.t. the input batch.
  Params<T> backward(const Cache& cache, const Matrix<T>& upstream, Matrix<T>* input_grad = nullptr,
                     Upstream kind = Upstream::Output) const;
  /// Gradient w.r.t. the input batch alone; parameter gradients are skipped.
  Matrix<T> input_gradient(const Cache& cache, const Matrix<T>& upstream) const;

  const std::vector<int>& widths() const { return widths_; }
  int input_width() const { return widths_.front(); }
  int output_width() const { return widths_.back(); }
  Head head() const { return head_; }

  Params<T>& params() { return layers_; }
  const Params<T>& params() const { return layers_; }

  template <typename U>
  DenseNet<U> cast() const;

 private:
  void check_input(const Matrix<T>& batch) const;
  Matrix<T> head_delta(const Cache& cache, const Matrix<T>& upstream, Upstream kind) const;

  std::vector<int> widths_;
  Head head_ = Head::Linear;
  Params<T> layers_;
};

template <typename T>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  Params<T> m;
  Params<T> v;

  AdamState() = default;
  explicit AdamState(const Params<T>& like, double learning_rate = 1e-3);
};

/// Bias-corrected Adam update; increments `state.step`.
template <typename T>
void adam_step(Params<T>& params, const Params<T>& grads, AdamState<T>& state);

/// Naive triple loop, row-major semantics (batch x in) * (in x out); kept as
/// the serial reference for the Eigen-backed kernels.
template <typename T>
Matrix<T> reference_matmul(const Matrix<T>& a, const Matrix<T>& b);
template <typename T>
Matrix<T> reference_forward(const DenseNet<T>& net, const Matrix<T>& batch);

template <typename T>
template <typename U>
DenseNet<U> DenseNet<T>::cast() const {
  Params<U> out(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    out[i].weight = layers_[i].weight.template cast<U>();
    out[i].bias = layers_[i].bias.template cast<U>();
  }
  return DenseNet<U>(widths_, head_, std::move(out));
}

extern template class DenseNet<float>;
extern template class DenseNet<double>;

}  // namespace stitch::nn
