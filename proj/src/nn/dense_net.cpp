#include "stitch/nn/dense_net.hpp"

#include <cmath>
#include <string>

#include "stitch/error.hpp"

namespace stitch::nn {

std::string_view to_string(Head h) {
  switch (h) {
    case Head::Linear: return "linear";
    case Head::Tanh: return "tanh";
    case Head::Softmax: return "softmax";
  }
  return "?";
}

template <typename T>
Params<T> zeros_like(const Params<T>& p) {
  Params<T> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i].weight = Matrix<T>::Zero(p[i].weight.rows(), p[i].weight.cols());
    out[i].bias = RowVector<T>::Zero(p[i].bias.cols());
  }
  return out;
}

template <typename T>
std::size_t parameter_count(const Params<T>& p) {
  std::size_t n = 0;
  for (const auto& l : p) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename T>
void soft_update(Params<T>& target, const Params<T>& source, T tau) {
  for (std::size_t i = 0; i < target.size(); ++i) {
    target[i].weight = (T(1) - tau) * target[i].weight + tau * source[i].weight;
    target[i].bias = (T(1) - tau) * target[i].bias + tau * source[i].bias;
  }
}

template <typename T>
void accumulate(Params<T>& acc, const Params<T>& g, T scale) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    acc[i].weight += scale * g[i].weight;
    acc[i].bias += scale * g[i].bias;
  }
}

template <typename T>
DenseNet<T>::DenseNet(std::vector<int> widths, Head head) : widths_(std::move(widths)), head_(head) {
  if (widths_.size() < 2) throw ShapeError("DenseNet: need at least input and output widths");
  for (int w : widths_)
    if (w < 1) throw ShapeError("DenseNet: layer widths must be positive");
  layers_.resize(widths_.size() - 1);
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    layers_[i].weight = Matrix<T>::Zero(widths_[i], widths_[i + 1]);
    layers_[i].bias = RowVector<T>::Zero(widths_[i + 1]);
  }
}

template <typename T>
DenseNet<T>::DenseNet(std::vector<int> widths, Head head, Params<T> layers) : DenseNet(std::move(widths), head) {
  if (layers.size() != layers_.size()) throw ShapeError("DenseNet: layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows() != layers_[i].weight.rows() || layers[i].weight.cols() != layers_[i].weight.cols() ||
        layers[i].bias.cols() != layers_[i].bias.cols())
      throw ShapeError("DenseNet: layer " + std::to_string(i) + " shape mismatch");
  }
  layers_ = std::move(layers);
}

template <typename T>
DenseNet<T> DenseNet<T>::mlp(int input, int output, Head head, int hidden, int depth) {
  std::vector<int> widths{input};
  for (int i = 0; i < depth; ++i) widths.push_back(hidden);
  widths.push_back(output);
  return DenseNet(std::move(widths), head);
}

template <typename T>
void DenseNet<T>::initialize(std::mt19937_64& rng) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const bool output_layer = i + 1 == layers_.size();
    const double bound = output_layer ? 1e-3 : std::sqrt(6.0 / widths_[i]);
    std::uniform_real_distribution<double> u(-bound, bound);
    auto& l = layers_[i];
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) l.weight(r, c) = static_cast<T>(u(rng));
    if (output_layer) {
      for (Eigen::Index c = 0; c < l.bias.cols(); ++c) l.bias(c) = static_cast<T>(u(rng));
    } else {
      l.bias.setZero();
    }
  }
}

template <typename T>
void DenseNet<T>::check_input(const Matrix<T>& batch) const {
  if (batch.cols() != input_width())
    throw ShapeError("DenseNet::forward: expected input width " + std::to_string(input_width()) + ", got " +
                     std::to_string(batch.cols()));
}

namespace {

template <typename T>
void apply_head(Matrix<T>& z, Head head) {
  switch (head) {
    case Head::Linear: break;
    case Head::Tanh: z = z.array().tanh(); break;
    case Head::Softmax: {
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const T mx = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - mx).exp();
        z.row(r) /= z.row(r).sum();
      }
      break;
    }
  }
}

}  // namespace

template <typename T>
Matrix<T> DenseNet<T>::forward(const Matrix<T>& batch) const {
  check_input(batch);
  Matrix<T> a = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix<T> z = a * layers_[i].weight;
    z.rowwise() += layers_[i].bias;
    if (i + 1 < layers_.size()) {
      a = z.cwiseMax(T(0));
    } else {
      apply_head(z, head_);
      a = std::move(z);
    }
  }
  return a;
}

template <typename T>
Matrix<T> DenseNet<T>::forward(const Matrix<T>& batch, Cache& cache) const {
  check_input(batch);
  cache.activations.resize(layers_.size() + 1);
  cache.activations[0] = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix<T>& z = cache.activations[i + 1];
    z.noalias() = cache.activations[i] * layers_[i].weight;
    z.rowwise() += layers_[i].bias;
    if (i + 1 < layers_.size()) {
      z = z.cwiseMax(T(0));
    } else {
      apply_head(z, head_);
    }
  }
  return cache.activations.back();
}

template <typename T>
Matrix<T> DenseNet<T>::head_delta(const Cache& cache, const Matrix<T>& upstream, Upstream kind) const {
  if (cache.activations.size() != layers_.size() + 1) throw ShapeError("DenseNet::backward: forward cache missing");
  const Matrix<T>& out = cache.activations.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
    throw ShapeError("DenseNet::backward: upstream gradient shape mismatch");
  if (kind == Upstream::HeadInput) return upstream;
  switch (head_) {
    case Head::Linear: return upstream;
    case Head::Tanh: return upstream.array() * (T(1) - out.array().square());
    case Head::Softmax: {
      const Eigen::Matrix<T, Eigen::Dynamic, 1> dot = (upstream.array() * out.array()).rowwise().sum();
      return out.array() * (upstream.colwise() - dot).array();
    }
  }
  return upstream;
}

template <typename T>
Params<T> DenseNet<T>::backward(const Cache& cache, const Matrix<T>& upstream, Matrix<T>* input_grad,
                                Upstream kind) const {
  const std::size_t n = layers_.size();
  Matrix<T> delta = head_delta(cache, upstream, kind);
  Params<T> grads(n);
  for (std::size_t k = n; k-- > 0;) {
    const Matrix<T>& a_prev = cache.activations[k];
    grads[k].weight.noalias() = a_prev.transpose() * delta;
    grads[k].bias = delta.colwise().sum();
    if (k > 0 || input_grad != nullptr) {
      Matrix<T> d_prev = delta * layers_[k].weight.transpose();
      if (k > 0) {
        delta = (a_prev.array() > T(0)).select(d_prev, T(0));
      } else {
        *input_grad = std::move(d_prev);
      }
    }
  }
  return grads;
}

template <typename T>
Matrix<T> DenseNet<T>::input_gradient(const Cache& cache, const Matrix<T>& upstream) const {
  Matrix<T> delta = head_delta(cache, upstream, Upstream::Output);
  for (std::size_t k = layers_.size(); k-- > 0;) {
    Matrix<T> d_prev = delta * layers_[k].weight.transpose();
    if (k == 0) return d_prev;
    delta = (cache.activations[k].array() > T(0)).select(d_prev, T(0));
  }
  return delta;
}

template <typename T>
AdamState<T>::AdamState(const Params<T>& like, double learning_rate)
    : lr(learning_rate), m(zeros_like(like)), v(zeros_like(like)) {}

template <typename T>
void adam_step(Params<T>& params, const Params<T>& grads, AdamState<T>& s) {
  ++s.step;
  const T b1 = static_cast<T>(s.beta1);
  const T b2 = static_cast<T>(s.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(s.beta1, static_cast<double>(s.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(s.beta2, static_cast<double>(s.step)));
  const T lr = static_cast<T>(s.lr);
  const T eps = static_cast<T>(s.eps);
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    update(params[i].weight, grads[i].weight, s.m[i].weight, s.v[i].weight);
    update(params[i].bias, grads[i].bias, s.m[i].bias, s.v[i].bias);
  }
}

template <typename T>
Matrix<T> reference_matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) throw ShapeError("reference_matmul: inner dimensions differ");
  Matrix<T> c = Matrix<T>::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      for (Eigen::Index j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

template <typename T>
Matrix<T> reference_forward(const DenseNet<T>& net, const Matrix<T>& batch) {
  const auto& layers = net.params();
  Matrix<T> a = batch;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Matrix<T> z = reference_matmul(a, layers[i].weight);
    for (Eigen::Index r = 0; r < z.rows(); ++r)
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        z(r, c) += layers[i].bias(c);
        if (i + 1 < layers.size()) z(r, c) = std::max(z(r, c), T(0));
      }
    a = std::move(z);
  }
  apply_head(a, net.head());
  return a;
}

#define STITCH_INSTANTIATE(T)                                                          \
  template class DenseNet<T>;                                                          \
  template struct AdamState<T>;                                                        \
  template Params<T> zeros_like(const Params<T>&);                                     \
  template std::size_t parameter_count(const Params<T>&);                              \
  template void soft_update(Params<T>&, const Params<T>&, T);                          \
  template void accumulate(Params<T>&, const Params<T>&, T);                           \
  template void adam_step(Params<T>&, const Params<T>&, AdamState<T>&);                \
  template Matrix<T> reference_matmul(const Matrix<T>&, const Matrix<T>&);             \
  template Matrix<T> reference_forward(const DenseNet<T>&, const Matrix<T>&);

STITCH_INSTANTIATE(float)
STITCH_INSTANTIATE(double)

#undef STITCH_INSTANTIATE

}  // namespace stitch::nn
