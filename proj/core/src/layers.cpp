#include "rtn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "rtn/error.hpp"

namespace rtn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::linear: return "linear";
    case LayerKind::relu: return "relu";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

Layer Layer::linear(std::string name, std::size_t in, std::size_t out, double lr_multiplier) {
  if (!(lr_multiplier > 0.0)) throw ParameterError("lr_multiplier must be positive for layer " + name);
  Layer l;
  l.name = std::move(name);
  l.kind = LayerKind::linear;
  l.weight = Tensor({in, out});
  l.bias = Tensor({out});
  l.grad_weight = Tensor({in, out});
  l.grad_bias = Tensor({out});
  l.lr_multiplier = lr_multiplier;
  return l;
}

Layer Layer::relu(std::string name) {
  Layer l;
  l.name = std::move(name);
  l.kind = LayerKind::relu;
  return l;
}

Layer Layer::softmax(std::string name) {
  Layer l;
  l.name = std::move(name);
  l.kind = LayerKind::softmax;
  return l;
}

void Layer::init_uniform(Rng& rng) {
  if (!has_params()) return;
  const double limit = std::sqrt(6.0 / static_cast<double>(in_features() + out_features()));
  for (double& w : weight.data()) w = rng.uniform(-limit, limit);
  bias.fill(0.0);
}

void Layer::zero_params() {
  if (!has_params()) return;
  weight.fill(0.0);
  bias.fill(0.0);
}

void Layer::zero_grad() {
  if (!has_params()) return;
  grad_weight.fill(0.0);
  grad_bias.fill(0.0);
}

Tensor Layer::forward(const Tensor& x) const {
  switch (kind) {
    case LayerKind::linear: {
      if (x.rank() != 2 || x.cols() != in_features()) {
        throw ShapeError("layer " + name + ": input " + shape_to_string(x.shape()) +
                         " does not match weight " + shape_to_string(weight.shape()));
      }
      Tensor y = matmul(x, weight);
      const std::size_t n = y.rows(), m = y.cols();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) y(i, j) += bias[j];
      return y;
    }
    case LayerKind::relu: return rtn::relu(x);
    case LayerKind::softmax: return softmax_rows(x);
  }
  throw StateError("unknown layer kind");
}

Tensor Layer::backward(const Tensor& x, const Tensor& y, const Tensor& dy) {
  switch (kind) {
    case LayerKind::linear: {
      const std::size_t n = x.rows(), in = x.cols(), out = dy.cols();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < in; ++p) {
          const double xip = x(i, p);
          if (xip == 0.0) continue;
          for (std::size_t j = 0; j < out; ++j) grad_weight(p, j) += xip * dy(i, j);
        }
        for (std::size_t j = 0; j < out; ++j) grad_bias[j] += dy(i, j);
      }
      Tensor dx({n, in});
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < in; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < out; ++j) s += dy(i, j) * weight(p, j);
          dx(i, p) = s;
        }
      return dx;
    }
    case LayerKind::relu: {
      Tensor dx(dy.shape());
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
      return dx;
    }
    case LayerKind::softmax: return softmax_backward(y, dy);
  }
  throw StateError("unknown layer kind");
}

Tensor softmax_rows(const Tensor& logits) {
  const std::size_t n = logits.rows(), c = logits.cols();
  Tensor p({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    auto in = logits.row(i);
    auto out = p.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out[j] = std::exp(in[j] - mx);
      z += out[j];
    }
    for (std::size_t j = 0; j < c; ++j) out[j] /= z;
  }
  return p;
}

Tensor softmax_backward(const Tensor& probs, const Tensor& dprobs) {
  if (probs.shape() != dprobs.shape()) {
    throw ShapeError("softmax_backward: shape mismatch " + shape_to_string(probs.shape()) + " vs " +
                     shape_to_string(dprobs.shape()));
  }
  const std::size_t n = probs.rows(), c = probs.cols();
  Tensor dz({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < c; ++j) dot += probs(i, j) * dprobs(i, j);
    for (std::size_t j = 0; j < c; ++j) dz(i, j) = probs(i, j) * (dprobs(i, j) - dot);
  }
  return dz;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

namespace {

void check_labels(const Tensor& probs, std::span<const std::size_t> labels) {
  if (probs.rows() != labels.size()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(probs.rows()) + " rows");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= probs.cols()) {
      throw IndexError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                       " outside [0, " + std::to_string(probs.cols()) + ")");
    }
  }
}

}  // namespace

double cross_entropy(const Tensor& probs, std::span<const std::size_t> labels) {
  check_labels(probs, labels);
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    s -= std::log(std::max(probs(i, labels[i]), kProbFloor));
  }
  return s / static_cast<double>(labels.size());
}

Tensor cross_entropy_grad(const Tensor& probs, std::span<const std::size_t> labels) {
  check_labels(probs, labels);
  Tensor g(probs.shape());
  const double n = static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probs(i, labels[i]);
    // Below the floor the clamped log is constant, so its derivative is zero.
    g(i, labels[i]) = p > kProbFloor ? -1.0 / (n * p) : 0.0;
  }
  return g;
}

std::vector<std::size_t> argmax_rows(const Tensor& scores) {
  const std::size_t n = scores.rows(), c = scores.cols();
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (scores(i, j) > scores(i, best)) best = j;
    }
    out[i] = best;
  }
  return out;
}

}  // namespace rtn
