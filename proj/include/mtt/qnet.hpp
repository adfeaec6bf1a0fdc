#pragma once

#include "mtt/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace mtt
{

/// Fully connected network: rectifier on hidden layers, identity output.
template <typename Scalar = double>
class QNet
{
public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Gradient
  {
    std::vector<Matrix> w;
    std::vector<Vector> b;
  };

  QNet() = default;

  /// Zero-initialized. `sizes` runs input, hidden..., output.
  explicit QNet(std::vector<int> sizes, bool use_bias = true) : sizes_(std::move(sizes)), use_bias_(use_bias)
  {
    if (sizes_.size() < 2) throw DomainError("a network needs at least input and output sizes");
    for (int s : sizes_)
      if (s < 1) throw DomainError("layer sizes must be >= 1");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      w_.push_back(Matrix::Zero(sizes_[l + 1], sizes_[l]));
      b_.push_back(Vector::Zero(sizes_[l + 1]));
    }
  }

  /// He-normal weights, zero biases.
  void init(Rng& rng)
  {
    for (auto& w : w_) {
      const Scalar scale = std::sqrt(Scalar(2) / static_cast<Scalar>(w.cols()));
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = scale * static_cast<Scalar>(standard_normal(rng));
    }
    for (auto& b : b_) b.setZero();
  }

  const std::vector<int>& sizes() const { return sizes_; }
  bool use_bias() const { return use_bias_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t layers() const { return w_.size(); }
  Matrix& weight(std::size_t l) { return w_[l]; }
  const Matrix& weight(std::size_t l) const { return w_[l]; }
  Vector& bias(std::size_t l) { return b_[l]; }
  const Vector& bias(std::size_t l) const { return b_[l]; }

  Vector forward(const Vector& s) const
  {
    if (s.size() != input_dim()) throw DomainError("observation length does not match the network input");
    Vector a = s;
    for (std::size_t l = 0; l < w_.size(); ++l) {
      Vector z = w_[l] * a;
      if (use_bias_) z += b_[l];
      a = l + 1 < w_.size() ? Vector(z.cwiseMax(Scalar(0))) : z;
    }
    return a;
  }

  /// Columns are samples.
  Matrix forward_batch(const Matrix& X) const
  {
    if (X.rows() != input_dim()) throw DomainError("batch rows do not match the network input");
    Matrix a = X;
    for (std::size_t l = 0; l < w_.size(); ++l) {
      Matrix z = w_[l] * a;
      if (use_bias_) z.colwise() += b_[l];
      a = l + 1 < w_.size() ? Matrix(z.cwiseMax(Scalar(0))) : z;
    }
    return a;
  }

  /// (1 / 2B) sum_j (Q(s_j, a_j) - y_j)^2 and its parameter gradient.
  Scalar loss_and_gradient(const Matrix& X, const std::vector<int>& actions, const Vector& targets,
                           Gradient& grad) const
  {
    const Eigen::Index B = X.cols();
    if (B == 0 || static_cast<Eigen::Index>(actions.size()) != B || targets.size() != B)
      throw DomainError("batch, actions and targets must be non-empty and aligned");

    std::vector<Matrix> acts{X};
    for (std::size_t l = 0; l < w_.size(); ++l) {
      Matrix z = w_[l] * acts.back();
      if (use_bias_) z.colwise() += b_[l];
      acts.push_back(l + 1 < w_.size() ? Matrix(z.cwiseMax(Scalar(0))) : z);
    }

    Matrix delta = Matrix::Zero(output_dim(), B);
    Scalar loss = Scalar(0);
    for (Eigen::Index j = 0; j < B; ++j) {
      const int a = actions[static_cast<std::size_t>(j)];
      if (a < 0 || a >= output_dim()) throw DomainError("action index outside the network output");
      const Scalar err = acts.back()(a, j) - targets(j);
      loss += err * err;
      delta(a, j) = err / static_cast<Scalar>(B);
    }
    loss /= Scalar(2) * static_cast<Scalar>(B);

    grad.w.resize(w_.size());
    grad.b.resize(w_.size());
    for (std::size_t l = w_.size(); l-- > 0;) {
      grad.w[l] = delta * acts[l].transpose();
      grad.b[l] = use_bias_ ? Vector(delta.rowwise().sum()) : Vector::Zero(b_[l].size());
      if (l > 0) {
        Matrix back = w_[l].transpose() * delta;
        delta = back.cwiseProduct((acts[l].array() > Scalar(0)).template cast<Scalar>().matrix());
      }
    }
    return loss;
  }

  /// Plain gradient step; the gradient is rescaled to `clip` in global norm
  /// when clip > 0. Returns false without touching parameters when the
  /// gradient is not finite.
  bool apply(const Gradient& grad, Scalar lr, Scalar clip = Scalar(0))
  {
    Scalar norm2 = Scalar(0);
    for (std::size_t l = 0; l < w_.size(); ++l) norm2 += grad.w[l].squaredNorm() + grad.b[l].squaredNorm();
    if (!std::isfinite(norm2)) return false;
    Scalar scale = lr;
    const Scalar norm = std::sqrt(norm2);
    if (clip > Scalar(0) && norm > clip) scale *= clip / norm;
    for (std::size_t l = 0; l < w_.size(); ++l) {
      w_[l] -= scale * grad.w[l];
      if (use_bias_) b_[l] -= scale * grad.b[l];
    }
    return true;
  }

  Vector flatten() const
  {
    Vector out(parameter_count());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < w_.size(); ++l) {
      out.segment(k, w_[l].size()) = w_[l].reshaped();
      k += w_[l].size();
      if (use_bias_) {
        out.segment(k, b_[l].size()) = b_[l];
        k += b_[l].size();
      }
    }
    return out;
  }

  void unflatten(const Vector& p)
  {
    if (p.size() != parameter_count()) throw DomainError("parameter vector length mismatch");
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < w_.size(); ++l) {
      w_[l].reshaped() = p.segment(k, w_[l].size());
      k += w_[l].size();
      if (use_bias_) {
        b_[l] = p.segment(k, b_[l].size());
        k += b_[l].size();
      }
    }
  }

  static Vector flatten(const Gradient& g, bool use_bias)
  {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < g.w.size(); ++l) n += g.w[l].size() + (use_bias ? g.b[l].size() : 0);
    Vector out(n);
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < g.w.size(); ++l) {
      out.segment(k, g.w[l].size()) = g.w[l].reshaped();
      k += g.w[l].size();
      if (use_bias) {
        out.segment(k, g.b[l].size()) = g.b[l];
        k += g.b[l].size();
      }
    }
    return out;
  }

  Eigen::Index parameter_count() const
  {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < w_.size(); ++l) n += w_[l].size() + (use_bias_ ? b_[l].size() : 0);
    return n;
  }

  bool all_finite() const
  {
    for (std::size_t l = 0; l < w_.size(); ++l)
      if (!w_[l].allFinite() || !b_[l].allFinite()) return false;
    return true;
  }

  bool operator==(const QNet& o) const
  {
    if (sizes_ != o.sizes_ || use_bias_ != o.use_bias_) return false;
    for (std::size_t l = 0; l < w_.size(); ++l)
      if (w_[l] != o.w_[l] || b_[l] != o.b_[l]) return false;
    return true;
  }

private:
  std::vector<int> sizes_;
  bool use_bias_ = true;
  std::vector<Matrix> w_;
  std::vector<Vector> b_;
};

}  // namespace mtt
