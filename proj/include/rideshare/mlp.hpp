#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rideshare/errors.hpp"
#include "rideshare/random.hpp"

namespace rideshare {

/// Fully connected network with tanh hidden activations and a linear output.
///
/// All weights and biases live in one flat vector (per layer: W column-major,
/// then b) so optimizers, gradient clipping and checkpoints work on a single
/// buffer. Batched evaluation takes one sample per column.
class Mlp {
 public:
  using Matrix = Eigen::MatrixXd;
  using Vector = Eigen::VectorXd;
  using MapMatrix = Eigen::Map<Matrix>;
  using ConstMapMatrix = Eigen::Map<const Matrix>;
  using ConstMapVector = Eigen::Map<const Vector>;

  /// Activations recorded by a forward pass, consumed by backward().
  struct Tape {
    std::vector<Matrix> inputs;  // inputs[k] is the input to layer k
  };

  Mlp() = default;

  /// `sizes` lists layer widths from input to output, e.g. {14, 64, 64, 4}.
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw UsageError("an MLP needs an input and an output size");
    Eigen::Index total = 0;
    for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
      if (sizes_[k] < 1 || sizes_[k + 1] < 1) throw UsageError("layer sizes must be positive");
      offsets_.push_back(total);
      total += static_cast<Eigen::Index>(sizes_[k + 1]) * (sizes_[k] + 1);
    }
    total_ = total;
    params_ = Vector::Zero(total);
  }

  int n_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  Eigen::Index n_params() const { return total_; }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  MapMatrix weight(int k) {
    return MapMatrix(params_.data() + offsets_[k], sizes_[k + 1], sizes_[k]);
  }
  ConstMapMatrix weight(int k) const {
    return ConstMapMatrix(params_.data() + offsets_[k], sizes_[k + 1], sizes_[k]);
  }
  Eigen::Map<Vector> bias(int k) {
    return Eigen::Map<Vector>(params_.data() + offsets_[k] + weight_count(k), sizes_[k + 1]);
  }
  ConstMapVector bias(int k) const {
    return ConstMapVector(params_.data() + offsets_[k] + weight_count(k), sizes_[k + 1]);
  }

  /// Orthogonal weights scaled by `hidden_gain` (last layer: `output_gain`), zero biases.
  void init_orthogonal(RandomStream& rng, double hidden_gain, double output_gain) {
    for (int k = 0; k < n_layers(); ++k) {
      const int rows = sizes_[k + 1];
      const int cols = sizes_[k];
      const int big = std::max(rows, cols);
      Matrix g(big, big);
      for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal(0.0, 1.0);
      Eigen::HouseholderQR<Matrix> qr(g);
      Matrix q = qr.householderQ();
      // Fix column signs so the draw is uniform over orthogonal matrices.
      const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
      for (int c = 0; c < big; ++c)
        if (r(c, c) < 0.0) q.col(c) = -q.col(c);
      const double gain = (k + 1 == n_layers()) ? output_gain : hidden_gain;
      weight(k) = gain * q.topLeftCorner(rows, cols);
      bias(k).setZero();
    }
  }

  Matrix forward(const Matrix& x, Tape* tape = nullptr) const {
    if (x.rows() != input_size()) throw UsageError("MLP input has wrong dimension");
    if (tape) tape->inputs.clear();
    Matrix a = x;
    for (int k = 0; k < n_layers(); ++k) {
      if (tape) tape->inputs.push_back(a);
      Matrix z = weight(k) * a;
      z.colwise() += bias(k);
      if (k + 1 < n_layers())
        a = z.array().tanh().matrix();
      else
        a = std::move(z);
    }
    return a;
  }

  Vector forward(const Vector& x) const {
    Matrix in = x;
    return forward(in).col(0);
  }

  /// Reverse-mode gradient of a scalar loss with respect to every parameter,
  /// given d(loss)/d(output) for the batch recorded in `tape`.
  Vector backward(const Tape& tape, const Matrix& output_grad) const {
    if (static_cast<int>(tape.inputs.size()) != n_layers())
      throw UsageError("backward() needs the tape of a forward pass");
    Vector grad = Vector::Zero(total_);
    Matrix delta = output_grad;
    for (int k = n_layers() - 1; k >= 0; --k) {
      const Matrix& in = tape.inputs[k];
      Eigen::Map<Matrix>(grad.data() + offsets_[k], sizes_[k + 1], sizes_[k]).noalias() =
          delta * in.transpose();
      Eigen::Map<Vector>(grad.data() + offsets_[k] + weight_count(k), sizes_[k + 1]) =
          delta.rowwise().sum();
      if (k > 0) {
        Matrix back = weight(k).transpose() * delta;
        // `in` is tanh of the previous pre-activation.
        delta = back.array() * (1.0 - in.array().square());
      }
    }
    return grad;
  }

 private:
  Eigen::Index weight_count(int k) const {
    return static_cast<Eigen::Index>(sizes_[k + 1]) * sizes_[k];
  }

  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index total_ = 0;
  Vector params_;
};

}  // namespace rideshare
