#include "mlp.hpp"

#include <Eigen/QR>
#include <cmath>

#include "errors.hpp"

namespace etmpc {

void Mlp::Gradients::setZero() {
  for (auto& m : w) m.setZero();
  for (auto& v : b) v.setZero();
}

Mlp::Mlp(std::vector<int> layer_sizes) : layer_sizes_(std::move(layer_sizes)) {
  if (layer_sizes_.size() < 2) throw ConfigError("Mlp needs at least input and output sizes");
  for (std::size_t i = 0; i + 1 < layer_sizes_.size(); ++i) {
    weights_.emplace_back(Eigen::MatrixXd::Zero(layer_sizes_[i + 1], layer_sizes_[i]));
    biases_.emplace_back(Eigen::VectorXd::Zero(layer_sizes_[i + 1]));
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
  Workspace ws;
  return forward(input, &ws);
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input, Workspace* ws) const {
  if (input.size() != input_dim()) throw NumericError("Mlp::forward: input dimension mismatch");
  ws->activations.assign(1, input);
  Eigen::VectorXd h = input;
  for (int layer = 0; layer < num_layers(); ++layer) {
    h = weights_[layer] * h + biases_[layer];
    if (layer + 1 < num_layers()) h = h.array().tanh();
    ws->activations.push_back(h);
  }
  return h;
}

void Mlp::backward(const Workspace& ws, const Eigen::VectorXd& output_grad, Gradients* grads,
                   Eigen::VectorXd* input_grad) const {
  Eigen::VectorXd delta = output_grad;
  for (int layer = num_layers() - 1; layer >= 0; --layer) {
    if (layer + 1 < num_layers()) {
      // d tanh = 1 - tanh^2, activations store the post-tanh values
      const Eigen::ArrayXd post = ws.activations[layer + 1].array();
      delta = (delta.array() * (1.0 - post * post)).matrix();
    }
    grads->w[layer].noalias() += delta * ws.activations[layer].transpose();
    grads->b[layer] += delta;
    if (layer > 0 || input_grad) delta = weights_[layer].transpose() * delta;
  }
  if (input_grad) *input_grad = delta;
}

void Mlp::init(Rng* rng, double hidden_gain, double output_gain) {
  for (int layer = 0; layer < num_layers(); ++layer) {
    Eigen::MatrixXd& w = weights_[layer];
    const int rows = static_cast<int>(w.rows());
    const int cols = static_cast<int>(w.cols());
    // Orthogonal init: QR of a Gaussian matrix, signs fixed by diag(R).
    const int big = std::max(rows, cols);
    Eigen::MatrixXd gauss(big, std::min(rows, cols));
    for (int i = 0; i < gauss.rows(); ++i)
      for (int j = 0; j < gauss.cols(); ++j) gauss(i, j) = rng->normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, std::min(rows, cols));
    const Eigen::MatrixXd r_mat = qr.matrixQR().topRows(std::min(rows, cols)).triangularView<Eigen::Upper>();
    for (int j = 0; j < q.cols(); ++j)
      if (r_mat(j, j) < 0) q.col(j) = -q.col(j);
    const double gain = (layer + 1 == num_layers()) ? output_gain : hidden_gain;
    w = gain * (rows >= cols ? q : Eigen::MatrixXd(q.transpose()));
    biases_[layer].setZero();
  }
}

Mlp::Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (const auto& w : weights_) g.w.emplace_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : biases_) g.b.emplace_back(Eigen::VectorXd::Zero(b.size()));
  return g;
}

int Mlp::num_params() const {
  int n = 0;
  for (const auto& w : weights_) n += static_cast<int>(w.size());
  for (const auto& b : biases_) n += static_cast<int>(b.size());
  return n;
}

Eigen::VectorXd Mlp::flatten() const {
  Eigen::VectorXd p(num_params());
  int at = 0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    p.segment(at, weights_[i].size()) = Eigen::Map<const Eigen::VectorXd>(weights_[i].data(), weights_[i].size());
    at += static_cast<int>(weights_[i].size());
    p.segment(at, biases_[i].size()) = biases_[i];
    at += static_cast<int>(biases_[i].size());
  }
  return p;
}

void Mlp::set_flat(const Eigen::VectorXd& p) {
  if (p.size() != num_params()) throw NumericError("Mlp::set_flat: size mismatch");
  int at = 0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    Eigen::Map<Eigen::VectorXd>(weights_[i].data(), weights_[i].size()) = p.segment(at, weights_[i].size());
    at += static_cast<int>(weights_[i].size());
    biases_[i] = p.segment(at, biases_[i].size());
    at += static_cast<int>(biases_[i].size());
  }
}

Eigen::VectorXd Mlp::flatten_gradients(const Gradients& g) {
  int n = 0;
  for (const auto& w : g.w) n += static_cast<int>(w.size());
  for (const auto& b : g.b) n += static_cast<int>(b.size());
  Eigen::VectorXd p(n);
  int at = 0;
  for (std::size_t i = 0; i < g.w.size(); ++i) {
    p.segment(at, g.w[i].size()) = Eigen::Map<const Eigen::VectorXd>(g.w[i].data(), g.w[i].size());
    at += static_cast<int>(g.w[i].size());
    p.segment(at, g.b[i].size()) = g.b[i];
    at += static_cast<int>(g.b[i].size());
  }
  return p;
}

}  // namespace etmpc
