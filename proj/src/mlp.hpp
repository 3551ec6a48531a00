#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rng.hpp"

namespace etmpc {

// Dense feed-forward network, tanh hidden layers, identity output, float64.
// Exact reverse-mode gradients; sized for the policy heads and value function.
class Mlp {
 public:
  struct Gradients {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
    void setZero();
  };

  struct Workspace {
    std::vector<Eigen::VectorXd> activations;  // input + post-activation per layer
  };

  explicit Mlp(std::vector<int> layer_sizes);

  int input_dim() const { return layer_sizes_.front(); }
  int output_dim() const { return layer_sizes_.back(); }
  int num_layers() const { return static_cast<int>(weights_.size()); }

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& input, Workspace* ws) const;

  // Accumulates parameter gradients for d(scalar objective)/d(output) =
  // output_grad into grads; optionally returns d/d(input).
  void backward(const Workspace& ws, const Eigen::VectorXd& output_grad, Gradients* grads,
                Eigen::VectorXd* input_grad = nullptr) const;

  // Orthogonal weight init (hidden_gain on hidden layers, output_gain on the
  // last layer), zero biases.
  void init(Rng* rng, double hidden_gain = 1.0, double output_gain = 0.01);

  Gradients zero_gradients() const;

  int num_params() const;
  Eigen::VectorXd flatten() const;
  void set_flat(const Eigen::VectorXd& p);
  static Eigen::VectorXd flatten_gradients(const Gradients& g);

  Eigen::MatrixXd& weight(int layer) { return weights_[layer]; }
  Eigen::VectorXd& bias(int layer) { return biases_[layer]; }
  const Eigen::MatrixXd& weight(int layer) const { return weights_[layer]; }
  const Eigen::VectorXd& bias(int layer) const { return biases_[layer]; }

  // Adds delta to the output bias; used to pin the initial policy operating
  // point without touching the weights.
  void shift_output_bias(const Eigen::VectorXd& delta) { biases_.back() += delta; }

 private:
  std::vector<int> layer_sizes_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

}  // namespace etmpc
