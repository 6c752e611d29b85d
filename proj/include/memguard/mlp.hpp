#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace memguard::gan {

inline constexpr double kLeakySlope = 0.2;

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Fully connected network; leaky ReLU after every layer but the last.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return static_cast<std::size_t>(layers.front().weight.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(layers.back().weight.rows()); }
  std::size_t parameter_count() const;
  bool all_finite() const;
  MlpParams zeros_like() const;
};

inline constexpr int kGeneratorWidths[] = {2, 64, 64, 2};
inline constexpr int kDiscriminatorWidths[] = {2, 64, 64, 1};

// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
MlpParams init_mlp(std::span<const int> widths, std::mt19937_64& rng);
inline MlpParams make_generator(std::mt19937_64& rng) { return init_mlp(kGeneratorWidths, rng); }
inline MlpParams make_discriminator(std::mt19937_64& rng) { return init_mlp(kDiscriminatorWidths, rng); }

struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;       // input to each layer
  std::vector<Eigen::MatrixXd> activations;  // pre-activation of each layer
};

/// Batch forward pass; `x` holds one sample per column.
Eigen::MatrixXd forward(const MlpParams& net, const Eigen::MatrixXd& x, ForwardCache* cache = nullptr);

/// Backpropagates dLoss/dOutput. Writes parameter gradients into `grads`
/// (overwriting) and returns dLoss/dInput.
Eigen::MatrixXd backward(const MlpParams& net, const ForwardCache& cache, const Eigen::MatrixXd& grad_out,
                         MlpParams& grads);

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  MlpParams m;
  MlpParams v;
  std::uint64_t t = 0;

  static AdamState for_params(const MlpParams& p) { return {p.zeros_like(), p.zeros_like(), 0}; }
};

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, const AdamConfig& config);

// Numerically stable log(1 + exp(x)) and logistic function.
double softplus(double x);
double sigmoid(double x);

/// Discriminator loss -mean log s(D(real)) - mean log(1 - s(D(fake))).
double discriminator_loss(const MlpParams& disc, const Eigen::MatrixXd& real, const Eigen::MatrixXd& fake,
                          MlpParams* grads = nullptr);

/// Non-saturating generator loss -mean log s(D(G(z))); gradients are taken
/// with respect to the generator only.
double generator_loss(const MlpParams& gen, const MlpParams& disc, const Eigen::MatrixXd& z,
                      MlpParams* grads = nullptr);

struct GanLosses {
  double d_loss = 0.0;
  double g_loss = 0.0;
  MlpParams d_grad;
  MlpParams g_grad;
};

/// Both losses and their parameter gradients for one (real, z) batch pair;
/// the discriminator sees G(z) as a constant.
GanLosses gan_losses(const MlpParams& gen, const MlpParams& disc, const Eigen::MatrixXd& real,
                     const Eigen::MatrixXd& z);

}  // namespace memguard::gan
