#include "memguard/mlp.hpp"

#include "memguard/errors.hpp"

#include <cmath>

namespace memguard::gan {

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool MlpParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z;
  z.layers.reserve(layers.size());
  for (const auto& l : layers) {
    z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  return z;
}

MlpParams init_mlp(std::span<const int> widths, std::mt19937_64& rng) {
  if (widths.size() < 2) throw UsageError("an MLP needs at least an input and an output width");
  MlpParams net;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const int in = widths[i];
    const int out = widths[i + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    // Fill order is part of the reproducibility contract: weights row-major, then biases.
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = u(rng);
    for (int r = 0; r < out; ++r) layer.bias(r) = u(rng);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Eigen::MatrixXd forward(const MlpParams& net, const Eigen::MatrixXd& x, ForwardCache* cache) {
  if (x.rows() != static_cast<Eigen::Index>(net.input_dim())) throw UsageError("MLP input has the wrong dimension");
  if (cache) {
    cache->inputs.clear();
    cache->activations.clear();
  }
  Eigen::MatrixXd h = x;
  const std::size_t n_layers = net.layers.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = net.layers[l];
    Eigen::MatrixXd a = layer.weight * h;
    a.colwise() += layer.bias;
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->activations.push_back(a);
    }
    if (l + 1 < n_layers) {
      h = a.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
    } else {
      h = std::move(a);
    }
  }
  return h;
}

Eigen::MatrixXd backward(const MlpParams& net, const ForwardCache& cache, const Eigen::MatrixXd& grad_out,
                         MlpParams& grads) {
  if (grads.layers.size() != net.layers.size()) grads = net.zeros_like();
  Eigen::MatrixXd delta = grad_out;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    if (l + 1 < net.layers.size()) {
      const auto& a = cache.activations[l];
      delta = delta.binaryExpr(a, [](double d, double v) { return v > 0.0 ? d : kLeakySlope * d; });
    }
    grads.layers[l].weight.noalias() = delta * cache.inputs[l].transpose();
    grads.layers[l].bias = delta.rowwise().sum();
    delta = net.layers[l].weight.transpose() * delta;
  }
  return delta;
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, const AdamConfig& config) {
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    p.array() -= config.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.eps);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight, grads.layers[l].weight, state.m.layers[l].weight, state.v.layers[l].weight);
    update(params.layers[l].bias, grads.layers[l].bias, state.m.layers[l].bias, state.v.layers[l].bias);
  }
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double discriminator_loss(const MlpParams& disc, const Eigen::MatrixXd& real, const Eigen::MatrixXd& fake,
                          MlpParams* grads) {
  const double n_real = static_cast<double>(real.cols());
  const double n_fake = static_cast<double>(fake.cols());
  ForwardCache real_cache, fake_cache;
  const Eigen::MatrixXd real_logit = forward(disc, real, grads ? &real_cache : nullptr);
  const Eigen::MatrixXd fake_logit = forward(disc, fake, grads ? &fake_cache : nullptr);

  // -log s(l) = softplus(-l); -log(1 - s(l)) = softplus(l).
  double loss = 0.0;
  for (Eigen::Index i = 0; i < real_logit.cols(); ++i) loss += softplus(-real_logit(0, i)) / n_real;
  for (Eigen::Index i = 0; i < fake_logit.cols(); ++i) loss += softplus(fake_logit(0, i)) / n_fake;

  if (grads) {
    Eigen::MatrixXd d_real = real_logit.unaryExpr([n_real](double l) { return (sigmoid(l) - 1.0) / n_real; });
    Eigen::MatrixXd d_fake = fake_logit.unaryExpr([n_fake](double l) { return sigmoid(l) / n_fake; });
    MlpParams g_real, g_fake;
    backward(disc, real_cache, d_real, g_real);
    backward(disc, fake_cache, d_fake, g_fake);
    *grads = std::move(g_real);
    for (std::size_t l = 0; l < grads->layers.size(); ++l) {
      grads->layers[l].weight += g_fake.layers[l].weight;
      grads->layers[l].bias += g_fake.layers[l].bias;
    }
  }
  return loss;
}

double generator_loss(const MlpParams& gen, const MlpParams& disc, const Eigen::MatrixXd& z, MlpParams* grads) {
  const double n = static_cast<double>(z.cols());
  ForwardCache g_cache, d_cache;
  const Eigen::MatrixXd fake = forward(gen, z, grads ? &g_cache : nullptr);
  const Eigen::MatrixXd logit = forward(disc, fake, grads ? &d_cache : nullptr);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logit.cols(); ++i) loss += softplus(-logit(0, i)) / n;
  if (grads) {
    Eigen::MatrixXd d_logit = logit.unaryExpr([n](double l) { return (sigmoid(l) - 1.0) / n; });
    MlpParams unused;
    const Eigen::MatrixXd d_fake = backward(disc, d_cache, d_logit, unused);
    backward(gen, g_cache, d_fake, *grads);
  }
  return loss;
}

GanLosses gan_losses(const MlpParams& gen, const MlpParams& disc, const Eigen::MatrixXd& real,
                     const Eigen::MatrixXd& z) {
  GanLosses out;
  const Eigen::MatrixXd fake = forward(gen, z);
  out.d_loss = discriminator_loss(disc, real, fake, &out.d_grad);
  out.g_loss = generator_loss(gen, disc, z, &out.g_grad);
  return out;
}

}  // namespace memguard::gan
