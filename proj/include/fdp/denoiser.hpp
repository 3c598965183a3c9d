#pragma once

// Noise-prediction network training surface: FiLM, loss and gradients over
// the conditional U-Net, plus re-exports of the optimizer and checkpoint API.

#include "fdp/ddpm.hpp"
#include "fdp/nn/checkpoint.hpp"
#include "fdp/nn/optim.hpp"
#include "fdp/nn/parameter_store.hpp"
#include "fdp/nn/unet.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace fdp::nn {

/// y[c, t] = gamma[c] x[c, t] + beta[c] on a C x T feature map.
Eigen::MatrixXd film(const Eigen::MatrixXd& x, const Eigen::VectorXd& gamma, const Eigen::VectorXd& beta);

/// One training batch: clean normalized action sequences (T_p x d_a), their
/// observation vectors, and the sampled diffusion steps and noise.
struct DenoisingBatch {
  std::vector<Eigen::MatrixXd> clean;
  std::vector<Eigen::VectorXd> obs;
  std::vector<int> steps;
  std::vector<Eigen::MatrixXd> noise;
};

template <typename S>
struct LossAndGradients {
  double loss = 0.0;
  ParameterStore<S> grads;
};

/// Mean squared noise-prediction error of the batch.
template <typename S>
double denoising_loss(const ConditionalUnet1D<S>& net, const ParameterStore<S>& params,
                      const diffusion::NoiseSchedule& sched, const DenoisingBatch& batch);

/// Loss and its exact gradient with respect to every parameter (store order).
/// Throws TrainingError naming the first non-finite parameter or gradient
/// when the loss is not finite.
template <typename S>
LossAndGradients<S> loss_gradients(const ConditionalUnet1D<S>& net, const ParameterStore<S>& params,
                                   const diffusion::NoiseSchedule& sched, const DenoisingBatch& batch);

/// Runs the network on T_p x d_a sequences; returns predicted noise per sample.
template <typename S>
std::vector<Eigen::MatrixXd> predict_noise(const ConditionalUnet1D<S>& net, const ParameterStore<S>& params,
                                           std::span<const Eigen::MatrixXd> noisy, std::span<const int> steps,
                                           std::span<const Eigen::VectorXd> obs);

}  // namespace fdp::nn
