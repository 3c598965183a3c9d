#include "fdp/denoiser.hpp"

#include <cmath>
#include <string>

namespace fdp::nn {

Eigen::MatrixXd film(const Eigen::MatrixXd& x, const Eigen::VectorXd& gamma, const Eigen::VectorXd& beta) {
  if (gamma.size() != x.rows() || beta.size() != x.rows()) {
    throw InvalidArgument("FiLM needs one scale and one shift per channel");
  }
  return (x.array().colwise() * gamma.array()).colwise() + beta.array();
}

namespace {

template <typename S>
Mat<S> pack_obs(std::span<const Eigen::VectorXd> obs, int cond_dim) {
  Mat<S> out(cond_dim, static_cast<Eigen::Index>(obs.size()));
  for (std::size_t b = 0; b < obs.size(); ++b) {
    if (obs[b].size() != cond_dim) throw InvalidArgument("observation length does not match cond_dim");
    out.col(static_cast<Eigen::Index>(b)) = obs[b].cast<S>();
  }
  return out;
}

void check_batch(const DenoisingBatch& batch) {
  const std::size_t n = batch.clean.size();
  if (n == 0) throw InvalidArgument("empty denoising batch");
  if (batch.obs.size() != n || batch.steps.size() != n || batch.noise.size() != n) {
    throw InvalidArgument("denoising batch fields have different lengths");
  }
}

template <typename S>
struct Prepared {
  Mat<S> noisy;
  Mat<S> target;
  Mat<S> obs;
};

template <typename S>
Prepared<S> prepare(const ConditionalUnet1D<S>& net, const diffusion::NoiseSchedule& sched,
                    const DenoisingBatch& batch) {
  check_batch(batch);
  std::vector<Eigen::MatrixXd> noisy;
  noisy.reserve(batch.clean.size());
  for (std::size_t i = 0; i < batch.clean.size(); ++i) {
    noisy.push_back(diffusion::add_noise(batch.clean[i], batch.noise[i], batch.steps[i], sched));
  }
  return {pack_sequences<S>(noisy), pack_sequences<S>(batch.noise), pack_obs<S>(batch.obs, net.config().cond_dim)};
}

template <typename S>
std::string first_non_finite(const ParameterStore<S>& store) {
  for (const auto& t : store) {
    for (S v : t.data) {
      if (!std::isfinite(static_cast<double>(v))) return t.name;
    }
  }
  return {};
}

}  // namespace

template <typename S>
double denoising_loss(const ConditionalUnet1D<S>& net, const ParameterStore<S>& params,
                      const diffusion::NoiseSchedule& sched, const DenoisingBatch& batch) {
  const auto prep = prepare(net, sched, batch);
  const Mat<S> pred = net.forward(params, prep.noisy, batch.steps, prep.obs);
  const Mat<S> diff = pred - prep.target;
  return static_cast<double>(diff.squaredNorm()) / static_cast<double>(diff.size());
}

template <typename S>
LossAndGradients<S> loss_gradients(const ConditionalUnet1D<S>& net, const ParameterStore<S>& params,
                                   const diffusion::NoiseSchedule& sched, const DenoisingBatch& batch) {
  const auto prep = prepare(net, sched, batch);
  typename ConditionalUnet1D<S>::Tape tape;
  const Mat<S> pred = net.forward(params, prep.noisy, batch.steps, prep.obs, &tape);
  const Mat<S> diff = pred - prep.target;
  const double count = static_cast<double>(diff.size());
  LossAndGradients<S> out;
  out.loss = static_cast<double>(diff.template cast<double>().squaredNorm()) / count;
  if (!std::isfinite(out.loss)) {
    std::string name = first_non_finite(params);
    throw TrainingError("non-finite loss" + (name.empty() ? std::string() : " (parameter '" + name + "' is not finite)"));
  }
  out.grads = params.zeros_like();
  const Mat<S> dy = (S(2) / static_cast<S>(count)) * diff;
  net.backward(params, tape, dy, out.grads);
  if (const std::string name = first_non_finite(out.grads); !name.empty()) {
    throw TrainingError("non-finite gradient for parameter '" + name + "'");
  }
  return out;
}

template <typename S>
std::vector<Eigen::MatrixXd> predict_noise(const ConditionalUnet1D<S>& net, const ParameterStore<S>& params,
                                           std::span<const Eigen::MatrixXd> noisy, std::span<const int> steps,
                                           std::span<const Eigen::VectorXd> obs) {
  if (noisy.size() != steps.size() || noisy.size() != obs.size()) throw InvalidArgument("predict_noise batch mismatch");
  const Mat<S> out = net.forward(params, pack_sequences<S>(noisy), steps, pack_obs<S>(obs, net.config().cond_dim));
  return unpack_sequences<S>(out, static_cast<int>(noisy.size()), net.config().horizon);
}

template double denoising_loss<float>(const ConditionalUnet1D<float>&, const ParameterStore<float>&,
                                      const diffusion::NoiseSchedule&, const DenoisingBatch&);
template double denoising_loss<double>(const ConditionalUnet1D<double>&, const ParameterStore<double>&,
                                       const diffusion::NoiseSchedule&, const DenoisingBatch&);
template LossAndGradients<float> loss_gradients<float>(const ConditionalUnet1D<float>&, const ParameterStore<float>&,
                                                       const diffusion::NoiseSchedule&, const DenoisingBatch&);
template LossAndGradients<double> loss_gradients<double>(const ConditionalUnet1D<double>&,
                                                         const ParameterStore<double>&,
                                                         const diffusion::NoiseSchedule&, const DenoisingBatch&);
template std::vector<Eigen::MatrixXd> predict_noise<float>(const ConditionalUnet1D<float>&,
                                                           const ParameterStore<float>&,
                                                           std::span<const Eigen::MatrixXd>, std::span<const int>,
                                                           std::span<const Eigen::VectorXd>);
template std::vector<Eigen::MatrixXd> predict_noise<double>(const ConditionalUnet1D<double>&,
                                                            const ParameterStore<double>&,
                                                            std::span<const Eigen::MatrixXd>, std::span<const int>,
                                                            std::span<const Eigen::VectorXd>);

}  // namespace fdp::nn
