#pragma once

#include "fdp/nn/layers.hpp"
#include "fdp/nn/parameter_store.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <vector>

namespace fdp::nn {

struct NetworkConfig {
  int input_channels = 2;
  std::vector<int> down_dims{64, 128, 256};
  int kernel_size = 5;
  int groups = 8;
  int step_embed_dim = 256;
  int cond_dim = 63;
  int horizon = 64;

  void validate() const;
  nlohmann::json to_json() const;
  static NetworkConfig from_json(const nlohmann::json& j);
  bool operator==(const NetworkConfig&) const = default;
};

/// Half sin(k w_i), half cos(k w_i) with w_i = 10000^(-2i/dim).
std::vector<double> sinusoidal_embedding(double k, int dim);

/// conv -> group norm -> Mish.
template <typename S>
struct Conv1dBlock {
  Conv1d<S> conv;
  GroupNorm<S> norm;

  struct Cache {
    Mat<S> x;
    typename GroupNorm<S>::Cache norm;
    Mat<S> pre_act;
  };

  void declare(ParameterStore<S>& p, const std::string& prefix, int cin, int cout, int k, int groups);
  Mat<S> forward(const ParameterStore<S>& p, const Mat<S>& x, int batch, int t_len, Cache& c) const;
  Mat<S> backward(const ParameterStore<S>& p, const Cache& c, int batch, int t_len, const Mat<S>& dy,
                  ParameterStore<S>& g) const;
};

/// Two conv blocks with FiLM modulation of the first block's output by the
/// global conditioning vector, plus a residual path (1x1 conv when widths differ).
template <typename S>
struct ConditionalResidualBlock {
  Conv1dBlock<S> block0;
  Conv1dBlock<S> block1;
  Linear<S> film;
  Conv1d<S> residual;
  bool has_residual_conv = false;
  int cout = 0;

  struct Cache {
    typename Conv1dBlock<S>::Cache c0;
    typename Conv1dBlock<S>::Cache c1;
    Mat<S> h0;     // block0 output
    Mat<S> gamma;  // cout x batch
    Mat<S> x;
  };

  void declare(ParameterStore<S>& p, const std::string& prefix, int cin, int cout, int cond_features, int k,
               int groups);
  /// cond_act: Mish of the global conditioning vector, cond_features x batch.
  Mat<S> forward(const ParameterStore<S>& p, const Mat<S>& x, const Mat<S>& cond_act, int batch, int t_len,
                 Cache& c) const;
  /// Returns dx; accumulates the conditioning gradient into d_cond_act.
  Mat<S> backward(const ParameterStore<S>& p, const Cache& c, const Mat<S>& cond_act, int batch, int t_len,
                  const Mat<S>& dy, ParameterStore<S>& g, Mat<S>& d_cond_act) const;
};

/// FiLM-conditioned temporal U-Net predicting diffusion noise.
///
/// Inputs are batched in the layer layout: the noisy sequence is
/// input_channels x (batch * horizon), steps holds one diffusion step per
/// sample, obs is cond_dim x batch. Encoder levels run two conditional
/// residual blocks then (except the last) a stride-2 conv; the decoder
/// concatenates the encoder skip of the matching resolution, runs two blocks
/// and a stride-2 transposed conv; a conv block and 1x1 conv map back to
/// input_channels.
template <typename S>
class ConditionalUnet1D {
 public:
  struct Tape;

  explicit ConditionalUnet1D(NetworkConfig cfg);

  const NetworkConfig& config() const { return cfg_; }
  /// Zero-initialized store with the network's parameter layout.
  const ParameterStore<S>& layout() const { return layout_; }
  ParameterStore<S> init_parameters(Rng& rng) const;

  Mat<S> forward(const ParameterStore<S>& p, const Mat<S>& x, std::span<const int> steps, const Mat<S>& obs,
                 Tape* tape = nullptr) const;
  /// Accumulates parameter gradients of <dy, output> into g.
  void backward(const ParameterStore<S>& p, const Tape& tape, const Mat<S>& dy, ParameterStore<S>& g) const;

  struct Tape {
    int batch = 0;
    Mat<S> emb;
    Mat<S> mlp_pre;
    Mat<S> mlp_act;
    Mat<S> cond;
    Mat<S> cond_act;
    std::vector<typename ConditionalResidualBlock<S>::Cache> down;
    std::vector<Mat<S>> down_sample_in;
    std::vector<typename ConditionalResidualBlock<S>::Cache> mid;
    std::vector<typename ConditionalResidualBlock<S>::Cache> up;
    std::vector<Mat<S>> up_sample_in;
    typename Conv1dBlock<S>::Cache final_block;
    Mat<S> final_out_in;
  };

 private:
  int level_len(int level) const { return cfg_.horizon >> level; }

  NetworkConfig cfg_;
  ParameterStore<S> layout_;
  Linear<S> step_fc1_;
  Linear<S> step_fc2_;
  std::vector<ConditionalResidualBlock<S>> down_;
  std::vector<Conv1d<S>> downsample_;
  std::vector<ConditionalResidualBlock<S>> mid_;
  std::vector<ConditionalResidualBlock<S>> up_;
  std::vector<ConvTranspose1d<S>> upsample_;
  Conv1dBlock<S> final_block_;
  Conv1d<S> final_out_;
};

/// Converts T x C sequences to the layer layout C x (B * T) and back.
template <typename S>
Mat<S> pack_sequences(std::span<const Eigen::MatrixXd> seqs);
template <typename S>
std::vector<Eigen::MatrixXd> unpack_sequences(const Mat<S>& packed, int batch, int horizon);

}  // namespace fdp::nn
