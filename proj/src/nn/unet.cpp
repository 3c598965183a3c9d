#include "fdp/nn/unet.hpp"

#include <cmath>
#include <string>

namespace fdp::nn {

void NetworkConfig::validate() const {
  if (input_channels < 1) throw ConfigError("input_channels must be positive");
  if (down_dims.empty()) throw ConfigError("down_dims must not be empty");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("kernel_size must be odd");
  if (groups < 1) throw ConfigError("groupnorm groups must be positive");
  for (int d : down_dims) {
    if (d < 1 || d % groups != 0) throw ConfigError("every down dim must be divisible by the groupnorm groups");
  }
  if (step_embed_dim < 2 || step_embed_dim % 2 != 0) throw ConfigError("step_embed_dim must be even");
  if (cond_dim < 0) throw ConfigError("cond_dim must be non-negative");
  const int stride = 1 << (down_dims.size() - 1);
  if (horizon < stride || horizon % stride != 0) {
    throw ConfigError("horizon " + std::to_string(horizon) + " not divisible by 2^(levels-1) = " +
                      std::to_string(stride));
  }
}

nlohmann::json NetworkConfig::to_json() const {
  return {{"input_channels", input_channels}, {"down_dims", down_dims}, {"kernel_size", kernel_size},
          {"groups", groups}, {"step_embed_dim", step_embed_dim}, {"cond_dim", cond_dim}, {"horizon", horizon}};
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j) {
  NetworkConfig c;
  c.input_channels = j.at("input_channels").get<int>();
  c.down_dims = j.at("down_dims").get<std::vector<int>>();
  c.kernel_size = j.at("kernel_size").get<int>();
  c.groups = j.at("groups").get<int>();
  c.step_embed_dim = j.at("step_embed_dim").get<int>();
  c.cond_dim = j.at("cond_dim").get<int>();
  c.horizon = j.at("horizon").get<int>();
  c.validate();
  return c;
}

std::vector<double> sinusoidal_embedding(double k, int dim) {
  if (dim < 2 || dim % 2 != 0) throw InvalidArgument("sinusoidal embedding dimension must be even");
  const int half = dim / 2;
  std::vector<double> out(static_cast<std::size_t>(dim));
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / dim);
    out[static_cast<std::size_t>(i)] = std::sin(k * freq);
    out[static_cast<std::size_t>(half + i)] = std::cos(k * freq);
  }
  return out;
}

// ---------------------------------------------------------------------------

template <typename S>
void Conv1dBlock<S>::declare(ParameterStore<S>& p, const std::string& prefix, int cin, int cout, int k, int groups) {
  conv.declare(p, prefix + ".conv", cin, cout, k);
  norm.declare(p, prefix + ".norm", cout, groups);
}

template <typename S>
Mat<S> Conv1dBlock<S>::forward(const ParameterStore<S>& p, const Mat<S>& x, int batch, int t_len, Cache& c) const {
  c.x = x;
  const Mat<S> y = conv.forward(p, x, batch, t_len);
  c.pre_act = norm.forward(p, y, batch, t_len, c.norm);
  return mish_forward(c.pre_act);
}

template <typename S>
Mat<S> Conv1dBlock<S>::backward(const ParameterStore<S>& p, const Cache& c, int batch, int t_len, const Mat<S>& dy,
                                ParameterStore<S>& g) const {
  const Mat<S> d_pre = mish_backward(c.pre_act, dy);
  const Mat<S> d_conv = norm.backward(p, c.norm, batch, t_len, d_pre, g);
  return conv.backward(p, c.x, batch, t_len, d_conv, g);
}

template <typename S>
void ConditionalResidualBlock<S>::declare(ParameterStore<S>& p, const std::string& prefix, int cin, int cout_,
                                          int cond_features, int k, int groups) {
  cout = cout_;
  block0.declare(p, prefix + ".block0", cin, cout, k, groups);
  film.declare(p, prefix + ".film", cond_features, 2 * cout);
  block1.declare(p, prefix + ".block1", cout, cout, k, groups);
  has_residual_conv = cin != cout;
  if (has_residual_conv) residual.declare(p, prefix + ".residual", cin, cout, 1);
}

template <typename S>
Mat<S> ConditionalResidualBlock<S>::forward(const ParameterStore<S>& p, const Mat<S>& x, const Mat<S>& cond_act,
                                            int batch, int t_len, Cache& c) const {
  c.x = x;
  c.h0 = block0.forward(p, x, batch, t_len, c.c0);
  const Mat<S> mod = film.forward(p, cond_act);
  c.gamma = mod.topRows(cout);
  Mat<S> h1(c.h0.rows(), c.h0.cols());
  for (int bi = 0; bi < batch; ++bi) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(bi) * t_len;
    h1.middleCols(c0, t_len) = (c.h0.middleCols(c0, t_len).array().colwise() * mod.col(bi).head(cout).array())
                                   .colwise() + mod.col(bi).tail(cout).array();
  }
  Mat<S> out = block1.forward(p, h1, batch, t_len, c.c1);
  if (has_residual_conv) {
    out += residual.forward(p, x, batch, t_len);
  } else {
    out += x;
  }
  return out;
}

template <typename S>
Mat<S> ConditionalResidualBlock<S>::backward(const ParameterStore<S>& p, const Cache& c, const Mat<S>& cond_act,
                                             int batch, int t_len, const Mat<S>& dy, ParameterStore<S>& g,
                                             Mat<S>& d_cond_act) const {
  Mat<S> dx = has_residual_conv ? residual.backward(p, c.x, batch, t_len, dy, g) : dy;
  const Mat<S> dh1 = block1.backward(p, c.c1, batch, t_len, dy, g);
  Mat<S> dmod(2 * cout, batch);
  Mat<S> dh0(dh1.rows(), dh1.cols());
  for (int bi = 0; bi < batch; ++bi) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(bi) * t_len;
    const auto d = dh1.middleCols(c0, t_len);
    dmod.col(bi).head(cout) = (d.array() * c.h0.middleCols(c0, t_len).array()).matrix().rowwise().sum();
    dmod.col(bi).tail(cout) = d.rowwise().sum();
    dh0.middleCols(c0, t_len) = d.array().colwise() * c.gamma.col(bi).array();
  }
  d_cond_act += film.backward(p, cond_act, dmod, g);
  dx += block0.backward(p, c.c0, batch, t_len, dh0, g);
  return dx;
}

// ---------------------------------------------------------------------------

template <typename S>
ConditionalUnet1D<S>::ConditionalUnet1D(NetworkConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  auto& p = layout_;
  const int dsed = cfg_.step_embed_dim;
  const int cond_features = dsed + cfg_.cond_dim;
  const int k = cfg_.kernel_size;
  const int groups = cfg_.groups;
  const auto& dims = cfg_.down_dims;
  const int levels = static_cast<int>(dims.size());

  step_fc1_.declare(p, "step_mlp.fc1", dsed, 4 * dsed);
  step_fc2_.declare(p, "step_mlp.fc2", 4 * dsed, dsed);

  for (int l = 0; l < levels; ++l) {
    const int cin = l == 0 ? cfg_.input_channels : dims[static_cast<std::size_t>(l - 1)];
    const int cout = dims[static_cast<std::size_t>(l)];
    const std::string prefix = "down." + std::to_string(l);
    ConditionalResidualBlock<S> a;
    a.declare(p, prefix + ".res0", cin, cout, cond_features, k, groups);
    ConditionalResidualBlock<S> b;
    b.declare(p, prefix + ".res1", cout, cout, cond_features, k, groups);
    down_.push_back(a);
    down_.push_back(b);
    if (l < levels - 1) {
      Conv1d<S> ds;
      ds.declare(p, prefix + ".downsample", cout, cout, 3, 2, 1);
      downsample_.push_back(ds);
    }
  }

  const int mid_dim = dims.back();
  for (int i = 0; i < 2; ++i) {
    ConditionalResidualBlock<S> m;
    m.declare(p, "mid." + std::to_string(i), mid_dim, mid_dim, cond_features, k, groups);
    mid_.push_back(m);
  }

  // Decoder level u works at encoder resolution levels-1-u and outputs the
  // width of the level above it.
  for (int u = 0; u < levels - 1; ++u) {
    const int skip_level = levels - 1 - u;
    const int dim_out = dims[static_cast<std::size_t>(skip_level)];
    const int dim_in = dims[static_cast<std::size_t>(skip_level - 1)];
    const std::string prefix = "up." + std::to_string(u);
    ConditionalResidualBlock<S> a;
    a.declare(p, prefix + ".res0", 2 * dim_out, dim_in, cond_features, k, groups);
    ConditionalResidualBlock<S> b;
    b.declare(p, prefix + ".res1", dim_in, dim_in, cond_features, k, groups);
    up_.push_back(a);
    up_.push_back(b);
    ConvTranspose1d<S> us;
    us.declare(p, prefix + ".upsample", dim_in, dim_in, 4, 2, 1);
    upsample_.push_back(us);
  }

  final_block_.declare(p, "final.block", dims.front(), dims.front(), k, groups);
  final_out_.declare(p, "final.out", dims.front(), cfg_.input_channels, 1);
}

template <typename S>
ParameterStore<S> ConditionalUnet1D<S>::init_parameters(Rng& rng) const {
  ParameterStore<S> p = layout_;
  auto uniform_fill = [&](std::size_t idx, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : p[idx].data) v = static_cast<S>(dist(rng));
  };
  auto init_linear = [&](const Linear<S>& l) { uniform_fill(l.w, l.in); };
  auto init_conv = [&](const Conv1d<S>& c) { uniform_fill(c.w, static_cast<double>(c.cin) * c.k); };
  auto init_block = [&](const Conv1dBlock<S>& b) {
    init_conv(b.conv);
    std::fill(p[b.norm.w].data.begin(), p[b.norm.w].data.end(), S(1));
  };
  auto init_res = [&](const ConditionalResidualBlock<S>& r) {
    init_block(r.block0);
    init_linear(r.film);
    // Scale half of the FiLM bias starts at 1, shift half at 0.
    auto& bias = p[r.film.b].data;
    std::fill(bias.begin(), bias.begin() + r.cout, S(1));
    init_block(r.block1);
    if (r.has_residual_conv) init_conv(r.residual);
  };

  // Walk in registration order so the RNG stream matches the layout.
  init_linear(step_fc1_);
  init_linear(step_fc2_);
  const int levels = static_cast<int>(cfg_.down_dims.size());
  for (int l = 0; l < levels; ++l) {
    init_res(down_[static_cast<std::size_t>(2 * l)]);
    init_res(down_[static_cast<std::size_t>(2 * l + 1)]);
    if (l < levels - 1) init_conv(downsample_[static_cast<std::size_t>(l)]);
  }
  for (const auto& m : mid_) init_res(m);
  for (int u = 0; u < levels - 1; ++u) {
    init_res(up_[static_cast<std::size_t>(2 * u)]);
    init_res(up_[static_cast<std::size_t>(2 * u + 1)]);
    const auto& us = upsample_[static_cast<std::size_t>(u)];
    uniform_fill(us.w, static_cast<double>(us.cin) * us.k / us.stride);
  }
  init_block(final_block_);
  init_conv(final_out_);
  return p;
}

template <typename S>
Mat<S> ConditionalUnet1D<S>::forward(const ParameterStore<S>& p, const Mat<S>& x, std::span<const int> steps,
                                     const Mat<S>& obs, Tape* tape) const {
  const int batch = static_cast<int>(steps.size());
  const int levels = static_cast<int>(cfg_.down_dims.size());
  if (batch < 1) throw InvalidArgument("unet_forward needs a nonempty batch");
  if (x.rows() != cfg_.input_channels || x.cols() != static_cast<Eigen::Index>(batch) * cfg_.horizon) {
    throw InvalidArgument("unet input shape does not match the network config");
  }
  if (obs.rows() != cfg_.cond_dim || obs.cols() != batch) {
    throw InvalidArgument("observation shape does not match the network config");
  }
  Tape local;
  Tape& t = tape != nullptr ? *tape : local;
  t.batch = batch;

  const int dsed = cfg_.step_embed_dim;
  t.emb.resize(dsed, batch);
  for (int bi = 0; bi < batch; ++bi) {
    const auto e = sinusoidal_embedding(steps[static_cast<std::size_t>(bi)], dsed);
    for (int i = 0; i < dsed; ++i) t.emb(i, bi) = static_cast<S>(e[static_cast<std::size_t>(i)]);
  }
  t.mlp_pre = step_fc1_.forward(p, t.emb);
  t.mlp_act = mish_forward(t.mlp_pre);
  const Mat<S> step_feat = step_fc2_.forward(p, t.mlp_act);
  t.cond.resize(dsed + cfg_.cond_dim, batch);
  t.cond.topRows(dsed) = step_feat;
  t.cond.bottomRows(cfg_.cond_dim) = obs;
  t.cond_act = mish_forward(t.cond);

  t.down.assign(down_.size(), {});
  t.down_sample_in.assign(downsample_.size(), {});
  t.mid.assign(mid_.size(), {});
  t.up.assign(up_.size(), {});
  t.up_sample_in.assign(upsample_.size(), {});

  std::vector<Mat<S>> skips(static_cast<std::size_t>(levels));
  Mat<S> h = x;
  for (int l = 0; l < levels; ++l) {
    const int len = level_len(l);
    h = down_[static_cast<std::size_t>(2 * l)].forward(p, h, t.cond_act, batch, len, t.down[static_cast<std::size_t>(2 * l)]);
    h = down_[static_cast<std::size_t>(2 * l + 1)].forward(p, h, t.cond_act, batch, len,
                                                           t.down[static_cast<std::size_t>(2 * l + 1)]);
    skips[static_cast<std::size_t>(l)] = h;
    if (l < levels - 1) {
      t.down_sample_in[static_cast<std::size_t>(l)] = h;
      h = downsample_[static_cast<std::size_t>(l)].forward(p, h, batch, len);
    }
  }
  const int deepest = level_len(levels - 1);
  for (std::size_t i = 0; i < mid_.size(); ++i) h = mid_[i].forward(p, h, t.cond_act, batch, deepest, t.mid[i]);

  for (int u = 0; u < levels - 1; ++u) {
    const int skip_level = levels - 1 - u;
    const int len = level_len(skip_level);
    const Mat<S>& skip = skips[static_cast<std::size_t>(skip_level)];
    Mat<S> cat(h.rows() + skip.rows(), h.cols());
    cat.topRows(h.rows()) = h;
    cat.bottomRows(skip.rows()) = skip;
    h = up_[static_cast<std::size_t>(2 * u)].forward(p, cat, t.cond_act, batch, len, t.up[static_cast<std::size_t>(2 * u)]);
    h = up_[static_cast<std::size_t>(2 * u + 1)].forward(p, h, t.cond_act, batch, len,
                                                         t.up[static_cast<std::size_t>(2 * u + 1)]);
    t.up_sample_in[static_cast<std::size_t>(u)] = h;
    h = upsample_[static_cast<std::size_t>(u)].forward(p, h, batch, len);
  }

  h = final_block_.forward(p, h, batch, cfg_.horizon, t.final_block);
  t.final_out_in = h;
  return final_out_.forward(p, h, batch, cfg_.horizon);
}

template <typename S>
void ConditionalUnet1D<S>::backward(const ParameterStore<S>& p, const Tape& t, const Mat<S>& dy,
                                    ParameterStore<S>& g) const {
  const int batch = t.batch;
  const int levels = static_cast<int>(cfg_.down_dims.size());
  Mat<S> d_cond_act = Mat<S>::Zero(t.cond_act.rows(), t.cond_act.cols());

  Mat<S> dh = final_out_.backward(p, t.final_out_in, batch, cfg_.horizon, dy, g);
  dh = final_block_.backward(p, t.final_block, batch, cfg_.horizon, dh, g);

  std::vector<Mat<S>> d_skips(static_cast<std::size_t>(levels));
  for (int u = levels - 2; u >= 0; --u) {
    const int skip_level = levels - 1 - u;
    const int len = level_len(skip_level);
    dh = upsample_[static_cast<std::size_t>(u)].backward(p, t.up_sample_in[static_cast<std::size_t>(u)], batch, len, dh, g);
    dh = up_[static_cast<std::size_t>(2 * u + 1)].backward(p, t.up[static_cast<std::size_t>(2 * u + 1)], t.cond_act, batch,
                                                           len, dh, g, d_cond_act);
    const Mat<S> dcat = up_[static_cast<std::size_t>(2 * u)].backward(p, t.up[static_cast<std::size_t>(2 * u)], t.cond_act,
                                                                      batch, len, dh, g, d_cond_act);
    const Eigen::Index skip_rows = cfg_.down_dims[static_cast<std::size_t>(skip_level)];
    dh = dcat.topRows(dcat.rows() - skip_rows);
    d_skips[static_cast<std::size_t>(skip_level)] = dcat.bottomRows(skip_rows);
  }

  const int deepest = level_len(levels - 1);
  for (int i = static_cast<int>(mid_.size()) - 1; i >= 0; --i) {
    dh = mid_[static_cast<std::size_t>(i)].backward(p, t.mid[static_cast<std::size_t>(i)], t.cond_act, batch, deepest, dh,
                                                    g, d_cond_act);
  }

  for (int l = levels - 1; l >= 0; --l) {
    const int len = level_len(l);
    if (l < levels - 1) {
      dh = downsample_[static_cast<std::size_t>(l)].backward(p, t.down_sample_in[static_cast<std::size_t>(l)], batch, len,
                                                             dh, g);
    }
    if (d_skips[static_cast<std::size_t>(l)].size() > 0) dh += d_skips[static_cast<std::size_t>(l)];
    dh = down_[static_cast<std::size_t>(2 * l + 1)].backward(p, t.down[static_cast<std::size_t>(2 * l + 1)], t.cond_act,
                                                             batch, len, dh, g, d_cond_act);
    dh = down_[static_cast<std::size_t>(2 * l)].backward(p, t.down[static_cast<std::size_t>(2 * l)], t.cond_act, batch,
                                                         len, dh, g, d_cond_act);
  }

  const Mat<S> d_cond = mish_backward(t.cond, d_cond_act);
  const Mat<S> d_step = d_cond.topRows(cfg_.step_embed_dim);
  const Mat<S> d_mlp_act = step_fc2_.backward(p, t.mlp_act, d_step, g);
  const Mat<S> d_mlp_pre = mish_backward(t.mlp_pre, d_mlp_act);
  step_fc1_.backward(p, t.emb, d_mlp_pre, g);
}

template <typename S>
Mat<S> pack_sequences(std::span<const Eigen::MatrixXd> seqs) {
  if (seqs.empty()) return {};
  const Eigen::Index horizon = seqs.front().rows();
  const Eigen::Index channels = seqs.front().cols();
  Mat<S> out(channels, horizon * static_cast<Eigen::Index>(seqs.size()));
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    if (seqs[b].rows() != horizon || seqs[b].cols() != channels) throw InvalidArgument("ragged sequence batch");
    out.middleCols(static_cast<Eigen::Index>(b) * horizon, horizon) = seqs[b].transpose().template cast<S>();
  }
  return out;
}

template <typename S>
std::vector<Eigen::MatrixXd> unpack_sequences(const Mat<S>& packed, int batch, int horizon) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    out.push_back(packed.middleCols(static_cast<Eigen::Index>(b) * horizon, horizon).transpose().template cast<double>());
  }
  return out;
}

template struct Conv1dBlock<float>;
template struct Conv1dBlock<double>;
template struct ConditionalResidualBlock<float>;
template struct ConditionalResidualBlock<double>;
template class ConditionalUnet1D<float>;
template class ConditionalUnet1D<double>;
template Mat<float> pack_sequences<float>(std::span<const Eigen::MatrixXd>);
template Mat<double> pack_sequences<double>(std::span<const Eigen::MatrixXd>);
template std::vector<Eigen::MatrixXd> unpack_sequences<float>(const Mat<float>&, int, int);
template std::vector<Eigen::MatrixXd> unpack_sequences<double>(const Mat<double>&, int, int);

}  // namespace fdp::nn
