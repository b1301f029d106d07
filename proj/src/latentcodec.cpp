#include "ensobridge/latentcodec.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ensobridge::latent {

using nlohmann::json;

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Elu: return "elu";
    case Activation::Gelu: return "gelu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  for (auto a : {Activation::Identity, Activation::Tanh, Activation::Elu, Activation::Gelu, Activation::Sigmoid})
    if (s == to_string(a)) return a;
  throw ConfigError("unknown activation '" + s + "'");
}

MatrixXd apply_activation(Activation a, const MatrixXd& x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Tanh: return x.array().tanh().matrix();
    case Activation::Elu: return x.unaryExpr([](double v) { return v > 0 ? v : std::expm1(v); });
    case Activation::Gelu:
      return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
    case Activation::Sigmoid: return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  }
  return x;
}

MatrixXd activation_derivative(Activation a, const MatrixXd& pre) {
  switch (a) {
    case Activation::Identity: return MatrixXd::Ones(pre.rows(), pre.cols());
    case Activation::Tanh: return (1.0 - pre.array().tanh().square()).matrix();
    case Activation::Elu: return pre.unaryExpr([](double v) { return v > 0 ? 1.0 : std::exp(v); });
    case Activation::Gelu:
      return pre.unaryExpr([](double v) {
        return 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2)) +
               v * std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
      });
    case Activation::Sigmoid:
      return pre.unaryExpr([](double v) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 - s);
      });
  }
  return pre;
}

Mlp::Mlp(const std::vector<int>& sizes, const std::vector<Activation>& acts, Rng& rng) {
  if (sizes.size() < 2 || acts.size() != sizes.size() - 1) throw ConfigError("MLP needs n+1 sizes for n activations");
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Layer L;
    const double a = std::sqrt(6.0 / (sizes[l] + sizes[l + 1]));
    L.W = MatrixXd(sizes[l + 1], sizes[l]);
    for (Eigen::Index k = 0; k < L.W.size(); ++k) L.W.data()[k] = a * (2.0 * rng.uniform() - 1.0);
    L.b = VectorXd::Zero(sizes[l + 1]);
    L.act = acts[l];
    layers.push_back(std::move(L));
  }
}

MatrixXd Mlp::forward(const MatrixXd& X, Cache* cache) const {
  if (X.rows() != in_dim()) throw DataError("MLP input has the wrong dimension");
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  MatrixXd h = X;
  for (const auto& L : layers) {
    MatrixXd pre = L.W * h;
    pre.colwise() += L.b;
    MatrixXd post = apply_activation(L.act, pre);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(std::move(pre));
    }
    h = std::move(post);
  }
  return h;
}

MatrixXd Mlp::backward(const Cache& cache, const MatrixXd& dY, std::vector<Layer>& grads) const {
  grads.resize(layers.size());
  MatrixXd delta = dY;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& L = layers[l];
    delta = delta.cwiseProduct(activation_derivative(L.act, cache.pre[l]));
    grads[l].W = delta * cache.inputs[l].transpose();
    grads[l].b = delta.rowwise().sum();
    grads[l].act = L.act;
    delta = L.W.transpose() * delta;
  }
  return delta;
}

Eigen::Index Mlp::n_params() const {
  Eigen::Index n = 0;
  for (const auto& L : layers) n += L.W.size() + L.b.size();
  return n;
}

VectorXd Mlp::flatten(const std::vector<Layer>& layers) {
  Eigen::Index n = 0;
  for (const auto& L : layers) n += L.W.size() + L.b.size();
  VectorXd theta(n);
  Eigen::Index k = 0;
  for (const auto& L : layers) {
    theta.segment(k, L.W.size()) = Eigen::Map<const VectorXd>(L.W.data(), L.W.size());
    k += L.W.size();
    theta.segment(k, L.b.size()) = L.b;
    k += L.b.size();
  }
  return theta;
}

VectorXd Mlp::flatten() const { return flatten(layers); }

void Mlp::unflatten(const VectorXd& theta) {
  if (theta.size() != n_params()) throw DataError("parameter vector has the wrong length");
  Eigen::Index k = 0;
  for (auto& L : layers) {
    Eigen::Map<VectorXd>(L.W.data(), L.W.size()) = theta.segment(k, L.W.size());
    k += L.W.size();
    L.b = theta.segment(k, L.b.size());
    k += L.b.size();
  }
}

namespace {

struct Centered {
  MatrixXd Zc, Yc;
  VectorXd a, n;  // row norms
  MatrixXd S, D;  // cross products and guarded denominators
};

Centered center_and_correlate(const MatrixXd& Z, const MatrixXd& Y, double eps) {
  if (Z.cols() != Y.cols()) throw DataError("latent and observable batches differ in length");
  if (Z.cols() < 2) throw DataError("correlation needs a batch of at least two samples");
  Centered c;
  c.Zc = Z.colwise() - Z.rowwise().mean();
  c.Yc = Y.colwise() - Y.rowwise().mean();
  c.a = c.Zc.rowwise().norm();
  c.n = c.Yc.rowwise().norm();
  c.S = c.Zc * c.Yc.transpose();
  c.D = (c.a * c.n.transpose()).array() + eps;
  return c;
}

}  // namespace

MatrixXd correlation_matrix(const MatrixXd& Z, const MatrixXd& Y, double eps) {
  const auto c = center_and_correlate(Z, Y, eps);
  return c.S.cwiseQuotient(c.D);
}

LossParts composite_loss(const MatrixXd& X, const MatrixXd& Xhat, const MatrixXd& Z, const MatrixXd& Y,
                         double lambda, double eps, LossGradients* grads) {
  if (X.rows() != Xhat.rows() || X.cols() != Xhat.cols()) throw DataError("reconstruction shape mismatch");
  LossParts out;
  const double count = static_cast<double>(X.size());
  out.recon = (Xhat - X).squaredNorm() / count;
  const bool with_corr = Z.rows() > 0 && Y.rows() > 0;
  Centered c;
  if (with_corr) {
    c = center_and_correlate(Z, Y, eps);
    out.corr = -c.S.cwiseQuotient(c.D).mean();
  }
  out.L = out.recon + lambda * out.corr;
  if (grads) {
    grads->dXhat = 2.0 * (Xhat - X) / count;
    grads->dZ = MatrixXd::Zero(Z.rows(), Z.cols());
    if (with_corr && lambda != 0.0) {
      const MatrixXd G = c.D.cwiseInverse();
      MatrixXd dZc = G * c.Yc;
      const VectorXd h = (c.S.cwiseQuotient(c.D.cwiseProduct(c.D)) * c.n);
      for (Eigen::Index j = 0; j < Z.rows(); ++j)
        if (c.a(j) > 0) dZc.row(j) -= (h(j) / c.a(j)) * c.Zc.row(j);
      MatrixXd dZ = dZc.colwise() - dZc.rowwise().mean();
      grads->dZ = (-lambda / static_cast<double>(Z.rows() * Y.rows())) * dZ;
    }
  }
  return out;
}

MatrixXd Codec::encode(const MatrixXd& X) const {
  if (X.rows() != input_dim()) throw DataError("encode: field has the wrong size");
  if (kind == CodecKind::POD) return (modes.transpose() * X).array().colwise() / latent_scale.array();
  return encoder.forward(X);
}

MatrixXd Codec::decode(const MatrixXd& A) const {
  if (A.rows() != n_l + n_o) throw DataError("decode: augmented state has the wrong size");
  if (kind == CodecKind::POD) return modes * (A.topRows(n_l).array().colwise() * latent_scale.array()).matrix();
  return decoder.forward(A);
}

MatrixXd series_matrix(const fieldkit::GriddedSeries& s) {
  MatrixXd X(static_cast<Eigen::Index>(s.snapshot_size()), static_cast<Eigen::Index>(s.n_time()));
  for (std::size_t t = 0; t < s.n_time(); ++t) {
    auto f = s.snapshot(t);
    X.col(static_cast<Eigen::Index>(t)) = Eigen::Map<const VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
  }
  return X;
}

namespace {

struct PodBasis {
  MatrixXd U;        // D x r, descending energy
  VectorXd energy;   // squared singular values
};

PodBasis pod_basis(const MatrixXd& X) {
  const Eigen::Index D = X.rows(), T = X.cols();
  PodBasis b;
  if (D <= T) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(X * X.transpose());
    b.energy = es.eigenvalues().reverse();
    b.U = es.eigenvectors().rowwise().reverse();
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(X.transpose() * X);
    b.energy = es.eigenvalues().reverse();
    const MatrixXd V = es.eigenvectors().rowwise().reverse();
    b.U = MatrixXd::Zero(D, T);
    for (Eigen::Index k = 0; k < T; ++k)
      if (b.energy(k) > 0) b.U.col(k) = X * V.col(k) / std::sqrt(b.energy(k));
  }
  for (Eigen::Index k = 0; k < b.U.cols(); ++k) {
    Eigen::Index imax = 0;
    b.U.col(k).cwiseAbs().maxCoeff(&imax);
    if (b.U(imax, k) < 0) b.U.col(k) *= -1.0;
  }
  return b;
}

}  // namespace

double pod_energy_fraction(const MatrixXd& X, int k) {
  const auto b = pod_basis(X);
  const double total = b.energy.cwiseMax(0.0).sum();
  return total > 0 ? b.energy.head(k).cwiseMax(0.0).sum() / total : 1.0;
}

Codec pod_fit(const MatrixXd& X, double threshold, int max_modes) {
  if (!(threshold > 0 && threshold <= 1)) throw ConfigError("POD energy threshold must be in (0, 1]");
  if (X.cols() < 2) throw DataError("POD needs at least two samples");
  const auto b = pod_basis(X);
  const double emax = b.energy(0);
  if (!(emax > 0)) throw DataError("POD input is identically zero");
  int rank = 0;
  while (rank < b.energy.size() && b.energy(rank) > emax * 1e-12) ++rank;
  const double total = b.energy.head(rank).sum();
  int k = 0;
  double cum = 0;
  while (k < rank && cum < threshold * total - 1e-12 * total) cum += b.energy(k++);
  k = std::max(k, 1);
  if (max_modes > 0) k = std::min(k, max_modes);
  Codec c;
  c.kind = CodecKind::POD;
  c.n_l = k;
  c.channels = 1;
  c.height = 1;
  c.width = static_cast<int>(X.rows());
  c.modes = b.U.leftCols(k);
  const MatrixXd coef = c.modes.transpose() * X;
  c.latent_scale = 1.2 * coef.cwiseAbs().rowwise().maxCoeff();
  for (Eigen::Index j = 0; j < k; ++j)
    if (!(c.latent_scale(j) > 0)) c.latent_scale(j) = 1.0;
  return c;
}

Codec pod_fit(const fieldkit::GriddedSeries& training, double threshold, int max_modes) {
  Codec c = pod_fit(series_matrix(training), threshold, max_modes);
  c.channels = static_cast<int>(training.n_vars());
  c.height = training.grid().n_lat;
  c.width = training.grid().n_lon;
  return c;
}

VectorXd augment(const VectorXd& latent, const VectorXd& y) {
  VectorXd out(latent.size() + y.size());
  out << latent, y;
  return out;
}

std::pair<VectorXd, VectorXd> split(const VectorXd& x, int n_l) {
  if (n_l < 0 || n_l > x.size()) throw DataError("split: latent size exceeds the augmented length");
  return {x.head(n_l), x.tail(x.size() - n_l)};
}

void CodecLossConfig::validate() const {
  if (lambda < 0) throw ConfigError("codec lambda must be >= 0");
  if (!(eps > 0)) throw ConfigError("codec eps must be > 0");
  if (batch_size < 2) throw ConfigError("codec batch size must be >= 2");
  if (!(learning_rate > 0) || momentum < 0 || momentum >= 1) throw ConfigError("codec optimizer settings invalid");
  if (epochs < 1) throw ConfigError("codec epochs must be >= 1");
}

namespace {

void gather(const CodecTrainData& d, const std::vector<surrogate::SampleRef>& refs, MatrixXd& X, MatrixXd& Y) {
  X.resize(d.X_om.rows(), static_cast<Eigen::Index>(refs.size()));
  Y.resize(d.Y_om.rows(), static_cast<Eigen::Index>(refs.size()));
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(k), i = static_cast<Eigen::Index>(refs[k].index);
    X.col(c) = refs[k].reanalysis ? d.X_rea.col(i) : d.X_om.col(i);
    Y.col(c) = refs[k].reanalysis ? d.Y_rea.col(i) : d.Y_om.col(i);
  }
}

}  // namespace

Codec train_codec(const CodecTrainData& data, int n_l, const CodecArch& arch, const CodecLossConfig& cfg,
                  const surrogate::CurriculumSchedule& curriculum, std::uint64_t seed) {
  cfg.validate();
  curriculum.validate();
  const auto D = static_cast<int>(data.X_om.rows());
  const auto n_o = static_cast<int>(data.Y_om.rows());
  const auto n_om = static_cast<std::size_t>(data.X_om.cols());
  const auto n_rea = static_cast<std::size_t>(data.X_rea.cols());
  if (n_l < 1) throw ConfigError("latent size must be >= 1");
  if (n_om < 2 || data.Y_om.cols() != data.X_om.cols()) throw DataError("OM training data is empty or misaligned");
  if (n_rea > 0 && (data.X_rea.rows() != D || data.Y_rea.rows() != n_o || data.Y_rea.cols() != data.X_rea.cols()))
    throw DataError("reanalysis training data misaligned with OM data");

  Rng rng(seed);
  const Activation out_act = arch.squash ? Activation::Tanh : Activation::Identity;
  std::vector<int> es{D}, ds{n_l + n_o};
  std::vector<Activation> ea, da;
  for (int h : arch.encoder_hidden) { es.push_back(h); ea.push_back(arch.hidden); }
  for (int h : arch.decoder_hidden) { ds.push_back(h); da.push_back(arch.hidden); }
  es.push_back(n_l); ea.push_back(out_act);
  ds.push_back(D); da.push_back(out_act);

  Codec c;
  c.kind = CodecKind::Nonlinear;
  c.n_l = n_l;
  c.n_o = n_o;
  c.channels = 1;
  c.height = 1;
  c.width = D;
  c.encoder = Mlp(es, ea, rng);
  c.decoder = Mlp(ds, da, rng);

  if (arch.pod_init && arch.encoder_hidden.empty() && arch.decoder_hidden.empty()) {
    const Codec pod = pod_fit(data.X_om, 1.0, n_l);
    for (int k = 0; k < pod.n_l; ++k) {
      c.encoder.layers[0].W.row(k) = pod.modes.col(k).transpose() / pod.latent_scale(k);
      c.decoder.layers[0].W.col(k) = pod.modes.col(k) * pod.latent_scale(k);
    }
    c.encoder.layers[0].b.setZero();
    c.decoder.layers[0].b.setZero();
    c.decoder.layers[0].W.rightCols(n_o).setZero();
  }

  auto evaluate = [&](double lambda) {
    LossParts acc;
    int batches = 0;
    MatrixXd X, Y;
    for (std::size_t s = 0; s + 1 < n_om; s += static_cast<std::size_t>(cfg.batch_size)) {
      const auto len = static_cast<Eigen::Index>(std::min<std::size_t>(cfg.batch_size, n_om - s));
      if (len < 2) break;
      X = data.X_om.middleCols(static_cast<Eigen::Index>(s), len);
      Y = data.Y_om.middleCols(static_cast<Eigen::Index>(s), len);
      const MatrixXd Z = c.encoder.forward(X);
      MatrixXd A(n_l + n_o, len);
      A << Z, Y;
      const auto l = composite_loss(X, c.decoder.forward(A), Z, Y, lambda, cfg.eps);
      acc.L += l.L;
      acc.recon += l.recon;
      acc.corr += l.corr;
      ++batches;
    }
    acc.L /= batches;
    acc.recon /= batches;
    acc.corr /= batches;
    return acc;
  };
  auto balanced = [&](const LossParts& l) {
    return cfg.lambda_ratio * l.recon / std::max(std::abs(l.corr), 0.05);
  };

  double lambda = cfg.lambda;
  if (cfg.auto_lambda) lambda = balanced(evaluate(0.0));
  double lr = cfg.learning_rate;
  VectorXd ve = VectorXd::Zero(c.encoder.n_params()), vd = VectorXd::Zero(c.decoder.n_params());
  const std::size_t per_epoch = std::max<std::size_t>(1, n_om / static_cast<std::size_t>(cfg.batch_size));
  double prev_recon = std::numeric_limits<double>::infinity();
  int retries = 0;

  for (int e = 0; e < cfg.epochs; ++e) {
    const double p = curriculum_probability(std::min(e, curriculum.e_f), curriculum);
    const VectorXd enc0 = c.encoder.flatten(), dec0 = c.decoder.flatten();
    const Rng rng0 = rng;
    LossParts acc;
    MatrixXd X, Y;
    std::vector<Mlp::Layer> ge, gd;
    Mlp::Cache ce, cd;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      gather(data, surrogate::sample_curriculum_batch(n_om, n_rea, p, static_cast<std::size_t>(cfg.batch_size), rng), X, Y);
      const MatrixXd Z = c.encoder.forward(X, &ce);
      MatrixXd A(n_l + n_o, X.cols());
      A << Z, Y;
      const MatrixXd Xhat = c.decoder.forward(A, &cd);
      LossGradients g;
      const auto l = composite_loss(X, Xhat, Z, Y, lambda, cfg.eps, &g);
      const MatrixXd dA = c.decoder.backward(cd, g.dXhat, gd);
      c.encoder.backward(ce, dA.topRows(n_l) + g.dZ, ge);
      ve = cfg.momentum * ve - lr * Mlp::flatten(ge);
      vd = cfg.momentum * vd - lr * Mlp::flatten(gd);
      c.encoder.unflatten(c.encoder.flatten() + ve);
      c.decoder.unflatten(c.decoder.flatten() + vd);
      acc.L += l.L / per_epoch;
      acc.recon += l.recon / per_epoch;
      acc.corr += l.corr / per_epoch;
    }
    if (!std::isfinite(acc.L) || acc.recon > 10.0 * prev_recon) {
      c.history.push_back({{"epoch", e}, {"L", acc.L}, {"L_recon", acc.recon}, {"L_corr", acc.corr},
                           {"lambda", lambda}, {"p_rea", p}, {"lr", lr}, {"rejected", true}});
      if (++retries > 20) throw NumericalError("codec training diverged; history: " + c.history.dump());
      c.encoder.unflatten(enc0);
      c.decoder.unflatten(dec0);
      rng = rng0;
      ve.setZero();
      vd.setZero();
      lr *= 0.5;
      --e;
      continue;
    }
    prev_recon = acc.recon;
    c.history.push_back({{"epoch", e}, {"L", acc.L}, {"L_recon", acc.recon}, {"L_corr", acc.corr},
                         {"lambda", lambda}, {"p_rea", p}, {"lr", lr}});
    if (cfg.auto_lambda) lambda = balanced(acc);
  }
  return c;
}

namespace {

std::vector<double> row_major(const MatrixXd& M) {
  std::vector<double> out(static_cast<std::size_t>(M.size()));
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) out[k++] = M(r, c);
  return out;
}

MatrixXd from_row_major(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) throw DataError("parameter block has the wrong size");
  MatrixXd M(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = v[k++];
  return M;
}

json mlp_layout(const Mlp& m, const std::string& prefix, fieldkit::Blocks& blocks) {
  json layers = json::array();
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& L = m.layers[l];
    layers.push_back({{"rows", L.W.rows()}, {"cols", L.W.cols()}, {"activation", to_string(L.act)}});
    blocks.emplace_back(prefix + ".W" + std::to_string(l), row_major(L.W));
    blocks.emplace_back(prefix + ".b" + std::to_string(l), std::vector<double>(L.b.data(), L.b.data() + L.b.size()));
  }
  return layers;
}

Mlp mlp_restore(const json& layout, const std::string& prefix, const fieldkit::Blocks& blocks) {
  Mlp m;
  for (std::size_t l = 0; l < layout.size(); ++l) {
    Mlp::Layer L;
    const auto rows = layout[l].at("rows").get<Eigen::Index>(), cols = layout[l].at("cols").get<Eigen::Index>();
    L.W = from_row_major(fieldkit::find_block(blocks, prefix + ".W" + std::to_string(l)), rows, cols);
    const auto& b = fieldkit::find_block(blocks, prefix + ".b" + std::to_string(l));
    L.b = Eigen::Map<const VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    L.act = activation_from_string(layout[l].at("activation"));
    m.layers.push_back(std::move(L));
  }
  return m;
}

}  // namespace

void save_codec(const std::filesystem::path& dir, const Codec& c, const json& extra) {
  json m;
  m["format"] = "ensobridge-codec";
  m["kind"] = c.kind == CodecKind::POD ? "pod" : "nonlinear";
  m["n_l"] = c.n_l;
  m["n_o"] = c.n_o;
  m["shape"] = {c.channels, c.height, c.width};
  m["normalization"] = fieldkit::to_json(c.normalization);
  m["history"] = c.history;
  m["extra"] = extra;
  fieldkit::Blocks blocks;
  if (c.kind == CodecKind::POD) {
    m["modes_shape"] = {c.modes.rows(), c.modes.cols()};
    blocks.emplace_back("modes", row_major(c.modes));
    blocks.emplace_back("latent_scale", std::vector<double>(c.latent_scale.data(), c.latent_scale.data() + c.latent_scale.size()));
  } else {
    m["encoder"] = mlp_layout(c.encoder, "encoder", blocks);
    m["decoder"] = mlp_layout(c.decoder, "decoder", blocks);
  }
  fieldkit::write_block_artifact(dir, m, blocks);
}

Codec load_codec(const std::filesystem::path& dir, json* manifest) {
  fieldkit::Blocks blocks;
  const json m = fieldkit::read_block_artifact(dir, blocks);
  if (m.value("format", "") != "ensobridge-codec") throw DataError(dir.string() + " is not a codec artifact");
  Codec c;
  c.kind = m.at("kind") == "pod" ? CodecKind::POD : CodecKind::Nonlinear;
  c.n_l = m.at("n_l");
  c.n_o = m.at("n_o");
  c.channels = m.at("shape")[0];
  c.height = m.at("shape")[1];
  c.width = m.at("shape")[2];
  c.normalization = fieldkit::normalization_from_json(m.at("normalization"));
  c.history = m.at("history");
  if (c.kind == CodecKind::POD) {
    c.modes = from_row_major(fieldkit::find_block(blocks, "modes"), m.at("modes_shape")[0], m.at("modes_shape")[1]);
    const auto& s = fieldkit::find_block(blocks, "latent_scale");
    c.latent_scale = Eigen::Map<const VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
  } else {
    c.encoder = mlp_restore(m.at("encoder"), "encoder", blocks);
    c.decoder = mlp_restore(m.at("decoder"), "decoder", blocks);
  }
  if (manifest) *manifest = m;
  return c;
}

}  // namespace ensobridge::latent
