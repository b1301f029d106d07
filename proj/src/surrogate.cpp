#include "ensobridge/surrogate.hpp"

#include <algorithm>
#include <cmath>

#include "ensobridge/fieldkit.hpp"

namespace ensobridge::surrogate {

using nlohmann::json;

void CurriculumSchedule::validate() const {
  if (!(0 <= p0 && p0 <= p_max && p_max <= 1)) throw ConfigError("curriculum needs 0 <= p0 <= p_max <= 1");
  if (e_f < 0) throw ConfigError("curriculum e_f must be >= 0");
}

double curriculum_probability(int e, const CurriculumSchedule& s) {
  if (s.e_f == 0) return s.p_max;
  if (e < 0 || e > s.e_f) throw ConfigError("curriculum epoch outside [0, e_f]");
  return std::min(s.p_max, s.p0 + (static_cast<double>(e) / s.e_f) * (s.p_max - s.p0));
}

std::vector<SampleRef> sample_curriculum_batch(std::size_t om_pool, std::size_t rea_pool, double p,
                                               std::size_t batch_size, Rng& rng) {
  if (om_pool == 0 && rea_pool == 0) throw DataError("curriculum pools are both empty");
  if (rea_pool == 0) p = 0.0;
  if (om_pool == 0) p = 1.0;
  std::vector<SampleRef> out(batch_size);
  for (auto& r : out) {
    r.reanalysis = rng.uniform() < p;
    r.index = rng.below(r.reanalysis ? rea_pool : om_pool);
  }
  return out;
}

namespace {

MatrixXd sigmoid(const MatrixXd& x) { return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }); }
MatrixXd elu(const MatrixXd& x) { return x.unaryExpr([](double v) { return v > 0 ? v : std::expm1(v); }); }
MatrixXd elu_grad(const MatrixXd& x) { return x.unaryExpr([](double v) { return v > 0 ? 1.0 : std::exp(v); }); }

}  // namespace

LstmWeights LstmWeights::zeros(int dim, int hidden, int n_layers) {
  LstmWeights w;
  w.dim = dim;
  w.hidden = hidden;
  w.W_in = MatrixXd::Zero(hidden, dim);
  w.b_in = VectorXd::Zero(hidden);
  for (int l = 0; l < n_layers; ++l)
    w.layers.push_back({MatrixXd::Zero(4 * hidden, hidden), MatrixXd::Zero(4 * hidden, hidden), VectorXd::Zero(4 * hidden)});
  w.W_out = MatrixXd::Zero(dim, hidden);
  w.b_out = VectorXd::Zero(dim);
  return w;
}

LstmWeights LstmWeights::random(int dim, int hidden, int n_layers, Rng& rng) {
  LstmWeights w = zeros(dim, hidden, n_layers);
  auto fill = [&](auto& m, double a) {
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = a * (2.0 * rng.uniform() - 1.0);
  };
  fill(w.W_in, std::sqrt(6.0 / (dim + hidden)));
  const double a = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (auto& L : w.layers) {
    fill(L.W, a);
    fill(L.U, a);
    fill(L.b, a);
  }
  fill(w.W_out, std::sqrt(6.0 / (dim + hidden)));
  return w;
}

Eigen::Index LstmWeights::n_params() const {
  Eigen::Index n = W_in.size() + b_in.size() + W_out.size() + b_out.size();
  for (const auto& L : layers) n += L.W.size() + L.U.size() + L.b.size();
  return n;
}

namespace {

template <class F>
void visit(LstmWeights& w, F&& f) {
  f(w.W_in.data(), w.W_in.size());
  f(w.b_in.data(), w.b_in.size());
  for (auto& L : w.layers) {
    f(L.W.data(), L.W.size());
    f(L.U.data(), L.U.size());
    f(L.b.data(), L.b.size());
  }
  f(w.W_out.data(), w.W_out.size());
  f(w.b_out.data(), w.b_out.size());
}

}  // namespace

VectorXd LstmWeights::flatten() const {
  VectorXd theta(n_params());
  Eigen::Index k = 0;
  visit(const_cast<LstmWeights&>(*this), [&](double* p, Eigen::Index n) {
    theta.segment(k, n) = Eigen::Map<VectorXd>(p, n);
    k += n;
  });
  return theta;
}

void LstmWeights::unflatten(const VectorXd& theta) {
  if (theta.size() != n_params()) throw DataError("LSTM parameter vector has the wrong length");
  Eigen::Index k = 0;
  visit(*this, [&](double* p, Eigen::Index n) {
    Eigen::Map<VectorXd>(p, n) = theta.segment(k, n);
    k += n;
  });
}

namespace {

struct StepCache {
  MatrixXd input, h_prev, c_prev, i, g, o, f, c, tc;
};

struct ForwardCache {
  std::vector<MatrixXd> pre_in;                 // per time
  std::vector<std::vector<StepCache>> steps;    // [time][layer]
  MatrixXd h_last, pre_out, y;
};

MatrixXd run_forward(const LstmWeights& w, const std::vector<MatrixXd>& context, ForwardCache* cache) {
  if (context.empty()) throw DataError("LSTM context is empty");
  const Eigen::Index B = context[0].cols();
  const int H = w.hidden;
  const auto nl = w.layers.size();
  std::vector<MatrixXd> h(nl, MatrixXd::Zero(H, B)), c(nl, MatrixXd::Zero(H, B));
  if (cache) {
    cache->pre_in.clear();
    cache->steps.assign(context.size(), std::vector<StepCache>(nl));
  }
  for (std::size_t t = 0; t < context.size(); ++t) {
    if (context[t].rows() != w.dim || context[t].cols() != B) throw DataError("LSTM input has the wrong shape");
    MatrixXd pre = w.W_in * context[t];
    pre.colwise() += w.b_in;
    MatrixXd x = elu(pre);
    if (cache) cache->pre_in.push_back(pre);
    for (std::size_t l = 0; l < nl; ++l) {
      const auto& L = w.layers[l];
      MatrixXd gates = L.W * x + L.U * h[l];
      gates.colwise() += L.b;
      MatrixXd gi = sigmoid(gates.topRows(H));
      MatrixXd gg = gates.middleRows(H, H).array().tanh().matrix();
      MatrixXd go = sigmoid(gates.middleRows(2 * H, H));
      MatrixXd gf = sigmoid(gates.bottomRows(H));
      MatrixXd cn = gf.cwiseProduct(c[l]) + gi.cwiseProduct(gg);
      MatrixXd tc = cn.array().tanh().matrix();
      MatrixXd hn = go.cwiseProduct(tc);
      if (cache) cache->steps[t][l] = {x, h[l], c[l], gi, gg, go, gf, cn, tc};
      h[l] = std::move(hn);
      c[l] = std::move(cn);
      x = h[l];
    }
  }
  MatrixXd pre_out = w.W_out * elu(h.back());
  pre_out.colwise() += w.b_out;
  MatrixXd y = pre_out.array().tanh().matrix();
  if (cache) {
    cache->h_last = h.back();
    cache->pre_out = pre_out;
    cache->y = y;
  }
  return y;
}

}  // namespace

MatrixXd lstm_forward(const LstmWeights& w, const std::vector<MatrixXd>& context) {
  return run_forward(w, context, nullptr);
}

double lstm_loss(const LstmWeights& w, const Batch& batch, VectorXd* grad) {
  ForwardCache fc;
  const MatrixXd y = run_forward(w, batch.context, grad ? &fc : nullptr);
  if (y.rows() != batch.target.rows() || y.cols() != batch.target.cols()) throw DataError("LSTM target has the wrong shape");
  const double count = static_cast<double>(y.size());
  const double loss = (y - batch.target).squaredNorm() / count;
  if (!grad) return loss;

  LstmWeights g = LstmWeights::zeros(w.dim, w.hidden, static_cast<int>(w.layers.size()));
  const int H = w.hidden;
  const auto nl = w.layers.size();
  const MatrixXd dpre_out = (2.0 / count) * (y - batch.target).cwiseProduct((1.0 - y.array().square()).matrix());
  const MatrixXd eh = elu(fc.h_last);
  g.W_out = dpre_out * eh.transpose();
  g.b_out = dpre_out.rowwise().sum();
  const Eigen::Index B = y.cols();

  std::vector<MatrixXd> dh_next(nl, MatrixXd::Zero(H, B)), dc_next(nl, MatrixXd::Zero(H, B));
  dh_next[nl - 1] = (w.W_out.transpose() * dpre_out).cwiseProduct(elu_grad(fc.h_last));
  for (std::size_t t = batch.context.size(); t-- > 0;) {
    MatrixXd dh_above;  // gradient flowing into the top layer's output at t (already in dh_next)
    for (std::size_t l = nl; l-- > 0;) {
      const auto& s = fc.steps[t][l];
      const auto& L = w.layers[l];
      MatrixXd dh = dh_next[l];
      if (l + 1 < nl) dh += dh_above;
      const MatrixXd dc = dc_next[l] + dh.cwiseProduct(s.o).cwiseProduct((1.0 - s.tc.array().square()).matrix());
      MatrixXd dgates(4 * H, B);
      dgates.topRows(H) = dc.cwiseProduct(s.g).cwiseProduct(s.i.cwiseProduct((1.0 - s.i.array()).matrix()));
      dgates.middleRows(H, H) = dc.cwiseProduct(s.i).cwiseProduct((1.0 - s.g.array().square()).matrix());
      dgates.middleRows(2 * H, H) = dh.cwiseProduct(s.tc).cwiseProduct(s.o.cwiseProduct((1.0 - s.o.array()).matrix()));
      dgates.bottomRows(H) = dc.cwiseProduct(s.c_prev).cwiseProduct(s.f.cwiseProduct((1.0 - s.f.array()).matrix()));
      g.layers[l].W += dgates * s.input.transpose();
      g.layers[l].U += dgates * s.h_prev.transpose();
      g.layers[l].b += dgates.rowwise().sum();
      dh_next[l] = L.U.transpose() * dgates;
      dc_next[l] = dc.cwiseProduct(s.f);
      const MatrixXd dx = L.W.transpose() * dgates;
      if (l > 0) {
        dh_above = dx;
      } else {
        const MatrixXd dpre = dx.cwiseProduct(elu_grad(fc.pre_in[t]));
        g.W_in += dpre * batch.context[t].transpose();
        g.b_in += dpre.rowwise().sum();
      }
    }
  }
  *grad = g.flatten();
  return loss;
}

bool EarlyStopper::update(double val) {
  improved_ = val < best_;
  if (improved_) {
    best_ = val;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return since_best_ >= patience_;
}

void SurrogateConfig::validate() const {
  if (context < 1) throw ConfigError("surrogate context must be >= 1");
  if (layers < 1) throw ConfigError("surrogate needs at least one LSTM layer");
  if (batch_size < 1 || max_epochs < 1 || patience < 1) throw ConfigError("surrogate batch, epochs and patience must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("surrogate learning rate must be > 0");
  if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("validation fraction must be in (0, 1)");
}

namespace {

struct Windows {
  std::vector<std::pair<std::size_t, Eigen::Index>> refs;  // (sequence, first column)
};

void window_split(const SequenceSet& set, int ctx, double frac, Windows& train, Windows& val) {
  for (std::size_t s = 0; s < set.sequences.size(); ++s) {
    const Eigen::Index n = set.sequences[s].cols() - ctx;
    if (n <= 0) continue;
    const auto n_val = static_cast<Eigen::Index>(std::ceil(frac * static_cast<double>(n)));
    for (Eigen::Index k = 0; k < n; ++k) (k < n - n_val ? train : val).refs.emplace_back(s, k);
  }
}

Batch assemble(const SequenceSet& set, const std::vector<std::pair<std::size_t, Eigen::Index>>& refs, int ctx) {
  const Eigen::Index d = set.sequences.front().rows();
  const auto B = static_cast<Eigen::Index>(refs.size());
  Batch b;
  b.context.assign(ctx, MatrixXd(d, B));
  b.target.resize(d, B);
  for (Eigen::Index k = 0; k < B; ++k) {
    const auto& [s, c0] = refs[k];
    const auto& seq = set.sequences[s];
    for (int t = 0; t < ctx; ++t) b.context[t].col(k) = seq.col(c0 + t);
    b.target.col(k) = seq.col(c0 + ctx);
  }
  return b;
}

Batch concat(const Batch& a, const Batch& b) {
  if (a.target.cols() == 0) return b;
  if (b.target.cols() == 0) return a;
  Batch out;
  for (std::size_t t = 0; t < a.context.size(); ++t) {
    MatrixXd m(a.context[t].rows(), a.context[t].cols() + b.context[t].cols());
    m << a.context[t], b.context[t];
    out.context.push_back(std::move(m));
  }
  out.target.resize(a.target.rows(), a.target.cols() + b.target.cols());
  out.target << a.target, b.target;
  return out;
}

}  // namespace

std::pair<Batch, Batch> split_windows(const SequenceSet& set, int context, double val_fraction) {
  Windows tr, va;
  window_split(set, context, val_fraction, tr, va);
  if (tr.refs.empty()) throw DataError("sequences are too short for the context length");
  return {assemble(set, tr.refs, context), va.refs.empty() ? Batch{} : assemble(set, va.refs, context)};
}

TrainResult train_surrogate(const SequenceSet& om, const SequenceSet& rea, const CurriculumSchedule& schedule,
                            const SurrogateConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  schedule.validate();
  if (om.sequences.empty()) throw DataError("surrogate training needs OM sequences");
  const auto dim = static_cast<int>(om.sequences.front().rows());
  for (const auto* set : {&om, &rea})
    for (const auto& s : set->sequences)
      if (s.rows() != dim) throw DataError("sequences disagree in augmented dimension");
  const int H = cfg.hidden > 0 ? cfg.hidden : dim;

  Windows om_tr, om_va, rea_tr, rea_va;
  window_split(om, cfg.context, cfg.val_fraction, om_tr, om_va);
  if (!rea.sequences.empty()) window_split(rea, cfg.context, cfg.val_fraction, rea_tr, rea_va);
  if (om_tr.refs.empty()) throw DataError("OM sequences are too short for the context length");
  Batch val = om_va.refs.empty() ? Batch{} : assemble(om, om_va.refs, cfg.context);
  if (!rea_va.refs.empty()) val = concat(val, assemble(rea, rea_va.refs, cfg.context));
  if (val.target.cols() == 0) throw DataError("validation split is empty");

  Rng rng(seed);
  TrainResult result;
  LstmWeights w = LstmWeights::random(dim, H, cfg.layers, rng);
  result.weights = w;

  // Adam moments.
  VectorXd theta = w.flatten();
  VectorXd m1 = VectorXd::Zero(theta.size()), m2 = VectorXd::Zero(theta.size());
  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  long step = 0;
  double lr = cfg.learning_rate;
  EarlyStopper stopper(cfg.patience);
  const std::size_t per_epoch = std::max<std::size_t>(1, om_tr.refs.size() / static_cast<std::size_t>(cfg.batch_size));
  int rejected = 0;

  for (int e = 0; e < cfg.max_epochs; ++e) {
    const double p = curriculum_probability(std::min(e, schedule.e_f), schedule);
    const VectorXd theta0 = theta, m10 = m1, m20 = m2;
    const long step0 = step;
    const Rng rng0 = rng;
    double train = 0;
    VectorXd grad;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const auto refs = sample_curriculum_batch(om_tr.refs.size(), rea_tr.refs.size(), p,
                                                static_cast<std::size_t>(cfg.batch_size), rng);
      std::vector<std::pair<std::size_t, Eigen::Index>> om_refs, rea_refs;
      for (const auto& r : refs) (r.reanalysis ? rea_refs : om_refs).push_back(r.reanalysis ? rea_tr.refs[r.index] : om_tr.refs[r.index]);
      Batch batch;
      if (!om_refs.empty()) batch = assemble(om, om_refs, cfg.context);
      if (!rea_refs.empty()) batch = concat(batch, assemble(rea, rea_refs, cfg.context));
      train += lstm_loss(w, batch, &grad) / static_cast<double>(per_epoch);
      ++step;
      m1 = b1 * m1 + (1 - b1) * grad;
      m2 = b2 * m2 + (1 - b2) * grad.cwiseProduct(grad);
      const double c1 = 1 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1 - std::pow(b2, static_cast<double>(step));
      theta -= lr * ((m1 / c1).array() / ((m2 / c2).array().sqrt() + adam_eps)).matrix();
      w.unflatten(theta);
    }
    const double v = lstm_loss(w, val);
    if (!std::isfinite(train) || !std::isfinite(v)) {
      result.history.push_back({{"epoch", e}, {"train", train}, {"val", v}, {"p_rea", p}, {"lr", lr}, {"rejected", true}});
      if (++rejected > 10) throw NumericalError("surrogate training diverged; history: " + result.history.dump());
      theta = theta0;
      m1 = m10;
      m2 = m20;
      step = step0;
      rng = rng0;
      w.unflatten(theta);
      lr *= 0.5;
      --e;
      continue;
    }
    result.history.push_back({{"epoch", e}, {"train", train}, {"val", v}, {"p_rea", p}, {"lr", lr}});
    const bool stop = stopper.update(v);
    if (stopper.improved()) {
      result.weights = w;
      result.best_epoch = e;
    }
    if (stop) break;
  }
  return result;
}

namespace {

std::vector<double> raw(const double* p, Eigen::Index n) { return {p, p + n}; }

}  // namespace

void save_surrogate(const std::filesystem::path& dir, const LstmWeights& w, const json& extra) {
  json m;
  m["format"] = "ensobridge-surrogate";
  m["dim"] = w.dim;
  m["hidden"] = w.hidden;
  m["layers"] = w.layers.size();
  m["gate_order"] = "i,g,o,f";
  m["storage"] = "column-major";
  m["extra"] = extra;
  fieldkit::Blocks blocks;
  blocks.emplace_back("W_in", raw(w.W_in.data(), w.W_in.size()));
  blocks.emplace_back("b_in", raw(w.b_in.data(), w.b_in.size()));
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const auto s = std::to_string(l);
    blocks.emplace_back("W" + s, raw(w.layers[l].W.data(), w.layers[l].W.size()));
    blocks.emplace_back("U" + s, raw(w.layers[l].U.data(), w.layers[l].U.size()));
    blocks.emplace_back("b" + s, raw(w.layers[l].b.data(), w.layers[l].b.size()));
  }
  blocks.emplace_back("W_out", raw(w.W_out.data(), w.W_out.size()));
  blocks.emplace_back("b_out", raw(w.b_out.data(), w.b_out.size()));
  fieldkit::write_block_artifact(dir, m, blocks);
}

LstmWeights load_surrogate(const std::filesystem::path& dir, json* manifest) {
  fieldkit::Blocks blocks;
  const json m = fieldkit::read_block_artifact(dir, blocks);
  if (m.value("format", "") != "ensobridge-surrogate") throw DataError(dir.string() + " is not a surrogate artifact");
  LstmWeights w = LstmWeights::zeros(m.at("dim"), m.at("hidden"), m.at("layers"));
  auto load = [&](const std::string& name, double* p, Eigen::Index n) {
    const auto& v = fieldkit::find_block(blocks, name);
    if (static_cast<Eigen::Index>(v.size()) != n) throw DataError("surrogate block " + name + " has the wrong size");
    std::copy(v.begin(), v.end(), p);
  };
  load("W_in", w.W_in.data(), w.W_in.size());
  load("b_in", w.b_in.data(), w.b_in.size());
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const auto s = std::to_string(l);
    load("W" + s, w.layers[l].W.data(), w.layers[l].W.size());
    load("U" + s, w.layers[l].U.data(), w.layers[l].U.size());
    load("b" + s, w.layers[l].b.data(), w.layers[l].b.size());
  }
  load("W_out", w.W_out.data(), w.W_out.size());
  load("b_out", w.b_out.data(), w.b_out.size());
  if (manifest) *manifest = m;
  return w;
}

}  // namespace ensobridge::surrogate
