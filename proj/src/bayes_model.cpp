#include "alpsim/bayes_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "alpsim/rng.hpp"

namespace alpsim::model {

namespace {

Eigen::MatrixXd softmax_rows(Eigen::MatrixXd logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - m).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

double entropy(const double* p, int n) {
  double h = 0.0;
  for (int i = 0; i < n; ++i)
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  return h;
}

// hidden activations after tanh, before dropout
Eigen::MatrixXd hidden_tanh(const Weights& w, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a = x * w.w1.transpose();
  a.rowwise() += w.b1.transpose();
  return a.array().tanh().matrix();
}

Eigen::MatrixXd logits_from_hidden(const Weights& w,
                                   const Eigen::MatrixXd& hidden) {
  Eigen::MatrixXd l = hidden * w.w2.transpose();
  l.rowwise() += w.b2.transpose();
  return l;
}

void sample_mask_vector(Rng& rng, double dropout_rate, Eigen::VectorXd& mask) {
  for (Eigen::Index j = 0; j < mask.size(); ++j)
    mask[j] = rng.uniform() >= dropout_rate ? 1.0 : 0.0;
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void write_f64_le(std::ostream& out, double v) {
  const auto u = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xff);
  out.write(b, 8);
}

double read_f64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64_le(out, m(r, c));
}

void read_matrix(std::istream& in, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_f64_le(in);
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) write_f64_le(out, v[i]);
}

void read_vector(std::istream& in, Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = read_f64_le(in);
}

constexpr char kModelMagic[8] = {'A', 'L', 'P', 'S', 'M', 'D', 'L', '\n'};

}  // namespace

ModelState make_model(int num_classes, int input_dim, int window,
                      int hidden_units, double dropout_rate,
                      std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (window < 1 || window % 2 == 0)
    throw std::invalid_argument("window must be odd and positive");
  if (hidden_units < 1)
    throw std::invalid_argument("hidden_units must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw std::invalid_argument("dropout_rate must lie in [0, 1)");

  ModelState m;
  m.num_classes = num_classes;
  m.input_dim = input_dim;
  m.window = window;
  m.hidden_units = hidden_units;
  m.dropout_rate = dropout_rate;

  const int f = m.feature_dim();
  Rng rng(mix_seed(seed, 0x1717));
  m.weights.w1.resize(hidden_units, f);
  m.weights.b1 = Eigen::VectorXd::Zero(hidden_units);
  m.weights.w2.resize(num_classes, hidden_units);
  m.weights.b2 = Eigen::VectorXd::Zero(num_classes);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(f));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_units));
  for (int r = 0; r < hidden_units; ++r)
    for (int c = 0; c < f; ++c) m.weights.w1(r, c) = s1 * rng.normal();
  for (int r = 0; r < num_classes; ++r)
    for (int c = 0; c < hidden_units; ++c)
      m.weights.w2(r, c) = s2 * rng.normal();
  m.checkpoint = m.weights;
  return m;
}

double weight_decay_for(double dropout_rate, int num_images) {
  if (num_images < 1) throw std::invalid_argument("num_images must be >= 1");
  return (1.0 - dropout_rate) / (2.0 * num_images);
}

Eigen::MatrixXd build_design_matrix(const terrain::ImageSample& image,
                                    int window) {
  if (window < 1 || window % 2 == 0)
    throw std::invalid_argument("window must be odd and positive");
  const int w = image.width_px, h = image.height_px, d = image.feature_dim;
  const int r = window / 2;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(w) * h,
                    static_cast<Eigen::Index>(window) * window * d);
  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      const Eigen::Index row = image.pixel_index(px, py);
      int col = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const int ny = std::clamp(py + dy, 0, h - 1);
        for (int dx = -r; dx <= r; ++dx) {
          const int nx = std::clamp(px + dx, 0, w - 1);
          const auto f = image.features_at(nx, ny);
          for (int k = 0; k < d; ++k) x(row, col++) = f[k];
        }
      }
    }
  }
  return x;
}

double loss_with_masks(const Weights& w, const SampleBatch& batch,
                       const Eigen::MatrixXd& masks, double keep_prob,
                       double weight_decay) {
  const Eigen::Index n = batch.x.rows();
  const Eigen::MatrixXd t = hidden_tanh(w, batch.x);
  const Eigen::MatrixXd dropped =
      (t.array() * masks.array() / keep_prob).matrix();
  const Eigen::MatrixXd probs = softmax_rows(logits_from_hidden(w, dropped));
  double nll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    nll -= std::log(std::max(probs(i, batch.labels[i]),
                             std::numeric_limits<double>::min()));
  nll /= static_cast<double>(n);
  return nll + weight_decay * (w.w1.squaredNorm() + w.w2.squaredNorm());
}

Weights loss_gradient(const Weights& w, const SampleBatch& batch,
                      const Eigen::MatrixXd& masks, double keep_prob,
                      double weight_decay, double* loss_out) {
  const Eigen::Index n = batch.x.rows();
  const Eigen::MatrixXd t = hidden_tanh(w, batch.x);
  const Eigen::MatrixXd dropped =
      (t.array() * masks.array() / keep_prob).matrix();
  const Eigen::MatrixXd probs = softmax_rows(logits_from_hidden(w, dropped));

  if (loss_out) {
    double nll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      nll -= std::log(std::max(probs(i, batch.labels[i]),
                               std::numeric_limits<double>::min()));
    nll /= static_cast<double>(n);
    *loss_out = nll + weight_decay * (w.w1.squaredNorm() + w.w2.squaredNorm());
  }

  Eigen::MatrixXd dlogits = probs;
  for (Eigen::Index i = 0; i < n; ++i) dlogits(i, batch.labels[i]) -= 1.0;
  dlogits /= static_cast<double>(n);

  Weights g;
  g.w2 = dlogits.transpose() * dropped + 2.0 * weight_decay * w.w2;
  g.b2 = dlogits.colwise().sum().transpose();
  const Eigen::MatrixXd ddropped = dlogits * w.w2;
  const Eigen::MatrixXd dt =
      (ddropped.array() * masks.array() / keep_prob).matrix();
  const Eigen::MatrixXd da = (dt.array() * (1.0 - t.array().square())).matrix();
  g.w1 = da.transpose() * batch.x + 2.0 * weight_decay * w.w1;
  g.b1 = da.colwise().sum().transpose();
  return g;
}

double loss_deterministic(const Weights& w, const SampleBatch& batch,
                          double weight_decay) {
  const Eigen::MatrixXd probs =
      softmax_rows(logits_from_hidden(w, hidden_tanh(w, batch.x)));
  double nll = 0.0;
  for (Eigen::Index i = 0; i < batch.x.rows(); ++i)
    nll -= std::log(std::max(probs(i, batch.labels[i]),
                             std::numeric_limits<double>::min()));
  nll /= static_cast<double>(batch.x.rows());
  return nll + weight_decay * (w.w1.squaredNorm() + w.w2.squaredNorm());
}

ModelState train(const ModelState& model, const TrainSet& data,
                 const TrainConfig& cfg, std::uint64_t rng_seed) {
  if (data.empty()) throw std::invalid_argument("train set is empty");
  if (cfg.weight_decay < 0.0)
    throw std::invalid_argument("weight_decay must be >= 0");
  if (cfg.batch_size < 1 || cfg.epochs < 1 || cfg.learning_rate <= 0.0)
    throw std::invalid_argument("invalid training configuration");

  // Per-pixel samples drawn from the train images. The per-image pixel
  // subset depends only on (seed, image index) so earlier picks stay fixed
  // as the set grows.
  std::vector<Eigen::VectorXd> rows;
  std::vector<int> labels;
  for (int i = 0; i < data.size(); ++i) {
    const auto& item = data.items[i];
    const Eigen::MatrixXd x = build_design_matrix(item.image, model.window);
    const int n_px = static_cast<int>(x.rows());
    std::vector<int> idx(n_px);
    std::iota(idx.begin(), idx.end(), 0);
    int take = n_px;
    if (cfg.pixels_per_image > 0 && cfg.pixels_per_image < n_px) {
      Rng rng(mix_seed(rng_seed, 0xA000 + static_cast<std::uint64_t>(i)));
      rng.shuffle(idx);
      take = cfg.pixels_per_image;
    }
    for (int j = 0; j < take; ++j) {
      rows.push_back(x.row(idx[j]).transpose());
      labels.push_back(item.labels[idx[j]]);
    }
  }
  const int n = static_cast<int>(rows.size());
  const int f = model.feature_dim();
  Eigen::MatrixXd all_x(n, f);
  for (int i = 0; i < n; ++i) all_x.row(i) = rows[i].transpose();

  // Deterministic train/validation split for the early-stopping monitor.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  {
    Rng rng(mix_seed(rng_seed, 0xB001));
    rng.shuffle(order);
  }
  int n_val = 0;
  if (cfg.patience > 0 && n >= 5)
    n_val = std::max(1, static_cast<int>(std::llround(cfg.val_fraction * n)));
  std::vector<int> val_idx(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx(order.begin() + n_val, order.end());
  if (train_idx.empty()) {
    train_idx = order;
    val_idx.clear();
    n_val = 0;
  }

  SampleBatch monitor;
  {
    const std::vector<int>& src = n_val > 0 ? val_idx : train_idx;
    monitor.x.resize(static_cast<Eigen::Index>(src.size()), f);
    monitor.labels.resize(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      monitor.x.row(static_cast<Eigen::Index>(i)) = all_x.row(src[i]);
      monitor.labels[i] = labels[src[i]];
    }
  }

  const double q = 1.0 - model.dropout_rate;
  Weights w = model.weights;
  Weights best = w;
  double best_monitor = std::numeric_limits<double>::infinity();
  double last_finite_loss = std::numeric_limits<double>::quiet_NaN();
  int stale = 0;

  Rng epoch_rng(mix_seed(rng_seed, 0xC002));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    epoch_rng.shuffle(train_idx);
    for (std::size_t start = 0; start < train_idx.size();
         start += cfg.batch_size) {
      const int nb = static_cast<int>(
          std::min<std::size_t>(cfg.batch_size, train_idx.size() - start));
      SampleBatch batch;
      batch.x.resize(nb, f);
      batch.labels.resize(nb);
      for (int i = 0; i < nb; ++i) {
        batch.x.row(i) = all_x.row(train_idx[start + i]);
        batch.labels[i] = labels[train_idx[start + i]];
      }
      // Eq.-style per-sample dropout masks.
      Eigen::MatrixXd masks = Eigen::MatrixXd::Ones(nb, model.hidden_units);
      if (model.dropout_rate > 0.0) {
        for (int i = 0; i < nb; ++i)
          for (int j = 0; j < model.hidden_units; ++j)
            masks(i, j) = epoch_rng.uniform() >= model.dropout_rate ? 1.0 : 0.0;
      }
      double loss = 0.0;
      const Weights g =
          loss_gradient(w, batch, masks, q, cfg.weight_decay, &loss);
      if (!std::isfinite(loss))
        throw TrainingDivergedError("training loss is no longer finite",
                                    last_finite_loss);
      last_finite_loss = loss;
      w.w1 -= cfg.learning_rate * g.w1;
      w.b1 -= cfg.learning_rate * g.b1;
      w.w2 -= cfg.learning_rate * g.w2;
      w.b2 -= cfg.learning_rate * g.b2;
    }

    const double monitor_loss = loss_deterministic(w, monitor, cfg.weight_decay);
    if (!std::isfinite(monitor_loss))
      throw TrainingDivergedError("validation loss is no longer finite",
                                  last_finite_loss);
    if (monitor_loss < best_monitor - 1e-12) {
      best_monitor = monitor_loss;
      best = w;
      stale = 0;
    } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
      break;
    }
  }

  ModelState out = model;
  out.weights = cfg.patience > 0 ? best : w;
  return out;
}

namespace {

PredictiveOutput run_mc(const ModelState& model,
                        const terrain::ImageSample& image, int T,
                        std::uint64_t rng_seed) {
  const Eigen::MatrixXd x = build_design_matrix(image, model.window);
  if (!x.allFinite())
    throw std::invalid_argument("image features must be finite");
  const Eigen::Index n = x.rows();
  const int c = model.num_classes;

  PredictiveOutput out;
  out.width_px = image.width_px;
  out.height_px = image.height_px;
  out.num_classes = c;
  out.probs.assign(n * c, 0.0);
  out.mi.assign(n, 0.0);
  out.mc_variance.assign(n * c, 0.0);

  const Eigen::MatrixXd t = hidden_tanh(model.weights, x);

  if (model.dropout_rate == 0.0 || T == 1) {
    // All passes share one weight realisation: the predictive mean equals
    // the single pass and the mutual information is exactly 0.
    Eigen::MatrixXd probs;
    if (model.dropout_rate == 0.0) {
      probs = softmax_rows(logits_from_hidden(model.weights, t));
    } else {
      Eigen::VectorXd mask(model.hidden_units);
      Rng rng(mix_seed(rng_seed, 0));
      sample_mask_vector(rng, model.dropout_rate, mask);
      const double q = 1.0 - model.dropout_rate;
      const Eigen::MatrixXd dropped =
          (t.array().rowwise() * (mask.transpose().array() / q)).matrix();
      probs = softmax_rows(logits_from_hidden(model.weights, dropped));
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 0; k < c; ++k) out.probs[i * c + k] = probs(i, k);
    return out;
  }

  const double q = 1.0 - model.dropout_rate;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, c);
  Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(n, c);
  Eigen::VectorXd sum_entropy = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd first;
  std::vector<char> all_same(n, 1);

  for (int pass = 0; pass < T; ++pass) {
    Eigen::VectorXd mask(model.hidden_units);
    Rng rng(mix_seed(rng_seed, static_cast<std::uint64_t>(pass)));
    sample_mask_vector(rng, model.dropout_rate, mask);
    const Eigen::MatrixXd dropped =
        (t.array().rowwise() * (mask.transpose().array() / q)).matrix();
    const Eigen::MatrixXd probs =
        softmax_rows(logits_from_hidden(model.weights, dropped));
    sum += probs;
    sum_sq += probs.cwiseProduct(probs);
    for (Eigen::Index i = 0; i < n; ++i) {
      double h = 0.0;
      for (int k = 0; k < c; ++k) {
        const double p = probs(i, k);
        if (p > 0.0) h -= p * std::log(p);
      }
      sum_entropy[i] += h;
    }
    if (pass == 0) {
      first = probs;
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        if (all_same[i] && probs.row(i) != first.row(i)) all_same[i] = 0;
    }
  }

  const double log_c = std::log(static_cast<double>(c));
  for (Eigen::Index i = 0; i < n; ++i) {
    double entropy_of_mean = 0.0;
    for (int k = 0; k < c; ++k) {
      const double mean = sum(i, k) / T;
      out.probs[i * c + k] = mean;
      const double var = (sum_sq(i, k) - T * mean * mean) / (T - 1);
      out.mc_variance[i * c + k] = std::max(var, 0.0);
      if (mean > 0.0) entropy_of_mean -= mean * std::log(mean);
    }
    if (all_same[i]) {
      out.mi[i] = 0.0;
      for (int k = 0; k < c; ++k) out.mc_variance[i * c + k] = 0.0;
    } else {
      const double mi = (entropy_of_mean - sum_entropy[i] / T) / log_c;
      out.mi[i] = std::clamp(mi, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace

PredictiveOutput predict_pass(const ModelState& model,
                              const terrain::ImageSample& image,
                              std::uint64_t mask_seed) {
  const Eigen::MatrixXd x = build_design_matrix(image, model.window);
  if (!x.allFinite())
    throw std::invalid_argument("image features must be finite");
  const Eigen::Index n = x.rows();
  const int c = model.num_classes;
  const Eigen::MatrixXd t = hidden_tanh(model.weights, x);
  Eigen::MatrixXd probs;
  if (model.dropout_rate == 0.0) {
    probs = softmax_rows(logits_from_hidden(model.weights, t));
  } else {
    Eigen::VectorXd mask(model.hidden_units);
    Rng rng(mask_seed);
    sample_mask_vector(rng, model.dropout_rate, mask);
    const double q = 1.0 - model.dropout_rate;
    const Eigen::MatrixXd dropped =
        (t.array().rowwise() * (mask.transpose().array() / q)).matrix();
    probs = softmax_rows(logits_from_hidden(model.weights, dropped));
  }
  PredictiveOutput out;
  out.width_px = image.width_px;
  out.height_px = image.height_px;
  out.num_classes = c;
  out.probs.resize(n * c);
  out.mi.assign(n, 0.0);
  out.mc_variance.assign(n * c, 0.0);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = 0; k < c; ++k) out.probs[i * c + k] = probs(i, k);
  return out;
}

PredictiveOutput predict_mc(const ModelState& model,
                            const terrain::ImageSample& image, int T,
                            std::uint64_t rng_seed) {
  if (T < 1) throw std::invalid_argument("MC sample count T must be >= 1");
  return run_mc(model, image, T, rng_seed);
}

double normalized_mutual_information(
    const std::vector<std::vector<double>>& sample_probs) {
  if (sample_probs.empty())
    throw std::invalid_argument("need at least one sample");
  const int c = static_cast<int>(sample_probs[0].size());
  const int t = static_cast<int>(sample_probs.size());
  bool all_same = true;
  for (const auto& s : sample_probs) {
    if (static_cast<int>(s.size()) != c)
      throw std::invalid_argument("inconsistent sample dimensions");
    if (s != sample_probs[0]) all_same = false;
  }
  if (all_same) return 0.0;
  std::vector<double> mean(c, 0.0);
  double mean_h = 0.0;
  for (const auto& s : sample_probs) {
    for (int k = 0; k < c; ++k) mean[k] += s[k] / t;
    mean_h += entropy(s.data(), c) / t;
  }
  const double mi =
      (entropy(mean.data(), c) - mean_h) / std::log(static_cast<double>(c));
  return std::clamp(mi, 0.0, 1.0);
}

EvalResult metrics_from_predictions(
    const std::vector<const terrain::ImageSample*>& images,
    const std::vector<const PredictiveOutput*>& outputs, int num_ece_bins) {
  if (images.empty() || images.size() != outputs.size())
    throw std::invalid_argument("need matching non-empty images and outputs");
  if (num_ece_bins < 2)
    throw std::invalid_argument("num_ece_bins must be >= 2");

  const int c = outputs[0]->num_classes;
  std::vector<long long> confusion(static_cast<std::size_t>(c) * c, 0);
  std::vector<long long> bin_count(num_ece_bins, 0);
  std::vector<double> bin_conf(num_ece_bins, 0.0);
  std::vector<long long> bin_correct(num_ece_bins, 0);
  long long total = 0, correct = 0;

  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = *images[i];
    const auto& out = *outputs[i];
    const long long n_px = static_cast<long long>(img.width_px) * img.height_px;
    for (long long p = 0; p < n_px; ++p) {
      int pred = 0;
      double conf = out.probs[p * c];
      for (int k = 1; k < c; ++k) {
        if (out.probs[p * c + k] > conf) {
          conf = out.probs[p * c + k];
          pred = k;
        }
      }
      const int truth = img.gt_labels[p];
      ++confusion[static_cast<std::size_t>(truth) * c + pred];
      ++total;
      if (pred == truth) ++correct;
      const int bin =
          std::min(static_cast<int>(conf * num_ece_bins), num_ece_bins - 1);
      ++bin_count[bin];
      bin_conf[bin] += conf;
      if (pred == truth) ++bin_correct[bin];
    }
  }

  EvalResult res;
  res.accuracy = static_cast<double>(correct) / total;

  double iou_sum = 0.0;
  int iou_classes = 0;
  for (int k = 0; k < c; ++k) {
    const long long tp = confusion[static_cast<std::size_t>(k) * c + k];
    long long fn = 0, fp = 0;
    for (int j = 0; j < c; ++j) {
      if (j == k) continue;
      fn += confusion[static_cast<std::size_t>(k) * c + j];
      fp += confusion[static_cast<std::size_t>(j) * c + k];
    }
    if (tp + fp + fn == 0) continue;  // absent from prediction and truth
    iou_sum += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    ++iou_classes;
  }
  res.miou = iou_classes > 0 ? iou_sum / iou_classes : 1.0;

  double ece = 0.0;
  for (int b = 0; b < num_ece_bins; ++b) {
    if (bin_count[b] == 0) continue;
    const double acc_b = static_cast<double>(bin_correct[b]) / bin_count[b];
    const double conf_b = bin_conf[b] / bin_count[b];
    ece += (static_cast<double>(bin_count[b]) / total) * std::fabs(acc_b - conf_b);
  }
  res.ece = ece;
  return res;
}

EvalResult evaluate(const ModelState& model,
                    const std::vector<terrain::ImageSample>& test_images,
                    int T, int num_ece_bins, std::uint64_t rng_seed) {
  if (test_images.empty()) throw std::invalid_argument("test set is empty");
  std::vector<PredictiveOutput> outputs;
  outputs.reserve(test_images.size());
  for (std::size_t i = 0; i < test_images.size(); ++i)
    outputs.push_back(
        predict_mc(model, test_images[i], T, mix_seed(rng_seed, 0xE7A1 + i)));
  std::vector<const terrain::ImageSample*> imgs;
  std::vector<const PredictiveOutput*> outs;
  for (std::size_t i = 0; i < test_images.size(); ++i) {
    imgs.push_back(&test_images[i]);
    outs.push_back(&outputs[i]);
  }
  return metrics_from_predictions(imgs, outs, num_ece_bins);
}

ModelState reset_to_checkpoint(const ModelState& model) {
  ModelState out = model;
  out.weights = model.checkpoint;
  return out;
}

ModelState freeze_checkpoint(const ModelState& model) {
  ModelState out = model;
  out.checkpoint = model.weights;
  return out;
}

std::uint64_t weights_hash(const Weights& w) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](double v) {
    const auto u = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (u >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  for (Eigen::Index r = 0; r < w.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < w.w1.cols(); ++c) feed(w.w1(r, c));
  for (Eigen::Index i = 0; i < w.b1.size(); ++i) feed(w.b1[i]);
  for (Eigen::Index r = 0; r < w.w2.rows(); ++r)
    for (Eigen::Index c = 0; c < w.w2.cols(); ++c) feed(w.w2(r, c));
  for (Eigen::Index i = 0; i < w.b2.size(); ++i) feed(w.b2[i]);
  return h;
}

void save_model(const ModelState& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kModelMagic, sizeof(kModelMagic));
  write_u32_le(out, 1);  // version
  write_u32_le(out, static_cast<std::uint32_t>(model.num_classes));
  write_u32_le(out, static_cast<std::uint32_t>(model.input_dim));
  write_u32_le(out, static_cast<std::uint32_t>(model.window));
  write_u32_le(out, static_cast<std::uint32_t>(model.hidden_units));
  write_f64_le(out, model.dropout_rate);
  write_matrix(out, model.weights.w1);
  write_vector(out, model.weights.b1);
  write_matrix(out, model.weights.w2);
  write_vector(out, model.weights.b2);
  if (!out) throw std::runtime_error("write failed for " + path);
}

ModelState load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kModelMagic, 8) != 0)
    throw std::runtime_error(path + ": not an alpsim model file");
  const std::uint32_t version = read_u32_le(in);
  if (version != 1)
    throw std::runtime_error(path + ": unsupported model version");
  ModelState m;
  m.num_classes = static_cast<int>(read_u32_le(in));
  m.input_dim = static_cast<int>(read_u32_le(in));
  m.window = static_cast<int>(read_u32_le(in));
  m.hidden_units = static_cast<int>(read_u32_le(in));
  m.dropout_rate = read_f64_le(in);
  if (m.num_classes < 2 || m.input_dim < 1 || m.window < 1 ||
      m.hidden_units < 1 || !(m.dropout_rate >= 0.0 && m.dropout_rate < 1.0))
    throw std::runtime_error(path + ": invalid model header");
  m.weights.w1.resize(m.hidden_units, m.feature_dim());
  m.weights.b1.resize(m.hidden_units);
  m.weights.w2.resize(m.num_classes, m.hidden_units);
  m.weights.b2.resize(m.num_classes);
  read_matrix(in, m.weights.w1);
  read_vector(in, m.weights.b1);
  read_matrix(in, m.weights.w2);
  read_vector(in, m.weights.b2);
  if (!in) throw std::runtime_error(path + ": truncated model file");
  if (!m.weights.all_finite())
    throw std::runtime_error(path + ": non-finite weights");
  m.checkpoint = m.weights;
  return m;
}

}  // namespace alpsim::model
