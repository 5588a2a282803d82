#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "alpsim/terrain.hpp"

namespace alpsim::model {

// Two-layer per-pixel classifier: k*k*D window features -> hidden tanh
// layer with dropout -> C logits. The minimal architecture that keeps MC
// dropout non-degenerate.
struct Weights {
  Eigen::MatrixXd w1;  // hidden x feature
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // classes x hidden
  Eigen::VectorXd b2;  // classes

  bool all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
  }
  bool operator==(const Weights& o) const {
    return w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
  }
};

struct ModelState {
  int num_classes = 0;
  int input_dim = 0;      // per-pixel feature dimension D
  int window = 3;         // context window side k (odd)
  int hidden_units = 32;
  double dropout_rate = 0.5;  // p = 0 disables MC dropout
  Weights weights;
  Weights checkpoint;  // frozen pretraining result, reset target

  int feature_dim() const { return window * window * input_dim; }
};

// Accumulated labelled training data; labels come from the annotation
// oracle, not from the image's own ground truth.
struct LabeledImage {
  terrain::ImageSample image;
  std::vector<std::uint8_t> labels;  // pixel-major, same layout as the image
};

struct TrainSet {
  std::vector<LabeledImage> items;
  int size() const { return static_cast<int>(items.size()); }
  bool empty() const { return items.empty(); }
};

// Posterior predictive (MC-integrated softmax mean), normalized BALD
// mutual information, and the across-sample variance of the softmax
// outputs. Pixel-major layout matching ImageSample.
struct PredictiveOutput {
  int width_px = 0;
  int height_px = 0;
  int num_classes = 0;
  std::vector<double> probs;        // pixel-major, C inner, rows sum to 1
  std::vector<double> mi;           // pixel-major, in [0, 1]
  std::vector<double> mc_variance;  // pixel-major, C inner, >= 0
};

struct TrainConfig {
  int epochs = 50;             // maximum epochs
  int batch_size = 8;
  double learning_rate = 0.05;
  double weight_decay = 0.0;   // lambda
  int patience = 5;            // epochs without val improvement; 0 disables
  int pixels_per_image = 0;    // training pixels sampled per image; 0 = all
  double val_fraction = 0.1;
};

struct TrainingDivergedError : std::runtime_error {
  TrainingDivergedError(const std::string& msg, double last_loss)
      : std::runtime_error(msg), last_finite_loss(last_loss) {}
  double last_finite_loss;
};

ModelState make_model(int num_classes, int input_dim, int window,
                      int hidden_units, double dropout_rate,
                      std::uint64_t seed);

// Weight-decay schedule lambda = (1 - p) / 2N for N collected images.
double weight_decay_for(double dropout_rate, int num_images);

// Pixel window extraction with edge replication; one row per pixel.
Eigen::MatrixXd build_design_matrix(const terrain::ImageSample& image,
                                    int window);

struct SampleBatch {
  Eigen::MatrixXd x;       // n x feature
  std::vector<int> labels; // n
};

// Mean dropout-masked negative log likelihood plus weight decay, with the
// dropout masks given explicitly (one row per sample). Pure; the analytic
// gradient is validated against central finite differences.
double loss_with_masks(const Weights& w, const SampleBatch& batch,
                       const Eigen::MatrixXd& masks, double keep_prob,
                       double weight_decay);
Weights loss_gradient(const Weights& w, const SampleBatch& batch,
                      const Eigen::MatrixXd& masks, double keep_prob,
                      double weight_decay, double* loss_out = nullptr);

// Deterministic (dropout-free) loss, used for validation early stopping.
double loss_deterministic(const Weights& w, const SampleBatch& batch,
                          double weight_decay);

// Mini-batch gradient descent on the dropout-masked cross entropy with
// weight decay. Early-stops when the validation loss fails to improve for
// `patience` epochs and returns the best snapshot. The input model is
// untouched; its checkpoint is carried over.
ModelState train(const ModelState& model, const TrainSet& data,
                 const TrainConfig& cfg, std::uint64_t rng_seed);

// One forward pass with an independently sampled dropout mask (shared by
// all pixels of the image, i.e. one weight realisation). mi and
// mc_variance are zero.
PredictiveOutput predict_pass(const ModelState& model,
                              const terrain::ImageSample& image,
                              std::uint64_t mask_seed);

// MC-dropout prediction: probs is the mean of T softmax passes with masks
// seeded from mix_seed(rng_seed, t); mi is the normalized mutual
// information between predictions and the weight posterior; mc_variance the
// per-class sample variance. p = 0 yields the deterministic softmax and
// exactly zero mi.
PredictiveOutput predict_mc(const ModelState& model,
                            const terrain::ImageSample& image, int T,
                            std::uint64_t rng_seed);

// Entropy of the mean minus mean entropy, normalized by ln C; clamped to
// [0, 1] and exactly 0 when all samples are identical.
double normalized_mutual_information(
    const std::vector<std::vector<double>>& sample_probs);

struct EvalResult {
  double accuracy = 0.0;
  double miou = 0.0;
  double ece = 0.0;
};

// Pixel-wise accuracy, mean IoU over classes present in prediction or
// truth, and expected calibration error over equal-width confidence bins.
EvalResult evaluate(const ModelState& model,
                    const std::vector<terrain::ImageSample>& test_images,
                    int T, int num_ece_bins, std::uint64_t rng_seed);

// Metrics on explicit predictions; evaluate() is a thin wrapper over this.
EvalResult metrics_from_predictions(
    const std::vector<const terrain::ImageSample*>& images,
    const std::vector<const PredictiveOutput*>& outputs, int num_ece_bins);

ModelState reset_to_checkpoint(const ModelState& model);
ModelState freeze_checkpoint(const ModelState& model);

// FNV-1a over the little-endian weight bytes.
std::uint64_t weights_hash(const Weights& w);

// Versioned binary checkpoint file: magic, version, dims, p, weights as
// little-endian 64-bit floats.
void save_model(const ModelState& model, const std::string& path);
ModelState load_model(const std::string& path);

}  // namespace alpsim::model
