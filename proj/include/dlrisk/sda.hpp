#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dlrisk/classifier.hpp"
#include "dlrisk/core.hpp"
#include "dlrisk/nn.hpp"

/// Stacked denoising autoencoders: layer-wise unsupervised pre-training,
/// a softmax head fine-tuned end to end, and inspection of hidden units.
namespace dlrisk::sda {

enum class CorruptionMode {
  Mask,  ///< corrupted coordinates are set to 0
  Flip   ///< corrupted coordinates become 1 - x
};

/// Corrupts each coordinate independently with probability q.
Matrix corrupt(const Matrix& x, double q, Rng& rng, CorruptionMode mode = CorruptionMode::Mask);

enum class ReconstructionLoss { CrossEntropy, Mse };

struct DenoisingAutoencoder {
  nn::DenseLayer<double> encoder;
  nn::DenseLayer<double> decoder;
  double corruption = 0.0;
  CorruptionMode corruption_mode = CorruptionMode::Mask;
  /// Decoder weights are the encoder's transpose (the decoder's own W is ignored).
  bool tied = false;
  ReconstructionLoss loss = ReconstructionLoss::CrossEntropy;

  /// Xavier-initialised dA; the decoder is sigmoid for cross entropy, linear for MSE.
  static DenoisingAutoencoder make(Eigen::Index inputs, Eigen::Index hidden, nn::Activation encoder_activation,
                                   double corruption, Rng& rng,
                                   ReconstructionLoss loss = ReconstructionLoss::CrossEntropy);

  Eigen::Index inputs() const { return encoder.inputs(); }
  Eigen::Index hidden() const { return encoder.outputs(); }
  Matrix encode(const Matrix& x) const;
  /// Reconstruction of a clean input.
  Matrix reconstruct(const Matrix& x) const;
  /// Data term of the training loss on clean input (no weight penalty).
  double reconstruction_error(const Matrix& x) const;
};

struct TrainSchedule {
  int epochs = 10;
  int batch_size = 64;
};

/// Minibatch SGD on the reconstruction loss of corrupted inputs against clean
/// ones, plus lambda (||W||^2 + ||W~||^2). Returns the mean training loss per
/// epoch.
std::vector<double> train_da(const Matrix& data, DenoisingAutoencoder& da, nn::OptimizerState<double>& opt,
                             const TrainSchedule& schedule, Rng& rng);

struct LayerSpec {
  int hidden = 32;
  double corruption = 0.1;
  nn::Activation activation = nn::Activation::Sigmoid;
};

struct PretrainConfig {
  std::vector<LayerSpec> layers;
  TrainSchedule schedule;
  double learning_rate = 0.1;
  double decay = 0.0;
  double momentum = 0.9;
  double lambda = 0.0;
};

/// Headless stack of pre-trained encoders.
struct StackedNetwork {
  std::vector<DenoisingAutoencoder> layers;
  /// Mean training loss per epoch, per layer.
  std::vector<std::vector<double>> loss_curves;

  Matrix encode(const Matrix& x) const;
};

/// Trains layer l on the codes of layer l - 1 (layer 0 on the data).
/// Labels are never seen.
StackedNetwork stack_pretrain(const Matrix& data, const PretrainConfig& config, Rng& rng);

struct HyperParams {
  std::vector<int> hidden = {32, 128, 128, 32};
  /// Corruption and dropout rates shared by every hidden layer.
  double corruption = 0.1;
  double dropout = 0.1;
  double lambda = 1e-4;
  double learning_rate = 0.3;
  double decay = 0.01;
  double momentum = 0.9;
  int batch_size = 64;
  int pretrain_epochs = 3;
  int finetune_epochs = 40;
  int patience = 10;
  bool batch_norm = true;
  bool pretrain = true;
  nn::Activation activation = nn::Activation::Sigmoid;
  /// Share of training rows (grouped by trader when groups are given) held
  /// out for early stopping.
  double validation_fraction = 0.15;

  void validate() const;
  std::string to_json() const;
  static HyperParams from_json(const std::string& text);

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

struct FineTuneResult {
  nn::Network<double> network;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = 0;
};

/// Splits rows into (train, validation) indices; grouped rows stay together
/// and both parts keep both classes whenever possible.
std::pair<std::vector<int>, std::vector<int>> holdout_split(const IntVector& y,
                                                            const std::vector<std::int64_t>* groups,
                                                            double fraction, std::uint64_t seed);

/// Hidden blocks initialised from `stack` (Xavier when it is empty), a
/// two-unit softmax head, and dropout after every hidden block. Batch norm,
/// when enabled, starts as the identity on the training data so pre-trained
/// codes are preserved at the start of fine-tuning.
nn::Network<double> build_classifier_network(const StackedNetwork& stack, const Matrix& x, const HyperParams& hp,
                                             Rng& rng);

/// Backpropagation of the mean negative log-likelihood through every layer,
/// with early stopping on the held-out rows. Class 1 is the hedge class.
FineTuneResult fine_tune(nn::Network<double> network, const Matrix& x_train, const IntVector& y_train,
                         const Matrix& x_valid, const IntVector& y_valid, const HyperParams& hp, Rng& rng);

/// P(class 1) per row; predict-mode dropout and running batch-norm statistics.
Vector predict_proba(const nn::Network<double>& network, const Matrix& x);

class SdaClassifier : public Classifier {
 public:
  explicit SdaClassifier(HyperParams hp = {}) : hp_(std::move(hp)) { hp_.validate(); }

  std::string kind() const override { return "sda"; }
  void fit(const Matrix& x, const IntVector& y, const FitContext& ctx) override;
  Vector predict_proba(const Matrix& x) const override;
  std::string to_json() const override;

  const HyperParams& hyper_params() const { return hp_; }
  const nn::Network<double>& network() const { return network_; }
  const FineTuneResult& history() const { return history_; }
  void set_network(nn::Network<double> net) { network_ = std::move(net); }

  void save(const std::filesystem::path& path) const;
  static SdaClassifier load(const std::filesystem::path& path);

 private:
  HyperParams hp_;
  nn::Network<double> network_;
  FineTuneResult history_;
};

/// Bounds of the random search; rates uniform, lambda and learning rate
/// log-uniform, discrete options picked uniformly.
struct SearchSpace {
  std::pair<double, double> corruption{0.0, 0.4};
  std::pair<double, double> dropout{0.0, 0.4};
  std::pair<double, double> lambda{1e-6, 1e-2};
  std::pair<double, double> learning_rate{0.02, 0.5};
  std::pair<double, double> decay{0.0, 0.05};
  std::pair<double, double> momentum{0.5, 0.95};
  std::vector<int> batch_sizes{32, 64, 128};
  std::vector<std::vector<int>> topologies{{32, 128, 128, 32}};

  void validate() const;
};

struct Trial {
  int index = 0;
  HyperParams params;
  std::uint64_t seed = 0;
  double validation_auc = 0.0;
  int best_epoch = 0;
};

struct SearchResult {
  HyperParams best;
  int best_index = 0;
  std::vector<Trial> trials;
};

/// Draws `budget` configurations (other fields from `base`), fits each on an
/// internal split of the data and keeps the one with the highest held-out AUC.
SearchResult random_search(const Matrix& x, const IntVector& y, const std::vector<std::int64_t>* groups,
                           const SearchSpace& space, const HyperParams& base, int budget, std::uint64_t seed);

/// One JSON object per trial and line.
void write_trial_log(const SearchResult& result, const std::filesystem::path& path);

/// Predict-mode outputs of hidden block `layer` (0 = first hidden layer),
/// after its activation and before dropout scaling.
Matrix hidden_activations(const nn::Network<double>& network, const Matrix& x, std::size_t layer);

struct NeuronHistogram {
  int neuron = 0;
  /// bins + 1 shared edges
  std::vector<double> edges;
  std::vector<int> counts_hedge;
  std::vector<int> counts_no_hedge;
  /// Jensen-Shannon divergence (base 2) between the class histograms.
  double js_divergence = 0.0;
};

std::vector<NeuronHistogram> activation_histogram(const nn::Network<double>& network, const Matrix& x,
                                                  const IntVector& y, std::size_t layer = 0, int bins = 20);

double js_divergence(const std::vector<int>& a, const std::vector<int>& b);

struct StimulusReport {
  int neuron = -1;
  double threshold = 0.0;
  /// Hedge-class share of rows at or above the threshold.
  double purity = 0.0;
  int majority_class = 1;
  /// Rows sorted by decreasing activation.
  std::vector<int> rows;
  std::vector<double> activation;
  std::vector<double> pnl;
  double profit_fraction = 0.0;
  double base_profit_rate = 0.0;
};

/// Scans `thresholds` equally spaced thresholds between each first-layer
/// neuron's min and max activation, picks the (neuron, threshold) with the
/// highest hedge-class share among at least `n` rows above it (constant
/// neurons are skipped), and reports that neuron's `n` most-activating rows
/// with their P&L.
StimulusReport top_stimuli(const nn::Network<double>& network, const Matrix& x, const IntVector& y,
                           const Vector& pnl, int n = 100, int thresholds = 20);

}  // namespace dlrisk::sda
