#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "ensobridge/core.hpp"
#include "ensobridge/curriculum.hpp"

namespace ensobridge::surrogate {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Gate blocks are stacked in the order i, g, o, f.
struct LstmLayer {
  MatrixXd W;  // 4H x in
  MatrixXd U;  // 4H x H
  VectorXd b;  // 4H
};

struct LstmWeights {
  int dim = 0;     // augmented-state size
  int hidden = 0;  // H
  MatrixXd W_in;   // H x dim, followed by ELU
  VectorXd b_in;
  std::vector<LstmLayer> layers;
  MatrixXd W_out;  // dim x H, applied to ELU(h) then tanh
  VectorXd b_out;

  static LstmWeights zeros(int dim, int hidden, int n_layers = 2);
  static LstmWeights random(int dim, int hidden, int n_layers, Rng& rng);
  Eigen::Index n_params() const;
  VectorXd flatten() const;
  void unflatten(const VectorXd& theta);
};

// context[k] is the batch (dim x B) at step k, oldest first. States start at zero.
MatrixXd lstm_forward(const LstmWeights& w, const std::vector<MatrixXd>& context);

struct Batch {
  std::vector<MatrixXd> context;  // context_len matrices, dim x B
  MatrixXd target;                // dim x B
};

// MSE over all entries and its full BPTT gradient (flattened like the weights).
double lstm_loss(const LstmWeights& w, const Batch& batch, VectorXd* grad = nullptr);

class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}
  // Returns true when training should stop.
  bool update(double val_loss);
  bool improved() const { return improved_; }
  double best() const { return best_; }

 private:
  int patience_;
  int since_best_ = 0;
  bool improved_ = false;
  double best_ = std::numeric_limits<double>::infinity();
};

struct SurrogateConfig {
  int context = 2;
  int hidden = 0;  // 0: augmented dimension
  int layers = 2;
  int batch_size = 32;
  double learning_rate = 2e-3;
  int max_epochs = 150;
  int patience = 20;
  double val_fraction = 0.05;
  void validate() const;
};

// Each sequence is dim x T in chronological order; windows never cross
// sequence boundaries.
struct SequenceSet {
  std::vector<MatrixXd> sequences;
};

struct TrainResult {
  LstmWeights weights;
  nlohmann::json history = nlohmann::json::array();  // per epoch: train, val, p_rea
  int best_epoch = 0;
};

TrainResult train_surrogate(const SequenceSet& om, const SequenceSet& rea, const CurriculumSchedule& schedule,
                            const SurrogateConfig& cfg, std::uint64_t seed);

// Windows (inputs and targets) over a set; the chronologically final
// val_fraction of each sequence's windows goes to the second batch.
std::pair<Batch, Batch> split_windows(const SequenceSet& set, int context, double val_fraction);

void save_surrogate(const std::filesystem::path& dir, const LstmWeights& w, const nlohmann::json& extra = {});
LstmWeights load_surrogate(const std::filesystem::path& dir, nlohmann::json* manifest = nullptr);

}  // namespace ensobridge::surrogate
