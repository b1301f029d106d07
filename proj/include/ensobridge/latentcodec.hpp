#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ensobridge/core.hpp"
#include "ensobridge/curriculum.hpp"
#include "ensobridge/fieldkit.hpp"

namespace ensobridge::latent {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { Identity, Tanh, Elu, Gelu, Sigmoid };
const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Fully connected network acting on column batches.
class Mlp {
 public:
  struct Layer {
    MatrixXd W;
    VectorXd b;
    Activation act = Activation::Identity;
  };
  struct Cache {
    std::vector<MatrixXd> inputs, pre;
  };

  Mlp() = default;
  Mlp(const std::vector<int>& sizes, const std::vector<Activation>& acts, Rng& rng);

  MatrixXd forward(const MatrixXd& X, Cache* cache = nullptr) const;
  // Returns dL/dX and fills grads (same shapes as layers) from dL/dY.
  MatrixXd backward(const Cache& cache, const MatrixXd& dY, std::vector<Layer>& grads) const;

  int in_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().W.cols()); }
  int out_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().W.rows()); }
  Eigen::Index n_params() const;
  VectorXd flatten() const;
  void unflatten(const VectorXd& theta);
  static VectorXd flatten(const std::vector<Layer>& layers);

  std::vector<Layer> layers;
};

MatrixXd apply_activation(Activation a, const MatrixXd& x);
// Derivative evaluated from the pre-activation.
MatrixXd activation_derivative(Activation a, const MatrixXd& pre);

// C(j, i): Pearson correlation across the batch (columns) between latent row
// j of Z and observable row i of Y.
MatrixXd correlation_matrix(const MatrixXd& Z, const MatrixXd& Y, double eps = 1e-8);

struct LossParts {
  double L = 0, recon = 0, corr = 0;
};

struct LossGradients {
  MatrixXd dXhat, dZ;
};

// X, Xhat: D x B; Z: n_l x B; Y: n_o x B.
LossParts composite_loss(const MatrixXd& X, const MatrixXd& Xhat, const MatrixXd& Z,
                         const MatrixXd& Y, double lambda, double eps = 1e-8,
                         LossGradients* grads = nullptr);

enum class CodecKind { POD, Nonlinear };

struct Codec {
  CodecKind kind = CodecKind::POD;
  int n_l = 0, n_o = 0;
  int channels = 0, height = 0, width = 0;
  fieldkit::NormalizationParams normalization;
  // POD: z = modes^T x / latent_scale.
  MatrixXd modes;
  VectorXd latent_scale;
  // Nonlinear: z = encoder(x), x = decoder([z; y]).
  Mlp encoder, decoder;
  nlohmann::json history = nlohmann::json::array();

  int input_dim() const { return channels * height * width; }
  MatrixXd encode(const MatrixXd& X) const;  // columns are fields
  MatrixXd decode(const MatrixXd& A) const;  // columns are augmented states
  VectorXd encode(const VectorXd& x) const { return encode(MatrixXd(x)).col(0); }
  VectorXd decode(const VectorXd& a) const { return decode(MatrixXd(a)).col(0); }
};

// X: D x T matrix of flattened normalized fields.
Codec pod_fit(const MatrixXd& X, double energy_threshold, int max_modes = 0);
Codec pod_fit(const fieldkit::GriddedSeries& training, double energy_threshold, int max_modes = 0);
double pod_energy_fraction(const MatrixXd& X, int k);

MatrixXd series_matrix(const fieldkit::GriddedSeries& s);  // D x T
VectorXd augment(const VectorXd& latent, const VectorXd& y);
std::pair<VectorXd, VectorXd> split(const VectorXd& x_aug, int n_l);

struct CodecLossConfig {
  double lambda = 0.0;
  bool auto_lambda = true;
  double lambda_ratio = 1.0;  // target lambda|L_corr| / L_recon under auto balancing
  double eps = 1e-8;
  int batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 60;
  void validate() const;
};

struct CodecArch {
  std::vector<int> encoder_hidden, decoder_hidden;
  Activation hidden = Activation::Tanh;
  bool squash = true;
  bool pod_init = true;
};

// Columns are samples; Y rows follow the observation ordering.
struct CodecTrainData {
  MatrixXd X_om, Y_om, X_rea, Y_rea;
};

Codec train_codec(const CodecTrainData& data, int n_l, const CodecArch& arch,
                  const CodecLossConfig& cfg, const surrogate::CurriculumSchedule& curriculum,
                  std::uint64_t seed);

void save_codec(const std::filesystem::path& dir, const Codec& c, const nlohmann::json& extra = {});
Codec load_codec(const std::filesystem::path& dir, nlohmann::json* manifest = nullptr);

}  // namespace ensobridge::latent
