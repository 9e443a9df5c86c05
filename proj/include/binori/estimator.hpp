#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "binori/features.hpp"
#include "binori/random.hpp"

namespace binori {

struct ConvSpec {
  std::size_t out_channels = 0;
  std::size_t kernel = 7;
  std::size_t stride = 1;
  bool operator==(const ConvSpec&) const = default;
};

/// Conv stack (zero "same" padding of kernel/2, ReLU) followed by fully
/// connected layers (ReLU on hidden layers, linear output).
struct Architecture {
  std::size_t in_channels = kFeatureChannels;
  std::size_t in_length = 512;
  std::vector<ConvSpec> conv;
  std::vector<std::size_t> fc;  // output sizes; the last one is the model output
  double dropout = 0.3;         // after the conv stack and after the first FC layer

  /// Output length of conv layer i (i = conv.size() gives the flattened length / channels).
  std::size_t length_after(std::size_t i) const;
  std::size_t flat_size() const;
  std::size_t parameter_count() const;
  /// Throws invalid_input when a layer has an empty output or sizes are zero.
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

/// 5->16->16->32->32->64->64->128->128, kernel 7, stride 2 on every second
/// layer; FC flatten->256->64->4.
Architecture default_architecture(std::size_t length = 512);

/// Storage with allocation-independent alignment.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

enum class Mode { inference, train };

template <typename T>
class Network {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  Network() = default;
  explicit Network(Architecture arch);

  const Architecture& architecture() const { return arch_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<T> parameters() { return params_; }
  std::span<const T> parameters() const { return params_; }

  /// Per-input-channel affine normalisation (x - mean) / scale applied
  /// before the first layer.
  std::vector<T>& input_mean() { return mean_; }
  std::vector<T>& input_scale() { return scale_; }
  const std::vector<T>& input_mean() const { return mean_; }
  const std::vector<T>& input_scale() const { return scale_; }

  /// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
  void initialize(Rng& rng);

  /// x holds `count` samples, each channel-major (channel, position).
  /// Returns outputs as (output size x count). Activations are kept for
  /// backward(). Dropout masks are drawn from rng in train mode only.
  const Matrix& forward(std::span<const T> x, std::size_t count, Mode mode, Rng* rng = nullptr);

  /// Gradient of mean over samples of mean squared error over outputs, for
  /// the last forward() call, written into grad. Returns that loss.
  T backward(const Matrix& target, std::span<T> grad);

 private:
  struct Cache {
    Matrix col;   // im2col buffer (conv only)
    Matrix pre;   // pre-activation output
    Matrix act;   // activation after ReLU and dropout
    Matrix mask;  // dropout mask (empty when unused)
    Matrix grad;  // loss gradient with respect to act, then pre
    Matrix dcol;  // gradient with respect to col (conv only)
  };

  Architecture arch_;
  AlignedVector<T> params_;
  std::vector<T> mean_, scale_;
  std::vector<std::size_t> offsets_;  // weight offset per layer; bias follows the weights
  std::vector<Cache> cache_;
  Matrix input_;
  std::size_t count_ = 0;
};

extern template class Network<float>;
extern template class Network<double>;

template <typename T>
class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<T> params, std::span<const T> grad);
  std::size_t steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  std::vector<T> m_, v_;
  std::size_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

// Angle encoding --------------------------------------------------------------

struct AnglePrediction {
  double sin_dir = 0, cos_dir = 0, sin_ori = 0, cos_ori = 0;
  double theta_dir_deg = 0, theta_ori_deg = 0;
};

/// (sin dir, cos dir, sin ori, cos ori).
std::array<double, 4> encode_angles(double theta_dir_deg, double theta_ori_deg);
/// atan2 of each pair, wrapped to [-180, 180).
AnglePrediction decode_angles(double sin_dir, double cos_dir, double sin_ori, double cos_ori);
/// Mean of the squared differences over the four sin/cos components.
double loss(const AnglePrediction& pred, double theta_dir_deg, double theta_ori_deg);

// Model -------------------------------------------------------------------------

using EstimatorModel = Network<float>;

struct TrainConfig {
  std::size_t batch_size = 50;
  double learning_rate = 5e-4;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  double dropout = 0.3;
  /// Keep the model's parameters and input normalisation (fine-tuning)
  /// instead of initialising from the seed.
  bool resume = false;
  void validate() const;
};

struct TrainLog {
  std::vector<double> epoch_loss;  // sample-weighted mean training loss per epoch
};

/// Trains with Adam on shuffled mini-batches. With resume = false a new model
/// with `arch` is created and its input normalisation is fitted to the data.
EstimatorModel train(const FeatureBatch& data, const TrainConfig& cfg, const Architecture& arch,
                     TrainLog* log = nullptr, const EstimatorModel* start = nullptr,
                     const std::function<void(std::size_t, double, const EstimatorModel&)>& on_epoch = {});

AnglePrediction predict(const EstimatorModel& model, const FeatureTensor& x);
std::vector<AnglePrediction> predict(const EstimatorModel& model, const FeatureBatch& batch);

void save_model(const std::string& path, const EstimatorModel& model);
EstimatorModel load_model(const std::string& path);

// Template matching -------------------------------------------------------------

struct TemplateBank {
  std::size_t length = 0;
  std::vector<std::vector<double>> features;  // flattened channel-major
  std::vector<std::array<double, 2>> labels;  // (theta_dir, theta_ori)

  void add(const FeatureTensor& x, double theta_dir_deg, double theta_ori_deg);
  std::size_t size() const { return labels.size(); }
};

/// Angles of the bank entry nearest in Euclidean distance; the first entry
/// wins ties.
AnglePrediction template_match(const FeatureTensor& x, const TemplateBank& bank);

}  // namespace binori
