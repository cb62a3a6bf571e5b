#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "signspell/errors.hpp"

namespace signspell {

enum class Activation : std::uint8_t { kRelu = 1 };

/// Weights (rows x cols, row-major) and bias (rows) of one affine layer.
/// Also used for gradients and optimizer moments, which mirror the shapes.
struct LayerParams {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  LayerParams() = default;
  LayerParams(std::size_t out, std::size_t in)
      : rows(out), cols(in), weights(out * in, 0.0), bias(out, 0.0) {}

  double& w(std::size_t r, std::size_t c) { return weights[r * cols + c]; }
  double w(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }

  bool operator==(const LayerParams&) const = default;
};

/// Fully-connected classifier: rectifier hidden layers, softmax output.
class Model {
 public:
  /// Zero-initialized parameters. Throws UsageError on fewer than two dims,
  /// a zero width, or a vocabulary whose size differs from the output width.
  Model(std::vector<std::size_t> dims, std::vector<std::string> vocabulary,
        Activation activation = Activation::kRelu);

  const std::vector<std::size_t>& dims() const { return dims_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  Activation activation() const { return activation_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t num_layers() const { return layers_.size(); }

  const std::vector<LayerParams>& layers() const { return layers_; }
  /// Mutable access; invalidates forward caches taken from this model.
  std::vector<LayerParams>& mutable_layers() {
    ++revision_;
    return layers_;
  }

  std::uint64_t revision() const { return revision_; }

  /// Parameter equality only; the revision counter is bookkeeping.
  bool operator==(const Model& other) const {
    return dims_ == other.dims_ && vocabulary_ == other.vocabulary_ &&
           activation_ == other.activation_ && layers_ == other.layers_;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::string> vocabulary_;
  Activation activation_;
  std::vector<LayerParams> layers_;
  std::uint64_t revision_ = 0;
};

/// The canonical label tokens when width == 29, otherwise "c0".."c{n-1}".
std::vector<std::string> default_vocabulary(std::size_t width);

/// Hidden widths 70 and 50 give exactly 9,579 trainable parameters.
inline const std::vector<std::size_t> kDefaultDims = {64, 70, 50, 29};

/// Fan-in scaled uniform weights in [-sqrt(6/fan_in), sqrt(6/fan_in)], zero
/// biases. Same dims and seed give a bit-identical model.
Model init_model(std::span<const std::size_t> dims, std::uint64_t seed);

/// Sum over layers of rows * cols + rows.
std::size_t param_count(const Model& model);
std::size_t param_count(std::span<const std::size_t> dims);

/// Numerically stable softmax (max logit subtracted before exponentiation).
std::vector<double> softmax(std::span<const double> logits);

struct ForwardCache {
  std::vector<std::size_t> dims;
  std::uint64_t model_revision = 0;
  /// activations[0] is the input, activations[L] the probabilities.
  std::vector<std::vector<double>> activations;
  /// Pre-activation values per layer.
  std::vector<std::vector<double>> pre_activations;

  std::span<const double> probabilities() const { return activations.back(); }
};

/// Throws UsageError on a dimension mismatch.
ForwardCache forward(const Model& model, std::span<const double> input);

/// Lowest index wins ties.
std::size_t argmax(std::span<const double> values);

inline constexpr double kLogFloor = 1e-12;

/// -ln(max(p[target], 1e-12)).
double loss_ce(std::span<const double> probabilities, std::size_t target);

using Gradients = std::vector<LayerParams>;

Gradients zero_gradients(const Model& model);

/// Exact gradients of loss_ce(forward(model, x), target). The rectifier
/// subgradient at zero is taken as zero. Throws UsageError when the cache
/// was produced by a different or since-modified model.
Gradients backward(const Model& model, const ForwardCache& cache, std::size_t target);

/// acc += scale * grads.
void accumulate(Gradients& acc, const Gradients& grads, double scale = 1.0);

struct AdamHyperparams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamHyperparams hyper;
  std::vector<LayerParams> first_moment;
  std::vector<LayerParams> second_moment;
  std::uint64_t step = 0;

  static AdamState for_model(const Model& model, AdamHyperparams hyper = {});
};

/// One bias-corrected Adam update of every parameter, in place.
void adam_step(Model& model, const Gradients& grads, AdamState& state);

/// Failure modes of the binary model format.
class ModelFormatError : public FormatError {
 public:
  enum class Kind { kBadMagic, kUnsupportedVersion, kTruncated, kShapeInconsistent, kTrailingBytes };

  ModelFormatError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Little-endian: "LMT1", u32 version, u32 layer count, u32 dims, u8
/// activation, u32 vocabulary count with (u16 length, UTF-8) tokens, then per
/// layer the row-major weights and the bias as f64.
std::vector<std::uint8_t> serialize(const Model& model);
Model deserialize(std::span<const std::uint8_t> bytes);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace signspell
