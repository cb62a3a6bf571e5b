#include "signspell/neuralnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "signspell/landmarks.hpp"
#include "signspell/random.hpp"

namespace signspell {

namespace {

void check_dims(std::span<const std::size_t> dims) {
  if (dims.size() < 2) throw UsageError("a model needs at least an input and an output width");
  for (std::size_t d : dims) {
    if (d == 0) throw UsageError("layer widths must be at least 1");
  }
}

}  // namespace

Model::Model(std::vector<std::size_t> dims, std::vector<std::string> vocabulary,
             Activation activation)
    : dims_(std::move(dims)), vocabulary_(std::move(vocabulary)), activation_(activation) {
  check_dims(dims_);
  if (vocabulary_.size() != dims_.back()) {
    throw UsageError("vocabulary size " + std::to_string(vocabulary_.size()) +
                     " does not match output width " + std::to_string(dims_.back()));
  }
  layers_.reserve(dims_.size() - 1);
  for (std::size_t l = 1; l < dims_.size(); ++l) layers_.emplace_back(dims_[l], dims_[l - 1]);
}

std::vector<std::string> default_vocabulary(std::size_t width) {
  std::vector<std::string> vocab;
  if (width == kNumLabels) {
    for (std::string_view token : label_tokens()) vocab.emplace_back(token);
    return vocab;
  }
  for (std::size_t i = 0; i < width; ++i) vocab.push_back("c" + std::to_string(i));
  return vocab;
}

Model init_model(std::span<const std::size_t> dims, std::uint64_t seed) {
  check_dims(dims);
  Model model({dims.begin(), dims.end()}, default_vocabulary(dims.back()));
  Rng rng(seed);
  for (LayerParams& layer : model.mutable_layers()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.cols));
    for (double& w : layer.weights) w = (2.0 * uniform01(rng) - 1.0) * limit;
  }
  return model;
}

std::size_t param_count(std::span<const std::size_t> dims) {
  std::size_t total = 0;
  for (std::size_t l = 1; l < dims.size(); ++l) total += dims[l] * dims[l - 1] + dims[l];
  return total;
}

std::size_t param_count(const Model& model) { return param_count(model.dims()); }

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double peak = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

ForwardCache forward(const Model& model, std::span<const double> input) {
  if (input.size() != model.input_dim()) {
    throw UsageError("input has " + std::to_string(input.size()) + " values, model expects " +
                     std::to_string(model.input_dim()));
  }
  ForwardCache cache;
  cache.dims = model.dims();
  cache.model_revision = model.revision();
  cache.activations.emplace_back(input.begin(), input.end());

  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerParams& layer = layers[l];
    const std::vector<double>& in = cache.activations.back();
    std::vector<double> z(layer.rows);
    for (std::size_t r = 0; r < layer.rows; ++r) {
      double acc = layer.bias[r];
      const double* row = &layer.weights[r * layer.cols];
      for (std::size_t c = 0; c < layer.cols; ++c) acc += row[c] * in[c];
      z[r] = acc;
    }
    std::vector<double> a;
    if (l + 1 == layers.size()) {
      a = softmax(z);
    } else {
      a.resize(z.size());
      std::transform(z.begin(), z.end(), a.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
    }
    cache.pre_activations.push_back(std::move(z));
    cache.activations.push_back(std::move(a));
  }
  return cache;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double loss_ce(std::span<const double> probabilities, std::size_t target) {
  if (target >= probabilities.size()) throw UsageError("target index out of range");
  return -std::log(std::max(probabilities[target], kLogFloor));
}

Gradients zero_gradients(const Model& model) {
  Gradients grads;
  for (const LayerParams& layer : model.layers()) grads.emplace_back(layer.rows, layer.cols);
  return grads;
}

Gradients backward(const Model& model, const ForwardCache& cache, std::size_t target) {
  if (cache.dims != model.dims() || cache.model_revision != model.revision() ||
      cache.activations.size() != model.num_layers() + 1) {
    throw UsageError("activation cache does not belong to this model");
  }
  if (target >= model.output_dim()) throw UsageError("target index out of range");

  Gradients grads = zero_gradients(model);
  const auto& layers = model.layers();

  // Softmax + cross-entropy: dL/dz = p - onehot(target).
  std::vector<double> delta(cache.activations.back());
  delta[target] -= 1.0;

  for (std::size_t l = layers.size(); l-- > 0;) {
    const LayerParams& layer = layers[l];
    const std::vector<double>& in = cache.activations[l];
    LayerParams& g = grads[l];
    for (std::size_t r = 0; r < layer.rows; ++r) {
      g.bias[r] = delta[r];
      double* grow = &g.weights[r * layer.cols];
      for (std::size_t c = 0; c < layer.cols; ++c) grow[c] = delta[r] * in[c];
    }
    if (l == 0) break;
    std::vector<double> upstream(layer.cols, 0.0);
    for (std::size_t r = 0; r < layer.rows; ++r) {
      const double* row = &layer.weights[r * layer.cols];
      for (std::size_t c = 0; c < layer.cols; ++c) upstream[c] += row[c] * delta[r];
    }
    const std::vector<double>& z = cache.pre_activations[l - 1];
    for (std::size_t c = 0; c < upstream.size(); ++c) {
      if (!(z[c] > 0.0)) upstream[c] = 0.0;
    }
    delta = std::move(upstream);
  }
  return grads;
}

void accumulate(Gradients& acc, const Gradients& grads, double scale) {
  if (acc.size() != grads.size()) throw UsageError("gradient shapes differ");
  for (std::size_t l = 0; l < acc.size(); ++l) {
    if (acc[l].weights.size() != grads[l].weights.size() ||
        acc[l].bias.size() != grads[l].bias.size()) {
      throw UsageError("gradient shapes differ");
    }
    for (std::size_t i = 0; i < acc[l].weights.size(); ++i) acc[l].weights[i] += scale * grads[l].weights[i];
    for (std::size_t i = 0; i < acc[l].bias.size(); ++i) acc[l].bias[i] += scale * grads[l].bias[i];
  }
}

AdamState AdamState::for_model(const Model& model, AdamHyperparams hyper) {
  AdamState state;
  state.hyper = hyper;
  state.first_moment = zero_gradients(model);
  state.second_moment = zero_gradients(model);
  return state;
}

namespace {

bool same_shape(const std::vector<LayerParams>& a, const std::vector<LayerParams>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (a[l].rows != b[l].rows || a[l].cols != b[l].cols ||
        a[l].weights.size() != b[l].weights.size() || a[l].bias.size() != b[l].bias.size()) {
      return false;
    }
  }
  return true;
}

void adam_update(std::vector<double>& theta, const std::vector<double>& g, std::vector<double>& m,
                 std::vector<double>& v, const AdamHyperparams& h, double correction1,
                 double correction2) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    theta[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

}  // namespace

void adam_step(Model& model, const Gradients& grads, AdamState& state) {
  if (!same_shape(model.layers(), grads) || !same_shape(model.layers(), state.first_moment) ||
      !same_shape(model.layers(), state.second_moment)) {
    throw UsageError("adam_step: shape mismatch between model, gradients and optimizer state");
  }
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(state.hyper.beta2, t);
  auto& layers = model.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    adam_update(layers[l].weights, grads[l].weights, state.first_moment[l].weights,
                state.second_moment[l].weights, state.hyper, correction1, correction2);
    adam_update(layers[l].bias, grads[l].bias, state.first_moment[l].bias,
                state.second_moment[l].bias, state.hyper, correction1, correction2);
  }
}

// Model file format.

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'L', 'M', 'T', '1'};

class Writer {
 public:
  void bytes(std::span<const std::uint8_t> data) { out_.insert(out_.end(), data.begin(), data.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { little(v, 2); }
  void u32(std::uint32_t v) { little(v, 4); }
  void f64(double v) { little(std::bit_cast<std::uint64_t>(v), 8); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void little(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::span<const std::uint8_t> bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(little(1, what)); }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(little(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(little(4, what)); }
  double f64(const char* what) { return std::bit_cast<double>(little(8, what)); }
  std::size_t remaining() const { return data_.size() - pos_; }

  void need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw ModelFormatError(ModelFormatError::Kind::kTruncated,
                             std::string("model file truncated while reading ") + what);
    }
  }
  std::uint64_t little(int width, const char* what) {
    need(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

ModelFormatError shape_error(const std::string& what) {
  return ModelFormatError(ModelFormatError::Kind::kShapeInconsistent, what);
}

}  // namespace

std::vector<std::uint8_t> serialize(const Model& model) {
  Writer w;
  w.bytes(kMagic);
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.dims().size()));
  for (std::size_t d : model.dims()) w.u32(static_cast<std::uint32_t>(d));
  w.u8(static_cast<std::uint8_t>(model.activation()));
  w.u32(static_cast<std::uint32_t>(model.vocabulary().size()));
  for (const std::string& token : model.vocabulary()) {
    w.u16(static_cast<std::uint16_t>(token.size()));
    w.bytes({reinterpret_cast<const std::uint8_t*>(token.data()), token.size()});
  }
  for (const LayerParams& layer : model.layers()) {
    for (double v : layer.weights) w.f64(v);
    for (double v : layer.bias) w.f64(v);
  }
  return w.take();
}

Model deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.bytes(kMagic.size(), "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw ModelFormatError(ModelFormatError::Kind::kBadMagic, "not a model file (bad magic)");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kModelFormatVersion) {
    throw ModelFormatError(ModelFormatError::Kind::kUnsupportedVersion,
                           "unsupported model format version " + std::to_string(version));
  }
  const std::uint32_t layer_count = r.u32("layer count");
  if (layer_count < 2) throw shape_error("model must have at least two layer widths");
  // Each width takes four bytes; reject counts the payload cannot hold before allocating.
  if (layer_count > r.remaining() / 4) r.need(std::size_t{layer_count} * 4, "layer widths");
  std::vector<std::size_t> dims;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const std::uint32_t d = r.u32("layer widths");
    if (d == 0) throw shape_error("layer width of zero");
    dims.push_back(d);
  }
  const std::uint8_t tag = r.u8("activation tag");
  if (tag != static_cast<std::uint8_t>(Activation::kRelu)) {
    throw shape_error("unknown activation tag " + std::to_string(tag));
  }
  const std::uint32_t vocab_count = r.u32("vocabulary count");
  if (vocab_count != dims.back()) {
    throw shape_error("vocabulary count " + std::to_string(vocab_count) +
                      " does not match output width " + std::to_string(dims.back()));
  }
  std::vector<std::string> vocab;
  for (std::uint32_t i = 0; i < vocab_count; ++i) {
    const std::uint16_t len = r.u16("vocabulary token length");
    const auto token = r.bytes(len, "vocabulary token");
    vocab.emplace_back(token.begin(), token.end());
  }

  // Widths are u32, so the product cannot overflow a 64-bit size_t per layer.
  const std::size_t expected = param_count(dims);
  if (expected > r.remaining() / 8) r.need(expected * 8, "parameters");

  Model model(std::move(dims), std::move(vocab), Activation::kRelu);
  for (LayerParams& layer : model.mutable_layers()) {
    for (double& v : layer.weights) v = r.f64("weights");
    for (double& v : layer.bias) v = r.f64("biases");
    for (double v : layer.weights) {
      if (!std::isfinite(v)) throw shape_error("non-finite weight");
    }
    for (double v : layer.bias) {
      if (!std::isfinite(v)) throw shape_error("non-finite bias");
    }
  }
  if (r.remaining() != 0) {
    throw ModelFormatError(ModelFormatError::Kind::kTrailingBytes,
                           std::to_string(r.remaining()) + " unexpected bytes after parameters");
  }
  return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const auto bytes = serialize(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return deserialize(bytes);
}

}  // namespace signspell
