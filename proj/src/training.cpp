#include "signspell/training.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "signspell/errors.hpp"

namespace signspell {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

std::optional<std::size_t> parse_size(std::string_view text) {
  text = trim(text);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

[[noreturn]] void row_error(const std::string& source, std::size_t line, const std::string& what) {
  throw FormatError(source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset CSV

std::string dataset_header() {
  std::string header = "label,hand";
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    const std::string idx = std::to_string(j);
    header += ",x" + idx + ",y" + idx + ",z" + idx;
  }
  return header;
}

std::array<std::size_t, kNumLabels> Dataset::class_counts() const {
  std::array<std::size_t, kNumLabels> counts{};
  for (const auto& row : rows) ++counts[row.label.index()];
  return counts;
}

std::size_t Dataset::no_hand_count() const {
  std::size_t n = 0;
  for (const auto& row : rows) n += has_hand(row.observation) ? 0 : 1;
  return n;
}

std::vector<LabeledFrame> Dataset::hand_samples() const {
  std::vector<LabeledFrame> out;
  for (const auto& row : rows) {
    if (const auto* frame = std::get_if<LandmarkFrame>(&row.observation)) {
      out.push_back({*frame, row.label});
    }
  }
  return out;
}

Dataset parse_dataset(std::istream& in, const std::string& source) {
  Dataset dataset;
  dataset.source = source;
  const std::string expected_header = dataset_header();
  constexpr std::size_t kColumns = 2 + kNumCoords;

  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (!saw_header) {
      if (line_no == 1 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
      if (view != expected_header) row_error(source, line_no, "missing or malformed header row");
      saw_header = true;
      continue;
    }
    if (view.empty()) continue;

    const auto fields = split_fields(view);
    if (fields.size() != kColumns) {
      row_error(source, line_no,
                "expected " + std::to_string(kColumns) + " columns, found " + std::to_string(fields.size()));
    }
    Label label;
    try {
      label = parse_label(trim(fields[0]));
    } catch (const UnknownLabelError& e) {
      row_error(source, line_no, e.what());
    }

    const std::string_view hand_field = trim(fields[1]);
    bool all_empty = hand_field.empty();
    for (std::size_t c = 2; c < kColumns && all_empty; ++c) all_empty = trim(fields[c]).empty();
    if (all_empty) {
      dataset.rows.push_back({NoHand{}, label});
      continue;
    }

    const auto hand = parse_double(hand_field);
    if (!hand || (*hand != 0.0 && *hand != 1.0)) row_error(source, line_no, "hand must be 0 or 1");
    std::array<double, kNumCoords> coords{};
    for (std::size_t c = 0; c < kNumCoords; ++c) {
      const auto value = parse_double(fields[c + 2]);
      if (!value) row_error(source, line_no, "column " + std::to_string(c + 3) + " is not a number");
      if (!std::isfinite(*value)) {
        row_error(source, line_no, "column " + std::to_string(c + 3) + " is not finite");
      }
      coords[c] = *value;
    }
    dataset.rows.push_back({LandmarkFrame::from_values(coords, *hand), label});
  }
  if (in.bad()) throw IoError("failed reading " + source);
  if (!saw_header) row_error(source, 1, "missing header row");
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_dataset(in, path.string());
}

namespace {

void write_row(std::ostream& out, const Observation& obs, Label label) {
  out << label.token();
  if (const auto* frame = std::get_if<LandmarkFrame>(&obs)) {
    out << ',' << (frame->hand == Handedness::kRight ? '1' : '0');
    for (const Joint& p : frame->joints) {
      out << ',' << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.z);
    }
  } else {
    out << std::string(1 + kNumCoords, ',');
  }
  out << '\n';
}

}  // namespace

void write_dataset(std::ostream& out, std::span<const LabeledObservation> rows) {
  out << dataset_header() << '\n';
  for (const auto& row : rows) write_row(out, row.observation, row.label);
}

void write_dataset(std::ostream& out, std::span<const LabeledFrame> rows) {
  out << dataset_header() << '\n';
  for (const auto& row : rows) write_row(out, row.frame, row.label);
}

// ---------------------------------------------------------------------------
// Splitting

void SplitSpec::validate() const {
  if (!(train > 0.0) || !(validation > 0.0) || !(test > 0.0)) {
    throw UsageError("split fractions must all be positive");
  }
  if (std::abs(train + validation + test - 1.0) > 1e-9) {
    throw UsageError("split fractions must sum to 1");
  }
}

SplitSpec parse_split_fractions(std::string_view text) {
  const auto fields = split_fields(text);
  if (fields.size() != 3) throw UsageError("split fractions must be three comma-separated numbers");
  SplitSpec spec;
  std::array<double*, 3> slots = {&spec.train, &spec.validation, &spec.test};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto v = parse_double(fields[i]);
    if (!v) throw UsageError("malformed split fraction '" + std::string(fields[i]) + "'");
    *slots[i] = *v;
  }
  spec.validate();
  return spec;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  // The small offset keeps products like 0.9 * 10 from flooring to 8.
  const auto cut = [n](double fraction) {
    const auto c = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
    return std::min(c, n);
  };
  const std::size_t train_end = cut(spec.train);
  const std::size_t val_end = std::max(train_end, cut(spec.train + spec.validation));
  return {train_end, val_end - train_end, n - val_end};
}

// ---------------------------------------------------------------------------
// Schedule

std::vector<BatchSegment> parse_schedule(std::string_view text) {
  std::vector<BatchSegment> schedule;
  for (std::string_view part : split_fields(text)) {
    part = trim(part);
    const std::size_t x = part.find('x');
    if (x == std::string_view::npos) {
      throw UsageError("malformed schedule segment '" + std::string(part) + "' (want SIZExCOUNT)");
    }
    const auto size = parse_size(part.substr(0, x));
    const auto count = parse_size(part.substr(x + 1));
    if (!size || !count || *size == 0 || *count == 0) {
      throw UsageError("malformed schedule segment '" + std::string(part) + "' (want SIZExCOUNT)");
    }
    schedule.push_back({*size, *count});
  }
  return schedule;
}

std::string format_schedule(std::span<const BatchSegment> schedule) {
  std::string out;
  for (const auto& seg : schedule) {
    if (!out.empty()) out += ',';
    out += std::to_string(seg.batch_size) + "x" + std::to_string(seg.epochs);
  }
  return out;
}

std::size_t TrainConfig::total_epochs() const {
  std::size_t total = 0;
  for (const auto& seg : schedule) total += seg.epochs;
  return total;
}

std::size_t TrainConfig::batch_size_for_epoch(std::size_t epoch) const {
  std::size_t end = 0;
  for (const auto& seg : schedule) {
    end += seg.epochs;
    if (epoch >= 1 && epoch <= end) return seg.batch_size;
  }
  throw UsageError("epoch " + std::to_string(epoch) + " is outside the schedule");
}

void TrainConfig::validate() const {
  if (schedule.empty()) throw UsageError("training schedule is empty");
  for (const auto& seg : schedule) {
    if (seg.batch_size < 1 || seg.epochs < 1) {
      throw UsageError("schedule segments need batch size and epoch count of at least 1");
    }
  }
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw UsageError("flip probability must lie in [0, 1]");
  }
  if (dims.size() < 2 || dims.front() != kFeatureDim || dims.back() != kNumLabels) {
    throw UsageError("model dims must start at 64 and end at 29");
  }
  if (!(adam.learning_rate > 0.0)) throw UsageError("learning rate must be positive");
}

// ---------------------------------------------------------------------------
// Training

bool BestCheckpoint::offer(std::size_t epoch, double score, const Model& model) {
  if (model_ && !(score > score_)) return false;
  model_ = model;
  epoch_ = epoch;
  score_ = score;
  return true;
}

const Model& BestCheckpoint::model() const {
  if (!model_) throw UsageError("no checkpoint recorded");
  return *model_;
}

TrainResult train(std::span<const LabeledFrame> train_set, std::span<const LabeledFrame> val_set,
                  const TrainConfig& config, std::uint64_t model_seed, const TrainHooks& hooks) {
  config.validate();
  if (train_set.empty()) throw UsageError("training set is empty");
  if (val_set.empty()) throw UsageError("validation set is empty");

  const std::size_t n = train_set.size();
  std::vector<FeatureVector> plain(n);
  std::vector<FeatureVector> mirrored(n);
  for (std::size_t i = 0; i < n; ++i) {
    plain[i] = featurize(train_set[i].frame);
    mirrored[i] = featurize(hflip(train_set[i].frame));
  }

  Model model = init_model(config.dims, model_seed);
  AdamState adam = AdamState::for_model(model, config.adam);
  Rng rng(config.shuffle_seed);
  std::vector<std::size_t> order(n);
  std::vector<bool> flip(n);

  TrainHistory history;
  BestCheckpoint best;
  std::size_t epoch = 0;
  for (const BatchSegment& segment : config.schedule) {
    for (std::size_t e = 0; e < segment.epochs; ++e) {
      ++epoch;
      std::iota(order.begin(), order.end(), std::size_t{0});
      shuffle(std::span<std::size_t>(order), rng);
      for (std::size_t i = 0; i < n; ++i) flip[i] = uniform01(rng) < config.flip_probability;

      double epoch_loss = 0.0;
      std::size_t steps = 0;
      for (std::size_t start = 0; start < n; start += segment.batch_size) {
        const std::size_t stop = std::min(n, start + segment.batch_size);
        const double scale = 1.0 / static_cast<double>(stop - start);
        Gradients batch_grad = zero_gradients(model);
        double batch_loss = 0.0;
        for (std::size_t k = start; k < stop; ++k) {
          const std::size_t idx = order[k];
          const FeatureVector& x = flip[idx] ? mirrored[idx] : plain[idx];
          const std::size_t target = train_set[idx].label.index();
          const ForwardCache cache = forward(model, x);
          batch_loss += loss_ce(cache.probabilities(), target);
          accumulate(batch_grad, backward(model, cache, target), scale);
        }
        ++steps;
        if (!std::isfinite(batch_loss)) {
          throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(steps));
        }
        epoch_loss += batch_loss;
        adam_step(model, batch_grad, adam);
      }

      EpochRecord record;
      record.epoch = epoch;
      record.batch_size = segment.batch_size;
      record.optimizer_steps = steps;
      record.mean_train_loss = epoch_loss / static_cast<double>(n);
      record.val_accuracy =
          hooks.validation_score ? hooks.validation_score(epoch, model) : accuracy(model, val_set);
      history.epochs.push_back(record);
      if (best.offer(epoch, record.val_accuracy, model)) history.best_epoch = epoch;
      if (hooks.on_epoch) hooks.on_epoch(record, model);
    }
  }
  return {best.model(), std::move(history)};
}

void write_history(std::ostream& out, const TrainHistory& history) {
  out << "epoch,mean_train_loss,val_accuracy\n";
  for (const auto& r : history.epochs) {
    out << r.epoch << ',' << format_double(r.mean_train_loss) << ',' << format_double(r.val_accuracy)
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// Evaluation

void require_label_model(const Model& model) {
  if (model.input_dim() != kFeatureDim || model.output_dim() != kNumLabels) {
    throw UsageError("model must map 64 features to 29 labels");
  }
  const auto& tokens = label_tokens();
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (model.vocabulary()[i] != tokens[i]) {
      throw UsageError("model vocabulary is not in canonical label order");
    }
  }
}

Label classify(const Model& model, const LandmarkFrame& frame) {
  const ForwardCache cache = forward(model, featurize(frame));
  return Label(argmax(cache.probabilities()));
}

double accuracy(const Model& model, std::span<const LabeledFrame> samples) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : samples) correct += classify(model, s.frame) == s.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

std::size_t EvalReport::correct() const {
  std::size_t trace = 0;
  for (std::size_t i = 0; i < kNumLabels; ++i) trace += confusion[i][i];
  return trace;
}

double EvalReport::accuracy() const {
  return evaluated == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(evaluated);
}

double EvalReport::skip_rate() const {
  const std::size_t total = skipped + evaluated;
  return total == 0 ? 0.0 : static_cast<double>(skipped) / static_cast<double>(total);
}

EvalReport evaluate(const Model& model, std::span<const LabeledObservation> data) {
  require_label_model(model);
  EvalReport report;
  for (const auto& row : data) {
    const auto* frame = std::get_if<LandmarkFrame>(&row.observation);
    if (frame == nullptr) {
      ++report.skipped;
      ++report.skipped_per_class[row.label.index()];
      continue;
    }
    ++report.evaluated;
    ++report.confusion[classify(model, *frame).index()][row.label.index()];
  }
  return report;
}

EvalReport evaluate(const Model& model, std::span<const LabeledFrame> data) {
  std::vector<LabeledObservation> rows;
  rows.reserve(data.size());
  for (const auto& s : data) rows.push_back({s.frame, s.label});
  return evaluate(model, rows);
}

void write_confusion_csv(std::ostream& out, const EvalReport& report) {
  const auto& tokens = label_tokens();
  out << "predicted\\target";
  for (std::string_view t : tokens) out << ',' << t;
  out << '\n';
  for (std::size_t p = 0; p < kNumLabels; ++p) {
    out << tokens[p];
    for (std::size_t t = 0; t < kNumLabels; ++t) out << ',' << report.confusion[p][t];
    out << '\n';
  }
}

void write_confusion_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_confusion_csv(out, report);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace signspell
