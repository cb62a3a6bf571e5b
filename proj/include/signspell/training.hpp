#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "signspell/landmarks.hpp"
#include "signspell/neuralnet.hpp"
#include "signspell/random.hpp"

namespace signspell {

struct LabeledFrame {
  LandmarkFrame frame;
  Label label;

  bool operator==(const LabeledFrame&) const = default;
};

struct LabeledObservation {
  Observation observation;
  Label label;

  bool operator==(const LabeledObservation&) const = default;
};

// ---------------------------------------------------------------------------
// Dataset CSV
//
// Header `label,hand,x0,y0,z0,...,x20,y20,z20`. A row whose hand field and all
// 63 coordinate fields are empty records a sample where no hand was detected.

struct Dataset {
  std::vector<LabeledObservation> rows;
  std::string source;

  std::size_t size() const { return rows.size(); }
  std::array<std::size_t, kNumLabels> class_counts() const;
  std::size_t no_hand_count() const;
  /// Rows with a detected hand, in file order.
  std::vector<LabeledFrame> hand_samples() const;
};

std::string dataset_header();

/// Throws FormatError naming the offending line, IoError if unreadable.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::istream& in, const std::string& source);

void write_dataset(std::ostream& out, std::span<const LabeledObservation> rows);
void write_dataset(std::ostream& out, std::span<const LabeledFrame> rows);

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;

  /// Throws UsageError unless all fractions are positive and sum to 1.
  void validate() const;
};

/// Parses "0.8,0.1,0.1".
SplitSpec parse_split_fractions(std::string_view text);

/// Sizes (floor(f_train*n), floor((f_train+f_val)*n) - first, rest).
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec);

template <typename Row>
struct SplitParts {
  std::vector<Row> train;
  std::vector<Row> validation;
  std::vector<Row> test;
};

/// Seeded shuffle, then contiguous cuts. No stratification.
template <typename Row>
SplitParts<Row> split(std::span<const Row> rows, const SplitSpec& spec) {
  spec.validate();
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(spec.seed);
  shuffle(std::span<std::size_t>(order), rng);

  const auto sizes = split_sizes(rows.size(), spec);
  SplitParts<Row> parts;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Row& row = rows[order[i]];
    if (i < sizes[0]) {
      parts.train.push_back(row);
    } else if (i < sizes[0] + sizes[1]) {
      parts.validation.push_back(row);
    } else {
      parts.test.push_back(row);
    }
  }
  return parts;
}

// ---------------------------------------------------------------------------
// Training

struct BatchSegment {
  std::size_t batch_size = 0;
  std::size_t epochs = 0;

  bool operator==(const BatchSegment&) const = default;
};

/// Batch size 50 for 30 epochs, 300 for 30, then 600 for 60.
inline const std::vector<BatchSegment> kDefaultSchedule = {{50, 30}, {300, 30}, {600, 60}};

/// Grammar: SIZExCOUNT[,SIZExCOUNT...], e.g. "50x30,300x30,600x60".
std::vector<BatchSegment> parse_schedule(std::string_view text);
std::string format_schedule(std::span<const BatchSegment> schedule);

struct TrainConfig {
  std::vector<BatchSegment> schedule = kDefaultSchedule;
  double flip_probability = 0.5;
  AdamHyperparams adam;
  std::uint64_t shuffle_seed = 0;
  std::vector<std::size_t> dims = kDefaultDims;

  std::size_t total_epochs() const;
  /// Batch size in effect for a 1-based epoch number.
  std::size_t batch_size_for_epoch(std::size_t epoch) const;
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t batch_size = 0;
  std::size_t optimizer_steps = 0;
  double mean_train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 before any epoch ran
};

/// Keeps the snapshot with the highest score; ties keep the earlier one.
class BestCheckpoint {
 public:
  /// Returns true if this epoch became the new best.
  bool offer(std::size_t epoch, double score, const Model& model);

  bool empty() const { return !model_.has_value(); }
  std::size_t epoch() const { return epoch_; }
  double score() const { return score_; }
  const Model& model() const;

 private:
  std::optional<Model> model_;
  std::size_t epoch_ = 0;
  double score_ = 0.0;
};

struct TrainHooks {
  /// Called after every epoch with the model as it stands at that point.
  std::function<void(const EpochRecord&, const Model&)> on_epoch;
  /// Replaces validation accuracy as the checkpoint score when set.
  std::function<double(std::size_t epoch, const Model&)> validation_score;
};

struct TrainResult {
  Model best_model;
  TrainHistory history;
};

/// Mean-reduced minibatch Adam over the configured schedule with random
/// horizontal flips, keeping the best-validation snapshot. Deterministic for
/// fixed seeds. Throws DivergenceError on a non-finite loss.
TrainResult train(std::span<const LabeledFrame> train_set, std::span<const LabeledFrame> val_set,
                  const TrainConfig& config, std::uint64_t model_seed, const TrainHooks& hooks = {});

/// Writes `epoch,mean_train_loss,val_accuracy` records, header first.
void write_history(std::ostream& out, const TrainHistory& history);

// ---------------------------------------------------------------------------
// Evaluation

/// Throws UsageError unless the model maps 64 features onto the 29 labels in
/// canonical order.
void require_label_model(const Model& model);

Label classify(const Model& model, const LandmarkFrame& frame);

double accuracy(const Model& model, std::span<const LabeledFrame> samples);

struct EvalReport {
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  /// confusion[predicted][target].
  std::array<std::array<std::size_t, kNumLabels>, kNumLabels> confusion{};
  std::array<std::size_t, kNumLabels> skipped_per_class{};

  std::size_t correct() const;
  /// correct / evaluated; 0 when nothing was evaluated.
  double accuracy() const;
  /// skipped / (skipped + evaluated).
  double skip_rate() const;
};

/// Observations without a hand are counted per class and never scored.
EvalReport evaluate(const Model& model, std::span<const LabeledObservation> data);
EvalReport evaluate(const Model& model, std::span<const LabeledFrame> data);

/// Rows are predicted labels, columns target labels.
void write_confusion_csv(std::ostream& out, const EvalReport& report);
void write_confusion_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace signspell
