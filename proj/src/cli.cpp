#include "signspell/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "signspell/errors.hpp"
#include "signspell/typing_session.hpp"

namespace signspell::cli {

namespace {

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> widths;
  if (text.empty()) return widths;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::size_t pos = 0;
    unsigned long value = 0;
    try {
      value = std::stoul(part, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != part.size() || value == 0) {
      throw UsageError("malformed hidden widths '" + text + "'");
    }
    widths.push_back(value);
  }
  return widths;
}

struct RawOptions {
  std::string schedule = "50x30,300x30,600x60";
  std::string split = "0.8,0.1,0.1";
  std::string hidden = "70,50";
  std::string endpoint = "stdio";
};

}  // namespace

std::string group_thousands(std::size_t value) {
  std::string digits = std::to_string(value);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

Invocation parse_invocation(std::span<const std::string> args) {
  Invocation inv;
  RawOptions raw;

  CLI::App app("Landmark-based fingerspelling classifier and live typing server", "signspell");
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Train a classifier on a landmark CSV");
  train->add_option("--data", inv.data_path, "Landmark dataset CSV")->required();
  train->add_option("--out", inv.out_path, "Output model file")->required();
  train->add_option("--history", inv.history_path, "Training history CSV (default: <out>.history.csv)");
  train->add_option("--seed", inv.seed, "Seed for splitting, shuffling, flips and initialization");
  train->add_option("--split", raw.split, "train,validation,test fractions")->capture_default_str();
  train->add_option("--epochs-schedule", raw.schedule, "Batch schedule SIZExCOUNT[,...]")
      ->capture_default_str();
  train->add_option("--flip-prob", inv.flip_probability, "Per-sample horizontal flip probability")
      ->capture_default_str();
  train->add_option("--hidden", raw.hidden, "Hidden layer widths")->capture_default_str();
  train->add_option("--lr", inv.learning_rate, "Adam learning rate")->capture_default_str();
  train->add_flag("--deterministic", inv.deterministic, "Suppress timing lines");

  auto* eval = app.add_subcommand("eval", "Evaluate a model on a landmark CSV");
  eval->add_option("--model", inv.model_path, "Model file")->required();
  eval->add_option("--data", inv.data_path, "Landmark dataset CSV")->required();
  eval->add_option("--confusion", inv.confusion_path, "Write the confusion matrix CSV here");
  eval->add_flag("--deterministic", inv.deterministic, "Suppress timing lines");

  auto* replay = app.add_subcommand("replay", "Replay a recorded frame stream");
  replay->add_option("--model", inv.model_path, "Model file")->required();
  replay->add_option("--stream", inv.stream_path, "Recorded stream (one frame message per line)")
      ->required();
  replay->add_option("--events", inv.events_path, "Write the event log here");
  replay->add_option("--confidence", inv.confidence, "Consecutive frames required per sign")
      ->capture_default_str();
  replay->add_flag("--deterministic", inv.deterministic, "Suppress timing lines");

  auto* serve = app.add_subcommand("serve", "Serve the live typing protocol");
  serve->add_option("--model", inv.model_path, "Model file")->required();
  serve->add_option("--endpoint", raw.endpoint, "stdio or HOST:PORT")->capture_default_str();
  serve->add_option("--confidence", inv.confidence, "Consecutive frames required per sign")
      ->capture_default_str();

  auto* inspect = app.add_subcommand("inspect", "Describe a model file");
  inspect->add_option("--model", inv.model_path, "Model file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::ParseError& e) {
    const CLI::App* failed = &app;
    for (const CLI::App* sub : app.get_subcommands()) failed = sub;
    throw UsageError(std::string(e.what()) + "\n\n" + failed->help());
  }

  if (train->parsed()) {
    inv.command = Invocation::Command::kTrain;
    inv.schedule = parse_schedule(raw.schedule);
    const std::uint64_t seed = inv.seed;
    inv.split = parse_split_fractions(raw.split);
    inv.split.seed = seed;
    inv.hidden = parse_widths(raw.hidden);
    if (!(inv.flip_probability >= 0.0 && inv.flip_probability <= 1.0)) {
      throw UsageError("--flip-prob must lie in [0, 1]");
    }
    if (!(inv.learning_rate > 0.0)) throw UsageError("--lr must be positive");
    if (inv.history_path.empty()) inv.history_path = inv.out_path + ".history.csv";
  } else if (eval->parsed()) {
    inv.command = Invocation::Command::kEval;
  } else if (replay->parsed()) {
    inv.command = Invocation::Command::kReplay;
  } else if (serve->parsed()) {
    inv.command = Invocation::Command::kServe;
    inv.endpoint = parse_endpoint(raw.endpoint);
  } else {
    inv.command = Invocation::Command::kInspect;
  }
  if (inv.confidence < 1) throw UsageError("--confidence must be at least 1");
  return inv;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string percent(double fraction) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(2);
  ss << fraction * 100.0 << '%';
  return ss.str();
}

int run_train(const Invocation& inv, std::ostream& out) {
  const auto start = Clock::now();
  const Dataset dataset = load_dataset(inv.data_path);
  const std::vector<LabeledFrame> samples = dataset.hand_samples();
  if (const std::size_t dropped = dataset.no_hand_count(); dropped > 0) {
    spdlog::warn("ignoring {} rows without a detected hand", dropped);
  }
  if (samples.empty()) throw UsageError(inv.data_path + " has no rows with a detected hand");

  const auto parts = split(std::span<const LabeledFrame>(samples), inv.split);
  spdlog::info("split {} samples into {}/{}/{}", samples.size(), parts.train.size(),
               parts.validation.size(), parts.test.size());

  TrainConfig config;
  config.schedule = inv.schedule;
  config.flip_probability = inv.flip_probability;
  config.adam.learning_rate = inv.learning_rate;
  config.shuffle_seed = inv.seed;
  config.dims = {kFeatureDim};
  config.dims.insert(config.dims.end(), inv.hidden.begin(), inv.hidden.end());
  config.dims.push_back(kNumLabels);

  TrainHooks hooks;
  hooks.on_epoch = [total = config.total_epochs()](const EpochRecord& r, const Model&) {
    spdlog::info("epoch {}/{} batch {} loss {:.6f} val_acc {:.4f}", r.epoch, total, r.batch_size,
                 r.mean_train_loss, r.val_accuracy);
  };
  const TrainResult result = train(parts.train, parts.validation, config, inv.seed, hooks);

  save_model(result.best_model, inv.out_path);
  {
    std::ofstream history(inv.history_path, std::ios::trunc);
    if (!history) throw IoError("cannot open " + inv.history_path + " for writing");
    write_history(history, result.history);
    if (!history) throw IoError("failed writing " + inv.history_path);
  }

  const auto& best = result.history.epochs.at(result.history.best_epoch - 1);
  out << "epochs: " << result.history.epochs.size() << " (" << format_schedule(config.schedule) << ")\n";
  out << "best epoch: " << result.history.best_epoch << '\n';
  out << "best validation accuracy: " << percent(best.val_accuracy) << '\n';
  out << "test accuracy: " << percent(accuracy(result.best_model, parts.test)) << '\n';
  out << "model: " << inv.out_path << '\n';
  out << "history: " << inv.history_path << '\n';
  if (!inv.deterministic) out << "elapsed: " << seconds_since(start) << " s\n";
  return kOk;
}

int run_eval(const Invocation& inv, std::ostream& out) {
  const auto start = Clock::now();
  const Model model = load_model(inv.model_path);
  const Dataset dataset = load_dataset(inv.data_path);
  const EvalReport report = evaluate(model, dataset.rows);

  out << "samples: " << dataset.size() << '\n';
  out << "evaluated: " << report.evaluated << '\n';
  out << "skipped (no hand): " << report.skipped << '\n';
  out << "correct: " << report.correct() << '\n';
  out << "accuracy: " << percent(report.accuracy()) << '\n';
  out << "skip rate: " << percent(report.skip_rate()) << '\n';
  if (report.skipped > 0) {
    out << "skipped per class:";
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      if (report.skipped_per_class[i] > 0) {
        out << ' ' << Label(i).token() << '=' << report.skipped_per_class[i];
      }
    }
    out << '\n';
  }
  if (!inv.confusion_path.empty()) {
    write_confusion_csv(inv.confusion_path, report);
    out << "confusion: " << inv.confusion_path << '\n';
  }
  if (!inv.deterministic) out << "elapsed: " << seconds_since(start) << " s\n";
  return kOk;
}

int run_replay(const Invocation& inv, std::ostream& out) {
  const Model model = load_model(inv.model_path);
  const SessionConfig config{inv.confidence};
  ReplayResult result;
  if (inv.events_path.empty()) {
    std::ostringstream discard;
    result = replay(model, std::filesystem::path(inv.stream_path), discard, config);
  } else {
    std::ofstream events(inv.events_path, std::ios::trunc);
    if (!events) throw IoError("cannot open " + inv.events_path + " for writing");
    result = replay(model, std::filesystem::path(inv.stream_path), events, config);
    if (!events) throw IoError("failed writing " + inv.events_path);
  }
  for (const Emission& e : result.transcript) {
    out << to_string(e.kind);
    if (e.character) out << ' ' << *e.character;
    out << " -> \"" << e.buffer_after << "\"\n";
  }
  out << "final buffer: \"" << result.final_buffer << "\"\n";
  return kOk;
}

int run_serve(const Invocation& inv) {
  const Model model = load_model(inv.model_path);
  serve(model, inv.endpoint, SessionConfig{inv.confidence});
  return kOk;
}

int run_inspect(const Invocation& inv, std::ostream& out) {
  const Model model = load_model(inv.model_path);
  out << "dims: ";
  for (std::size_t i = 0; i < model.dims().size(); ++i) out << (i ? "," : "") << model.dims()[i];
  out << '\n';
  out << "activation: relu (hidden), softmax (output)\n";
  out << "vocabulary (" << model.vocabulary().size() << "):";
  for (const auto& token : model.vocabulary()) out << ' ' << token;
  out << '\n';
  out << "trainable parameters: " << group_thousands(param_count(model)) << '\n';
  return kOk;
}

int exit_code_for(const Error& e) {
  switch (e.category()) {
    case Error::Category::kUsage: return kUsage;
    case Error::Category::kIo: return kIo;
    case Error::Category::kFormat: return kFormat;
    case Error::Category::kDivergence: return kDivergence;
  }
  return kUnexpected;
}

}  // namespace

int run(const Invocation& inv, std::ostream& out, std::ostream& err) {
  try {
    switch (inv.command) {
      case Invocation::Command::kTrain: return run_train(inv, out);
      case Invocation::Command::kEval: return run_eval(inv, out);
      case Invocation::Command::kReplay: return run_replay(inv, out);
      case Invocation::Command::kServe: return run_serve(inv);
      case Invocation::Command::kInspect: return run_inspect(inv, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnexpected;
  }
  return kUnexpected;
}

int main(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  Invocation inv;
  try {
    inv = parse_invocation(args);
  } catch (const HelpRequested& help) {
    out << help.text;
    return kOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }
  return run(inv, out, err);
}

}  // namespace signspell::cli
