#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "signspell/neuralnet.hpp"
#include "signspell/stream_io.hpp"
#include "signspell/training.hpp"

namespace signspell::cli {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kUsage = 2,
  kIo = 3,
  kFormat = 4,
  kDivergence = 5,
};

struct Invocation {
  enum class Command { kTrain, kEval, kReplay, kServe, kInspect };

  Command command = Command::kInspect;
  std::string data_path;
  std::string model_path;
  std::string out_path;
  std::string history_path;
  std::string confusion_path;
  std::string stream_path;
  std::string events_path;
  SplitSpec split;
  std::uint64_t seed = 0;
  std::vector<BatchSegment> schedule = kDefaultSchedule;
  std::vector<std::size_t> hidden = {70, 50};
  double flip_probability = 0.5;
  double learning_rate = 1e-3;
  std::size_t confidence = 10;
  Endpoint endpoint;
  bool deterministic = false;
};

/// Thrown by parse_invocation for --help; carries the help text.
struct HelpRequested {
  std::string text;
};

/// argv without the program name. Throws UsageError (message plus usage text)
/// or HelpRequested.
Invocation parse_invocation(std::span<const std::string> args);

int run(const Invocation& invocation, std::ostream& out, std::ostream& err);

/// parse + run with exit-code mapping; what main() calls.
int main(std::span<const std::string> args, std::ostream& out, std::ostream& err);

/// 9579 -> "9,579".
std::string group_thousands(std::size_t value);

}  // namespace signspell::cli
