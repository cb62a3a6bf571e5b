#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "signspell/landmarks.hpp"

namespace signspell {

struct SessionConfig {
  /// Consecutive identical predictions needed before a sign counts.
  std::size_t confidence_bound = 10;

  bool operator==(const SessionConfig&) const = default;
};

/// One frame's worth of input to the typing machine: either the detector saw
/// no hand, or the classifier predicted a label.
using SessionInput = std::variant<NoHand, Label>;

struct Emission {
  enum class Kind { kLetter, kSpace, kDelete };

  Kind kind = Kind::kLetter;
  /// Set for letter emissions only.
  std::optional<char> character;
  std::string buffer_after;

  bool operator==(const Emission&) const = default;
};

std::string_view to_string(Emission::Kind kind);

/// Live typing state. A sign is emitted once it has been predicted for
/// confidence_bound consecutive frames; the session then locks until a
/// no-hand (or "nothing") frame re-arms it.
class Session {
 public:
  /// Throws UsageError when the confidence bound is zero.
  explicit Session(SessionConfig config = {});

  std::optional<Emission> step(const SessionInput& input);

  const SessionConfig& config() const { return config_; }
  const std::string& buffer() const { return buffer_; }
  std::optional<Label> run_label() const { return run_label_; }
  std::size_t run_count() const { return run_count_; }
  bool locked() const { return locked_; }
  const std::vector<Emission>& transcript() const { return transcript_; }

  bool operator==(const Session&) const = default;

 private:
  Emission emit(Label label);

  SessionConfig config_;
  std::string buffer_;
  std::optional<Label> run_label_;
  std::size_t run_count_ = 0;
  bool locked_ = false;
  std::vector<Emission> transcript_;
};

/// Replays the transcript from an empty buffer.
std::string fold_transcript(const std::vector<Emission>& transcript);

}  // namespace signspell
