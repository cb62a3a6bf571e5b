#include "signspell/typing_session.hpp"

#include "signspell/errors.hpp"

namespace signspell {

std::string_view to_string(Emission::Kind kind) {
  switch (kind) {
    case Emission::Kind::kLetter: return "letter";
    case Emission::Kind::kSpace: return "space";
    case Emission::Kind::kDelete: return "delete";
  }
  return "letter";
}

Session::Session(SessionConfig config) : config_(config) {
  if (config_.confidence_bound < 1) throw UsageError("confidence bound must be at least 1");
}

std::optional<Emission> Session::step(const SessionInput& input) {
  const Label* label = std::get_if<Label>(&input);
  if (label == nullptr || label->is_nothing()) {
    run_label_.reset();
    run_count_ = 0;
    locked_ = false;
    return std::nullopt;
  }
  if (locked_) return std::nullopt;

  if (run_label_ == *label) {
    ++run_count_;
  } else {
    run_label_ = *label;
    run_count_ = 1;
  }
  if (run_count_ < config_.confidence_bound) return std::nullopt;
  locked_ = true;
  return emit(*label);
}

Emission Session::emit(Label label) {
  Emission e;
  if (label.is_delete()) {
    e.kind = Emission::Kind::kDelete;
    if (!buffer_.empty()) buffer_.pop_back();
  } else if (label.is_space()) {
    e.kind = Emission::Kind::kSpace;
    buffer_.push_back(' ');
  } else {
    e.kind = Emission::Kind::kLetter;
    e.character = label.token().front();
    buffer_.push_back(*e.character);
  }
  e.buffer_after = buffer_;
  transcript_.push_back(e);
  return e;
}

std::string fold_transcript(const std::vector<Emission>& transcript) {
  std::string text;
  for (const Emission& e : transcript) {
    switch (e.kind) {
      case Emission::Kind::kLetter: text.push_back(e.character.value_or('?')); break;
      case Emission::Kind::kSpace: text.push_back(' '); break;
      case Emission::Kind::kDelete:
        if (!text.empty()) text.pop_back();
        break;
    }
  }
  return text;
}

}  // namespace signspell
