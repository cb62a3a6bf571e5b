#include "signspell/landmarks.hpp"

#include <cmath>
#include <stdexcept>

#include "signspell/errors.hpp"

namespace signspell {

namespace {

constexpr std::array<std::string_view, kNumLabels> kTokens = {
    "A", "B", "C", "D", "E", "F", "G", "H", "I", "J",   "K",       "L",    "M", "N", "O",
    "P", "Q", "R", "S", "T", "U", "V", "W", "X", "Y",   "Z",       "del",  "nothing", "space"};

}  // namespace

LandmarkFrame LandmarkFrame::from_values(const std::array<double, kNumCoords>& coords,
                                         double handedness) {
  if (handedness != 0.0 && handedness != 1.0) {
    throw InvalidFrameError("handedness must be 0 or 1");
  }
  LandmarkFrame frame;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    frame.joints[j] = {coords[3 * j], coords[3 * j + 1], coords[3 * j + 2]};
  }
  frame.hand = handedness == 1.0 ? Handedness::kRight : Handedness::kLeft;
  validate(frame);
  return frame;
}

void validate(const LandmarkFrame& frame) {
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    const Joint& p = frame.joints[j];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw InvalidFrameError("joint " + std::to_string(j) + " has a non-finite coordinate");
    }
  }
  if (frame.hand != Handedness::kLeft && frame.hand != Handedness::kRight) {
    throw InvalidFrameError("handedness must be 0 or 1");
  }
}

Label::Label(std::size_t index) {
  if (index >= kNumLabels) {
    throw std::out_of_range("label index " + std::to_string(index) + " out of range");
  }
  index_ = static_cast<std::uint8_t>(index);
}

Label Label::letter(char upper) {
  if (upper < 'A' || upper > 'Z') {
    throw UnknownLabelError(std::string(1, upper));
  }
  return Label(static_cast<std::size_t>(upper - 'A'));
}

std::string_view Label::token() const { return kTokens[index_]; }

Label parse_label(std::string_view token) {
  for (std::size_t i = 0; i < kTokens.size(); ++i) {
    if (kTokens[i] == token) return Label(i);
  }
  throw UnknownLabelError(std::string(token));
}

const std::array<std::string_view, kNumLabels>& label_tokens() { return kTokens; }

FeatureVector featurize(const LandmarkFrame& frame) {
  validate(frame);
  FeatureVector out{};
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    out[3 * j] = frame.joints[j].x;
    out[3 * j + 1] = frame.joints[j].y;
    out[3 * j + 2] = frame.joints[j].z;
  }
  out[kNumCoords] = frame.hand == Handedness::kRight ? 1.0 : 0.0;
  return out;
}

LandmarkFrame hflip(const LandmarkFrame& frame) {
  validate(frame);
  LandmarkFrame out = frame;
  for (Joint& p : out.joints) p.x = 1.0 - p.x;
  out.hand = frame.hand == Handedness::kRight ? Handedness::kLeft : Handedness::kRight;
  return out;
}

LandmarkFrame wrist_centered(const LandmarkFrame& frame) {
  validate(frame);
  LandmarkFrame out = frame;
  const Joint wrist = frame.joints[0];
  for (Joint& p : out.joints) {
    p.x -= wrist.x;
    p.y -= wrist.y;
    p.z -= wrist.z;
  }
  return out;
}

}  // namespace signspell
