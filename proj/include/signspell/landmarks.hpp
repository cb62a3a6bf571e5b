#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

namespace signspell {

inline constexpr std::size_t kNumJoints = 21;
inline constexpr std::size_t kNumCoords = kNumJoints * 3;
inline constexpr std::size_t kFeatureDim = kNumCoords + 1;
inline constexpr std::size_t kNumLabels = 29;

struct Joint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const Joint&) const = default;
};

enum class Handedness : std::uint8_t { kLeft = 0, kRight = 1 };

/// One detector observation of a hand. x/y are image-normalized, z is the
/// detector's relative depth. Use validate() before trusting externally
/// constructed frames.
struct LandmarkFrame {
  std::array<Joint, kNumJoints> joints{};
  Handedness hand = Handedness::kLeft;

  bool operator==(const LandmarkFrame&) const = default;

  /// Builds a frame from 63 interleaved coordinates and a raw 0/1 flag.
  /// Throws InvalidFrameError on non-finite values or a bad flag.
  static LandmarkFrame from_values(const std::array<double, kNumCoords>& coords,
                                   double handedness);
};

/// Throws InvalidFrameError if a coordinate is non-finite or the handedness
/// tag is out of range.
void validate(const LandmarkFrame& frame);

struct NoHand {
  bool operator==(const NoHand&) const = default;
};

using Observation = std::variant<LandmarkFrame, NoHand>;

inline bool has_hand(const Observation& obs) {
  return std::holds_alternative<LandmarkFrame>(obs);
}

/// Canonical class index: A..Z = 0..25, del = 26, nothing = 27, space = 28.
class Label {
 public:
  static constexpr std::uint8_t kDelete = 26;
  static constexpr std::uint8_t kNothing = 27;
  static constexpr std::uint8_t kSpace = 28;

  constexpr Label() = default;
  /// Throws std::out_of_range for index >= 29.
  explicit Label(std::size_t index);

  static Label letter(char upper);

  constexpr std::size_t index() const { return index_; }
  std::string_view token() const;

  constexpr bool is_letter() const { return index_ < kDelete; }
  constexpr bool is_delete() const { return index_ == kDelete; }
  constexpr bool is_nothing() const { return index_ == kNothing; }
  constexpr bool is_space() const { return index_ == kSpace; }

  constexpr bool operator==(const Label&) const = default;

 private:
  std::uint8_t index_ = 0;
};

/// Case-sensitive token lookup; throws UnknownLabelError.
Label parse_label(std::string_view token);

/// The 29 tokens in canonical order.
const std::array<std::string_view, kNumLabels>& label_tokens();

using FeatureVector = std::array<double, kFeatureDim>;

/// x0,y0,z0,...,x20,y20,z20,handedness.
FeatureVector featurize(const LandmarkFrame& frame);

/// Mirror: x -> 1 - x on every joint and the handedness flag toggled.
LandmarkFrame hflip(const LandmarkFrame& frame);

/// Optional preprocessing, off in the default pipeline: translate every joint
/// so the wrist (joint 0) sits at the origin.
LandmarkFrame wrist_centered(const LandmarkFrame& frame);

}  // namespace signspell
