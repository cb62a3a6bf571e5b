#include <vector>

#include "doctest.h"
#include "signspell/errors.hpp"
#include "signspell/typing_session.hpp"
#include "support/typing_oracle.hpp"

using namespace signspell;

namespace {

const Label kA = parse_label("A");
const Label kB = parse_label("B");
const Label kDel = parse_label("del");
const Label kSpace = parse_label("space");
const Label kNothing = parse_label("nothing");

std::size_t feed(Session& s, const SessionInput& in, std::size_t times) {
  std::size_t emitted = 0;
  for (std::size_t i = 0; i < times; ++i) emitted += s.step(in).has_value() ? 1 : 0;
  return emitted;
}

}  // namespace

TEST_CASE("new session") {
  const Session s;
  CHECK(s.config().confidence_bound == 10);
  CHECK(s.buffer().empty());
  CHECK(s.run_count() == 0);
  CHECK_FALSE(s.locked());
  CHECK(s.transcript().empty());
  CHECK_THROWS_AS(Session(SessionConfig{0}), UsageError);
}

TEST_CASE("bound of one emits on the first prediction of an unlocked run") {
  Session s(SessionConfig{1});
  const auto e = s.step(kA);
  REQUIRE(e.has_value());
  CHECK(e->kind == Emission::Kind::kLetter);
  CHECK(e->character == 'A');
  CHECK(s.locked());
  CHECK_FALSE(s.step(kB).has_value());
  s.step(NoHand{});
  CHECK(s.step(kB).has_value());
  CHECK(s.buffer() == "AB");
}

TEST_CASE("ten consecutive predictions emit once") {
  Session s;
  CHECK(feed(s, kA, 9) == 0);
  CHECK(s.run_count() == 9);
  const auto e = s.step(kA);
  REQUIRE(e.has_value());
  CHECK(e->buffer_after == "A");
  CHECK(s.buffer() == "A");
  CHECK(s.locked());
  CHECK(s.transcript().size() == 1);
}

TEST_CASE("an interrupted run restarts at one") {
  Session s;
  CHECK(feed(s, kA, 9) == 0);
  CHECK(feed(s, kB, 1) == 0);
  CHECK(s.run_count() == 1);
  CHECK(s.run_label() == kB);
  CHECK(feed(s, kA, 9) == 0);
  CHECK(s.buffer().empty());
  CHECK(s.transcript().empty());
}

TEST_CASE("delete removes one character") {
  Session s;
  feed(s, kA, 10);
  s.step(NoHand{});
  feed(s, kB, 10);
  s.step(NoHand{});
  REQUIRE(s.buffer() == "AB");
  CHECK_FALSE(s.locked());
  CHECK(feed(s, kDel, 10) == 1);
  CHECK(s.buffer() == "A");
  CHECK(s.transcript().back().kind == Emission::Kind::kDelete);
  CHECK_FALSE(s.transcript().back().character.has_value());
}

TEST_CASE("delete on an empty buffer is a recorded no-op") {
  Session s;
  CHECK(feed(s, kDel, 10) == 1);
  CHECK(s.buffer().empty());
  REQUIRE(s.transcript().size() == 1);
  CHECK(s.transcript()[0].kind == Emission::Kind::kDelete);
  CHECK(s.transcript()[0].buffer_after.empty());
}

TEST_CASE("the hand must leave the frame before the next sign") {
  Session s;
  feed(s, kA, 10);
  CHECK(feed(s, kA, 100) == 0);
  CHECK(feed(s, kB, 100) == 0);
  CHECK(s.buffer() == "A");
  s.step(NoHand{});
  CHECK_FALSE(s.locked());
  CHECK(s.run_count() == 0);
  CHECK(feed(s, kA, 10) == 1);
  CHECK(s.buffer() == "AA");
}

TEST_CASE("space appends a literal space") {
  Session s(SessionConfig{2});
  feed(s, kA, 2);
  s.step(kNothing);
  feed(s, kSpace, 2);
  CHECK(s.buffer() == "A ");
  CHECK(s.transcript().back().kind == Emission::Kind::kSpace);
}

TEST_CASE("nothing behaves exactly like no hand") {
  const std::vector<SessionInput> prefix = {kA, kA, kA, kB, kA, kA};
  Session with_nothing(SessionConfig{3});
  Session with_nohand(SessionConfig{3});
  for (const auto& in : prefix) {
    with_nothing.step(in);
    with_nohand.step(in);
  }
  with_nothing.step(kNothing);
  with_nohand.step(NoHand{});
  CHECK(with_nothing == with_nohand);
}

TEST_CASE("exhaustive traces of length <= 8 over {A, B, del, no hand}, N = 3") {
  const std::vector<SessionInput> alphabet = {kA, kB, kDel, NoHand{}};
  constexpr std::size_t kBound = 3;
  std::size_t traces = 0;
  for (std::size_t len = 0; len <= 8; ++len) {
    std::size_t combos = 1;
    for (std::size_t i = 0; i < len; ++i) combos *= alphabet.size();
    for (std::size_t code = 0; code < combos; ++code) {
      std::vector<SessionInput> inputs;
      for (std::size_t i = 0, c = code; i < len; ++i, c /= alphabet.size()) {
        inputs.push_back(alphabet[c % alphabet.size()]);
      }

      Session s(SessionConfig{kBound});
      std::vector<std::size_t> emitted_at;
      std::size_t since_rearm = 0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto e = s.step(inputs[i]);
        REQUIRE(s.run_count() <= kBound);
        if (testing::rearms(inputs[i])) {
          REQUIRE_FALSE(e.has_value());
          REQUIRE_FALSE(s.locked());
          since_rearm = 0;
        }
        if (e) {
          emitted_at.push_back(i);
          ++since_rearm;
          REQUIRE(since_rearm == 1);
          REQUIRE(s.locked());
        }
      }

      const auto expected = testing::expected_emissions(inputs, kBound);
      REQUIRE(emitted_at.size() == expected.size());
      std::string buffer;
      for (std::size_t k = 0; k < expected.size(); ++k) {
        REQUIRE(emitted_at[k] == expected[k].frame_index);
        buffer = testing::apply(buffer, expected[k].label);
        REQUIRE(s.transcript()[k].buffer_after == buffer);
      }
      REQUIRE(s.buffer() == buffer);
      REQUIRE(fold_transcript(s.transcript()) == s.buffer());

      Session again(SessionConfig{kBound});
      for (const auto& in : inputs) again.step(in);
      REQUIRE(again == s);
      ++traces;
    }
  }
  CHECK(traces == 87381);  // sum of 4^k for k = 0..8
}

TEST_CASE("threshold exactness over run lengths") {
  for (std::size_t bound = 1; bound <= 12; ++bound) {
    for (std::size_t k = 0; k <= 25; ++k) {
      Session s(SessionConfig{bound});
      CHECK(feed(s, kB, k) == (k >= bound ? 1u : 0u));
    }
  }
}
