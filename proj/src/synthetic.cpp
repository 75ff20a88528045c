// SPDX-License-Identifier: Apache-2.0
#include "ssran/synthetic.hpp"

#include <random>
#include <sstream>

#include "ssran/rng.hpp"

namespace ssran {

namespace {

struct Fragment {
  std::vector<std::string> tokens, slots;
  std::string intent;
};

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

void push(Fragment& f, const std::string& tok, const std::string& slot) {
  f.tokens.push_back(tok);
  f.slots.push_back(slot);
}

void push_phrase(Fragment& f, const std::vector<std::string>& words, const std::string& tag) {
  for (std::size_t i = 0; i < words.size(); ++i)
    push(f, words[i], (i == 0 ? "B-" : "I-") + tag);
}

const std::vector<std::vector<std::string>> kCities = {
    {"boston"}, {"denver"}, {"chicago"}, {"seattle"}, {"new", "york"}, {"san", "diego"}};
const std::vector<std::string> kDates = {"today", "tomorrow", "monday", "friday"};
const std::vector<std::vector<std::string>> kArtists = {
    {"queen"}, {"nirvana"}, {"taylor", "swift"}, {"the", "beatles"}};

Fragment frag_weather(std::mt19937_64& rng) {
  Fragment f;
  f.intent = "get_weather";
  push(f, "what", "O");
  push(f, "is", "O");
  push(f, "the", "O");
  push(f, "weather", "O");
  push(f, "in", "O");
  push_phrase(f, kCities[pick(rng, kCities.size())], "city");
  if (pick(rng, 2)) push(f, kDates[pick(rng, kDates.size())], "B-date");
  return f;
}

Fragment frag_flight(std::mt19937_64& rng) {
  Fragment f;
  f.intent = "book_flight";
  push(f, "book", "O");
  push(f, "a", "O");
  push(f, "flight", "O");
  push(f, "from", "O");
  push_phrase(f, kCities[pick(rng, kCities.size())], "fromcity");
  push(f, "to", "O");
  push_phrase(f, kCities[pick(rng, kCities.size())], "tocity");
  if (pick(rng, 2)) push(f, kDates[pick(rng, kDates.size())], "B-date");
  return f;
}

Fragment frag_music(std::mt19937_64& rng) {
  Fragment f;
  f.intent = "play_music";
  push(f, "play", "O");
  if (pick(rng, 2)) push(f, "some", "O");
  push_phrase(f, kArtists[pick(rng, kArtists.size())], "artist");
  push(f, "songs", "O");
  return f;
}

Fragment frag_time(std::mt19937_64& rng) {
  Fragment f;
  f.intent = "ask_time";
  push(f, "tell", "O");
  push(f, "me", "O");
  push(f, "the", "O");
  push(f, "time", "O");
  push(f, "in", "O");
  push_phrase(f, kCities[pick(rng, kCities.size())], "city");
  return f;
}

Fragment make_fragment(std::mt19937_64& rng, std::size_t which) {
  switch (which) {
    case 0: return frag_weather(rng);
    case 1: return frag_flight(rng);
    case 2: return frag_music(rng);
    default: return frag_time(rng);
  }
}

}  // namespace

std::vector<Utterance> synthetic_corpus(std::size_t count, std::uint64_t seed,
                                        double two_intent_ratio) {
  std::mt19937_64 rng(seed);
  std::vector<Utterance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const bool two = unit_uniform(rng) < two_intent_ratio;
    const std::size_t first = pick(rng, 4);
    Fragment a = make_fragment(rng, first);
    Utterance u;
    u.tokens = a.tokens;
    u.slots = a.slots;
    u.intents = {a.intent};
    if (two) {
      std::size_t second = pick(rng, 3);
      if (second >= first) ++second;  // distinct intent type
      Fragment b = make_fragment(rng, second);
      u.tokens.push_back("and");
      u.slots.push_back("O");
      u.tokens.insert(u.tokens.end(), b.tokens.begin(), b.tokens.end());
      u.slots.insert(u.slots.end(), b.slots.begin(), b.slots.end());
      u.intents.push_back(b.intent);
    }
    out.push_back(std::move(u));
  }
  return out;
}

std::string render_corpus(const std::vector<Utterance>& utts) {
  std::ostringstream out;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const auto& u = utts[i];
    for (std::size_t j = 0; j < u.tokens.size(); ++j)
      out << u.tokens[j] << ' ' << u.slots[j] << '\n';
    for (std::size_t j = 0; j < u.intents.size(); ++j) {
      if (j) out << '#';
      out << u.intents[j];
    }
    out << '\n';
    if (i + 1 < utts.size()) out << '\n';
  }
  return out.str();
}

}  // namespace ssran
