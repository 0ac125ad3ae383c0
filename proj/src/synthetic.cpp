#include "twr/synthetic.hpp"

#include <array>
#include <span>
#include <string_view>

namespace twr {

namespace {

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& words, Rng& rng) {
  return words[rng.below(N)];
}

constexpr std::array<std::string_view, 12> kNouns = {
    "cat", "dog", "bird", "horse", "fox", "child",
    "farmer", "teacher", "robot", "king", "sailor", "doctor"};
constexpr std::array<std::string_view, 10> kAdjectives = {
    "big", "small", "old", "young", "happy", "angry", "quiet", "red", "clever", "lazy"};
constexpr std::array<std::string_view, 10> kVerbs = {
    "sees", "likes", "chases", "finds", "follows",
    "helps", "watches", "calls", "meets", "hears"};
constexpr std::array<std::string_view, 8> kPlaces = {
    "park", "house", "garden", "city", "forest", "river", "school", "market"};
constexpr std::array<std::string_view, 6> kAdverbs = {
    "slowly", "quickly", "today", "again", "often", "quietly"};

}  // namespace

std::vector<std::string> templated_corpus(std::size_t count, Rng& rng) {
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string s;
    auto put = [&s](std::string_view w) {
      if (!s.empty()) s += ' ';
      s += w;
    };
    switch (rng.below(4)) {
      case 0:
        put("the"); put(pick(kAdjectives, rng)); put(pick(kNouns, rng));
        put(pick(kVerbs, rng)); put("the"); put(pick(kNouns, rng));
        break;
      case 1:
        put("a"); put(pick(kNouns, rng)); put(pick(kVerbs, rng));
        put("a"); put(pick(kNouns, rng)); put("in"); put("the");
        put(pick(kPlaces, rng));
        break;
      case 2:
        put("the"); put(pick(kNouns, rng)); put("and"); put("the");
        put(pick(kNouns, rng)); put("walk"); put(pick(kAdverbs, rng));
        break;
      default:
        put("the"); put("very"); put(pick(kAdjectives, rng)); put(pick(kNouns, rng));
        put(pick(kVerbs, rng)); put("the"); put(pick(kAdjectives, rng));
        put(pick(kNouns, rng)); put("near"); put("the"); put(pick(kPlaces, rng));
        break;
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

struct Topic {
  std::string_view question;
  std::array<std::string_view, 5> replies;
};

constexpr std::array<std::string_view, 4> kGreetings = {
    "hello there", "hi how are you", "good morning friend", "hey nice to see you"};
constexpr std::array<std::string_view, 4> kAcks = {
    "i am fine thanks", "doing well", "not bad at all", "pretty good today"};

constexpr std::array<Topic, 5> kTopics = {{
    {"what do you want to eat",
     {{"i want some pizza", "maybe a bowl of soup", "let us get fresh bread",
      "i would like rice and fish", "just coffee for me"}}},
    {"how is the weather",
     {{"it is sunny and warm", "it will rain soon", "cold and windy outside",
      "there is snow on the road", "cloudy but dry"}}},
    {"do you like music",
     {{"i love playing guitar", "jazz is my favourite", "i sing in a choir",
      "not really i prefer silence", "only old rock songs"}}},
    {"where should we travel",
     {{"let us visit the mountains", "the beach sounds great",
      "maybe a trip to the city", "i want to see the lake", "we could stay home"}}},
    {"what did you do yesterday",
     {{"i read a long book", "i went for a run", "i cleaned the whole house",
      "i watched a movie", "i slept all day"}}},
}};

}  // namespace

std::vector<std::string> scripted_dialogues(std::size_t count, Rng& rng) {
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Topic& topic = kTopics[rng.below(kTopics.size())];
    std::string line;
    auto put = [&line](std::string_view u) {
      if (!line.empty()) line += '\t';
      line += u;
    };
    const auto shape = rng.below(3);
    if (shape >= 1) put(kGreetings[rng.below(kGreetings.size())]);
    if (shape >= 2) put(kAcks[rng.below(kAcks.size())]);
    put(topic.question);
    put(topic.replies[rng.below(topic.replies.size())]);
    out.push_back(std::move(line));
  }
  return out;
}

}  // namespace twr
