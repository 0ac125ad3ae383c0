#pragma once

// Small generated corpora for desk-scale experiments and tests.

#include <string>
#include <vector>

#include "twr/rng.hpp"

namespace twr {

/// Sentences from a handful of templates with uniformly drawn slot fillers.
/// Vocabulary stays under 100 tokens; lengths range from 5 to 11.
std::vector<std::string> templated_corpus(std::size_t count, Rng& rng);

/// Conversations joined by tabs: one to three context utterances followed by
/// a response drawn from several valid replies for the context's topic.
std::vector<std::string> scripted_dialogues(std::size_t count, Rng& rng);

}  // namespace twr
