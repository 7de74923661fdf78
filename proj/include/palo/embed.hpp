#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace palo {

inline constexpr int kEmbedDim = 64;
// Chosen so the closed grammar vocabulary maps into distinct buckets; the
// unit test re-verifies injectivity.
inline constexpr std::uint64_t kEmbedSalt = 0xf8f8c1046375f6acULL;

struct EmbeddingConfig {
  int dim = kEmbedDim;
  std::uint64_t salt = kEmbedSalt;
};

std::vector<std::string> tokenize_words(const std::string& text);

// Bucket index of a single token under the hashing scheme.
int embed_bucket(const std::string& word, const EmbeddingConfig& cfg);

// True for articles and similar function words that are dropped from the bag
// of words. Without the filter they dominate the vector norm ("the" appears
// three times in most skill sentences) and starve the content words a linear
// conditioning layer has to separate on.
bool is_function_word(const std::string& word);

// Hashed bag-of-words over content words, L2-normalised; the empty / absent
// instruction embeds to the exact zero vector (which is how conditioning
// levels are masked).
Eigen::VectorXd embed_instruction(const std::string& text,
                                  const EmbeddingConfig& cfg = {});

}  // namespace palo
