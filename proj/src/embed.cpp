#include "palo/embed.hpp"

#include <cctype>
#include <set>
#include <stdexcept>

#include "palo/rng.hpp"

namespace palo {

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int embed_bucket(const std::string& word, const EmbeddingConfig& cfg) {
  if (cfg.dim <= 0) throw std::invalid_argument("embedding dim must be positive");
  // The raw FNV value is finalised and bucketed from its high bits: the low
  // bits of a multiply-xor hash are not salt-sensitive modulo powers of two.
  std::uint64_t h = fnv1a(word, cfg.salt);
  std::uint64_t z = h;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z = z ^ (z >> 31);
  return static_cast<int>((z >> 32) % static_cast<std::uint64_t>(cfg.dim));
}

bool is_function_word(const std::string& word) {
  static const std::set<std::string> kFunctionWords = {"the", "a", "an",
                                                      "to", "and", "in"};
  return kFunctionWords.count(word) > 0;
}

Eigen::VectorXd embed_instruction(const std::string& text, const EmbeddingConfig& cfg) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(cfg.dim);
  for (const auto& w : tokenize_words(text)) {
    if (!is_function_word(w)) v[embed_bucket(w, cfg)] += 1.0;
  }
  const double n = v.norm();
  if (n > 0) v /= n;
  return v;
}

}  // namespace palo
