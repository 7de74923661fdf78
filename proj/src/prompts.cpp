#include "palo/prompts.hpp"

#include <fstream>
#include <sstream>

#include <palo/prompts_embedded.hpp>

#include "palo/errors.hpp"

namespace palo {

const std::string& keyword_prompt_template() {
  static const std::string text = detail::kKeywordPromptV1;
  return text;
}

const std::string& planning_prompt_template() {
  static const std::string text = detail::kPlanningPromptV1;
  return text;
}

std::string load_prompt_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open prompt template: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string render_prompt(const std::string& tmpl, const std::string& slot,
                          const std::string& value) {
  const std::string needle = "{" + slot + "}";
  std::string out = tmpl;
  std::size_t pos = 0;
  while ((pos = out.find(needle, pos)) != std::string::npos) {
    out.replace(pos, needle.size(), value);
    pos += value.size();
  }
  return out;
}

}  // namespace palo
