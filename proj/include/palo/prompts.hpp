#pragma once

#include <string>

namespace palo {

// Built-in prompt templates. They are embedded from the files in prompts/ at
// build time, so the shipped files and these constants cannot drift apart.
const std::string& keyword_prompt_template();
const std::string& planning_prompt_template();

std::string load_prompt_template(const std::string& path);

// Replaces every occurrence of "{slot}".
std::string render_prompt(const std::string& tmpl, const std::string& slot,
                          const std::string& value);

}  // namespace palo
