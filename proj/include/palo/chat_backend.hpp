#pragma once

#include <string>
#include <utility>
#include <vector>

#include "palo/errors.hpp"

namespace palo {

struct RemoteConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "PALO_API_KEY";
  double temperature = 1.0;
  int max_retries = 2;
  double timeout_sec = 60.0;
  double requests_per_sec = 2.0;
  // "" disables transcript persistence.
  std::string transcript_path;

  void validate() const;
};

// One user message in, one assistant text out.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

// Canned replies in order; throws RemoteError when exhausted. Tests drive
// remote codepaths through this without a network.
class ScriptedChatBackend : public ChatBackend {
 public:
  explicit ScriptedChatBackend(std::vector<std::string> replies);
  std::string complete(const std::string& prompt) override;
  const std::vector<std::string>& prompts_seen() const { return prompts_; }

 private:
  std::vector<std::string> replies_;
  std::vector<std::string> prompts_;
  std::size_t next_ = 0;
};

// Replays a transcript recorded by HttpChatBackend. Each call must repeat
// the recorded prompt exactly (the guarantee that a replayed run saw the
// same inputs); divergence throws RemoteError.
class ReplayChatBackend : public ChatBackend {
 public:
  explicit ReplayChatBackend(const std::string& transcript_path);
  std::string complete(const std::string& prompt) override;

 private:
  std::vector<std::pair<std::string, std::string>> exchanges_;
  std::size_t next_ = 0;
};

// Chat-completion client over HTTP JSON. Retries transport failures with
// exponential backoff, paces requests through a process-wide rate limiter
// shared by every instance, and appends prompt/reply pairs to the
// transcript file when one is configured.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(RemoteConfig cfg);
  std::string complete(const std::string& prompt) override;
  const RemoteConfig& config() const { return cfg_; }

 private:
  RemoteConfig cfg_;
  std::string host_;  // scheme://host[:port]
  std::string path_;
  std::string api_key_;
};

void append_transcript(const std::string& path, const std::string& prompt,
                       const std::string& reply);
std::vector<std::pair<std::string, std::string>> load_transcript(const std::string& path);

}  // namespace palo
