#include "palo/chat_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace palo {

using nlohmann::json;

void RemoteConfig::validate() const {
  if (endpoint.empty()) throw UsageError("remote endpoint must not be empty");
  if (max_retries < 0) throw UsageError("max_retries must be >= 0");
  if (!(timeout_sec > 0.0)) throw UsageError("timeout must be positive");
  if (!(requests_per_sec > 0.0)) throw UsageError("request rate must be positive");
}

ScriptedChatBackend::ScriptedChatBackend(std::vector<std::string> replies)
    : replies_(std::move(replies)) {}

std::string ScriptedChatBackend::complete(const std::string& prompt) {
  prompts_.push_back(prompt);
  if (next_ >= replies_.size())
    throw RemoteError("scripted chat backend ran out of replies after " +
                      std::to_string(replies_.size()));
  return replies_[next_++];
}

ReplayChatBackend::ReplayChatBackend(const std::string& transcript_path)
    : exchanges_(load_transcript(transcript_path)) {}

std::string ReplayChatBackend::complete(const std::string& prompt) {
  if (next_ >= exchanges_.size())
    throw RemoteError("transcript replay exhausted after " +
                      std::to_string(exchanges_.size()) + " exchanges");
  const auto& [recorded_prompt, reply] = exchanges_[next_];
  if (prompt != recorded_prompt)
    throw RemoteError("transcript replay diverged at exchange " + std::to_string(next_));
  ++next_;
  return reply;
}

void append_transcript(const std::string& path, const std::string& prompt,
                       const std::string& reply) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot open transcript for append: " + path);
  json j = {{"prompt", prompt}, {"reply", reply}};
  out << j.dump() << "\n";
  if (!out) throw DataError("failed writing transcript: " + path);
}

std::vector<std::pair<std::string, std::string>> load_transcript(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open transcript: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      out.emplace_back(j.at("prompt").get<std::string>(), j.at("reply").get<std::string>());
    } catch (const json::exception& e) {
      throw DataError("transcript " + path + " line " + std::to_string(lineno) + ": " +
                      e.what());
    }
  }
  return out;
}

namespace {

// Process-wide pacing shared by all HTTP backends, so concurrent callers
// (augmenter workers, proposer) cannot exceed the configured rate combined.
class RateLimiter {
 public:
  void acquire(double requests_per_sec) {
    using clock = std::chrono::steady_clock;
    std::unique_lock<std::mutex> lock(mu_);
    const auto interval =
        std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(
            1.0 / requests_per_sec));
    const auto now = clock::now();
    const auto earliest = last_ + interval;
    if (now < earliest) {
      lock.unlock();
      std::this_thread::sleep_for(earliest - now);
      lock.lock();
    }
    last_ = clock::now();
  }

 private:
  std::mutex mu_;
  std::chrono::steady_clock::time_point last_{};
};

RateLimiter& rate_limiter() {
  static RateLimiter limiter;
  return limiter;
}

// endpoint -> (scheme://host[:port], path)
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw UsageError("endpoint must start with http:// or https://: " + endpoint);
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

HttpChatBackend::HttpChatBackend(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::tie(host_, path_) = split_endpoint(cfg_.endpoint);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (host_.rfind("https://", 0) == 0)
    throw UsageError("this build lacks TLS support; use an http:// endpoint");
#endif
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
  }
}

std::string HttpChatBackend::complete(const std::string& prompt) {
  const json request = {
      {"model", cfg_.model},
      {"temperature", cfg_.temperature},
      {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
  };
  const std::string body = request.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(250 << (attempt - 1)));
    rate_limiter().acquire(cfg_.requests_per_sec);

    httplib::Client client(host_);
    client.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_sec));
    client.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_sec));
    client.set_write_timeout(std::chrono::duration<double>(cfg_.timeout_sec));
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    try {
      json reply = json::parse(res->body);
      std::string text =
          reply.at("choices").at(0).at("message").at("content").get<std::string>();
      if (!cfg_.transcript_path.empty())
        append_transcript(cfg_.transcript_path, prompt, text);
      return text;
    } catch (const json::exception& e) {
      last_error = std::string("malformed completion payload: ") + e.what();
    }
  }
  throw RemoteError("chat completion failed after " +
                    std::to_string(cfg_.max_retries + 1) + " attempts: " + last_error);
}

}  // namespace palo
