#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apilot::guardrail {

/// Sends one prompt, returns the raw response text. Implementations throw
/// ClientFailure on any transport or protocol error.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string send(std::string_view prompt, double temperature) = 0;
    /// Whether send() may be called from several threads at once.
    virtual bool concurrent() const { return false; }
};

/// Replays canned responses in order; running out is a ClientFailure.
class TranscriptClient final : public LlmClient {
public:
    explicit TranscriptClient(std::vector<std::string> responses);

    std::string send(std::string_view prompt, double temperature) override;
    bool concurrent() const override { return true; }

    std::size_t calls() const;
    std::vector<std::string> prompts() const;

private:
    std::vector<std::string> responses_;
    std::vector<std::string> prompts_;
    mutable std::mutex mutex_;
};

/// Transcript documents: a JSON array of strings, or {"responses": [...]}.
/// Throws ConfigError.
std::vector<std::string> parse_transcript(std::string_view json_text);
std::vector<std::string> load_transcript(const std::filesystem::path& path);

/// Canned responses for many independent sessions:
/// {"responses": [...], "trials": {"<key>": [...], ...}}. Either part may be absent.
struct TranscriptSet {
    std::vector<std::string> responses;
    std::map<std::string, std::vector<std::string>, std::less<>> keyed;

    /// Responses under the first key present, else the unkeyed list.
    const std::vector<std::string>& lookup(const std::vector<std::string>& keys) const;
};

/// Also accepts the plain transcript forms. Throws ConfigError.
TranscriptSet parse_transcript_set(std::string_view json_text);
TranscriptSet load_transcript_set(const std::filesystem::path& path);

struct HttpClientConfig {
    std::string endpoint;       // e.g. http://127.0.0.1:8080/v1/chat/completions
    std::string model;
    std::string token_env_var;  // required bearer token source; when empty APILOT_LLM_TOKEN is used if set
    std::chrono::seconds timeout{120};
};

/// OpenAI-style chat-completions client: posts {model, messages, temperature}
/// and returns choices[0].message.content.
class HttpClient final : public LlmClient {
public:
    explicit HttpClient(HttpClientConfig config);

    std::string send(std::string_view prompt, double temperature) override;
    bool concurrent() const override { return true; }

private:
    HttpClientConfig config_;
    std::string origin_;  // scheme://host[:port]
    std::string path_;
    std::string token_;
};

/// {"kind": "http"|"mock", "endpoint", "model", "token_env_var", "transcript_path"}.
struct ClientConfig {
    std::string kind;
    HttpClientConfig http;
    std::filesystem::path transcript_path;  // resolved against the config file's directory
};

/// Throws ConfigError.
ClientConfig load_client_config(const std::filesystem::path& path);
ClientConfig parse_client_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
std::unique_ptr<LlmClient> make_client(const ClientConfig& config);

}  // namespace apilot::guardrail
