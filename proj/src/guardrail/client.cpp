#include "apilot/guardrail/client.hpp"
#include "apilot/common/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace apilot::guardrail {

using json = nlohmann::json;

TranscriptClient::TranscriptClient(std::vector<std::string> responses) : responses_(std::move(responses)) {}

std::vector<std::string> parse_transcript(std::string_view json_text) {
    try {
        const auto doc = json::parse(json_text);
        const auto& list = doc.is_object() ? doc.at("responses") : doc;
        return list.get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("malformed transcript: {}", e.what()));
    }
}

namespace {

std::string read_file(const std::filesystem::path& path, std::string_view what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read {} {}", what, path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::vector<std::string> load_transcript(const std::filesystem::path& path) {
    return parse_transcript(read_file(path, "transcript"));
}

const std::vector<std::string>& TranscriptSet::lookup(const std::vector<std::string>& keys) const {
    for (const auto& k : keys) {
        if (auto it = keyed.find(k); it != keyed.end()) return it->second;
    }
    return responses;
}

TranscriptSet parse_transcript_set(std::string_view json_text) {
    TranscriptSet set;
    try {
        const auto doc = json::parse(json_text);
        if (doc.is_array()) {
            set.responses = doc.get<std::vector<std::string>>();
            return set;
        }
        if (!doc.is_object() || (!doc.contains("responses") && !doc.contains("trials"))) {
            throw ConfigError("transcript needs \"responses\" or \"trials\"");
        }
        if (doc.contains("responses")) set.responses = doc["responses"].get<std::vector<std::string>>();
        if (doc.contains("trials")) {
            for (const auto& [key, list] : doc["trials"].items()) set.keyed[key] = list.get<std::vector<std::string>>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("malformed transcript: {}", e.what()));
    }
    return set;
}

TranscriptSet load_transcript_set(const std::filesystem::path& path) {
    return parse_transcript_set(read_file(path, "transcript"));
}

std::size_t TranscriptClient::calls() const {
    std::lock_guard lock(mutex_);
    return prompts_.size();
}

std::vector<std::string> TranscriptClient::prompts() const {
    std::lock_guard lock(mutex_);
    return prompts_;
}

std::string TranscriptClient::send(std::string_view prompt, double) {
    std::lock_guard lock(mutex_);
    const auto index = prompts_.size();
    prompts_.emplace_back(prompt);
    if (index >= responses_.size()) {
        throw ClientFailure(fmt::format("transcript exhausted after {} responses", responses_.size()));
    }
    return responses_[index];
}

HttpClient::HttpClient(HttpClientConfig config) : config_(std::move(config)) {
    const auto scheme = config_.endpoint.find("://");
    if (scheme == std::string::npos) throw ConfigError(fmt::format("endpoint '{}' has no scheme", config_.endpoint));
    const auto slash = config_.endpoint.find('/', scheme + 3);
    origin_ = config_.endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : config_.endpoint.substr(slash);
    const auto s = config_.endpoint.substr(0, scheme);
    if (s != "http" && s != "https") throw ConfigError(fmt::format("unsupported scheme '{}'", s));
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (s == "https") throw ConfigError("https endpoints need a build with APILOT_WITH_TLS");
#endif
    if (!config_.token_env_var.empty()) {
        const char* token = std::getenv(config_.token_env_var.c_str());
        if (!token || !*token) {
            throw ConfigError(fmt::format("environment variable {} is not set", config_.token_env_var));
        }
        token_ = token;
    } else if (const char* token = std::getenv("APILOT_LLM_TOKEN")) {
        token_ = token;
    }
}

std::string HttpClient::send(std::string_view prompt, double temperature) {
    httplib::Client cli(origin_);
    cli.set_connection_timeout(config_.timeout);
    cli.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    const json body = {{"model", config_.model},
                       {"temperature", temperature},
                       {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})}};
    auto res = cli.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw ClientFailure(fmt::format("{}: {}", config_.endpoint, httplib::to_string(res.error())));
    if (res->status != 200) {
        throw ClientFailure(fmt::format("{}: HTTP {}: {}", config_.endpoint, res->status, res->body.substr(0, 200)));
    }
    try {
        const auto doc = json::parse(res->body);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ClientFailure(fmt::format("{}: unexpected response: {}", config_.endpoint, e.what()));
    }
}

ClientConfig parse_client_config(std::string_view json_text, const std::filesystem::path& base_dir) {
    ClientConfig cfg;
    try {
        const auto doc = json::parse(json_text);
        cfg.kind = doc.at("kind").get<std::string>();
        if (doc.contains("token")) throw ConfigError("tokens must come from an environment variable (token_env_var)");
        if (cfg.kind == "http") {
            cfg.http.endpoint = doc.at("endpoint").get<std::string>();
            cfg.http.model = doc.value("model", "");
            cfg.http.token_env_var = doc.value("token_env_var", "");
            if (doc.contains("timeout_s")) cfg.http.timeout = std::chrono::seconds(doc["timeout_s"].get<int>());
        } else if (cfg.kind == "mock") {
            std::filesystem::path p = doc.at("transcript_path").get<std::string>();
            cfg.transcript_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        } else {
            throw ConfigError(fmt::format("unknown client kind '{}'", cfg.kind));
        }
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("malformed client config: {}", e.what()));
    }
    return cfg;
}

ClientConfig load_client_config(const std::filesystem::path& path) {
    return parse_client_config(read_file(path, "client config"), path.parent_path());
}

std::unique_ptr<LlmClient> make_client(const ClientConfig& config) {
    if (config.kind == "mock") {
        return std::make_unique<TranscriptClient>(load_transcript_set(config.transcript_path).responses);
    }
    return std::make_unique<HttpClient>(config.http);
}

}  // namespace apilot::guardrail
