// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Whole-call annotation: prompt construction, chat-completion clients (live
// HTTPS or a fixture store keyed by prompt hash) and response parsing.

#pragma once

#include "slotllm/corpus.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace slotllm::inline SLOTLLM_ABI {

struct AnnotationPrompt {
    std::string system;
    std::string user;
};

struct PromptTemplate {
    std::string system;
    /// Must contain the `{dialog_transcript}` placeholder.
    std::string user;

    static PromptTemplate standard();
};

/// One "Agent: ..." / "Customer: ..." line per turn between the sentinels.
AnnotationPrompt build_annotation_prompt(const Conversation& conv,
                                         const PromptTemplate& tmpl = PromptTemplate::standard());

/// Stable content hash of system + user; names fixture files.
std::string prompt_hash(const AnnotationPrompt& prompt);

class AnnotationParseError : public std::runtime_error {
public:
    AnnotationParseError(const std::string& what, std::string raw)
        : std::runtime_error(what), raw_(std::move(raw)) {}
    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};

/// Strips code fences and surrounding prose, parses the outermost JSON array
/// and returns exactly `expected_turns` annotations.
std::vector<TurnAnnotation> parse_annotation_response(const std::string& raw, int expected_turns);

/// Canonical rendering (a fenced JSON array) that parse_annotation_response inverts.
std::string render_annotations(const std::vector<TurnAnnotation>& anns);

/// Retryable failure (connection, timeout, 429/5xx).
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    /// Returns the assistant message content.
    virtual std::string complete(const AnnotationPrompt& prompt) = 0;
};

enum class ClientMode { live, fixture };

std::string to_string(ClientMode m);
ClientMode client_mode_from_string(const std::string& s);

struct ClientConfig {
    ClientMode mode = ClientMode::fixture;
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4o";
    std::string api_key_env = "OPENAI_API_KEY";
    double timeout_seconds = 60.0;
    int max_retries = 3;
    double backoff_initial_seconds = 1.0;
    double temperature = 0.0;
    std::filesystem::path fixture_dir = "fixtures";

    void validate() const;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// POSTs a JSON body to a URL with headers; throws TransportError on connection failure.
using HttpTransport = std::function<HttpResponse(const std::string& url, const std::string& body,
                                                 const std::vector<std::pair<std::string, std::string>>& headers,
                                                 double timeout_seconds)>;

/// cpp-httplib based HTTPS transport.
HttpTransport default_http_transport();

/// Reads `{hash}.json` chat-completion responses from a directory.
class FixtureClient final : public ChatClient {
public:
    explicit FixtureClient(std::filesystem::path dir) : dir_(std::move(dir)) {}
    std::string complete(const AnnotationPrompt& prompt) override;

private:
    std::filesystem::path dir_;
};

/// OpenAI-compatible chat-completions client.
class LiveClient final : public ChatClient {
public:
    LiveClient(ClientConfig cfg, HttpTransport transport);
    std::string complete(const AnnotationPrompt& prompt) override;

private:
    ClientConfig cfg_;
    HttpTransport transport_;
};

/// Fixture mode never touches `transport`.
std::unique_ptr<ChatClient> make_client(const ClientConfig& cfg, HttpTransport transport = default_http_transport());

/// Writes a fixture whose assistant content is `content`.
void write_fixture(const std::filesystem::path& dir, const AnnotationPrompt& prompt, const std::string& content);

/// Builds fixtures for annotated conversations from their gold annotations.
void write_gold_fixtures(const std::filesystem::path& dir, const std::vector<Conversation>& convs,
                         const PromptTemplate& tmpl = PromptTemplate::standard());

struct RetryPolicy {
    int max_retries = 3;
    double backoff_initial_seconds = 1.0;
    /// Injected sleep; empty means a real std::this_thread::sleep_for.
    std::function<void(double seconds)> sleep;

    static RetryPolicy from(const ClientConfig& cfg);
};

/// Attaches annotations. Transport errors and unparseable responses are
/// retried up to max_retries times with exponential backoff; the final
/// failure names the conversation id.
Conversation annotate_conversation(const Conversation& conv, ChatClient& client, const RetryPolicy& retry = {},
                                   const PromptTemplate& tmpl = PromptTemplate::standard());

struct BatchFailure {
    std::string conversation_id;
    std::string message;
};

struct BatchResult {
    std::vector<Conversation> annotated;
    std::vector<BatchFailure> failures;
};

/// Annotates each conversation independently; failures are collected, not fatal.
BatchResult annotate_batch(const std::vector<Conversation>& convs, ChatClient& client, const RetryPolicy& retry = {},
                           const PromptTemplate& tmpl = PromptTemplate::standard());

}  // namespace slotllm
