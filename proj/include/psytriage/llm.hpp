#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "psytriage/core.hpp"
#include "psytriage/json_io.hpp"

namespace psytriage {

// ---------------------------------------------------------------------------
// Prompt rendering

inline constexpr std::string_view kDefaultInstruction =
    "Based on the above data collected from patient, please reply with true or false if the patient can be "
    "diagnosed as psychiatric patient";

/// One prompt line: display key and the feature it reads.
struct PromptField {
  std::string key;
  std::string feature;
  friend bool operator==(const PromptField&, const PromptField&) = default;
};

struct PromptTemplate {
  std::vector<PromptField> fields;
  std::string instruction{kDefaultInstruction};
  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

/// All ten features, in reference prompt order.
PromptTemplate full_prompt_template();
/// The same without 'Any Preillness'.
PromptTemplate reduced_prompt_template();
/// Keeps only fields whose feature is in `features`.
PromptTemplate restrict_template(const PromptTemplate& t, const std::vector<std::string>& features);

json to_json(const PromptTemplate& t);
PromptTemplate prompt_template_from_json(const json& j);

/// Booleans render as True/False, numbers bare.
using PromptValue = std::variant<bool, double>;
using PromptValues = std::map<std::string, PromptValue>;

/// Values keyed by feature name. Circulation is rendered as the number 1 or 0,
/// the other flags as booleans.
PromptValues prompt_values(const FeatureVector& fv);

/// One `'Key': value,` line per field (no comma after the last), a blank line,
/// then the instruction. Throws MissingFeature.
std::string build_prompt(const PromptValues& values, const PromptTemplate& t);

// ---------------------------------------------------------------------------
// Verdicts

enum class Verdict { True, False, Ambiguous };

std::string_view to_string(Verdict v);

/// Last standalone "true"/"false" (any case) wins; "not" directly before it
/// flips it. No token gives Ambiguous.
Verdict parse_verdict(std::string_view text);

struct LlmVerdict {
  std::string raw_response;
  Verdict verdict = Verdict::Ambiguous;
  std::chrono::milliseconds latency{0};
};

// ---------------------------------------------------------------------------
// Endpoint

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:11434";
  std::string path = "/api/generate";
  std::string model = "llama3.1:8b";
  int timeout_ms = 60000;
  int retries = 2;
  int backoff_ms = 250;  // doubled after each failed attempt
  std::size_t max_in_flight = 1;
  json options = json::object();  // passed through as the request's "options"

  /// Overrides from PSYTRIAGE_LLM_URL, PSYTRIAGE_LLM_MODEL,
  /// PSYTRIAGE_LLM_TIMEOUT_MS and PSYTRIAGE_LLM_RETRIES when set.
  void apply_environment();
};

json to_json(const EndpointConfig& c);
EndpointConfig endpoint_config_from_json(const json& j);

/// Request body: {"model", "prompt", "stream": false, "options"}.
json generate_request(const std::string& prompt, const EndpointConfig& cfg);

/// One generate call; reads the reply from the "response" field. Transport
/// failures and 5xx replies are retried up to cfg.retries times, then Transport
/// is thrown.
LlmVerdict query(const std::string& prompt, const EndpointConfig& cfg);

/// Queries concurrently (up to cfg.max_in_flight); results in input order.
std::vector<LlmVerdict> query_all(const std::vector<std::string>& prompts, const EndpointConfig& cfg);

// ---------------------------------------------------------------------------
// Stub endpoint for tests and offline runs

/// One canned reply.
struct StubReply {
  std::string response;
  int status = 200;
  int delay_ms = 0;
};

/// Reads a transcript: JSONL, one {"response": ..., "status": ..., "delay_ms": ...}
/// object per line.
std::vector<StubReply> load_transcript(const std::filesystem::path& path);

/// Local HTTP server speaking the generate protocol. Replies are served in
/// transcript order, cycling when exhausted.
class StubServer {
 public:
  explicit StubServer(std::vector<StubReply> replies);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  int port() const;
  std::string url() const;
  /// Request bodies received so far, in arrival order.
  std::vector<json> requests() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Agreement with ML predictions

struct ComparisonRow {
  std::string case_id;
  PromptValues features;
  bool ml_prediction = false;
  Verdict llm_verdict = Verdict::Ambiguous;
  std::optional<Label> reference;
  bool match = false;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  std::size_t mismatches = 0;
  double agreement = 0.0;
  std::vector<std::string> mismatched_cases;
  std::vector<std::string> ambiguous_cases;
};

/// Ambiguous verdicts count as mismatches. Throws LengthMismatch.
ComparisonReport compare(const std::vector<std::string>& case_ids, const std::vector<PromptValues>& features,
                         const std::vector<int>& ml_predictions, const std::vector<Verdict>& llm_verdicts,
                         const std::vector<Label>& reference = {});

json to_json(const ComparisonReport& r);

}  // namespace psytriage
