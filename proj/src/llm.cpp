#include "psytriage/llm.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "psytriage/parallel.hpp"
#include "text_util.hpp"

namespace psytriage {

PromptTemplate full_prompt_template() {
  PromptTemplate t;
  t.fields = {{"Systolic Blood Pressure", "systolic_bp"},
              {"Respiratory Rate", "respiratory_rate"},
              {"Blood Circulation Normality", "circulation_normal"},
              {"GCS", "gcs"},
              {"Pulse Rhythm", "pulse_rhythm_regular"},
              {"Any Preillness", "preillness"},
              {"Mental Sickness Possibility", "mental_abnormality"},
              {"Psychiatric Syndrom Presence", "psychiatric_symptoms"},
              {"Alcoholic Possibility", "alcoholism"},
              {"Intoxication Possibility", "intoxication"}};
  return t;
}

PromptTemplate reduced_prompt_template() {
  return restrict_template(full_prompt_template(),
                           {"systolic_bp", "respiratory_rate", "circulation_normal", "gcs", "pulse_rhythm_regular",
                            "mental_abnormality", "psychiatric_symptoms", "alcoholism", "intoxication"});
}

PromptTemplate restrict_template(const PromptTemplate& t, const std::vector<std::string>& features) {
  PromptTemplate out;
  out.instruction = t.instruction;
  for (const auto& f : t.fields)
    if (std::find(features.begin(), features.end(), f.feature) != features.end()) out.fields.push_back(f);
  return out;
}

json to_json(const PromptTemplate& t) {
  json fields = json::array();
  for (const auto& f : t.fields) fields.push_back(json{{"key", f.key}, {"feature", f.feature}});
  return json{{"fields", fields}, {"instruction", t.instruction}};
}

PromptTemplate prompt_template_from_json(const json& j) {
  PromptTemplate t;
  for (const auto& f : j.at("fields"))
    t.fields.push_back({f.at("key").get<std::string>(), f.at("feature").get<std::string>()});
  if (j.contains("instruction")) t.instruction = j.at("instruction").get<std::string>();
  return t;
}

PromptValues prompt_values(const FeatureVector& fv) {
  PromptValues v;
  const auto& names = FeatureVector::names();
  for (std::size_t i = 0; i < FeatureVector::kSize; ++i) {
    const std::string name(names[i]);
    if (name == "systolic_bp" || name == "respiratory_rate" || name == "gcs" || name == "circulation_normal")
      v[name] = fv[i];
    else
      v[name] = fv[i] == 1.0;
  }
  return v;
}

std::string build_prompt(const PromptValues& values, const PromptTemplate& t) {
  if (t.fields.empty()) throw Error(ErrorCode::MissingFeature, "prompt template lists no fields");
  std::string out;
  for (std::size_t i = 0; i < t.fields.size(); ++i) {
    const auto& f = t.fields[i];
    const auto it = values.find(f.feature);
    if (it == values.end()) throw Error(ErrorCode::MissingFeature, "missing prompt value '" + f.feature + "'");
    out += '\'';
    out += f.key;
    out += "': ";
    if (const bool* b = std::get_if<bool>(&it->second)) out += *b ? "True" : "False";
    else out += detail::format_number(std::get<double>(it->second));
    if (i + 1 < t.fields.size()) out += ',';
    out += '\n';
  }
  out += '\n';
  out += t.instruction;
  return out;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::True: return "true";
    case Verdict::False: return "false";
    case Verdict::Ambiguous: return "ambiguous";
  }
  return "?";
}

Verdict parse_verdict(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80) {
      cur += static_cast<char>(std::tolower(u));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  for (std::size_t i = words.size(); i-- > 0;) {
    if (words[i] != "true" && words[i] != "false") continue;
    bool v = words[i] == "true";
    if (i > 0 && words[i - 1] == "not") v = !v;
    return v ? Verdict::True : Verdict::False;
  }
  return Verdict::Ambiguous;
}

// ---------------------------------------------------------------------------
// Endpoint

void EndpointConfig::apply_environment() {
  if (const char* v = std::getenv("PSYTRIAGE_LLM_URL"); v && *v) base_url = v;
  if (const char* v = std::getenv("PSYTRIAGE_LLM_MODEL"); v && *v) model = v;
  try {
    if (const char* v = std::getenv("PSYTRIAGE_LLM_TIMEOUT_MS"); v && *v) timeout_ms = std::stoi(v);
    if (const char* v = std::getenv("PSYTRIAGE_LLM_RETRIES"); v && *v) retries = std::stoi(v);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig, "PSYTRIAGE_LLM_TIMEOUT_MS and PSYTRIAGE_LLM_RETRIES must be integers");
  }
}

json to_json(const EndpointConfig& c) {
  return json{{"base_url", c.base_url}, {"path", c.path},       {"model", c.model},
              {"timeout_ms", c.timeout_ms}, {"retries", c.retries}, {"backoff_ms", c.backoff_ms},
              {"max_in_flight", c.max_in_flight}, {"options", c.options}};
}

EndpointConfig endpoint_config_from_json(const json& j) {
  EndpointConfig c;
  c.base_url = j.value("base_url", c.base_url);
  c.path = j.value("path", c.path);
  c.model = j.value("model", c.model);
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.retries = j.value("retries", c.retries);
  c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  if (j.contains("options")) c.options = j.at("options");
  return c;
}

json generate_request(const std::string& prompt, const EndpointConfig& cfg) {
  json body{{"model", cfg.model}, {"prompt", prompt}, {"stream", false}};
  if (!cfg.options.empty()) body["options"] = cfg.options;
  return body;
}

LlmVerdict query(const std::string& prompt, const EndpointConfig& cfg) {
  if (cfg.timeout_ms <= 0) throw Error(ErrorCode::InvalidConfig, "timeout_ms must be positive");
  if (cfg.retries < 0) throw Error(ErrorCode::InvalidConfig, "retries must be non-negative");
  const std::string body = generate_request(prompt, cfg).dump();
  const auto timeout = std::chrono::milliseconds(cfg.timeout_ms);
  std::string last_error;
  auto backoff = std::chrono::milliseconds(cfg.backoff_ms);
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(cfg.base_url);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(cfg.path, body, "application/json");
    const auto latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    if (!res) {
      last_error = "request to " + cfg.base_url + cfg.path + " failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "endpoint returned status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw Error(ErrorCode::Transport, "endpoint returned status " + std::to_string(res->status));
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Transport, std::string("endpoint reply is not JSON: ") + e.what());
    }
    if (!reply.contains("response") || !reply.at("response").is_string())
      throw Error(ErrorCode::Transport, "endpoint reply has no 'response' text");
    LlmVerdict v;
    v.raw_response = reply.at("response").get<std::string>();
    v.verdict = parse_verdict(v.raw_response);
    v.latency = latency;
    return v;
  }
  throw Error(ErrorCode::Transport, last_error + " (after " + std::to_string(cfg.retries + 1) + " attempts)");
}

std::vector<LlmVerdict> query_all(const std::vector<std::string>& prompts, const EndpointConfig& cfg) {
  std::vector<LlmVerdict> out(prompts.size());
  const auto workers = static_cast<unsigned>(std::max<std::size_t>(1, cfg.max_in_flight));
  parallel_for(prompts.size(), [&](std::size_t i) { out[i] = query(prompts[i], cfg); }, workers);
  return out;
}

// ---------------------------------------------------------------------------
// Stub server

std::vector<StubReply> load_transcript(const std::filesystem::path& path) {
  std::vector<StubReply> replies;
  for (const auto& j : read_jsonl_file(path)) {
    StubReply r;
    r.response = j.value("response", std::string());
    r.status = j.value("status", 200);
    r.delay_ms = j.value("delay_ms", 0);
    replies.push_back(std::move(r));
  }
  if (replies.empty()) throw Error(ErrorCode::InvalidConfig, "transcript " + path.string() + " is empty");
  return replies;
}

struct StubServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::vector<StubReply> replies;
  mutable std::mutex mutex;
  std::size_t next = 0;
  std::vector<json> requests;
};

StubServer::StubServer(std::vector<StubReply> replies) : impl_(std::make_unique<Impl>()) {
  if (replies.empty()) throw Error(ErrorCode::InvalidConfig, "stub server needs at least one reply");
  impl_->replies = std::move(replies);
  Impl* impl = impl_.get();
  impl->server.Post("/api/generate", [impl](const httplib::Request& req, httplib::Response& res) {
    StubReply reply;
    json request;
    try {
      request = json::parse(req.body);
    } catch (const json::exception&) {
      request = req.body;
    }
    {
      std::lock_guard lock(impl->mutex);
      impl->requests.push_back(request);
      reply = impl->replies[impl->next % impl->replies.size()];
      ++impl->next;
    }
    if (reply.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(reply.delay_ms));
    res.status = reply.status;
    const std::string model = request.is_object() ? request.value("model", std::string()) : std::string();
    res.set_content(json{{"model", model}, {"response", reply.response}, {"done", true}}.dump(),
                    "application/json");
  });
  impl->port = impl->server.bind_to_any_port("127.0.0.1");
  if (impl->port <= 0) throw Error(ErrorCode::Transport, "stub server could not bind a port");
  impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  impl->server.wait_until_ready();
}

StubServer::~StubServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int StubServer::port() const { return impl_->port; }

std::string StubServer::url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

std::vector<json> StubServer::requests() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->requests;
}

// ---------------------------------------------------------------------------
// Comparison

ComparisonReport compare(const std::vector<std::string>& case_ids, const std::vector<PromptValues>& features,
                         const std::vector<int>& ml_predictions, const std::vector<Verdict>& llm_verdicts,
                         const std::vector<Label>& reference) {
  const std::size_t n = case_ids.size();
  if (ml_predictions.size() != n || llm_verdicts.size() != n || (!features.empty() && features.size() != n) ||
      (!reference.empty() && reference.size() != n))
    throw Error(ErrorCode::LengthMismatch, "comparison inputs differ in length");
  ComparisonReport r;
  for (std::size_t i = 0; i < n; ++i) {
    ComparisonRow row;
    row.case_id = case_ids[i];
    if (!features.empty()) row.features = features[i];
    row.ml_prediction = ml_predictions[i] == 1;
    row.llm_verdict = llm_verdicts[i];
    if (!reference.empty()) row.reference = reference[i];
    row.match = row.llm_verdict != Verdict::Ambiguous && (row.llm_verdict == Verdict::True) == row.ml_prediction;
    if (!row.match) {
      ++r.mismatches;
      r.mismatched_cases.push_back(row.case_id);
    }
    if (row.llm_verdict == Verdict::Ambiguous) r.ambiguous_cases.push_back(row.case_id);
    r.rows.push_back(std::move(row));
  }
  r.agreement = n == 0 ? 0.0 : static_cast<double>(n - r.mismatches) / static_cast<double>(n);
  return r;
}

json to_json(const ComparisonReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json feats = json::object();
    for (const auto& [k, v] : row.features) {
      if (const bool* b = std::get_if<bool>(&v)) feats[k] = *b;
      else feats[k] = std::get<double>(v);
    }
    json j{{"case_id", row.case_id},
           {"features", feats},
           {"ml_prediction", row.ml_prediction},
           {"llm_verdict", to_string(row.llm_verdict)},
           {"match", row.match}};
    if (row.reference) j["reference"] = to_string(*row.reference);
    rows.push_back(std::move(j));
  }
  return json{{"mismatches", r.mismatches},
              {"agreement", r.agreement},
              {"mismatched_cases", r.mismatched_cases},
              {"ambiguous_cases", r.ambiguous_cases},
              {"rows", rows}};
}

}  // namespace psytriage
