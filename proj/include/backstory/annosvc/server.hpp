#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "backstory/annosvc/study.hpp"
#include "backstory/corpus/io.hpp"

namespace backstory::annosvc {

using Json = nlohmann::ordered_json;

// -- wire format ------------------------------------------------------------------

inline Json task_to_json(const Task& t) {
  Json j;
  j["kind"] = to_string(t.kind);
  if (t.kind == TaskKind::complete) return j;
  j["task_id"] = t.task_id;
  j["instance_id"] = t.instance_id;
  j["instance_kind"] = to_string(t.instance_kind);
  j["sentences"] = t.sentences;
  if (t.kind == TaskKind::instance && t.instance_kind == InstanceKind::chain) {
    j["context"] = std::vector<std::string>(t.sentences.begin(), t.sentences.end() - 1);
    j["final_event"] = t.sentences.back();
  }
  Json options = Json::array();
  for (auto e : kAllEmotions) options.push_back(backstory::to_string(e));
  j["options"] = options;
  Json questions = Json::array();
  if (t.kind == TaskKind::instance) {
    for (const auto& q : question_set(t.instance_kind)) {
      questions.push_back({{"key", q.key}, {"text", q.text}, {"scale", q.scale}});
    }
  } else {
    j["instruction"] = t.sentences.front();
  }
  j["questions"] = questions;
  return j;
}

inline Submission submission_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("body", "expected a JSON object");
  Submission s;
  s.task_id = corpus::detail::required<std::string>(j, "task_id");
  s.emotion = parse_emotion(corpus::detail::required<std::string>(j, "emotion"));
  s.vagueness = corpus::detail::optional_field<int>(j, "vagueness");
  s.plausibility = corpus::detail::optional_field<int>(j, "plausibility");
  s.written_by_human = corpus::detail::optional_field<int>(j, "written_by_human");
  s.written_by_ai = corpus::detail::optional_field<int>(j, "written_by_ai");
  s.influence = corpus::detail::optional_field<bool>(j, "influence");
  s.realism = corpus::detail::optional_field<int>(j, "realism");
  return s;
}

inline Json progress_to_json(const StudyProgress& p) {
  Json j;
  j["instances"] = p.instances;
  j["raters_per_instance"] = p.raters_per_instance;
  j["required"] = p.required;
  j["accepted"] = p.accepted;
  j["complete_instances"] = p.complete_instances;
  j["sessions"] = p.sessions;
  j["attention_checks"] = p.attention_checks;
  j["attention_failures"] = p.attention_failures;
  j["flagged_annotators"] = p.flagged_annotators;
  return j;
}

inline Json matrix_to_json(const stats::AnnotationMatrix& m) {
  Json j;
  j["items"] = m.items();
  Json cats = Json::array();
  for (auto e : kAllEmotions) cats.push_back(backstory::to_string(e));
  j["categories"] = cats;
  Json rows = Json::array();
  for (const auto& r : m.counts()) rows.push_back(r);
  j["counts"] = rows;
  j["raters_per_item"] = m.raters_per_item();
  return j;
}

inline Json export_to_json(const StudyExport& x) {
  Json j;
  Json recs = Json::array();
  for (const auto& r : x.records) recs.push_back(corpus::to_json(r));
  j["records"] = recs;
  Json sf = Json::array();
  for (const auto& s : x.shortfalls) {
    sf.push_back({{"instance_id", s.instance_id}, {"have", s.have}, {"need", s.need}});
  }
  j["shortfalls"] = sf;
  j["matrix"] = x.matrix ? matrix_to_json(*x.matrix) : Json(nullptr);
  return j;
}

// -- configuration ------------------------------------------------------------------

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path static_dir;
  std::filesystem::path events_file;
  std::filesystem::path chains_file;
  StudyConfig study;
};

namespace detail {

inline const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

template <typename T>
T env_number(const char* name, const char* raw) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(raw, &pos);
    if (pos != std::string(raw).size()) throw std::invalid_argument(raw);
    return static_cast<T>(v);
  } catch (const std::exception&) {
    throw ValidationError(name, std::string("not a non-negative integer: ") + raw);
  }
}

}  // namespace detail

// Applies the keys of a config object; relative paths resolve against
// `base`. Keys: host, port, static_dir, events, chains, store_dir,
// raters_per_instance, attention_interval, attention_fail_threshold,
// lease_seconds, seed.
inline void apply_service_json(ServiceConfig& c, const Json& j,
                               const std::filesystem::path& base = {}) {
  if (!j.is_object()) throw ValidationError("config", "expected a JSON object");
  auto path_of = [&](const char* key) {
    std::filesystem::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : base / p;
  };
  if (j.contains("host")) c.host = j["host"].get<std::string>();
  if (j.contains("port")) c.port = j["port"].get<int>();
  if (j.contains("static_dir")) c.static_dir = path_of("static_dir");
  if (j.contains("events")) c.events_file = path_of("events");
  if (j.contains("chains")) c.chains_file = path_of("chains");
  if (j.contains("store_dir")) c.study.store_dir = path_of("store_dir");
  if (j.contains("raters_per_instance")) {
    c.study.raters_per_instance = j["raters_per_instance"].get<std::uint32_t>();
  }
  if (j.contains("attention_interval")) {
    c.study.attention_interval = j["attention_interval"].get<std::uint32_t>();
  }
  if (j.contains("attention_fail_threshold")) {
    c.study.attention_fail_threshold = j["attention_fail_threshold"].get<std::uint32_t>();
  }
  if (j.contains("lease_seconds")) c.study.lease_seconds = j["lease_seconds"].get<std::uint32_t>();
  if (j.contains("seed")) c.study.seed = j["seed"].get<std::uint64_t>();
}

// ANNOSVC_HOST, ANNOSVC_PORT, ANNOSVC_STATIC_DIR, ANNOSVC_EVENTS,
// ANNOSVC_CHAINS, ANNOSVC_STORE_DIR, ANNOSVC_RATERS,
// ANNOSVC_ATTENTION_INTERVAL, ANNOSVC_FAIL_THRESHOLD,
// ANNOSVC_LEASE_SECONDS, ANNOSVC_SEED.
inline void apply_service_env(ServiceConfig& c) {
  using detail::env;
  using detail::env_number;
  if (auto v = env("ANNOSVC_HOST")) c.host = v;
  if (auto v = env("ANNOSVC_PORT")) c.port = env_number<int>("ANNOSVC_PORT", v);
  if (auto v = env("ANNOSVC_STATIC_DIR")) c.static_dir = v;
  if (auto v = env("ANNOSVC_EVENTS")) c.events_file = v;
  if (auto v = env("ANNOSVC_CHAINS")) c.chains_file = v;
  if (auto v = env("ANNOSVC_STORE_DIR")) c.study.store_dir = v;
  if (auto v = env("ANNOSVC_RATERS")) {
    c.study.raters_per_instance = env_number<std::uint32_t>("ANNOSVC_RATERS", v);
  }
  if (auto v = env("ANNOSVC_ATTENTION_INTERVAL")) {
    c.study.attention_interval = env_number<std::uint32_t>("ANNOSVC_ATTENTION_INTERVAL", v);
  }
  if (auto v = env("ANNOSVC_FAIL_THRESHOLD")) {
    c.study.attention_fail_threshold = env_number<std::uint32_t>("ANNOSVC_FAIL_THRESHOLD", v);
  }
  if (auto v = env("ANNOSVC_LEASE_SECONDS")) {
    c.study.lease_seconds = env_number<std::uint32_t>("ANNOSVC_LEASE_SECONDS", v);
  }
  if (auto v = env("ANNOSVC_SEED")) c.study.seed = env_number<std::uint64_t>("ANNOSVC_SEED", v);
}

// Reads an optional JSON config file, then applies ANNOSVC_* environment
// overrides.
inline ServiceConfig load_service_config(const std::filesystem::path& file = {}) {
  ServiceConfig c;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read config '" + file.string() + "'");
    Json j;
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("bad config: ") + e.what(), 0, file.string());
    }
    apply_service_json(c, j, file.parent_path());
  }
  apply_service_env(c);
  c.study.validate();
  return c;
}

// Instances from the configured event and chain files, events first.
inline std::vector<StudyInstance> load_instances(const ServiceConfig& c) {
  std::vector<StudyInstance> out;
  if (!c.events_file.empty()) {
    for (const auto& e : corpus::read_records<EventRecord>(c.events_file)) {
      out.push_back(make_instance(e));
    }
  }
  if (!c.chains_file.empty()) {
    for (const auto& ch : corpus::read_records<EventChain>(c.chains_file)) {
      out.push_back(make_instance(ch));
    }
  }
  if (out.empty()) throw PreconditionError("the study has no instances");
  return out;
}

// -- HTTP -----------------------------------------------------------------------

class AnnotationServer {
 public:
  explicit AnnotationServer(StudyService& study, std::filesystem::path static_dir = {})
      : study_(study) {
    routes();
    if (!static_dir.empty() && std::filesystem::is_directory(static_dir)) {
      server_.set_mount_point("/", static_dir.string());
    }
  }

  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  ~AnnotationServer() { stop(); }

  // Binds to an ephemeral port and returns it; call listen_after_bind next.
  int bind_any(const std::string& host = "127.0.0.1") {
    return server_.bind_to_any_port(host);
  }
  bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  void stop() {
    if (server_.is_running()) server_.stop();
  }

 private:
  static void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const UnknownSessionError& e) {
      reply(res, 404, {{"error", e.what()}});
    } catch (const StaleTaskError& e) {
      reply(res, 409, {{"error", e.what()}, {"reason", "stale"}});
    } catch (const DuplicateSubmissionError& e) {
      reply(res, 409, {{"error", e.what()}, {"reason", "duplicate"}});
    } catch (const ValidationError& e) {
      reply(res, 400, {{"error", e.what()}, {"field", e.field()}});
    } catch (const nlohmann::json::exception& e) {
      reply(res, 400, {{"error", std::string("malformed body: ") + e.what()}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", e.what()}});
    }
  }

  static Json parse_body(const httplib::Request& req) {
    return Json::parse(req.body);
  }

  void routes() {
    server_.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = parse_body(req);
        if (!body.is_object()) throw ValidationError("body", "expected a JSON object");
        const auto annotator = corpus::detail::required<std::string>(body, "annotator_id");
        reply(res, 201, {{"session_id", study_.open_session(annotator)}});
      });
    });
    server_.Get(R"(/api/sessions/([^/]+)/next)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    reply(res, 200, task_to_json(study_.next_task(req.matches[1])));
                  });
                });
    server_.Post(R"(/api/sessions/([^/]+)/annotations)",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   guarded(res, [&] {
                     const auto r =
                         study_.submit(req.matches[1], submission_from_json(parse_body(req)));
                     reply(res, 200,
                           {{"accepted", r.accepted},
                            {"attention_pass", r.attention_pass},
                            {"flagged", r.flagged},
                            {"progress",
                             {{"session_completed", r.session_completed},
                              {"study_accepted", r.study_accepted},
                              {"study_required", r.study_required}}}});
                   });
                 });
    server_.Get("/api/admin/progress", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, progress_to_json(study_.progress())); });
    });
    server_.Get("/api/admin/export", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto x = study_.export_study();
        if (req.get_param_value("format") == "jsonl") {
          std::string body;
          for (const auto& r : x.records) body += util::dump_line(corpus::to_json(r)) + "\n";
          res.status = 200;
          res.set_content(body, "application/x-ndjson");
          return;
        }
        reply(res, 200, export_to_json(x));
      });
    });
  }

  StudyService& study_;
  httplib::Server server_;
};

}  // namespace backstory::annosvc
