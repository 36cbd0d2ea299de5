#pragma once

// State shared by every subcommand: global flags, the config file, backend
// construction, output files and the run manifest.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "backstory/genpipe/backends.hpp"
#include "backstory/genpipe/pipeline.hpp"
#include "backstory/genpipe/scripted_backend.hpp"
#include "backstory/likelihood/backend.hpp"
#include "backstory/likelihood/ngram.hpp"
#include "backstory/likelihood/remote.hpp"
#include "backstory/util/csv.hpp"
#include "backstory/util/jsonl.hpp"
#include "backstory/util/time.hpp"

namespace backstory::cli {

namespace fs = std::filesystem;
using util::OrderedJson;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  fs::path config;
  std::string backend;
  fs::path record;
  std::string scorer;
  fs::path out = "out";
  std::optional<std::size_t> workers;
};

// Values from the config file, overridden by flags. Keys:
//   seed, workers
//   generation: model, temperature, max_attempts, max_in_flight
//   scorer: spec, model, order, delta, sample_target, max_in_flight
//   service: see annosvc::apply_service_json
struct Settings {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string backend = "http";
  std::string scorer;
  genpipe::GenerationConfig generation;
  int chat_in_flight = 4;
  std::string scorer_model;
  int ngram_order = 2;
  double ngram_delta = 0.1;
  std::size_t sample_target = 30;
  int scorer_in_flight = 4;
  OrderedJson service = OrderedJson::object();
  fs::path config_dir;
};

inline OrderedJson read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  try {
    return OrderedJson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("bad JSON: ") + e.what(), 0, path.string());
  }
}

// A path inside a "kind:path" spec that came from a config file is taken
// relative to that file.
inline std::string relative_to(const fs::path& dir, const std::string& spec) {
  const auto colon = spec.find(':');
  if (dir.empty() || colon == std::string::npos) return spec;
  const auto kind = spec.substr(0, colon);
  if (kind != "ngram" && kind != "ngram-train" && kind != "fixture") return spec;
  const fs::path p = spec.substr(colon + 1);
  return p.is_absolute() ? spec : kind + ":" + (dir / p).string();
}

inline Settings resolve_settings(const GlobalOptions& g) {
  Settings s;
  if (!g.config.empty()) {
    const auto j = read_json_file(g.config);
    if (!j.is_object()) throw ValidationError("config", "expected a JSON object");
    s.config_dir = g.config.parent_path();
    try {
      s.seed = j.value("seed", s.seed);
      s.workers = j.value("workers", s.workers);
      s.backend = relative_to(s.config_dir, j.value("backend", s.backend));
      if (j.contains("generation")) {
        const auto& gen = j["generation"];
        s.generation.model = gen.value("model", s.generation.model);
        s.generation.temperature = gen.value("temperature", s.generation.temperature);
        s.generation.max_attempts = gen.value("max_attempts", s.generation.max_attempts);
        s.chat_in_flight = gen.value("max_in_flight", s.chat_in_flight);
      }
      if (j.contains("scorer")) {
        const auto& sc = j["scorer"];
        s.scorer = relative_to(s.config_dir, sc.value("spec", s.scorer));
        s.scorer_model = sc.value("model", s.scorer_model);
        s.ngram_order = sc.value("order", s.ngram_order);
        s.ngram_delta = sc.value("delta", s.ngram_delta);
        s.sample_target = sc.value("sample_target", s.sample_target);
        s.scorer_in_flight = sc.value("max_in_flight", s.scorer_in_flight);
      }
      if (j.contains("service")) s.service = j["service"];
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("config", e.what());
    }
  }
  if (g.seed) s.seed = *g.seed;
  if (g.workers) s.workers = *g.workers;
  if (!g.backend.empty()) s.backend = g.backend;
  if (!g.scorer.empty()) s.scorer = g.scorer;
  s.generation.seed = s.seed;
  s.generation.workers = s.workers;
  return s;
}

inline std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

// --backend http | scripted | fixture:<transcript>, optionally wrapped in a
// recorder when --record is set.
inline std::shared_ptr<genpipe::ChatBackend> make_chat_backend(const GlobalOptions& g,
                                                               Settings& s) {
  std::shared_ptr<genpipe::ChatBackend> b;
  const std::string& spec = s.backend;
  if (spec == "http") {
    genpipe::HttpChatConfig cfg;
    cfg.url = env_or_empty("BACKEND_URL");
    cfg.api_key = env_or_empty("BACKEND_KEY");
    cfg.model = s.generation.model;
    cfg.max_in_flight = s.chat_in_flight;
    if (cfg.url.empty()) {
      throw PreconditionError("--backend http needs BACKEND_URL in the environment");
    }
    s.generation.backend_url = cfg.url;
    b = std::make_shared<genpipe::HttpChatBackend>(cfg);
  } else if (spec == "scripted") {
    b = std::make_shared<genpipe::ScriptedBackend>();
  } else if (spec.starts_with("fixture:")) {
    b = std::make_shared<genpipe::FixtureBackend>(fs::path(spec.substr(8)));
  } else {
    throw ValidationError("backend", "unknown backend '" + spec +
                                         "' (http, scripted, fixture:<path>)");
  }
  if (!g.record.empty()) b = std::make_shared<genpipe::RecordingBackend>(b, g.record);
  return b;
}

// --scorer ngram:<saved model> | ngram-train:<text corpus> | remote:<url>
inline std::shared_ptr<const likelihood::LikelihoodBackend> make_scorer(const Settings& s) {
  const std::string& spec = s.scorer;
  if (spec.starts_with("ngram:")) {
    return std::make_shared<likelihood::NGramBackend>(
        likelihood::NGramModel::load(fs::path(spec.substr(6))));
  }
  if (spec.starts_with("ngram-train:")) {
    const auto corpus = likelihood::read_text_corpus(fs::path(spec.substr(12)));
    return std::make_shared<likelihood::NGramBackend>(
        likelihood::train_ngram(corpus, s.ngram_order, s.ngram_delta));
  }
  if (spec.starts_with("remote:")) {
    likelihood::RemoteScorerConfig cfg;
    cfg.url = spec.substr(7);
    cfg.model = s.scorer_model;
    cfg.api_key = env_or_empty("BACKEND_KEY");
    cfg.max_in_flight = s.scorer_in_flight;
    return std::make_shared<likelihood::RemoteLogprobBackend>(cfg);
  }
  if (spec.empty()) {
    throw PreconditionError("this command needs --scorer (ngram:<model>, "
                            "ngram-train:<corpus>, remote:<url>)");
  }
  throw ValidationError("scorer", "unknown scorer '" + spec + "'");
}

// Records what a run read, wrote and how long each stage took; written to
// <out>/manifest.json when the command finishes.
class RunManifest {
 public:
  RunManifest(std::string command, const GlobalOptions& g, const Settings& s)
      : command_(std::move(command)), out_dir_(g.out) {
    config_["config_file"] = g.config.string();
    config_["backend"] = s.backend;
    config_["scorer"] = s.scorer;
    config_["workers"] = s.workers;
    config_["generation"] = {{"model", s.generation.model},
                             {"temperature", s.generation.temperature},
                             {"max_attempts", s.generation.max_attempts}};
    config_["ngram"] = {{"order", s.ngram_order}, {"delta", s.ngram_delta}};
    config_["sample_target"] = s.sample_target;
    seeds_["base"] = s.seed;
  }

  const fs::path& out_dir() const noexcept { return out_dir_; }

  void input(const std::string& role, const fs::path& p) { inputs_[role] = p.string(); }
  void seed(const std::string& name, std::uint64_t v) { seeds_[name] = v; }

  fs::path output(const std::string& name) {
    const auto p = out_dir_ / name;
    outputs_.push_back(p.string());
    return p;
  }

  class Stage {
   public:
    Stage(RunManifest& m, std::string name)
        : m_(m), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
    Stage(const Stage&) = delete;
    Stage& operator=(const Stage&) = delete;
    void count(const std::string& key, std::size_t v) { counts_[key] = v; }
    ~Stage() {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
      OrderedJson j;
      j["name"] = name_;
      j["seconds"] = secs;
      j["counts"] = counts_;
      m_.stages_.push_back(std::move(j));
    }

   private:
    RunManifest& m_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
    OrderedJson counts_ = OrderedJson::object();
  };

  Stage stage(std::string name) { return Stage(*this, std::move(name)); }

  // Writes manifest.json, listing only outputs that exist.
  void write() {
    OrderedJson j;
    j["command"] = command_;
    j["finished_at"] = util::format_utc(util::now_utc());
    j["config"] = config_;
    j["seeds"] = seeds_;
    j["inputs"] = inputs_;
    OrderedJson outputs = OrderedJson::array();
    for (const auto& p : outputs_) {
      if (fs::exists(p)) outputs.push_back(p);
    }
    j["outputs"] = outputs;
    j["stages"] = stages_;
    auto out = util::open_for_write(out_dir_ / "manifest.json");
    out << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  fs::path out_dir_;
  OrderedJson config_ = OrderedJson::object();
  OrderedJson seeds_ = OrderedJson::object();
  OrderedJson inputs_ = OrderedJson::object();
  std::vector<std::string> outputs_;
  OrderedJson stages_ = OrderedJson::array();
};

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

// Writes <stem>.csv and <stem>.txt and echoes the aligned form to stdout.
inline void emit_table(RunManifest& m, const std::string& stem, const util::Table& t,
                       bool echo = true) {
  util::write_csv(m.output(stem + ".csv"), t);
  {
    auto out = util::open_for_write(m.output(stem + ".txt"));
    util::write_aligned(out, t);
  }
  if (echo) util::write_aligned(std::cout, t);
}

inline void emit_text(RunManifest& m, const std::string& name, const std::string& text) {
  auto out = util::open_for_write(m.output(name));
  out << text;
}

}  // namespace backstory::cli
