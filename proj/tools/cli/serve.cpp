#include <csignal>

#include "backstory/annosvc/server.hpp"
#include "backstory/corpus/io.hpp"
#include "commands.hpp"

namespace backstory::cli {

namespace {

struct ServiceArgs {
  std::string host;
  std::optional<int> port;
  fs::path events;
  fs::path chains;
  fs::path store;
  fs::path static_dir;
  std::optional<std::uint32_t> raters;
};

// Config file "service" section, then ANNOSVC_* variables, then flags.
annosvc::ServiceConfig service_config(const Settings& s, const ServiceArgs& a) {
  annosvc::ServiceConfig c;
  annosvc::apply_service_json(c, s.service, s.config_dir);
  annosvc::apply_service_env(c);
  if (!a.host.empty()) c.host = a.host;
  if (a.port) c.port = *a.port;
  if (!a.events.empty()) c.events_file = a.events;
  if (!a.chains.empty()) c.chains_file = a.chains;
  if (!a.store.empty()) c.study.store_dir = a.store;
  if (!a.static_dir.empty()) c.static_dir = a.static_dir;
  if (a.raters) c.study.raters_per_instance = *a.raters;
  if (!s.service.contains("seed") && !std::getenv("ANNOSVC_SEED")) c.study.seed = s.seed;
  c.study.validate();
  return c;
}

void record_inputs(RunManifest& m, const annosvc::ServiceConfig& c) {
  if (!c.events_file.empty()) m.input("events", c.events_file);
  if (!c.chains_file.empty()) m.input("chains", c.chains_file);
  if (!c.study.store_dir.empty()) m.input("store", c.study.store_dir);
}

annosvc::AnnotationServer* g_server = nullptr;

extern "C" void stop_on_signal(int) {
  if (g_server) g_server->stop();
}

int serve(const GlobalOptions& g, const ServiceArgs& a) {
  const auto s = resolve_settings(g);
  const auto cfg = service_config(s, a);
  RunManifest m("serve", g, s);
  record_inputs(m, cfg);
  if (cfg.study.store_dir.empty()) {
    std::cerr << "backstory: warning: no --store; annotations are kept in memory only\n";
  }
  annosvc::StudyService study(annosvc::load_instances(cfg), cfg.study);
  annosvc::AnnotationServer server(study, cfg.static_dir);
  if (!server.bind(cfg.host, cfg.port)) {
    throw IoError("cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
  }
  g_server = &server;
  std::signal(SIGINT, stop_on_signal);
  std::signal(SIGTERM, stop_on_signal);
  const auto progress = study.progress();
  std::cout << "serving " << progress.instances << " instances at http://" << cfg.host << ":"
            << cfg.port << "/ (" << progress.accepted << " of " << progress.required
            << " annotations present)" << std::endl;
  {
    auto st = m.stage("serve");
    server.listen_after_bind();
    const auto p = study.progress();
    st.count("sessions", p.sessions);
    st.count("annotations", p.accepted);
  }
  g_server = nullptr;
  m.write();
  return 0;
}

int export_study(const GlobalOptions& g, const ServiceArgs& a) {
  const auto s = resolve_settings(g);
  const auto cfg = service_config(s, a);
  if (cfg.study.store_dir.empty()) throw ValidationError("store", "export needs --store");
  if (!fs::is_directory(cfg.study.store_dir)) {
    throw IoError("no study store at '" + cfg.study.store_dir.string() + "'");
  }
  RunManifest m("export", g, s);
  record_inputs(m, cfg);
  const annosvc::StudyService study(annosvc::load_instances(cfg), cfg.study);
  const auto x = study.export_study();

  corpus::write_records(x.records, m.output("annotations.jsonl"));
  util::Table shortfalls{{"instance_id", "have", "need"}, {}};
  for (const auto& sf : x.shortfalls) {
    shortfalls.add({sf.instance_id, std::to_string(sf.have), std::to_string(sf.need)});
  }
  util::write_csv(m.output("shortfalls.csv"), shortfalls);
  if (x.matrix) {
    util::Table matrix{{"instance_id"}, {}};
    for (auto e : kAllEmotions) matrix.header.emplace_back(to_string(e));
    for (std::size_t i = 0; i < x.matrix->size(); ++i) {
      std::vector<std::string> row{x.matrix->items()[i]};
      for (auto c : x.matrix->counts()[i]) row.push_back(std::to_string(c));
      matrix.add(std::move(row));
    }
    util::write_csv(m.output("matrix.csv"), matrix);
  }
  const auto p = study.progress();
  std::cout << "annotations " << x.records.size() << ", complete instances "
            << p.complete_instances << " of " << p.instances << ", shortfalls "
            << x.shortfalls.size() << ", flagged annotators " << p.flagged_annotators.size()
            << '\n';
  m.write();
  return 0;
}

}  // namespace

void add_service_commands(CLI::App& app, GlobalOptions& g, Action& action) {
  auto a = std::make_shared<ServiceArgs>();
  auto common = [&](CLI::App* c) {
    c->add_option("--events", a->events, "Event records to annotate (JSONL)")
        ->check(CLI::ExistingFile);
    c->add_option("--chains", a->chains, "Chain records to annotate (JSONL)")
        ->check(CLI::ExistingFile);
    c->add_option("--store", a->store, "Directory holding sessions and annotations");
    c->add_option("--raters", a->raters, "Annotations required per instance")
        ->check(CLI::PositiveNumber);
  };

  auto* srv = app.add_subcommand("serve", "Run the annotation service");
  common(srv);
  srv->add_option("--host", a->host, "Listen address (default 127.0.0.1)");
  srv->add_option("--port", a->port, "Listen port (default 8080)")->check(CLI::Range(0, 65535));
  srv->add_option("--static", a->static_dir, "Directory with the annotation UI bundle")
      ->check(CLI::ExistingDirectory);
  srv->callback([&g, &action, a] { action = [&g, a] { return serve(g, *a); }; });

  auto* exp = app.add_subcommand("export", "Export annotations from a study store");
  common(exp);
  exp->callback([&g, &action, a] { action = [&g, a] { return export_study(g, *a); }; });
}

}  // namespace backstory::cli
