#include <set>

#include "backstory/corpus/catalog.hpp"
#include "backstory/corpus/io.hpp"
#include "commands.hpp"

namespace backstory::cli {

namespace {

struct EventsArgs {
  std::size_t count = 10;
  std::string type;
  std::string object;
};

int events_generate(const GlobalOptions& g, const EventsArgs& a) {
  auto s = resolve_settings(g);
  auto backend = make_chat_backend(g, s);
  RunManifest m("events generate", g, s);

  std::vector<genpipe::EventAttributes> attrs;
  if (!a.type.empty()) {
    if (a.object.empty()) throw ValidationError("object", "--type needs --object");
    attrs.assign(a.count, {a.type, a.object});
  } else {
    attrs = genpipe::sample_event_attributes(a.count, s.seed);
  }

  std::vector<EventRecord> events;
  std::set<std::string> seen;
  util::Table failures{{"event_type", "event_object", "message"}, {}};
  {
    auto st = m.stage("generate events");
    for (const auto& at : attrs) {
      try {
        auto e = genpipe::generate_event(at.event_type, at.event_object, s.generation, *backend);
        if (seen.insert(e.id).second) events.push_back(std::move(e));
      } catch (const Error& e) {
        failures.add({at.event_type, at.event_object, e.what()});
      }
    }
    st.count("requested", attrs.size());
    st.count("events", events.size());
    st.count("failures", failures.rows.size());
  }
  if (!events.empty()) corpus::write_records(events, m.output("events.jsonl"));
  if (!failures.rows.empty()) util::write_csv(m.output("event_failures.csv"), failures);

  util::Table by_type{{"event_type", "events"}, {}};
  std::map<std::string, std::size_t> counts;
  for (const auto& e : events) ++counts[e.event_type];
  for (const auto& [t, n] : counts) by_type.add({t, std::to_string(n)});
  util::write_aligned(std::cout, by_type);
  m.write();
  if (!failures.rows.empty()) {
    std::cerr << "backstory: " << failures.rows.size() << " of " << attrs.size()
              << " events failed; see event_failures.csv\n";
    return 1;
  }
  return 0;
}

struct ChainsArgs {
  std::vector<std::string> methods;
  fs::path events;
  fs::path resume;
};

int chains_generate(const GlobalOptions& g, const ChainsArgs& a) {
  auto s = resolve_settings(g);
  auto backend = make_chat_backend(g, s);
  RunManifest m("chains generate", g, s);
  m.input("events", a.events);

  std::set<Method> methods;
  for (const auto& name : a.methods) methods.insert(parse_method(name));
  if (methods.empty()) methods.insert(kAllMethods.begin(), kAllMethods.end());

  const auto events = corpus::read_records<EventRecord>(a.events);
  std::vector<EventChain> existing;
  if (!a.resume.empty()) {
    m.input("resume", a.resume);
    existing = corpus::read_records<EventChain>(a.resume);
    corpus::validate_dataset(events, existing);
  }

  genpipe::DatasetResult r;
  {
    auto st = m.stage("generate backstories");
    r = genpipe::run_dataset(events, methods, s.generation, *backend, existing);
    st.count("events", events.size());
    st.count("produced", r.summary.produced_total());
    st.count("skipped", r.summary.skipped);
    st.count("failures", r.summary.failures.size());
  }
  corpus::write_records(r.chains, m.output("chains.jsonl"));

  util::Table summary{{"method", "emotion", "produced"}, {}};
  for (const auto& [method, per] : r.summary.produced) {
    for (const auto& [e, n] : per) {
      summary.add({std::string(to_string(method)), std::string(to_string(e)), std::to_string(n)});
    }
  }
  util::write_csv(m.output("chains_summary.csv"), summary);
  if (!r.summary.failures.empty()) {
    util::Table failures{{"event_id", "method", "emotion", "message"}, {}};
    for (const auto& f : r.summary.failures) {
      failures.add({f.event_id, std::string(to_string(f.method)),
                    std::string(to_string(f.emotion)), f.message});
    }
    util::write_csv(m.output("chain_failures.csv"), failures);
  }
  std::cout << "chains written: " << r.chains.size() << " (new " << r.summary.produced_total()
            << ", kept " << r.summary.skipped << ", failed " << r.summary.failures.size()
            << ")\n";
  m.write();
  if (!r.summary.failures.empty()) {
    std::cerr << "backstory: " << r.summary.failures.size()
              << " cells failed; see chain_failures.csv and rerun with --resume\n";
    return 1;
  }
  return 0;
}

}  // namespace

void add_generation_commands(CLI::App& app, GlobalOptions& g, Action& action) {
  auto* events = app.add_subcommand("events", "Concluding-event generation");
  events->require_subcommand(1);
  auto ea = std::make_shared<EventsArgs>();
  auto* eg = events->add_subcommand("generate", "Generate single-sentence events");
  eg->add_option("--count", ea->count, "Number of events")->check(CLI::PositiveNumber);
  eg->add_option("--type", ea->type, "Fixed event type (default: round-robin over the catalog)");
  eg->add_option("--object", ea->object, "Fixed event object, with --type");
  eg->callback([&g, &action, ea] { action = [&g, ea] { return events_generate(g, *ea); }; });

  auto* chains = app.add_subcommand("chains", "Backstory generation");
  chains->require_subcommand(1);
  auto ca = std::make_shared<ChainsArgs>();
  auto* cg = chains->add_subcommand("generate", "Generate one chain per event, emotion and method");
  cg->add_option("--method", ca->methods, "baseline, pc or pcr; repeatable (default: all)")
      ->check(CLI::IsMember({"baseline", "pc", "pcr"}));
  cg->add_option("--events", ca->events, "Event records (JSONL)")->required()->check(
      CLI::ExistingFile);
  cg->add_option("--resume", ca->resume, "Existing chains; only missing cells are generated")
      ->check(CLI::ExistingFile);
  cg->callback([&g, &action, ca] { action = [&g, ca] { return chains_generate(g, *ca); }; });
}

}  // namespace backstory::cli
