#include "backstory/coherence.hpp"
#include "backstory/corpus/io.hpp"
#include "backstory/emotion.hpp"
#include "commands.hpp"

namespace backstory::cli {

namespace {

std::string group_cell(std::size_t n, double mean, double sd) {
  return n ? fixed(mean) + " (" + fixed(sd) + ")" : "";
}

// -- coherence --------------------------------------------------------------------

struct CoherenceArgs {
  fs::path chains;
  std::optional<std::size_t> sample_target;
};

int coherence_score(const GlobalOptions& g, const CoherenceArgs& a) {
  auto s = resolve_settings(g);
  if (a.sample_target) s.sample_target = *a.sample_target;
  RunManifest m("coherence score", g, s);
  m.input("chains", a.chains);
  const auto scorer = make_scorer(s);
  const auto chains = corpus::read_records<EventChain>(a.chains);

  coherence::BatchResult r;
  {
    auto st = m.stage("score chains");
    r = coherence::batch_coherence(*scorer, chains, {s.sample_target, s.seed, s.workers});
    st.count("chains", chains.size());
    st.count("scored", r.results.size());
    st.count("failures", r.failures.size());
  }

  {
    auto out = util::open_for_write(m.output("coherence.jsonl"));
    for (std::size_t i = 0; i < r.results.size(); ++i) {
      const auto& c = r.results[i];
      OrderedJson j;
      j["chain_id"] = c.chain_id;
      j["method"] = to_string(r.methods[i]);
      j["prompted_emotion"] = to_string(r.emotions[i]);
      j["rank"] = c.rank;
      j["sample_size"] = c.sample_size;
      j["original_log_prob"] = c.original_log_prob;
      j["score"] = c.score;
      out << util::dump_line(j) << '\n';
    }
  }

  util::Table by_emotion{{"method", "emotion", "n", "mean", "sd"}, {}};
  for (const auto& [method, per] : r.by_emotion) {
    for (const auto& [e, gs] : per) {
      by_emotion.add({std::string(to_string(method)), std::string(to_string(e)),
                      std::to_string(gs.n), fixed(gs.mean), fixed(gs.sd)});
    }
  }
  util::write_csv(m.output("coherence_by_emotion.csv"), by_emotion);

  // One row per emotion, one column per method, as mean (sd).
  util::Table wide{{"emotion"}, {}};
  for (const auto& [method, gs] : r.by_method) wide.header.emplace_back(to_string(method));
  for (auto e : kAllEmotions) {
    std::vector<std::string> row{std::string(to_string(e))};
    for (const auto& [method, gs] : r.by_method) {
      const auto& per = r.by_emotion.at(method);
      const auto it = per.find(e);
      row.push_back(it == per.end() ? "" : group_cell(it->second.n, it->second.mean,
                                                       it->second.sd));
    }
    wide.add(std::move(row));
  }
  std::vector<std::string> total{"overall"};
  for (const auto& [method, gs] : r.by_method) total.push_back(group_cell(gs.n, gs.mean, gs.sd));
  wide.add(std::move(total));
  emit_table(m, "coherence_table", wide);

  if (!r.failures.empty()) {
    util::Table failures{{"chain_id", "message"}, {}};
    for (const auto& f : r.failures) failures.add({f.chain_id, f.message});
    util::write_csv(m.output("coherence_failures.csv"), failures);
  }
  m.write();
  if (!r.failures.empty()) {
    std::cerr << "backstory: " << r.failures.size()
              << " chains could not be scored; see coherence_failures.csv\n";
    return 1;
  }
  return 0;
}

// -- emotion ----------------------------------------------------------------------

struct EmotionArgs {
  fs::path events;
  fs::path chains;
  std::string text;
  std::size_t prefix = kChainLength;
};

int emotion_classify(const GlobalOptions& g, const EmotionArgs& a) {
  const auto s = resolve_settings(g);
  RunManifest m("emotion classify", g, s);
  const auto scorer = make_scorer(s);

  struct Item {
    std::string id;
    std::size_t m;
    std::string text;
  };
  std::vector<Item> items;
  if (!a.text.empty()) items.push_back({"text", 1, a.text});
  if (!a.events.empty()) {
    m.input("events", a.events);
    for (const auto& e : corpus::read_records<EventRecord>(a.events)) {
      items.push_back({e.id, 1, e.text});
    }
  }
  if (!a.chains.empty()) {
    m.input("chains", a.chains);
    for (const auto& c : corpus::read_records<EventChain>(a.chains)) {
      items.push_back({c.id, a.prefix, emotion::prefix_text(c.sentences, a.prefix)});
    }
  }
  if (items.empty()) throw PreconditionError("nothing to classify: give --text, --events or --chains");

  std::vector<emotion::EmotionDistribution> dists;
  {
    auto st = m.stage("classify");
    for (const auto& it : items) dists.push_back(emotion::classify(*scorer, it.text));
    st.count("instances", items.size());
  }
  {
    auto out = util::open_for_write(m.output("distributions.jsonl"));
    for (std::size_t i = 0; i < items.size(); ++i) {
      out << util::dump_line(emotion::distribution_record(items[i].id, items[i].m, dists[i]))
          << '\n';
    }
  }
  if (items.size() == 1) {
    util::Table t{{"emotion", "p"}, {}};
    for (auto e : kAllEmotions) t.add({std::string(to_string(e)), fixed(dists[0].p(e))});
    util::write_aligned(std::cout, t);
    std::cout << "entropy " << fixed(emotion::entropy(dists[0])) << ", top "
              << to_string(emotion::top_label(dists[0])) << '\n';
  } else {
    std::cout << "classified " << items.size() << " instances\n";
  }
  m.write();
  return 0;
}

constexpr const char* kTrajectoryPlot = R"(# gnuplot script: mean probability of the prompted emotion per prefix length
set datafile separator ','
set key top left
set xlabel 'sentences seen'
set ylabel 'mean p(prompted emotion)'
set xtics 1
set yrange [0:1]
set terminal pngcairo size 800,500
set output 'trajectory.png'
plot for [m in "baseline pc pcr"] 'trajectory_mean.csv' \
  using 2:(strcol(1) eq m ? $4 : NaN) with linespoints title m
)";

int emotion_trajectory(const GlobalOptions& g, const EmotionArgs& a) {
  const auto s = resolve_settings(g);
  RunManifest m("emotion trajectory", g, s);
  m.input("chains", a.chains);
  const auto scorer = make_scorer(s);
  const auto chains = corpus::read_records<EventChain>(a.chains);

  std::map<Method, std::array<util::MeanSd, kChainLength>> mean;
  {
    auto st = m.stage("trajectories");
    auto out = util::open_for_write(m.output("trajectories.jsonl"));
    for (const auto& c : chains) {
      const auto t = emotion::trajectory(*scorer, c);
      for (std::size_t i = 0; i < t.points.size(); ++i) {
        auto j = emotion::distribution_record(c.id, i + 1, t.points[i]);
        j["prompted_emotion"] = to_string(c.prompted_emotion);
        out << util::dump_line(j) << '\n';
        mean[c.method][i].add(t.points[i].p(c.prompted_emotion));
      }
    }
    st.count("chains", chains.size());
  }
  util::Table t{{"method", "m", "n", "mean", "sd"}, {}};
  for (const auto& [method, points] : mean) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      t.add({std::string(to_string(method)), std::to_string(i + 1),
             std::to_string(points[i].count()), fixed(points[i].mean()), fixed(points[i].sd())});
    }
  }
  util::write_csv(m.output("trajectory_mean.csv"), t);
  util::write_aligned(std::cout, t);
  emit_text(m, "plot_trajectory.gp", kTrajectoryPlot);
  m.write();
  return 0;
}

int emotion_report(const GlobalOptions& g, const EmotionArgs& a) {
  const auto s = resolve_settings(g);
  RunManifest m("emotion report", g, s);
  m.input("events", a.events);
  m.input("chains", a.chains);
  const auto scorer = make_scorer(s);
  const auto events = corpus::read_records<EventRecord>(a.events);
  const auto chains = corpus::read_records<EventChain>(a.chains);

  emotion::EmotionReport r;
  {
    auto st = m.stage("report");
    r = emotion::emotion_report(*scorer, events, chains);
    st.count("events", events.size());
    st.count("chains", chains.size());
    st.count("skipped", r.skipped.size());
  }

  std::vector<Method> methods;
  for (const auto& [method, c] : r.chains_overall) methods.push_back(method);
  util::Table t{{"emotion", "E"}, {}};
  for (auto method : methods) t.header.push_back("B_" + std::string(to_string(method)));
  for (auto method : methods) t.header.push_back("C_" + std::string(to_string(method)));
  auto cell = [](const std::map<Emotion, emotion::Cell>& per, Emotion e) {
    const auto it = per.find(e);
    return it == per.end() ? std::string() : fixed(it->second.mean);
  };
  for (auto e : kAllEmotions) {
    std::vector<std::string> row{std::string(to_string(e)), cell(r.events, e)};
    for (auto method : methods) row.push_back(cell(r.backstories[method], e));
    for (auto method : methods) row.push_back(cell(r.chains[method], e));
    t.add(std::move(row));
  }
  std::vector<std::string> overall{"overall", fixed(r.events_overall.mean)};
  for (auto method : methods) overall.push_back(fixed(r.backstories_overall[method].mean));
  for (auto method : methods) overall.push_back(fixed(r.chains_overall[method].mean));
  t.add(std::move(overall));
  std::vector<std::string> delta{"delta_vs_baseline", ""};
  for (auto method : methods) {
    const auto d = r.backstory_delta_vs_baseline(method);
    delta.push_back(d ? fixed(*d) : "");
  }
  for (auto method : methods) {
    const auto d = r.chain_delta_vs_baseline(method);
    delta.push_back(d ? fixed(*d) : "");
  }
  t.add(std::move(delta));
  emit_table(m, "emotion_report", t);

  if (!r.skipped.empty()) {
    util::Table skipped{{"instance"}, {}};
    for (const auto& x : r.skipped) skipped.add({x});
    util::write_csv(m.output("emotion_skipped.csv"), skipped);
    std::cerr << "backstory: " << r.skipped.size()
              << " instances skipped; see emotion_skipped.csv\n";
  }
  m.write();
  return r.skipped.empty() ? 0 : 1;
}

}  // namespace

void add_analysis_commands(CLI::App& app, GlobalOptions& g, Action& action) {
  auto* coh = app.add_subcommand("coherence", "Shuffle-test coherence");
  coh->require_subcommand(1);
  auto ca = std::make_shared<CoherenceArgs>();
  auto* score = coh->add_subcommand("score", "Score every chain against sentence shuffles");
  score->add_option("--chains", ca->chains, "Chain records (JSONL)")->required()->check(
      CLI::ExistingFile);
  score->add_option("--sample-target", ca->sample_target,
                    "Permutations per chain, original included (default 30)")
      ->check(CLI::PositiveNumber);
  score->callback([&g, &action, ca] { action = [&g, ca] { return coherence_score(g, *ca); }; });

  auto* emo = app.add_subcommand("emotion", "Zero-shot emotion analysis");
  emo->require_subcommand(1);
  auto ea = std::make_shared<EmotionArgs>();

  auto* classify = emo->add_subcommand("classify", "Distribution over the 13 categories");
  classify->add_option("--text", ea->text, "A single text");
  classify->add_option("--events", ea->events, "Event records (JSONL)")->check(CLI::ExistingFile);
  classify->add_option("--chains", ea->chains, "Chain records (JSONL)")->check(CLI::ExistingFile);
  classify->add_option("--prefix", ea->prefix, "Chain sentences to include (1-5)")
      ->check(CLI::Range(std::size_t{1}, kChainLength));
  classify->callback([&g, &action, ea] { action = [&g, ea] { return emotion_classify(g, *ea); }; });

  auto* traj = emo->add_subcommand("trajectory", "Distributions after each chain sentence");
  traj->add_option("--chains", ea->chains, "Chain records (JSONL)")->required()->check(
      CLI::ExistingFile);
  traj->callback([&g, &action, ea] { action = [&g, ea] { return emotion_trajectory(g, *ea); }; });

  auto* report = emo->add_subcommand("report", "Prompted-emotion probability of E, B and C");
  report->add_option("--events", ea->events, "Event records (JSONL)")->required()->check(
      CLI::ExistingFile);
  report->add_option("--chains", ea->chains, "Chain records (JSONL)")->required()->check(
      CLI::ExistingFile);
  report->callback([&g, &action, ea] { action = [&g, ea] { return emotion_report(g, *ea); }; });
}

}  // namespace backstory::cli
