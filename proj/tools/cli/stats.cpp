#include "backstory/corpus/io.hpp"
#include "backstory/emotion.hpp"
#include "backstory/stats/agreement.hpp"
#include "backstory/stats/confusion.hpp"
#include "backstory/stats/correlation.hpp"
#include "backstory/textstats/analysis.hpp"
#include "backstory/textstats/lexicon.hpp"
#include "commands.hpp"

namespace backstory::cli {

namespace {

struct StatsArgs {
  fs::path chains;
  fs::path annotations;
  fs::path lexicon;
  fs::path predictions;
  std::optional<std::uint32_t> raters;
  std::size_t top_words = 0;
  std::string left;
  std::string right;
  std::string statistic = "both";
  std::string p_value = "auto";
};

std::vector<EventChain> load_chains(RunManifest& m, const fs::path& p) {
  m.input("chains", p);
  return corpus::read_records<EventChain>(p);
}

std::vector<AnnotationRecord> load_annotations(RunManifest& m, const fs::path& p) {
  m.input("annotations", p);
  return corpus::read_records<AnnotationRecord>(p);
}

// -- corpus statistics ------------------------------------------------------------

int stats_diversity(const GlobalOptions& g, const StatsArgs& a) {
  const auto s = resolve_settings(g);
  RunManifest m("stats diversity", g, s);
  const auto chains = load_chains(m, a.chains);
  const auto sets = corpus::partition_backstory_sets(chains);

  util::Table per_set{{"event_id", "method", "chains", "diversity"}, {}};
  std::map<Method, util::MeanSd> by_method;
  for (const auto& set : sets) {
    std::vector<textstats::TokenList> members;
    for (const auto& [e, c] : set.chains) members.push_back(textstats::backstory_tokens(c));
    const double d = textstats::diversity(members);
    by_method[set.method].add(d);
    per_set.add({set.event_id, std::string(to_string(set.method)),
                 std::to_string(members.size()), fixed(d, 6)});
  }
  util::write_csv(m.output("diversity_sets.csv"), per_set);
  util::Table t{{"method", "sets", "mean", "sd"}, {}};
  for (const auto& [method, st] : by_method) {
    t.add({std::string(to_string(method)), std::to_string(st.count()), fixed(st.mean()),
           fixed(st.sd())});
  }
  emit_table(m, "diversity", t);
  m.write();
  return 0;
}

int stats_leakage(const GlobalOptions& g, const StatsArgs& a) {
  const auto s = resolve_settings(g);
  RunManifest m("stats leakage", g, s);
  const auto chains = load_chains(m, a.chains);
  textstats::SynonymLexicon lexicon = textstats::default_lexicon();
  if (!a.lexicon.empty()) {
    m.input("lexicon", a.lexicon);
    lexicon = textstats::load_lexicon(a.lexicon);
  }
  {
    auto out = util::open_for_write(m.output("leaks.jsonl"));
    for (const auto& c : chains) {
      for (const auto& match : textstats::leakage_check(c, lexicon).matches) {
        OrderedJson j;
        j["chain_id"] = c.id;
        j["method"] = to_string(c.method);
        j["prompted_emotion"] = to_string(c.prompted_emotion);
        j["term"] = match.term;
        j["sentence"] = match.sentence;
        j["token"] = match.token;
        out << util::dump_line(j) << '\n';
      }
    }
  }
  util::Table t{{"method", "chains", "leaking", "rate"}, {}};
  for (const auto& [method, sum] : textstats::leakage_rate(chains, lexicon)) {
    t.add({std::string(to_string(method)), std::to_string(sum.total),
           std::to_string(sum.leaking), fixed(sum.rate())});
  }
  emit_table(m, "leakage", t);
  m.write();
  return 0;
}

int stats_lengths(const GlobalOptions& g, const StatsArgs& a) {
  const auto s = resolve_settings(g);
  RunManifest m("stats lengths", g, s);
  const auto chains = load_chains(m, a.chains);
  util::Table t{{"method", "chains", "s1", "s2", "s3", "s4", "backstory", "event"}, {}};
  for (const auto& [method, ls] : textstats::length_stats(chains)) {
    std::vector<std::string> row{std::string(to_string(method)), std::to_string(ls.chains)};
    for (double v : ls.mean_per_position) row.push_back(fixed(v, 2));
    row.push_back(fixed(ls.mean_backstory_total, 2));
    row.push_back(fixed(ls.mean_event, 2));
    t.add(std::move(row));
  }
  emit_table(m, "lengths", t);
  if (a.top_words > 0) {
    std::map<Method, std::vector<std::string>> texts;
    for (const auto& c : chains) {
      for (const auto& sentence : c.backstory()) texts[c.method].push_back(sentence);
    }
    util::Table words{{"method", "rank", "token", "count"}, {}};
    for (const auto& [method, list] : texts) {
      const auto counts = textstats::unigram_counts(list, {});
      for (std::size_t i = 0; i < std::min(a.top_words, counts.size()); ++i) {
        words.add({std::string(to_string(method)), std::to_string(i + 1), counts[i].first,
                   std::to_string(counts[i].second)});
      }
    }
    util::write_csv(m.output("top_words.csv"), words);
  }
  m.write();
  return 0;
}

// -- agreement ------------------------------------------------------------------------

std::string kappa_cell(const stats::AnnotationMatrix& matrix) {
  try {
    return fixed(stats::fleiss_kappa(matrix));
  } catch (const UndefinedStatisticError&) {
    return "undefined";
  }
}

void report_coverage(const stats::CoverageReport& coverage) {
  if (coverage.shortfalls.empty()) return;
  std::cerr << "backstory: " << coverage.shortfalls.size()
            << " instances excluded for an unexpected number of annotations\n";
}

int stats_kappa(const GlobalOptions& g, const StatsArgs& a) {
  const auto s = resolve_settings(g);
  RunManifest m("stats kappa", g, s);
  const auto records = load_annotations(m, a.annotations);
  stats::CoverageReport coverage;
  const auto matrix = stats::build_annotation_matrix(records, a.raters, &coverage);
  report_coverage(coverage);

  util::Table t{{"scope", "items", "raters", "kappa"}, {}};
  const auto raters = std::to_string(matrix.raters_per_item());
  t.add({"all", std::to_string(matrix.size()), raters, kappa_cell(matrix)});
  if (!a.chains.empty()) {
    std::map<std::string, Method> method_of;
    for (const auto& c : load_chains(m, a.chains)) method_of[c.id] = c.method;
    std::map<Method, std::vector<std::size_t>> rows;
    for (std::size_t i = 0; i < matrix.size(); ++i) {
      const auto it = method_of.find(matrix.items()[i]);
      if (it != method_of.end()) rows[it->second].push_back(i);
    }
    for (const auto& [method, r] : rows) {
      t.add({std::string(to_string(method)), std::to_string(r.size()), raters,
             kappa_cell(matrix.subset(r))});
    }
  }
  emit_table(m, "kappa", t);
  m.write();
  return 0;
}

constexpr const char* kCurvePlot = R"(# gnuplot script: kappa over the k best chains per event
set datafile separator ','
set key bottom left
set xlabel 'k best chains per event'
set ylabel 'Fleiss kappa'
set xtics 1
set terminal pngcairo size 800,500
set output 'kappa_curve.png'
plot for [m in "baseline pc pcr"] 'kappa_curve.csv' \
  using 2:(strcol(1) eq m ? $4 : NaN) with linespoints title m
)";

int stats_curve(const GlobalOptions& g, const StatsArgs& a) {
  const auto s = resolve_settings(g);
  RunManifest m("stats curve", g, s);
  const auto records = load_annotations(m, a.annotations);
  const auto chains = load_chains(m, a.chains);
  stats::CoverageReport coverage;
  const auto matrix = stats::build_annotation_matrix(records, a.raters, &coverage);
  report_coverage(coverage);

  util::Table t{{"method", "k", "items", "kappa"}, {}};
  for (const auto& [method, points] : stats::best_chain_curve(matrix, chains)) {
    for (const auto& p : points) {
      t.add({std::string(to_string(method)), std::to_string(p.k), std::to_string(p.items),
             p.kappa ? fixed(*p.kappa) : "NaN"});
    }
  }
  emit_table(m, "kappa_curve", t);
  emit_text(m, "plot_kappa_curve.gp", kCurvePlot);
  m.write();
  return 0;
}

// -- correlation ------------------------------------------------------------------

stats::PValueMethod p_value_method(const std::string& name) {
  if (name == "t") return stats::PValueMethod::t_approx;
  if (name == "permutation") return stats::PValueMethod::permutation;
  return stats::PValueMethod::automatic;
}

std::string record_key(const OrderedJson& j) {
  for (const char* key : {"instance_id", "chain_id", "id"}) {
    if (j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
  }
  throw ValidationError("instance_id", "record has no instance_id, chain_id or id");
}

// "<file>:<field>" -> values keyed by record id.
std::map<std::string, double> load_column(RunManifest& m, const std::string& role,
                                          const std::string& spec) {
  const auto colon = spec.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == spec.size()) {
    throw ValidationError(role, "expected <file>:<field>, got '" + spec + "'");
  }
  const fs::path file = spec.substr(0, colon);
  const auto field = spec.substr(colon + 1);
  m.input(role, file);
  std::map<std::string, double> out;
  util::for_each_jsonl(file, [&](const OrderedJson& j, std::size_t line) {
    if (!j.contains(field) || !j[field].is_number()) {
      throw ParseError("no numeric field '" + field + "'", line, j.dump());
    }
    if (!out.emplace(record_key(j), j[field].get<double>()).second) {
      throw ParseError("duplicate key '" + record_key(j) + "'", line, j.dump());
    }
  });
  return out;
}

stats::PredictionTable load_predictions(RunManifest& m, const fs::path& file) {
  m.input("predictions", file);
  stats::PredictionTable out;
  util::for_each_jsonl(file, [&](const OrderedJson& j, std::size_t line) {
    std::array<double, kNumEmotions> p{};
    for (auto e : kAllEmotions) {
      const std::string name(to_string(e));
      if (!j.contains(name) || !j[name].is_number()) {
        throw ParseError("no probability for '" + name + "'", line, j.dump());
      }
      p[index_of(e)] = j[name].get<double>();
    }
    if (!out.emplace(record_key(j), p).second) {
      throw ParseError("duplicate instance '" + record_key(j) + "'", line, j.dump());
    }
  });
  return out;
}

void add_correlations(util::Table& t, const std::string& scope, const std::vector<double>& x,
                      const std::vector<double>& y, const StatsArgs& a) {
  const auto method = p_value_method(a.p_value);
  auto add = [&](const char* name, auto fn) {
    try {
      const auto r = fn(x, y, method);
      t.add({scope, name, std::to_string(r.n), fixed(r.coefficient), fixed(r.p_value)});
    } catch (const UndefinedStatisticError&) {
      t.add({scope, name, std::to_string(x.size()), "undefined", "undefined"});
    } catch (const PreconditionError& e) {
      std::cerr << "backstory: " << scope << ": " << e.what() << '\n';
      t.add({scope, name, std::to_string(x.size()), "undefined", "undefined"});
    }
  };
  auto spearman = [](auto&&... args) { return stats::spearman(args...); };
  auto pearson = [](auto&&... args) { return stats::pearson(args...); };
  if (a.statistic != "pearson") add("spearman", spearman);
  if (a.statistic != "spearman") add("pearson", pearson);
}

int stats_correlate(const GlobalOptions& g, const StatsArgs& a) {
  const auto s = resolve_settings(g);
  RunManifest m("stats correlate", g, s);
  util::Table t{{"scope", "statistic", "n", "r", "p"}, {}};

  if (!a.predictions.empty()) {
    if (a.annotations.empty()) throw ValidationError("annotations", "--predictions needs --annotations");
    const auto predictions = load_predictions(m, a.predictions);
    const auto records = load_annotations(m, a.annotations);
    const auto pairs = stats::pair_with_annotations(predictions, records);
    add_correlations(t, "all", pairs.predicted, pairs.annotated, a);
  } else {
    if (a.left.empty() || a.right.empty()) {
      throw ValidationError("left", "give --predictions/--annotations or --left/--right");
    }
    const auto left = load_column(m, "left", a.left);
    const auto right = load_column(m, "right", a.right);
    std::map<std::string, Method> method_of;
    if (!a.chains.empty()) {
      for (const auto& c : load_chains(m, a.chains)) method_of[c.id] = c.method;
    }
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> scopes;
    for (const auto& [key, x] : left) {
      const auto it = right.find(key);
      if (it == right.end()) continue;
      scopes["all"].first.push_back(x);
      scopes["all"].second.push_back(it->second);
      if (const auto mt = method_of.find(key); mt != method_of.end()) {
        auto& sc = scopes[std::string(to_string(mt->second))];
        sc.first.push_back(x);
        sc.second.push_back(it->second);
      }
    }
    if (scopes.empty()) throw PreconditionError("the two inputs share no keys");
    for (const auto& [scope, xy] : scopes) add_correlations(t, scope, xy.first, xy.second, a);
  }
  emit_table(m, "correlation", t);
  m.write();
  return 0;
}

// -- confusion --------------------------------------------------------------------

util::Table confusion_table(const stats::ConfusionMatrix& cm) {
  util::Table t{{"prompted"}, {}};
  for (auto e : kAllEmotions) t.header.emplace_back(to_string(e));
  t.header.emplace_back("total");
  for (auto r : kAllEmotions) {
    std::vector<std::string> row{std::string(to_string(r))};
    for (auto c : kAllEmotions) row.push_back(std::to_string(cm.at(r, c)));
    row.push_back(std::to_string(cm.row_sums[index_of(r)]));
    t.add(std::move(row));
  }
  std::vector<std::string> total{"total"};
  for (auto c : kAllEmotions) total.push_back(std::to_string(cm.col_sums[index_of(c)]));
  total.push_back(std::to_string(cm.total));
  t.add(std::move(total));
  return t;
}

int stats_confusion(const GlobalOptions& g, const StatsArgs& a) {
  const auto s = resolve_settings(g);
  RunManifest m("stats confusion", g, s);
  const auto chains = load_chains(m, a.chains);
  if (a.annotations.empty() == a.predictions.empty()) {
    throw ValidationError("annotations", "give exactly one of --annotations and --predictions");
  }

  std::map<std::string, std::vector<Emotion>> labels;
  if (!a.annotations.empty()) {
    for (const auto& r : load_annotations(m, a.annotations)) {
      labels[r.instance_id].push_back(r.emotion);
    }
  } else {
    for (const auto& [id, p] : load_predictions(m, a.predictions)) {
      emotion::EmotionDistribution d;
      d.probabilities = p;
      labels[id].push_back(emotion::top_label(d));
    }
  }

  std::map<std::string, std::vector<std::pair<Emotion, Emotion>>> pairs;
  for (const auto& c : chains) {
    const auto it = labels.find(c.id);
    if (it == labels.end()) continue;
    for (auto label : it->second) {
      pairs["all"].emplace_back(c.prompted_emotion, label);
      pairs[std::string(to_string(c.method))].emplace_back(c.prompted_emotion, label);
    }
  }
  if (pairs.empty()) throw PreconditionError("no labels match the given chains");

  util::Table scores{{"scope", "class", "precision", "recall", "f1", "support", "predicted"}, {}};
  for (const auto& [scope, list] : pairs) {
    const auto cm = stats::confusion_matrix(list);
    util::write_csv(m.output("confusion_" + scope + ".csv"), confusion_table(cm));
    const auto sc = stats::precision_recall_f1(cm);
    for (auto e : kAllEmotions) {
      const auto& c = sc.per_class[index_of(e)];
      scores.add({scope, std::string(to_string(e)), fixed(c.precision), fixed(c.recall),
                  fixed(c.f1), std::to_string(c.support), std::to_string(c.predicted)});
    }
    scores.add({scope, "macro", fixed(sc.macro_precision), fixed(sc.macro_recall),
                fixed(sc.macro_f1), std::to_string(cm.total),
                std::to_string(sc.classes_averaged)});
  }
  emit_table(m, "classification_scores", scores, false);
  util::write_aligned(std::cout, confusion_table(stats::confusion_matrix(pairs.at("all"))));
  m.write();
  return 0;
}

}  // namespace

void add_stats_commands(CLI::App& app, GlobalOptions& g, Action& action) {
  auto* st = app.add_subcommand("stats", "Corpus, agreement and correlation statistics");
  st->require_subcommand(1);
  auto a = std::make_shared<StatsArgs>();

  auto chains_opt = [&](CLI::App* c) {
    return c->add_option("--chains", a->chains, "Chain records (JSONL)")->check(CLI::ExistingFile);
  };
  auto annotations_opt = [&](CLI::App* c) {
    return c->add_option("--annotations", a->annotations, "Annotation records (JSONL)")
        ->check(CLI::ExistingFile);
  };
  auto raters_opt = [&](CLI::App* c) {
    c->add_option("--raters", a->raters, "Raters per item (default: most common count)")
        ->check(CLI::Range(2u, 1000u));
  };
  auto bind = [&](CLI::App* c, int (*fn)(const GlobalOptions&, const StatsArgs&)) {
    c->callback([&g, &action, a, fn] { action = [&g, a, fn] { return fn(g, *a); }; });
  };

  auto* div = st->add_subcommand("diversity", "Jaccard diversity of each backstory set");
  chains_opt(div)->required();
  bind(div, stats_diversity);

  auto* leak = st->add_subcommand("leakage", "Prompted emotion words inside backstories");
  chains_opt(leak)->required();
  leak->add_option("--lexicon", a->lexicon, "Synonym lexicon (TSV)")->check(CLI::ExistingFile);
  bind(leak, stats_leakage);

  auto* len = st->add_subcommand("lengths", "Mean token counts per sentence position");
  chains_opt(len)->required();
  len->add_option("--top-words", a->top_words, "Also write the N most frequent backstory tokens");
  bind(len, stats_lengths);

  auto* kappa = st->add_subcommand("kappa", "Fleiss' kappa over annotated instances");
  annotations_opt(kappa)->required();
  chains_opt(kappa);
  raters_opt(kappa);
  bind(kappa, stats_kappa);

  auto* curve = st->add_subcommand("curve", "Kappa over the k best chains per event");
  annotations_opt(curve)->required();
  chains_opt(curve)->required();
  raters_opt(curve);
  bind(curve, stats_curve);

  auto* corr = st->add_subcommand("correlate", "Spearman and Pearson correlation");
  corr->add_option("--predictions", a->predictions, "Distribution records (JSONL)")
      ->check(CLI::ExistingFile);
  annotations_opt(corr);
  corr->add_option("--left", a->left, "<file>:<field> of a JSONL file");
  corr->add_option("--right", a->right, "<file>:<field> of a JSONL file");
  chains_opt(corr);
  corr->add_option("--statistic", a->statistic, "spearman, pearson or both")
      ->check(CLI::IsMember({"spearman", "pearson", "both"}));
  corr->add_option("--p-value", a->p_value, "auto, t or permutation")
      ->check(CLI::IsMember({"auto", "t", "permutation"}));
  bind(corr, stats_correlate);

  auto* conf = st->add_subcommand("confusion", "Prompted emotion against assigned labels");
  chains_opt(conf)->required();
  annotations_opt(conf);
  conf->add_option("--predictions", a->predictions, "Distribution records (JSONL)")
      ->check(CLI::ExistingFile);
  bind(conf, stats_confusion);
}

}  // namespace backstory::cli
