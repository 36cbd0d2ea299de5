#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "backstory/corpus/types.hpp"
#include "backstory/genpipe/prompts.hpp"
#include "backstory/likelihood/backend.hpp"
#include "backstory/util/jsonl.hpp"
#include "backstory/util/summary.hpp"

// Zero-shot emotion classification from label likelihoods: each category
// name is scored as the assistant reply to the classification prompt, and
// the 13 log-likelihoods are normalised into a distribution.
namespace backstory::emotion {

inline constexpr double kSumTolerance = 1e-9;

struct EmotionDistribution {
  std::array<double, kNumEmotions> probabilities{};
  std::array<double, kNumEmotions> raw_log_likelihoods{};

  double p(Emotion e) const noexcept { return probabilities[index_of(e)]; }
};

inline void validate(const EmotionDistribution& d) {
  double sum = 0.0;
  for (double p : d.probabilities) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ValidationError("probabilities", "negative or non-finite entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw ValidationError("probabilities", "sum " + std::to_string(sum) + " != 1");
  }
}

// p_e = exp(l_e - max) / sum_e' exp(l_e' - max). No length normalisation;
// the raw values are kept alongside.
inline EmotionDistribution from_log_likelihoods(
    const std::array<double, kNumEmotions>& raw) {
  EmotionDistribution d;
  d.raw_log_likelihoods = raw;
  const double mx = *std::max_element(raw.begin(), raw.end());
  if (!std::isfinite(mx)) {
    throw ValidationError("raw_log_likelihoods", "no finite label score");
  }
  double z = 0.0;
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    d.probabilities[i] = std::exp(raw[i] - mx);
    z += d.probabilities[i];
  }
  for (auto& p : d.probabilities) p /= z;
  return d;
}

// The classification prompt without its assistant turn, plus the label
// text that fills the assistant turn.
inline std::pair<Conversation, std::string> label_query(std::string_view text,
                                                        Emotion label) {
  auto msgs = genpipe::render(genpipe::PromptId::EMO_CLS,
                              {{"text_instance", std::string(text)},
                               {"emotion", std::string(to_string(label))}});
  std::string reply = msgs.back().content;
  msgs.pop_back();
  return {std::move(msgs), std::move(reply)};
}

inline EmotionDistribution classify(const likelihood::LikelihoodBackend& backend,
                                    std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw PreconditionError("cannot classify empty text");
  }
  std::array<double, kNumEmotions> raw{};
  for (auto e : kAllEmotions) {
    auto [context, label] = label_query(text, e);
    raw[index_of(e)] = backend.score_continuation(context, label);
  }
  return from_log_likelihoods(raw);
}

// Sentences 1..m joined by single spaces.
inline std::string prefix_text(std::span<const std::string> sentences, std::size_t m) {
  std::string out;
  for (std::size_t i = 0; i < m && i < sentences.size(); ++i) {
    if (i) out.push_back(' ');
    out += sentences[i];
  }
  return out;
}

struct EmotionTrajectory {
  std::string chain_id;
  std::array<EmotionDistribution, kChainLength> points;  // points[m-1]
};

inline EmotionTrajectory trajectory(const likelihood::LikelihoodBackend& backend,
                                    const EventChain& chain) {
  validate(chain);
  EmotionTrajectory t;
  t.chain_id = chain.id;
  for (std::size_t m = 1; m <= kChainLength; ++m) {
    try {
      t.points[m - 1] = classify(backend, prefix_text(chain.sentences, m));
    } catch (const std::exception& e) {
      throw Error("trajectory of " + chain.id + " failed at m=" + std::to_string(m) +
                  ": " + e.what());
    }
  }
  return t;
}

// Shannon entropy in nats, 0 ln 0 = 0. Equal probabilities are summed
// before taking the logarithm, so a uniform distribution yields exactly ln 13.
inline double entropy(const EmotionDistribution& d) {
  auto sorted = d.probabilities;
  std::sort(sorted.begin(), sorted.end());
  double h = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (sorted[i] > 0.0) h -= static_cast<double>(j - i) * sorted[i] * std::log(sorted[i]);
    i = j;
  }
  return h;
}

// Argmax; ties resolve to the earliest category in the fixed order.
inline Emotion top_label(const EmotionDistribution& d) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumEmotions; ++i) {
    if (d.probabilities[i] > d.probabilities[best]) best = i;
  }
  return emotion_at(best);
}

// {instance_id, m, <13 probability fields>, entropy, top_label}
inline util::OrderedJson distribution_record(const std::string& instance_id,
                                             std::size_t m,
                                             const EmotionDistribution& d) {
  util::OrderedJson j;
  j["instance_id"] = instance_id;
  j["m"] = m;
  for (auto e : kAllEmotions) j[std::string(to_string(e))] = d.p(e);
  j["entropy"] = entropy(d);
  j["top_label"] = to_string(top_label(d));
  return j;
}

// -- dataset report -------------------------------------------------------------

struct Cell {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
};

// Mean probability of the prompted emotion for events alone (E), for
// backstories (B, sentences 1-4) and for full chains (C).
struct EmotionReport {
  std::map<Emotion, Cell> events;
  std::map<Method, std::map<Emotion, Cell>> backstories;
  std::map<Method, std::map<Emotion, Cell>> chains;
  Cell events_overall;
  std::map<Method, Cell> backstories_overall;
  std::map<Method, Cell> chains_overall;
  std::vector<std::string> skipped;  // "<instance id>: <reason>"

  // Overall C(method) - C(baseline); absent without baseline chains.
  std::optional<double> chain_delta_vs_baseline(Method m) const {
    auto base = chains_overall.find(Method::baseline);
    auto it = chains_overall.find(m);
    if (base == chains_overall.end() || it == chains_overall.end()) return std::nullopt;
    return it->second.mean - base->second.mean;
  }
  std::optional<double> backstory_delta_vs_baseline(Method m) const {
    auto base = backstories_overall.find(Method::baseline);
    auto it = backstories_overall.find(m);
    if (base == backstories_overall.end() || it == backstories_overall.end()) {
      return std::nullopt;
    }
    return it->second.mean - base->second.mean;
  }
};

inline Cell to_cell(const util::MeanSd& s) { return {s.count(), s.mean(), s.sd()}; }

inline EmotionReport emotion_report(const likelihood::LikelihoodBackend& backend,
                                    std::span<const EventRecord> events,
                                    std::span<const EventChain> chains) {
  EmotionReport r;
  std::map<Emotion, util::MeanSd> ev;
  util::MeanSd ev_all;
  for (const auto& e : events) {
    try {
      const auto d = classify(backend, e.text);
      for (auto emo : kAllEmotions) {
        ev[emo].add(d.p(emo));
        ev_all.add(d.p(emo));
      }
    } catch (const std::exception& ex) {
      r.skipped.push_back(e.id + ": " + ex.what());
    }
  }
  std::map<Method, std::map<Emotion, util::MeanSd>> bs, cs;
  std::map<Method, util::MeanSd> bs_all, cs_all;
  for (const auto& c : chains) {
    try {
      validate(c);
      const auto pb = classify(backend, prefix_text(c.sentences, kBackstoryLength))
                          .p(c.prompted_emotion);
      const auto pc = classify(backend, prefix_text(c.sentences, kChainLength))
                          .p(c.prompted_emotion);
      bs[c.method][c.prompted_emotion].add(pb);
      cs[c.method][c.prompted_emotion].add(pc);
      bs_all[c.method].add(pb);
      cs_all[c.method].add(pc);
    } catch (const std::exception& ex) {
      r.skipped.push_back(c.id + ": " + ex.what());
    }
  }
  for (const auto& [e, s] : ev) r.events[e] = to_cell(s);
  r.events_overall = to_cell(ev_all);
  for (const auto& [m, per] : bs) {
    for (const auto& [e, s] : per) r.backstories[m][e] = to_cell(s);
  }
  for (const auto& [m, per] : cs) {
    for (const auto& [e, s] : per) r.chains[m][e] = to_cell(s);
  }
  for (const auto& [m, s] : bs_all) r.backstories_overall[m] = to_cell(s);
  for (const auto& [m, s] : cs_all) r.chains_overall[m] = to_cell(s);
  return r;
}

}  // namespace backstory::emotion
