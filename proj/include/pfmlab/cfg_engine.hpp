#pragma once

// Counterfactual generation: restriction filtering, two-factor batch ranking,
// training-sample emission, compact id maps and text templates.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfmlab/core/error.hpp"
#include "pfmlab/core/rng.hpp"
#include "pfmlab/lifelog.hpp"
#include "pfmlab/personal_vector.hpp"
#include "pfmlab/taste_space.hpp"
#include "pfmlab/wfa/cre.hpp"

namespace pfmlab::cfg {

using wfa::food_option;
using wfa::option_list;

// ---------------------------------------------------------------------------
// Settings
// ---------------------------------------------------------------------------

enum class factor { nutrition, preference };

inline const char* to_string(factor f) { return f == factor::nutrition ? "nutrition" : "preference"; }

inline const std::map<std::string, double>& default_nutrition_weights() {
  static const std::map<std::string, double> w{
      {"protein", 1.0}, {"fiber", 2.0}, {"sugar", -1.0}, {"saturated_fat", -2.0}, {"calories", -0.005}};
  return w;
}

struct cfg_settings {
  std::string name = "default";
  bool distance_enabled = true;
  std::vector<std::string> restriction_list;
  int nutrition_level = 1;
  int preference_level = 1;
  std::map<std::string, double> nutrition_weights = default_nutrition_weights();
  factor tie_break_first = factor::nutrition;  // wins when both levels are equal
  double cosine_weight = 0.7;
  double overlap_weight = 0.3;
  std::size_t favored_count = 10;

  int level(factor f) const { return f == factor::nutrition ? nutrition_level : preference_level; }
};

inline void validate(const cfg_settings& s) {
  for (int l : {s.nutrition_level, s.preference_level})
    if (l < 0 || l > 5) fail(errc::invalid_input, "sensitivity levels must lie in 0..5");
  if (s.nutrition_level == 0 && s.preference_level == 0)
    fail(errc::invalid_input, "at least one of nutrition_level, preference_level must be >= 1");
  for (const auto& [name, w] : s.nutrition_weights) {
    if (!std::isfinite(w)) fail(errc::invalid_input, "nutrition weight for '" + name + "' is not finite");
    if (std::find(nutrient_names.begin(), nutrient_names.end(), name) == nutrient_names.end())
      fail(errc::invalid_input, "unknown nutrient '" + name + "' in nutrition_weights");
  }
  for (const auto& term : s.restriction_list)
    if (term.empty()) fail(errc::invalid_input, "restriction terms must be non-empty");
}

inline cfg_settings settings_from_json(const json& j) {
  cfg_settings s;
  s.name = j.value("name", s.name);
  s.distance_enabled = j.value("distance", true);
  s.restriction_list = j.value("restrictions", std::vector<std::string>{});
  s.nutrition_level = j.value("nutrition_level", s.nutrition_level);
  s.preference_level = j.value("preference_level", s.preference_level);
  if (j.contains("nutrition_weights")) {
    s.nutrition_weights.clear();
    for (const auto& [k, v] : j["nutrition_weights"].items()) s.nutrition_weights[k] = v.get<double>();
  }
  const std::string tb = j.value("tie_break", std::string("nutrition_first"));
  if (tb == "nutrition_first") s.tie_break_first = factor::nutrition;
  else if (tb == "preference_first") s.tie_break_first = factor::preference;
  else fail(errc::invalid_input, "tie_break must be nutrition_first or preference_first");
  if (j.contains("preference_blend")) {
    s.cosine_weight = j["preference_blend"].value("cosine", s.cosine_weight);
    s.overlap_weight = j["preference_blend"].value("overlap", s.overlap_weight);
  }
  s.favored_count = j.value("favored_count", s.favored_count);
  if (!s.distance_enabled) fail(errc::invalid_input, "the distance factor cannot be disabled");
  validate(s);
  return s;
}

inline json to_json(const cfg_settings& s) {
  return json{{"name", s.name},
              {"distance", s.distance_enabled},
              {"restrictions", s.restriction_list},
              {"nutrition_level", s.nutrition_level},
              {"preference_level", s.preference_level},
              {"nutrition_weights", s.nutrition_weights},
              {"tie_break", s.tie_break_first == factor::nutrition ? "nutrition_first" : "preference_first"},
              {"preference_blend", {{"cosine", s.cosine_weight}, {"overlap", s.overlap_weight}}},
              {"favored_count", s.favored_count}};
}

// ---------------------------------------------------------------------------
// Restrictions
// ---------------------------------------------------------------------------

inline bool is_restricted(const food_option& o, const std::vector<std::string>& terms) {
  for (const auto& ing : o.ingredients) {
    const std::string name = wfa::lower(ing);
    for (const auto& t : terms)
      if (name.find(wfa::lower(t)) != std::string::npos) return true;
  }
  return false;
}

// Keeps input order. Throws when nothing survives so the caller can widen
// the option query.
inline std::vector<food_option> apply_restrictions(const std::vector<food_option>& options,
                                                   const std::vector<std::string>& terms) {
  std::vector<food_option> out;
  for (const auto& o : options)
    if (!is_restricted(o, terms)) out.push_back(o);
  if (out.empty() && !options.empty())
    fail(errc::all_options_restricted, "all " + std::to_string(options.size()) + " options contain restricted items");
  return out;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

// What the preference factor needs from the personal vector.
struct preference_input {
  taste_vector centroid;
  std::vector<std::string> favored;  // most favored first
};

inline preference_input preference_input_from(const preferential_vector& pv, std::size_t count = 10) {
  return {pv.window_short.taste_centroid, pv.window_short.top_ingredients(count)};
}

// Reads the short preferential window of a serialized personal vector (or of
// a bare preferential vector).
inline preference_input preference_input_from_json(const json& j, std::size_t count = 10) {
  const json& pref = j.contains("preferential") ? j["preferential"] : j;
  const json& w = pref.at("window_short");
  preference_input p;
  p.centroid = taste_from_json(w.at("taste_centroid"));
  for (const auto& r : w.at("ranking")) {
    if (p.favored.size() == count) break;
    p.favored.push_back(r.at("ingredient_id").get<std::string>());
  }
  return p;
}

struct scored_option {
  food_option option;
  double nutrition_score = 0.0;
  double preference_score = 0.0;

  double score(factor f) const { return f == factor::nutrition ? nutrition_score : preference_score; }
};

inline double nutrition_score(const nutrition& n, const std::map<std::string, double>& weights) {
  double s = 0.0;
  for (const auto& [name, w] : weights)
    if (auto v = nutrient_value(n, name)) s += w * *v;
  return s;
}

// Fraction of the option's ingredients that are among the favored ones.
inline double favored_overlap(const std::vector<std::string>& ingredients, const std::vector<std::string>& favored) {
  if (ingredients.empty()) return 0.0;
  std::set<std::string> fav;
  for (const auto& f : favored) fav.insert(wfa::lower(f));
  std::size_t hit = 0;
  for (const auto& i : ingredients)
    if (fav.count(wfa::lower(i))) ++hit;
  return static_cast<double>(hit) / static_cast<double>(ingredients.size());
}

inline std::vector<scored_option> score_options(const std::vector<food_option>& options, const preference_input& p,
                                                const cfg_settings& s) {
  std::vector<scored_option> out;
  out.reserve(options.size());
  for (const auto& o : options) {
    scored_option so{o, nutrition_score(o.facts, s.nutrition_weights),
                     s.cosine_weight * cosine(o.taste, p.centroid) +
                         s.overlap_weight * favored_overlap(o.ingredients, p.favored)};
    out.push_back(std::move(so));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ranking
// ---------------------------------------------------------------------------

inline std::size_t batch_size(std::size_t n, int level) {
  if (n == 0) return 0;
  if (level <= 1) return n;
  const std::size_t l = static_cast<std::size_t>(level);
  return std::max<std::size_t>(1, (n + l - 1) / l);
}

struct factor_order {
  factor first = factor::nutrition;
  factor second = factor::preference;
};

inline factor_order priority(const cfg_settings& s) {
  if (s.nutrition_level > s.preference_level) return {factor::nutrition, factor::preference};
  if (s.preference_level > s.nutrition_level) return {factor::preference, factor::nutrition};
  return s.tie_break_first == factor::nutrition ? factor_order{factor::nutrition, factor::preference}
                                                : factor_order{factor::preference, factor::nutrition};
}

struct ranked_list {
  std::vector<scored_option> order;  // full CFG ordering
  std::size_t batch = 0;             // how many leading entries came from the re-sorted batch
  factor_order factors;

  const scored_option& top() const { return order.front(); }
  std::vector<std::string> refs() const {
    std::vector<std::string> out;
    for (const auto& o : order) out.push_back(o.option.ref);
    return out;
  }
  // 0-based position of `ref`, or npos.
  std::size_t position(const std::string& ref) const {
    for (std::size_t i = 0; i < order.size(); ++i)
      if (order[i].option.ref == ref) return i;
    return static_cast<std::size_t>(-1);
  }
};

// Sorts by the higher-priority factor, keeps the leading ceil(n / level)
// batch, re-sorts that batch by the other factor and appends the remainder
// unchanged. A factor at level 0 takes no part; with both at 0 the list is
// ordered by option ref alone.
inline ranked_list cfg_rank(std::vector<scored_option> options, const cfg_settings& s) {
  if (options.empty()) fail(errc::empty_options, "cannot rank an empty option list");
  ranked_list r;
  r.factors = priority(s);
  const factor p1 = r.factors.first, p2 = r.factors.second;
  std::sort(options.begin(), options.end(),
            [](const scored_option& a, const scored_option& b) { return a.option.ref < b.option.ref; });
  if (s.level(p1) == 0) {
    r.batch = options.size();
    r.order = std::move(options);
    return r;
  }
  std::stable_sort(options.begin(), options.end(),
                   [p1](const scored_option& a, const scored_option& b) { return a.score(p1) > b.score(p1); });
  r.batch = batch_size(options.size(), s.level(p1));
  if (s.level(p2) > 0)
    std::stable_sort(options.begin(), options.begin() + static_cast<std::ptrdiff_t>(r.batch),
                     [p2](const scored_option& a, const scored_option& b) { return a.score(p2) > b.score(p2); });
  r.order = std::move(options);
  return r;
}

// ---------------------------------------------------------------------------
// Counterfactual samples
// ---------------------------------------------------------------------------

struct counterfactual_sample {
  std::size_t index = 0;
  std::string person_id;
  std::string event_id;  // the meal whose context was replayed
  timestamp at = 0;
  meal_type meal = meal_type::breakfast;
  stress_level stress = stress_level::low;
  temperature_level temperature = temperature_level::mild;
  std::string eaten_dish;              // what the person actually chose
  std::vector<std::string> history;    // previous dish ids, oldest first
  preference_input preference;
  nutrition recent_intake;             // 3-day nutrient sums
  std::vector<food_option> options;    // restriction-filtered, in option-list order
  std::vector<scored_option> ranked;   // CFG order
  std::string target;                  // ranked.front().option.ref
};

inline json to_json(const ranked_list& r) {
  json order = json::array();
  for (const auto& so : r.order)
    order.push_back({{"ref", so.option.ref},
                     {"name", so.option.name},
                     {"nutrition_score", so.nutrition_score},
                     {"preference_score", so.preference_score}});
  return json{{"batch", r.batch}, {"order", order}};
}

struct emit_config {
  std::size_t options = 20;
  bool meal_scoped = false;  // draw only from the replayed meal's dishes
  std::size_t history = 3;
  std::int64_t min_day = 30;  // skip meals before the preference window fills
  window_preset windows = cfg_study_preset;
};

struct emission {
  std::vector<counterfactual_sample> samples;
  std::size_t skipped_all_restricted = 0;
};

namespace detail {

struct person_view {
  event_stream stream;  // this person's events only
  std::vector<const lifelog_event*> meals;
};

}  // namespace detail

// For each draw, replays a random past meal's context: option list, then
// restriction filter, scoring and ranking. Deterministic in `seed`.
inline emission emit_counterfactuals(const event_stream& s, const taste_dataset& ds, const cfg_settings& settings,
                                     std::size_t n_samples, std::uint64_t seed, const emit_config& cfg = {}) {
  validate(settings);
  emission out;
  if (n_samples == 0) return out;
  std::map<std::string, detail::person_view> people;
  for (const auto& e : s.events) people[e.person_id].stream.events.push_back(e);
  for (const auto& dc : s.day_contexts) people[dc.person_id].stream.day_contexts.push_back(dc);
  std::vector<std::pair<detail::person_view*, const lifelog_event*>> pool;
  for (auto& [_, pv] : people) {
    for (const auto& e : pv.stream.events)
      if (e.kind == event_kind::meal && e.informational.dish_id && day_index(e.start) >= cfg.min_day)
        pv.meals.push_back(&e);
    for (const auto* m : pv.meals) pool.emplace_back(&pv, m);
  }
  if (pool.empty()) fail(errc::insufficient_data, "no meals after the warm-up window");

  for (std::size_t i = 0; i < n_samples; ++i) {
    rng r = rng::split(seed, "cfg/sample", i);
    const auto [view, meal] = pool[r.below(pool.size())];
    const auto& ps = view->stream;
    counterfactual_sample cs;
    cs.index = i;
    cs.person_id = meal->person_id;
    cs.event_id = meal->event_id;
    cs.at = meal->start;
    cs.meal = meal->meal.value_or(meal_type::breakfast);
    cs.eaten_dish = *meal->informational.dish_id;
    if (const day_context* dc = ps.context_for(cs.person_id, day_index(cs.at))) {
      cs.stress = dc->stress;
      cs.temperature = dc->temperature;
    }
    const auto it = std::find(view->meals.begin(), view->meals.end(), meal);
    for (auto h = it; h != view->meals.begin() && cs.history.size() < cfg.history;) {
      --h;
      cs.history.insert(cs.history.begin(), *(*h)->informational.dish_id);
    }
    const auto pref = preferential_vector_at(ps, ds, cs.person_id, cs.at, cfg.windows);
    cs.preference = preference_input_from(pref, settings.favored_count);
    cs.recent_intake = biological_vector_at(ps, cs.person_id, cs.at).window_3_day.intake;

    auto list = wfa::random_options(ds, cfg.meal_scoped ? std::optional(cs.meal) : std::nullopt, cfg.options, r);
    try {
      cs.options = apply_restrictions(list.options, settings.restriction_list);
    } catch (const error& e) {
      if (e.code() != errc::all_options_restricted) throw;
      ++out.skipped_all_restricted;
      continue;
    }
    cs.ranked = cfg_rank(score_options(cs.options, cs.preference, settings), settings).order;
    cs.target = cs.ranked.front().option.ref;
    out.samples.push_back(std::move(cs));
  }
  return out;
}

inline json to_json(const counterfactual_sample& c) {
  json opts = json::array();
  for (const auto& o : c.options) opts.push_back(wfa::to_json(o));
  json ranked = json::array();
  for (const auto& so : c.ranked)
    ranked.push_back({{"ref", so.option.ref}, {"nutrition_score", so.nutrition_score},
                      {"preference_score", so.preference_score}});
  return json{{"index", c.index},
              {"person_id", c.person_id},
              {"event_id", c.event_id},
              {"at", format_timestamp(c.at)},
              {"meal_type", to_string(c.meal)},
              {"stress_level", to_string(c.stress)},
              {"temperature_level", to_string(c.temperature)},
              {"eaten_dish", c.eaten_dish},
              {"history", c.history},
              {"personal",
               {{"taste_centroid", to_json(c.preference.centroid)},
                {"favored_ingredients", c.preference.favored},
                {"recent_intake_3_day", to_json(c.recent_intake)}}},
              {"options", opts},
              {"cfg_sorted", ranked},
              {"target", c.target}};
}

// ---------------------------------------------------------------------------
// Id maps
// ---------------------------------------------------------------------------

class id_map {
 public:
  id_map() = default;

  static id_map assign(std::vector<std::string> items, std::vector<std::string> users) {
    id_map m;
    m.items_ = build(std::move(items), "item");
    m.users_ = build(std::move(users), "user");
    return m;
  }

  std::size_t item_id(const std::string& key) const { return lookup(items_, key, "item"); }
  std::size_t user_id(const std::string& key) const { return lookup(users_, key, "user"); }
  const std::string& item_key(std::size_t id) const { return reverse(items_, id, "item"); }
  const std::string& user_key(std::size_t id) const { return reverse(users_, id, "user"); }
  std::size_t item_count() const { return items_.size(); }
  std::size_t user_count() const { return users_.size(); }
  bool empty() const { return items_.empty() && users_.empty(); }

  json to_json() const {
    json items = json::array(), users = json::array();
    for (std::size_t i = 0; i < items_.size(); ++i) items.push_back({{"id", i + 1}, {"key", items_[i]}});
    for (std::size_t i = 0; i < users_.size(); ++i) users.push_back({{"id", i + 1}, {"key", users_[i]}});
    return json{{"items", items}, {"users", users}};
  }

 private:
  // Ids are 1-based positions in sorted key order.
  static std::vector<std::string> build(std::vector<std::string> keys, const char* what) {
    std::sort(keys.begin(), keys.end());
    auto dup = std::adjacent_find(keys.begin(), keys.end());
    if (dup != keys.end()) fail(errc::duplicate_key, std::string("duplicate ") + what + " key '" + *dup + "'");
    return keys;
  }
  static std::size_t lookup(const std::vector<std::string>& v, const std::string& key, const char* what) {
    auto it = std::lower_bound(v.begin(), v.end(), key);
    if (it == v.end() || *it != key) fail(errc::not_found, std::string("unmapped ") + what + " '" + key + "'");
    return static_cast<std::size_t>(it - v.begin()) + 1;
  }
  static const std::string& reverse(const std::vector<std::string>& v, std::size_t id, const char* what) {
    if (id == 0 || id > v.size()) fail(errc::not_found, std::string("no ") + what + " with id " + std::to_string(id));
    return v[id - 1];
  }

  std::vector<std::string> items_;
  std::vector<std::string> users_;
};

inline id_map assign_ids(std::vector<std::string> items, std::vector<std::string> users) {
  return id_map::assign(std::move(items), std::move(users));
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

enum class template_category { sequential, star_rating, yes_no };

inline template_category parse_template_category(const std::string& s) {
  if (s == "sequential") return template_category::sequential;
  if (s == "star_rating") return template_category::star_rating;
  if (s == "yes_no") return template_category::yes_no;
  fail(errc::unknown_category, "unknown template category '" + s + "'");
}

inline const char* to_string(template_category c) {
  switch (c) {
    case template_category::sequential: return "sequential";
    case template_category::star_rating: return "star_rating";
    case template_category::yes_no: return "yes_no";
  }
  return "?";
}

struct template_record {
  std::string input;
  std::string target;
  std::size_t variant = 0;
};

inline std::string item_token(std::size_t id) { return "item_" + std::to_string(id); }
inline std::string user_token(std::size_t id) { return "user_" + std::to_string(id); }

// Star thresholds: the 20/40/60/80th percentiles of the given scores.
inline std::array<double, 4> star_cutpoints(std::vector<double> scores) {
  std::array<double, 4> cut{};
  if (scores.empty()) return cut;
  std::sort(scores.begin(), scores.end());
  for (std::size_t q = 0; q < 4; ++q) {
    const double pos = 0.2 * static_cast<double>(q + 1) * static_cast<double>(scores.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, scores.size() - 1);
    cut[q] = scores[lo] + (pos - static_cast<double>(lo)) * (scores[hi] - scores[lo]);
  }
  return cut;
}

inline int stars_for(double score, const std::array<double, 4>& cut) {
  int stars = 1;
  for (double c : cut)
    if (score > c) ++stars;
  return stars;
}

// Health-effect tag asked about by the yes/no template for sample i.
inline std::string queried_effect(const counterfactual_sample& s, const std::vector<std::string>& vocabulary) {
  return vocabulary.empty() ? std::string() : vocabulary[s.index % vocabulary.size()];
}

inline std::vector<template_record> emit_templates(std::span<const counterfactual_sample> samples,
                                                   template_category category, const id_map& ids,
                                                   const std::vector<std::string>& effect_vocabulary = {}) {
  std::vector<template_record> out;
  std::array<double, 4> cut{};
  if (category == template_category::star_rating) {
    std::vector<double> scores;
    for (const auto& s : samples) scores.push_back(s.ranked.front().nutrition_score);
    cut = star_cutpoints(std::move(scores));
  }
  for (const auto& s : samples) {
    const std::string user = user_token(ids.user_id(s.person_id));
    const std::string item = item_token(ids.item_id(s.target));
    const scored_option& top = s.ranked.front();
    std::string hist;
    for (const auto& h : s.history) hist += (hist.empty() ? "" : ", ") + item_token(ids.item_id(h));
    std::string opts;
    for (const auto& o : s.options) opts += (opts.empty() ? "" : ", ") + item_token(ids.item_id(o.ref));
    const std::string meal(to_string(s.meal));
    switch (category) {
      case template_category::sequential:
        out.push_back({user + " has eaten " + hist + " recently. From " + opts + ", which " + meal +
                           " item should " + user + " choose next?",
                       item, 0});
        out.push_back({"Given the history " + hist + " of " + user + " and the options " + opts +
                           ", predict the next healthy " + meal + " choice.",
                       item, 1});
        out.push_back({"Options nearby: " + opts + ". Recent meals of " + user + ": " + hist +
                           ". Recommend one item for " + meal + ".",
                       item, 2});
        break;
      case template_category::star_rating: {
        const std::string stars = std::to_string(stars_for(top.nutrition_score, cut));
        out.push_back({"How healthy is " + item + " for " + user + " on a 1 to 5 star scale?", stars, 0});
        out.push_back({"Rate the healthiness of " + item + " from 1 to 5 stars for " + user + ".", stars, 1});
        out.push_back({user + " is considering " + item + " for " + meal + ". How many health stars does it earn?",
                       stars, 2});
        break;
      }
      case template_category::yes_no: {
        const std::string effect = queried_effect(s, effect_vocabulary);
        const auto& tags = top.option.health_effects;
        const bool yes = std::find(tags.begin(), tags.end(), effect) != tags.end();
        const std::string ans = yes ? "yes" : "no";
        out.push_back({"Does " + item + " have a known " + effect + "? Answer yes or no.", ans, 0});
        out.push_back({"Is " + item + " linked to " + effect + " for " + user + "? yes or no", ans, 1});
        out.push_back({"yes/no: " + effect + " is reported for " + item + ".", ans, 2});
        break;
      }
    }
  }
  return out;
}

inline std::string to_line(const template_record& r) { return r.input + "\t" + r.target; }

inline template_record parse_line(const std::string& line) {
  const auto tab = line.rfind('\t');
  if (tab == std::string::npos) fail(errc::invalid_input, "template line has no tab");
  return {line.substr(0, tab), line.substr(tab + 1), 0};
}

// Recovers the item id a record is about. Sequential records carry it in
// the answer slot, the other categories in the question.
inline std::size_t answer_item(const template_record& r, template_category c) {
  const auto parse_token = [](const std::string& s, std::size_t pos) {
    std::size_t i = pos + 5, v = 0;
    if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) fail(errc::invalid_input, "bad item token");
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) v = v * 10 + static_cast<std::size_t>(s[i++] - '0');
    return v;
  };
  if (c == template_category::sequential) {
    if (r.target.rfind("item_", 0) != 0) fail(errc::invalid_input, "answer is not an item token");
    return parse_token(r.target, 0);
  }
  const auto pos = r.input.find("item_");
  if (pos == std::string::npos) fail(errc::invalid_input, "question names no item");
  return parse_token(r.input, pos);
}

// ---------------------------------------------------------------------------
// Recommender backends
// ---------------------------------------------------------------------------

// Context features of a sample: meal one-hot, stress and temperature levels,
// the unit taste centroid and 3-day intake in thousands of kcal.
inline constexpr std::size_t context_feature_dims = 12;

inline std::array<double, context_feature_dims> context_features(const counterfactual_sample& s) {
  std::array<double, context_feature_dims> f{};
  f[static_cast<std::size_t>(s.meal)] = 1.0;
  f[3] = static_cast<double>(s.stress);
  f[4] = static_cast<double>(s.temperature);
  const double norm = s.preference.centroid.norm();
  for (std::size_t i = 0; i < taste_dims; ++i) f[5 + i] = norm > 0.0 ? s.preference.centroid.v[i] / norm : 0.0;
  f[11] = s.recent_intake.calories / 1000.0;
  return f;
}

// Per-dimension mean and standard deviation (sd 0 is treated as 1).
template <std::size_t N>
struct standardizer {
  std::array<double, N> mean{};
  std::array<double, N> sd{};

  static standardizer fit(std::span<const std::array<double, N>> rows) {
    standardizer z;
    z.sd.fill(1.0);
    if (rows.empty()) return z;
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows)
      for (std::size_t i = 0; i < N; ++i) z.mean[i] += r[i] / n;
    for (std::size_t i = 0; i < N; ++i) {
      double ss = 0.0;
      for (const auto& r : rows) ss += (r[i] - z.mean[i]) * (r[i] - z.mean[i]);
      const double sd = std::sqrt(ss / n);
      z.sd[i] = sd > 0.0 ? sd : 1.0;
    }
    return z;
  }

  std::array<double, N> apply(const std::array<double, N>& x) const {
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = (x[i] - mean[i]) / sd[i];
    return out;
  }
};

template <std::size_t N>
inline double squared_distance(const std::array<double, N>& a, const std::array<double, N>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < N; ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

class recommender_backend {
 public:
  virtual ~recommender_backend() = default;
  virtual std::string name() const = 0;
  virtual void train(std::span<const counterfactual_sample>) {}
  virtual std::string pick(const counterfactual_sample& query) const = 0;
};

// Replays the CFG ranking itself.
class oracle_backend final : public recommender_backend {
 public:
  explicit oracle_backend(cfg_settings s) : settings_(std::move(s)) {}
  std::string name() const override { return "oracle"; }
  std::string pick(const counterfactual_sample& q) const override {
    return cfg_rank(score_options(q.options, q.preference, settings_), settings_).top().option.ref;
  }

 private:
  cfg_settings settings_;
};

class random_backend final : public recommender_backend {
 public:
  explicit random_backend(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  std::string pick(const counterfactual_sample& q) const override {
    rng r = rng::split(seed_, "random-backend", q.index);
    return q.options[r.below(q.options.size())].ref;
  }

 private:
  std::uint64_t seed_;
};

// Learns from counterfactual targets. Each option is described relative to
// its own list (nutrient z-scores within the list, taste cosine to the
// person's centroid, favored-ingredient overlap). For a query, the k most
// similar training contexts contribute the mean offset of their targets from
// their list average; the option best aligned with that offset wins.
class nearest_neighbor_backend final : public recommender_backend {
 public:
  static constexpr std::size_t option_dims = 9;
  using option_features = std::array<double, option_dims>;

  explicit nearest_neighbor_backend(std::size_t k = 25) : k_(k) {
    if (k_ == 0) fail(errc::invalid_input, "k must be at least 1");
  }

  std::string name() const override { return "nearest_neighbor"; }

  void train(std::span<const counterfactual_sample> samples) override {
    contexts_.clear();
    offsets_.clear();
    std::vector<std::array<double, context_feature_dims>> raw;
    for (const auto& s : samples) {
      const auto feats = list_features(s);
      const auto mean = mean_of(feats);
      std::size_t t = 0;
      while (t < s.options.size() && s.options[t].ref != s.target) ++t;
      if (t == s.options.size()) continue;
      option_features off{};
      for (std::size_t i = 0; i < option_dims; ++i) off[i] = feats[t][i] - mean[i];
      offsets_.push_back(off);
      raw.push_back(context_features(s));
    }
    z_ = standardizer<context_feature_dims>::fit(raw);
    for (const auto& r : raw) contexts_.push_back(z_.apply(r));
  }

  std::string pick(const counterfactual_sample& q) const override {
    if (q.options.empty()) fail(errc::empty_options, "query has no options");
    const auto feats = list_features(q);
    if (contexts_.empty()) return q.options.front().ref;
    const auto x = z_.apply(context_features(q));
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(contexts_.size());
    for (std::size_t i = 0; i < contexts_.size(); ++i) d.emplace_back(squared_distance(x, contexts_[i]), i);
    const std::size_t k = std::min(k_, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    option_features proto{};
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = 0; i < option_dims; ++i) proto[i] += offsets_[d[j].second][i] / static_cast<double>(k);
    const auto mean = mean_of(feats);
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t o = 0; o < q.options.size(); ++o) {
      double sc = 0.0;
      for (std::size_t i = 0; i < option_dims; ++i) sc += proto[i] * (feats[o][i] - mean[i]);
      if (sc > best_score || (sc == best_score && q.options[o].ref < q.options[best].ref)) {
        best = o;
        best_score = sc;
      }
    }
    return q.options[best].ref;
  }

 private:
  static std::vector<option_features> list_features(const counterfactual_sample& s) {
    std::vector<option_features> out(s.options.size());
    std::array<double, 7> mean{}, sd{};
    const double n = static_cast<double>(s.options.size());
    for (const auto& o : s.options) {
      const auto a = as_array(o.facts);
      for (std::size_t i = 0; i < 7; ++i) mean[i] += a[i] / n;
    }
    for (const auto& o : s.options) {
      const auto a = as_array(o.facts);
      for (std::size_t i = 0; i < 7; ++i) sd[i] += (a[i] - mean[i]) * (a[i] - mean[i]) / n;
    }
    for (auto& v : sd) v = v > 0.0 ? std::sqrt(v) : 1.0;
    for (std::size_t j = 0; j < s.options.size(); ++j) {
      const auto a = as_array(s.options[j].facts);
      for (std::size_t i = 0; i < 7; ++i) out[j][i] = (a[i] - mean[i]) / sd[i];
      out[j][7] = cosine(s.options[j].taste, s.preference.centroid);
      out[j][8] = favored_overlap(s.options[j].ingredients, s.preference.favored);
    }
    return out;
  }

  static option_features mean_of(const std::vector<option_features>& feats) {
    option_features m{};
    for (const auto& f : feats)
      for (std::size_t i = 0; i < option_dims; ++i) m[i] += f[i] / static_cast<double>(feats.size());
    return m;
  }

  std::size_t k_;
  standardizer<context_feature_dims> z_;
  std::vector<std::array<double, context_feature_dims>> contexts_;
  std::vector<option_features> offsets_;
};

}  // namespace pfmlab::cfg
