#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfmlab/core/error.hpp"
#include "pfmlab/lifelog.hpp"
#include "pfmlab/taste_space.hpp"

namespace pfmlab {

// ---------------------------------------------------------------------------
// Directives
// ---------------------------------------------------------------------------

enum class directive_verb { require, avoid, limit };

inline const char* to_string(directive_verb v) {
  switch (v) {
    case directive_verb::require: return "require";
    case directive_verb::avoid: return "avoid";
    case directive_verb::limit: return "limit";
  }
  return "?";
}

inline directive_verb parse_directive_verb(const std::string& s) {
  if (s == "require") return directive_verb::require;
  if (s == "avoid") return directive_verb::avoid;
  if (s == "limit") return directive_verb::limit;
  fail(errc::invalid_input, "unknown directive verb '" + s + "'");
}

struct directive {
  directive_verb verb = directive_verb::avoid;
  std::string subject;
  std::optional<double> quantity;
  std::optional<std::string> units;
  std::string source;

  friend bool operator==(const directive&, const directive&) = default;
};

inline void validate(const directive& d) {
  if (d.subject.empty()) fail(errc::invalid_input, "directive subject is empty");
  if (d.verb == directive_verb::limit && !d.quantity)
    fail(errc::invalid_input, "limit directive on '" + d.subject + "' has no quantity");
  if (d.quantity && *d.quantity < 0.0)
    fail(errc::invalid_input, "directive quantity must be non-negative");
}

inline json to_json(const directive& d) {
  json j{{"verb", to_string(d.verb)}, {"subject", d.subject}, {"source", d.source}};
  if (d.quantity) j["quantity"] = *d.quantity;
  if (d.units) j["units"] = *d.units;
  return j;
}

inline directive directive_from_json(const json& j) {
  if (!j.is_object()) fail(errc::invalid_input, "directive must be an object");
  directive d;
  d.verb = parse_directive_verb(j.at("verb").get<std::string>());
  d.subject = j.at("subject").get<std::string>();
  if (j.contains("quantity") && !j["quantity"].is_null()) d.quantity = j["quantity"].get<double>();
  if (j.contains("units") && !j["units"].is_null()) d.units = j["units"].get<std::string>();
  d.source = j.value("source", std::string());
  validate(d);
  return d;
}

inline std::vector<directive> directives_from_json(const json& j) {
  if (!j.is_array()) fail(errc::invalid_input, "directives file must hold a JSON list");
  std::vector<directive> out;
  for (const auto& item : j) out.push_back(directive_from_json(item));
  return out;
}

// ---------------------------------------------------------------------------
// Windows
// ---------------------------------------------------------------------------

// Half-open [begin, end) interval in epoch seconds.
struct time_window {
  timestamp begin = 0;
  timestamp end = 0;
  bool contains(timestamp t) const { return t >= begin && t < end; }
};

// How the short biological window is anchored. `same_day` runs from local
// midnight of the reference instant up to the instant; `previous_day` is the
// whole calendar day before it.
enum class short_window_mode { same_day, previous_day };

inline short_window_mode parse_short_window_mode(const std::string& s) {
  if (s == "same_day") return short_window_mode::same_day;
  if (s == "previous_day") return short_window_mode::previous_day;
  fail(errc::invalid_input, "unknown short window mode '" + s + "'");
}

inline const char* to_string(short_window_mode m) {
  return m == short_window_mode::same_day ? "same_day" : "previous_day";
}

inline time_window short_window(timestamp at, short_window_mode mode) {
  const timestamp midnight = day_start(at);
  if (mode == short_window_mode::same_day) return {midnight, at};
  return {midnight - seconds_per_day, midnight};
}

// The three whole calendar days before the day containing `at`.
inline time_window three_day_window(timestamp at) {
  const timestamp midnight = day_start(at);
  return {midnight - 3 * seconds_per_day, midnight};
}

inline time_window trailing_days(timestamp at, int days) {
  return {at - static_cast<timestamp>(days) * seconds_per_day, at};
}

// ---------------------------------------------------------------------------
// Biological vector
// ---------------------------------------------------------------------------

struct biometric_means {
  std::optional<double> sleep_score;
  std::optional<double> activity_minutes;
  std::optional<double> heart_rate;
};

struct biological_window {
  time_window window;
  std::size_t meal_count = 0;
  nutrition intake;
  biometric_means biometrics;
};

struct biological_vector {
  std::string person_id;
  timestamp at = 0;
  short_window_mode mode = short_window_mode::same_day;
  biological_window window_same_day;
  biological_window window_3_day;
  std::vector<directive> directives;
};

namespace detail {

inline void require_person(const event_stream& s, const std::string& person) {
  const bool known = std::any_of(s.events.begin(), s.events.end(),
                                 [&](const lifelog_event& e) { return e.person_id == person; });
  if (!known) fail(errc::unknown_person, "no events for person '" + person + "'");
}

struct running_mean {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double x) {
    sum += x;
    ++n;
  }
  std::optional<double> value() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

inline biological_window aggregate_biology(const event_stream& s, const std::string& person, time_window w) {
  biological_window out;
  out.window = w;
  running_mean sleep, minutes, heart;
  for (const auto& e : s.events) {
    if (e.person_id != person || !w.contains(e.start)) continue;
    if (e.kind == event_kind::meal) {
      ++out.meal_count;
      if (e.informational.facts) out.intake += *e.informational.facts;
    }
    if (auto v = e.metric("sleep_score")) sleep.add(*v);
    if (auto v = e.metric("activity_minutes")) minutes.add(*v);
    if (auto v = e.metric("heart_rate")) heart.add(*v);
  }
  out.biometrics = {sleep.value(), minutes.value(), heart.value()};
  return out;
}

}  // namespace detail

inline biological_vector biological_vector_at(const event_stream& s, const std::string& person, timestamp at,
                                              std::vector<directive> directives = {},
                                              short_window_mode mode = short_window_mode::same_day) {
  detail::require_person(s, person);
  for (const auto& d : directives) validate(d);
  biological_vector v;
  v.person_id = person;
  v.at = at;
  v.mode = mode;
  v.window_same_day = detail::aggregate_biology(s, person, short_window(at, mode));
  v.window_3_day = detail::aggregate_biology(s, person, three_day_window(at));
  v.directives = std::move(directives);
  return v;
}

// ---------------------------------------------------------------------------
// Preferential vector
// ---------------------------------------------------------------------------

struct ingredient_affinity {
  std::string ingredient_id;
  std::size_t count = 0;
  double affinity = 0.0;
};

struct preferential_window {
  int days = 0;
  time_window window;
  std::size_t meal_count = 0;
  std::vector<ingredient_affinity> ranking;  // affinity non-increasing
  taste_vector taste_centroid;
  bool empty = true;

  std::vector<std::string> top_ingredients(std::size_t k) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranking.size() && i < k; ++i) out.push_back(ranking[i].ingredient_id);
    return out;
  }
};

struct window_preset {
  int short_days = 30;
  int long_days = 365;
};

inline constexpr window_preset cfg_study_preset{30, 365};
inline constexpr window_preset habit_preset{90, 365};

inline window_preset parse_window_preset(const std::string& s) {
  if (s == "cfg-study") return cfg_study_preset;
  if (s == "habit") return habit_preset;
  fail(errc::invalid_input, "unknown window preset '" + s + "'");
}

struct preferential_vector {
  std::string person_id;
  timestamp at = 0;
  preferential_window window_short;
  preferential_window window_long;
};

namespace detail {

inline preferential_window aggregate_preference(const event_stream& s, const taste_dataset& ds,
                                                const std::string& person, timestamp at, int days) {
  if (days <= 0) fail(errc::invalid_input, "preference window must be at least one day");
  preferential_window out;
  out.days = days;
  out.window = trailing_days(at, days);
  std::map<std::string, std::size_t> tally;
  taste_vector sum;
  for (const auto& e : s.events) {
    if (e.person_id != person || e.kind != event_kind::meal || !out.window.contains(e.start)) continue;
    if (!e.informational.dish_id) continue;
    const dish& d = ds.at(*e.informational.dish_id);
    ++out.meal_count;
    sum = sum + d.taste;
    for (const auto& ing : d.ingredients) ++tally[ing];
  }
  if (out.meal_count == 0) return out;
  out.empty = false;
  out.taste_centroid = sum * (1.0 / static_cast<double>(out.meal_count));
  std::size_t max_count = 0;
  for (const auto& [_, c] : tally) max_count = std::max(max_count, c);
  for (const auto& [id, c] : tally)
    out.ranking.push_back({id, c, static_cast<double>(c) / static_cast<double>(max_count)});
  // map order already gives ascending ids; stable sort keeps it among ties
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [](const ingredient_affinity& a, const ingredient_affinity& b) { return a.count > b.count; });
  return out;
}

}  // namespace detail

inline preferential_vector preferential_vector_at(const event_stream& s, const taste_dataset& ds,
                                                  const std::string& person, timestamp at,
                                                  window_preset windows = cfg_study_preset) {
  detail::require_person(s, person);
  preferential_vector v;
  v.person_id = person;
  v.at = at;
  v.window_short = detail::aggregate_preference(s, ds, person, at, windows.short_days);
  v.window_long = detail::aggregate_preference(s, ds, person, at, windows.long_days);
  return v;
}

struct personal_vector {
  biological_vector biological;
  preferential_vector preferential;
};

inline personal_vector personal_vector_at(const event_stream& s, const taste_dataset& ds, const std::string& person,
                                          timestamp at, std::vector<directive> directives = {},
                                          window_preset windows = cfg_study_preset,
                                          short_window_mode mode = short_window_mode::same_day) {
  return {biological_vector_at(s, person, at, std::move(directives), mode),
          preferential_vector_at(s, ds, person, at, windows)};
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

inline json window_json(time_window w) {
  return json{{"begin", format_timestamp(w.begin)}, {"end", format_timestamp(w.end)}};
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

inline json to_json(const biological_window& w) {
  return json{{"window", detail::window_json(w.window)},
              {"meal_count", w.meal_count},
              {"nutrients", to_json(w.intake)},
              {"biometrics",
               {{"sleep_score", detail::optional_json(w.biometrics.sleep_score)},
                {"activity_minutes", detail::optional_json(w.biometrics.activity_minutes)},
                {"heart_rate", detail::optional_json(w.biometrics.heart_rate)}}}};
}

inline json to_json(const biological_vector& v) {
  json dirs = json::array();
  for (const auto& d : v.directives) dirs.push_back(to_json(d));
  return json{{"person_id", v.person_id},
              {"at", format_timestamp(v.at)},
              {"short_window_mode", to_string(v.mode)},
              {"window_same_day", to_json(v.window_same_day)},
              {"window_3_day", to_json(v.window_3_day)},
              {"directives", dirs}};
}

inline json to_json(const preferential_window& w) {
  json ranking = json::array();
  for (const auto& r : w.ranking)
    ranking.push_back({{"ingredient_id", r.ingredient_id}, {"count", r.count}, {"affinity", r.affinity}});
  return json{{"days", w.days},
              {"window", detail::window_json(w.window)},
              {"meal_count", w.meal_count},
              {"empty", w.empty},
              {"ranking", ranking},
              {"taste_centroid", to_json(w.taste_centroid)}};
}

inline json to_json(const preferential_vector& v) {
  return json{{"person_id", v.person_id},
              {"at", format_timestamp(v.at)},
              {"window_short", to_json(v.window_short)},
              {"window_long", to_json(v.window_long)}};
}

inline json to_json(const personal_vector& v) {
  return json{{"biological", to_json(v.biological)}, {"preferential", to_json(v.preferential)}};
}

}  // namespace pfmlab
