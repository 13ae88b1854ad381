#pragma once

// Lifelog record format: every event serializes all six aspects (temporal,
// spatial, informational, experiential, structural, causal), empty or not.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pfmlab/core/error.hpp"
#include "pfmlab/core/io.hpp"
#include "pfmlab/taste_space.hpp"

namespace pfmlab {

using timestamp = std::int64_t;  // seconds since Unix epoch, UTC

inline constexpr timestamp seconds_per_day = 86400;
/// Day 0 of every generated stream: 2021-01-01T00:00:00Z.
inline constexpr timestamp default_epoch = 1609459200;

inline std::int64_t day_index(timestamp t, timestamp epoch = default_epoch) {
  const timestamp d = t - epoch;
  return d >= 0 ? d / seconds_per_day : -((-d + seconds_per_day - 1) / seconds_per_day);
}

inline timestamp day_start(timestamp t) {
  const timestamp d = t >= 0 ? t / seconds_per_day : -((-t + seconds_per_day - 1) / seconds_per_day);
  return d * seconds_per_day;
}

inline std::string format_date(timestamp t) {
  using namespace std::chrono;
  const sys_days days{std::chrono::days{day_start(t) / seconds_per_day}};
  const year_month_day ymd{days};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

inline std::string format_timestamp(timestamp t) {
  const timestamp secs = t - day_start(t);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02lld:%02lld:%02lldZ", format_date(t).c_str(), static_cast<long long>(secs / 3600),
                static_cast<long long>(secs / 60 % 60), static_cast<long long>(secs % 60));
  return buf;
}

/// Parses `YYYY-MM-DDTHH:MM:SSZ`.
inline timestamp parse_timestamp(std::string_view s) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, se = 0;
  const std::string str(s);
  if (std::sscanf(str.c_str(), "%d-%u-%uT%u:%u:%uZ", &y, &mo, &d, &h, &mi, &se) != 6 || str.back() != 'Z')
    fail(errc::invalid_input, "bad timestamp '" + str + "'");
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok()) fail(errc::invalid_input, "bad date '" + str + "'");
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<timestamp>(days) * seconds_per_day + h * 3600 + mi * 60 + se;
}

enum class event_kind { meal, activity, sleep, stress_report, weather_report };
inline constexpr std::size_t event_kind_count = 5;
inline constexpr std::array<std::string_view, event_kind_count> event_kind_names = {
    "meal", "activity", "sleep", "stress_report", "weather_report"};

constexpr std::string_view to_string(event_kind k) { return event_kind_names[static_cast<std::size_t>(k)]; }

inline event_kind parse_event_kind(std::string_view s) {
  for (std::size_t i = 0; i < event_kind_count; ++i)
    if (event_kind_names[i] == s) return static_cast<event_kind>(i);
  fail(errc::invalid_input, "unknown event kind '" + std::string(s) + "'");
}

enum class stress_level { low, medium, high };
enum class temperature_level { cool, mild, hot };

inline constexpr std::array<std::string_view, 3> stress_names = {"low", "medium", "high"};
inline constexpr std::array<std::string_view, 3> temperature_names = {"cool", "mild", "hot"};

constexpr std::string_view to_string(stress_level s) { return stress_names[static_cast<std::size_t>(s)]; }
constexpr std::string_view to_string(temperature_level t) { return temperature_names[static_cast<std::size_t>(t)]; }

inline stress_level parse_stress_level(std::string_view s) {
  for (std::size_t i = 0; i < 3; ++i)
    if (stress_names[i] == s) return static_cast<stress_level>(i);
  fail(errc::invalid_input, "unknown stress level '" + std::string(s) + "'");
}
inline temperature_level parse_temperature_level(std::string_view s) {
  for (std::size_t i = 0; i < 3; ++i)
    if (temperature_names[i] == s) return static_cast<temperature_level>(i);
  fail(errc::invalid_input, "unknown temperature level '" + std::string(s) + "'");
}

struct temperature_thresholds {
  double cool_below_c = 15.0;  // cool <  15
  double hot_above_c = 25.0;   // 15 <= mild <= 25 < hot
};

inline temperature_level classify_temperature(double celsius, const temperature_thresholds& th = {}) {
  if (celsius < th.cool_below_c) return temperature_level::cool;
  if (celsius > th.hot_above_c) return temperature_level::hot;
  return temperature_level::mild;
}

struct spatial_aspect {
  double lat = 0.0;
  double lon = 0.0;
  std::string place_tag;
};

struct informational_aspect {
  std::optional<std::string> dish_id;
  std::optional<double> servings;
  std::optional<nutrition> facts;
  std::map<std::string, double> metrics;  // biometric and report readings
};

struct lifelog_event {
  std::string event_id;
  std::string person_id;
  event_kind kind = event_kind::activity;
  timestamp start = 0;
  timestamp end = 0;
  std::optional<spatial_aspect> spatial;
  informational_aspect informational;
  std::optional<int> enjoyment;  // experiential, 1-5
  std::optional<meal_type> meal;  // structural
  std::optional<int> companions;  // structural
  std::vector<std::string> causal;

  std::optional<double> metric(const std::string& name) const {
    auto it = informational.metrics.find(name);
    if (it == informational.metrics.end()) return std::nullopt;
    return it->second;
  }
};

struct day_context {
  std::string person_id;
  std::int64_t day = 0;
  std::string date;
  stress_level stress = stress_level::low;
  temperature_level temperature = temperature_level::mild;
  double raw_temperature_c = 20.0;
};

struct event_stream {
  std::vector<lifelog_event> events;
  std::vector<day_context> day_contexts;
  std::uint64_t seed = 0;
  std::string config_fingerprint;

  std::vector<std::string> persons() const {
    std::vector<std::string> out;
    for (const auto& e : events) out.push_back(e.person_id);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  const day_context* context_for(const std::string& person, std::int64_t day) const {
    auto it = std::lower_bound(day_contexts.begin(), day_contexts.end(), std::make_pair(person, day),
                               [](const day_context& c, const std::pair<std::string, std::int64_t>& k) {
                                 return std::tie(c.person_id, c.day) < std::tie(k.first, k.second);
                               });
    if (it == day_contexts.end() || it->person_id != person || it->day != day) return nullptr;
    return &*it;
  }
};

inline bool event_order(const lifelog_event& a, const lifelog_event& b) {
  return std::tie(a.start, a.person_id, a.event_id) < std::tie(b.start, b.person_id, b.event_id);
}

inline void sort_day_contexts(std::vector<day_context>& cs) {
  std::sort(cs.begin(), cs.end(),
            [](const day_context& a, const day_context& b) { return std::tie(a.person_id, a.day) < std::tie(b.person_id, b.day); });
}

inline json to_json(const lifelog_event& e) {
  json spatial = nullptr;
  if (e.spatial) spatial = json{{"lat", e.spatial->lat}, {"lon", e.spatial->lon}, {"place_tag", e.spatial->place_tag}};
  json info = json::object();
  info["dish_id"] = e.informational.dish_id ? json(*e.informational.dish_id) : json(nullptr);
  info["servings"] = e.informational.servings ? json(*e.informational.servings) : json(nullptr);
  info["nutrition"] = e.informational.facts ? to_json(*e.informational.facts) : json(nullptr);
  info["metrics"] = e.informational.metrics;
  return json{{"event_id", e.event_id},
              {"person_id", e.person_id},
              {"kind", to_string(e.kind)},
              {"temporal", {{"start", format_timestamp(e.start)}, {"end", format_timestamp(e.end)}}},
              {"spatial", spatial},
              {"informational", info},
              {"experiential", {{"enjoyment", e.enjoyment ? json(*e.enjoyment) : json(nullptr)}}},
              {"structural",
               {{"meal_type", e.meal ? json(to_string(*e.meal)) : json(nullptr)},
                {"companions", e.companions ? json(*e.companions) : json(nullptr)}}},
              {"causal", e.causal}};
}

inline lifelog_event event_from_json(const json& j) {
  lifelog_event e;
  e.event_id = j.at("event_id").get<std::string>();
  e.person_id = j.at("person_id").get<std::string>();
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  e.start = parse_timestamp(j.at("temporal").at("start").get<std::string>());
  e.end = parse_timestamp(j.at("temporal").at("end").get<std::string>());
  if (e.end < e.start) fail(errc::invalid_input, e.event_id + ": end before start");
  if (const auto& s = j.at("spatial"); !s.is_null())
    e.spatial = spatial_aspect{s.at("lat").get<double>(), s.at("lon").get<double>(), s.value("place_tag", "")};
  const auto& info = j.at("informational");
  if (!info.at("dish_id").is_null()) e.informational.dish_id = info.at("dish_id").get<std::string>();
  if (!info.at("servings").is_null()) e.informational.servings = info.at("servings").get<double>();
  if (!info.at("nutrition").is_null()) e.informational.facts = nutrition_from_json(info.at("nutrition"));
  e.informational.metrics = info.at("metrics").get<std::map<std::string, double>>();
  if (const auto& x = j.at("experiential").at("enjoyment"); !x.is_null()) e.enjoyment = x.get<int>();
  const auto& st = j.at("structural");
  if (!st.at("meal_type").is_null()) e.meal = parse_meal_type(st.at("meal_type").get<std::string>());
  if (!st.at("companions").is_null()) e.companions = st.at("companions").get<int>();
  e.causal = j.at("causal").get<std::vector<std::string>>();
  return e;
}

inline std::string stream_to_jsonl(const event_stream& s) {
  std::string out;
  for (const auto& e : s.events) {
    out += to_json(e).dump();
    out += '\n';
  }
  return out;
}

/// Rebuilds day contexts from each day's first stress and weather reports.
inline std::vector<day_context> reconstruct_day_contexts(const std::vector<lifelog_event>& events,
                                                         const temperature_thresholds& th = {}) {
  std::map<std::pair<std::string, std::int64_t>, day_context> by_day;
  std::map<std::pair<std::string, std::int64_t>, std::pair<bool, bool>> seen;
  for (const auto& e : events) {
    if (e.kind != event_kind::stress_report && e.kind != event_kind::weather_report) continue;
    const auto key = std::make_pair(e.person_id, day_index(e.start));
    auto& c = by_day[key];
    auto& flags = seen[key];
    c.person_id = e.person_id;
    c.day = key.second;
    c.date = format_date(e.start);
    if (e.kind == event_kind::stress_report && !flags.first) {
      if (auto lvl = e.metric("stress_level")) c.stress = static_cast<stress_level>(std::clamp(static_cast<int>(*lvl), 0, 2));
      flags.first = true;
    }
    if (e.kind == event_kind::weather_report && !flags.second) {
      if (auto t = e.metric("temperature_c")) {
        c.raw_temperature_c = *t;
        c.temperature = classify_temperature(*t, th);
      }
      flags.second = true;
    }
  }
  std::vector<day_context> out;
  for (auto& [k, c] : by_day) out.push_back(std::move(c));
  sort_day_contexts(out);
  return out;
}

inline event_stream stream_from_jsonl(const std::string& text, const temperature_thresholds& th = {}) {
  event_stream s;
  for (const auto& j : io::parse_jsonl(text)) s.events.push_back(event_from_json(j));
  std::stable_sort(s.events.begin(), s.events.end(), event_order);
  s.day_contexts = reconstruct_day_contexts(s.events, th);
  return s;
}

/// Events of one person, in time order.
inline std::vector<const lifelog_event*> events_of(const event_stream& s, const std::string& person) {
  std::vector<const lifelog_event*> out;
  for (const auto& e : s.events)
    if (e.person_id == person) out.push_back(&e);
  return out;
}

}  // namespace pfmlab
