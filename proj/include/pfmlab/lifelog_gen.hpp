#pragma once

// Markov-chain lifelog generator with planted context effects on food choice.
//
// Day template per person: overnight sleep, a weather report and a stress
// report at wake-up, then a chain of events whose kinds follow the profile's
// transition matrix, starting from the stress-report state. The chain steps
// are spread over three blocks (morning, midday, evening) which fix a meal's
// type. The number of steps per day is solved so that the expected number of
// meals per day equals the profile's meal_rate.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pfmlab/core/error.hpp"
#include "pfmlab/core/fingerprint.hpp"
#include "pfmlab/core/geo.hpp"
#include "pfmlab/core/rng.hpp"
#include "pfmlab/lifelog.hpp"
#include "pfmlab/taste_space.hpp"

namespace pfmlab {

enum class stress_response_mode { palatable_seeking, appetite_suppressing };

inline std::string_view to_string(stress_response_mode m) {
  return m == stress_response_mode::palatable_seeking ? "palatable_seeking" : "appetite_suppressing";
}

/// Multiplicative reweighting of dish choice in one context cell.
struct context_effect {
  double heavy = 1.0;
  double light = 1.0;
  std::array<double, taste_dims> taste{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};  // keyed by dominant taste
};

struct temperature_model {
  double mean_c = 18.0;
  double amplitude_c = 9.0;
  double peak_day_of_year = 200.0;
  double noise_sd_c = 4.0;
};

inline constexpr std::size_t context_cells = 27;

constexpr std::size_t context_cell(stress_level s, temperature_level t, meal_type m) {
  return static_cast<std::size_t>(s) * 9 + static_cast<std::size_t>(t) * 3 + static_cast<std::size_t>(m);
}

using transition_matrix = std::array<std::array<double, event_kind_count>, event_kind_count>;

struct lifestyle_profile {
  std::string person_id;
  transition_matrix transitions{};
  double meal_rate = 2.95;
  std::array<double, 3> stress_prior{0.4, 0.35, 0.25};
  temperature_model temperature;
  std::array<context_effect, context_cells> effects{};
  stress_response_mode response = stress_response_mode::palatable_seeking;
  double skip_probability = 0.4;  // appetite_suppressing profiles, high-stress days only
  geo::lat_lon home{33.6405, -117.8443};
  geo::lat_lon work{33.6846, -117.8265};
  double wake_hour = 7.0;
  double sleep_hour = 22.5;

  const context_effect& effect(stress_level s, temperature_level t, meal_type m) const {
    return effects[context_cell(s, t, m)];
  }
};

inline void validate(const lifestyle_profile& p) {
  const auto bad = [&](const std::string& why) { fail(errc::invalid_profile, p.person_id + ": " + why); };
  if (p.person_id.empty()) fail(errc::invalid_profile, "empty person_id");
  for (std::size_t r = 0; r < event_kind_count; ++r) {
    double sum = 0.0;
    for (double x : p.transitions[r]) {
      if (!(x >= 0.0)) bad("negative transition probability");
      sum += x;
    }
    if (std::fabs(sum - 1.0) > 1e-9) bad("transition row '" + std::string(event_kind_names[r]) + "' sums to " + std::to_string(sum));
  }
  if (!(p.meal_rate > 0.0)) bad("meal_rate must be positive");
  double prior = 0.0;
  for (double x : p.stress_prior) {
    if (!(x >= 0.0)) bad("negative stress prior");
    prior += x;
  }
  if (std::fabs(prior - 1.0) > 1e-9) bad("stress_prior must sum to 1");
  for (const auto& e : p.effects) {
    if (!(e.heavy > 0.0) || !(e.light > 0.0)) bad("reweighting factors must be positive");
    for (double x : e.taste)
      if (!(x > 0.0)) bad("reweighting factors must be positive");
  }
  if (!(p.skip_probability >= 0.0 && p.skip_probability <= 1.0)) bad("skip_probability outside [0,1]");
  if (!(p.wake_hour >= 0.0 && p.wake_hour + 1.0 < p.sleep_hour && p.sleep_hour <= 24.0)) bad("invalid waking window");
  if (!(p.temperature.noise_sd_c >= 0.0)) bad("negative temperature noise");
}

inline double dish_weight(const dish& d, const context_effect& e) {
  return (d.weight == weight_class::heavy ? e.heavy : e.light) * e.taste[d.taste.dominant()];
}

inline double day_of_year(std::int64_t day, timestamp epoch = default_epoch) {
  using namespace std::chrono;
  const sys_days days{std::chrono::days{(epoch + day * seconds_per_day) / seconds_per_day}};
  const year_month_day ymd{days};
  return static_cast<double>((days - sys_days{ymd.year() / January / 1}).count());
}

inline day_context sample_context(const lifestyle_profile& p, std::int64_t day, rng& r,
                                  const temperature_thresholds& th = {}, timestamp epoch = default_epoch) {
  day_context c;
  c.person_id = p.person_id;
  c.day = day;
  c.date = format_date(epoch + day * seconds_per_day);
  c.stress = static_cast<stress_level>(r.categorical(p.stress_prior));
  const double phase = 2.0 * std::numbers::pi * (day_of_year(day, epoch) - p.temperature.peak_day_of_year) / 365.25;
  c.raw_temperature_c = p.temperature.mean_c + p.temperature.amplitude_c * std::cos(phase) +
                        r.normal(0.0, p.temperature.noise_sd_c);
  c.temperature = classify_temperature(c.raw_temperature_c, th);
  return c;
}

/// Samples a dish for the meal, or nullopt when an appetite-suppressed person
/// skips it. Weights are uniform times the context-cell reweighting.
inline std::optional<std::string> select_dish(meal_type meal, const day_context& ctx, const lifestyle_profile& p,
                                              const taste_dataset& dataset, rng& r) {
  const auto candidates = dataset.of_meal(meal);
  if (candidates.empty()) fail(errc::empty_candidate_set, "no dishes for " + std::string(to_string(meal)));
  if (p.response == stress_response_mode::appetite_suppressing && ctx.stress == stress_level::high &&
      r.bernoulli(p.skip_probability))
    return std::nullopt;
  const auto& effect = p.effect(ctx.stress, ctx.temperature, meal);
  std::vector<double> w;
  w.reserve(candidates.size());
  for (const dish* d : candidates) w.push_back(dish_weight(*d, effect));
  return candidates[r.categorical(w)]->dish_id;
}

struct step_plan {
  std::size_t base_steps = 0;
  double extra_step_probability = 0.0;
  double expected_meals = 0.0;  // before skips
};

/// Solves for a (fractional) number of chain steps whose expected meal count,
/// starting from the stress-report state, matches the target.
inline step_plan plan_steps(const lifestyle_profile& p, std::size_t max_steps = 96, std::size_t fallback_steps = 6) {
  double target = p.meal_rate;
  if (p.response == stress_response_mode::appetite_suppressing)
    target /= std::max(1e-9, 1.0 - p.skip_probability * p.stress_prior[2]);
  std::array<double, event_kind_count> dist{};
  dist[static_cast<std::size_t>(event_kind::stress_report)] = 1.0;
  std::vector<double> cumulative{0.0};
  std::vector<double> step_meal{0.0};
  constexpr std::size_t meal = static_cast<std::size_t>(event_kind::meal);
  for (std::size_t s = 1; s <= max_steps; ++s) {
    std::array<double, event_kind_count> next{};
    for (std::size_t i = 0; i < event_kind_count; ++i)
      for (std::size_t j = 0; j < event_kind_count; ++j) next[j] += dist[i] * p.transitions[i][j];
    dist = next;
    step_meal.push_back(dist[meal]);
    cumulative.push_back(cumulative.back() + dist[meal]);
  }
  if (cumulative.back() <= 0.0) return {fallback_steps, 0.0, 0.0};
  for (std::size_t s = 1; s <= max_steps; ++s) {
    if (cumulative[s] >= target) {
      const double frac = (target - cumulative[s - 1]) / step_meal[s];
      return {s - 1, std::clamp(frac, 0.0, 1.0), target};
    }
  }
  fail(errc::invalid_profile, p.person_id + ": meal_rate " + std::to_string(p.meal_rate) + " unattainable");
}

struct generator_config {
  temperature_thresholds thresholds;
  timestamp epoch = default_epoch;
  unsigned threads = 1;  // per-person parallelism; output is identical for any value
};

namespace detail {

inline std::string event_id(const std::string& person, std::int64_t day, std::size_t seq) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-d%04lld-e%02zu", static_cast<long long>(day), seq);
  return person + buf;
}

struct person_output {
  std::vector<lifelog_event> events;
  std::vector<day_context> contexts;
};

inline person_output generate_person(const lifestyle_profile& p, std::int64_t days, const taste_dataset& dataset,
                                     std::uint64_t seed, const generator_config& cfg) {
  person_output out;
  const step_plan plan = plan_steps(p);
  const double first_hour = p.wake_hour + 0.5;
  const double span = p.sleep_hour - first_hour;
  // Block boundaries as fractions of the waking span: morning / midday / evening.
  constexpr std::array<double, 4> block_time = {0.0, 0.25, 0.55, 1.0};
  const auto slot_time = [&](double f) {
    const std::size_t b = f < 1.0 / 3.0 ? 0 : (f < 2.0 / 3.0 ? 1 : 2);
    const double local = (f - static_cast<double>(b) / 3.0) * 3.0;
    const double frac = block_time[b] + local * (block_time[b + 1] - block_time[b]);
    return first_hour + frac * span;
  };

  for (std::int64_t day = 0; day < days; ++day) {
    rng r = rng::split(seed, "lifelog/" + p.person_id, static_cast<std::uint64_t>(day));
    const day_context ctx = sample_context(p, day, r, cfg.thresholds, cfg.epoch);
    out.contexts.push_back(ctx);
    const timestamp midnight = cfg.epoch + day * seconds_per_day;
    const auto at_hour = [&](double h) { return midnight + static_cast<timestamp>(std::llround(h * 3600.0)); };
    std::size_t seq = 0;
    const auto jitter = [&](geo::lat_lon c) {
      return geo::destination(c, r.uniform(0.0, 360.0), r.uniform(0.0, 0.3));
    };

    lifelog_event sleep;
    sleep.event_id = event_id(p.person_id, day, seq++);
    sleep.person_id = p.person_id;
    sleep.kind = event_kind::sleep;
    const double sleep_hours = r.uniform(6.0, std::max(6.0, std::min(8.5, 24.0 - p.sleep_hour + p.wake_hour)));
    sleep.end = at_hour(p.wake_hour);
    sleep.start = sleep.end - static_cast<timestamp>(std::llround(sleep_hours * 3600.0));
    double score = r.normal(76.0, 7.0) - (ctx.stress == stress_level::high ? 6.0 : 0.0);
    score = std::clamp(std::round(score), 30.0, 100.0);
    sleep.informational.metrics = {{"sleep_score", score}, {"sleep_hours", std::round(sleep_hours * 100.0) / 100.0}};
    sleep.spatial = spatial_aspect{p.home.lat, p.home.lon, "home"};
    out.events.push_back(std::move(sleep));

    lifelog_event weather;
    weather.event_id = event_id(p.person_id, day, seq++);
    weather.person_id = p.person_id;
    weather.kind = event_kind::weather_report;
    weather.start = weather.end = at_hour(p.wake_hour) + 300;
    weather.informational.metrics = {{"temperature_c", ctx.raw_temperature_c},
                                     {"temperature_level", static_cast<double>(ctx.temperature)}};
    weather.spatial = spatial_aspect{p.home.lat, p.home.lon, "home"};
    const std::string weather_id = weather.event_id;
    out.events.push_back(std::move(weather));

    lifelog_event stress;
    stress.event_id = event_id(p.person_id, day, seq++);
    stress.person_id = p.person_id;
    stress.kind = event_kind::stress_report;
    stress.start = stress.end = at_hour(p.wake_hour) + 600;
    stress.informational.metrics = {{"stress_level", static_cast<double>(ctx.stress)}};
    const std::string stress_id = stress.event_id;
    out.events.push_back(std::move(stress));

    const std::size_t steps = plan.base_steps + (r.bernoulli(plan.extra_step_probability) ? 1 : 0);
    std::size_t state = static_cast<std::size_t>(event_kind::stress_report);
    for (std::size_t i = 0; i < steps; ++i) {
      state = r.categorical(p.transitions[state]);
      const double f = (static_cast<double>(i) + 0.1 + 0.8 * r.uniform()) / static_cast<double>(steps);
      const double boundary = slot_time((static_cast<double>(i) + 1.0) / static_cast<double>(steps));
      const timestamp start = at_hour(slot_time(f));
      const timestamp limit = std::max(start, at_hour(boundary) - 60);
      const meal_type block = f < 1.0 / 3.0 ? meal_type::breakfast : (f < 2.0 / 3.0 ? meal_type::lunch : meal_type::dinner);
      lifelog_event e;
      e.person_id = p.person_id;
      e.kind = static_cast<event_kind>(state);
      e.start = start;
      switch (e.kind) {
        case event_kind::meal: {
          const auto choice = select_dish(block, ctx, p, dataset, r);
          if (!choice) continue;
          const dish& d = dataset.at(*choice);
          e.end = std::min(limit, start + static_cast<timestamp>(r.uniform(20.0, 45.0) * 60.0));
          e.informational.dish_id = d.dish_id;
          e.informational.servings = 1.0;
          e.informational.facts = d.facts;
          e.meal = block;
          e.enjoyment = 2 + static_cast<int>(r.below(4));
          e.companions = static_cast<int>(r.below(4));
          const bool away = block == meal_type::lunch ? r.bernoulli(0.7) : r.bernoulli(0.2);
          const auto where = jitter(away ? p.work : p.home);
          e.spatial = spatial_aspect{where.lat, where.lon, away ? (block == meal_type::lunch ? "work" : "restaurant") : "home"};
          e.causal = {weather_id, stress_id};
          break;
        }
        case event_kind::activity: {
          const double minutes = std::round(r.uniform(20.0, 90.0));
          e.end = std::min(limit, start + static_cast<timestamp>(minutes * 60.0));
          e.informational.metrics = {{"activity_minutes", minutes}, {"heart_rate", std::round(r.normal(118.0, 14.0))}};
          const auto where = jitter(p.home);
          e.spatial = spatial_aspect{where.lat, where.lon, r.bernoulli(0.5) ? "gym" : "park"};
          break;
        }
        case event_kind::sleep: {
          const double minutes = std::round(r.uniform(15.0, 40.0));
          e.end = std::min(limit, start + static_cast<timestamp>(minutes * 60.0));
          e.informational.metrics = {{"nap_minutes", minutes}};
          e.spatial = spatial_aspect{p.home.lat, p.home.lon, "home"};
          break;
        }
        case event_kind::stress_report:
          e.end = start;
          e.informational.metrics = {{"stress_level", static_cast<double>(ctx.stress)}};
          break;
        case event_kind::weather_report:
          e.end = start;
          e.informational.metrics = {{"temperature_c", ctx.raw_temperature_c},
                                     {"temperature_level", static_cast<double>(ctx.temperature)}};
          break;
      }
      e.event_id = event_id(p.person_id, day, seq++);
      out.events.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace detail

inline json to_json(const lifestyle_profile& p);

/// Deterministic in (profiles, days, dataset, seed). Each person's stream
/// depends only on its own profile, so list order and thread count do not
/// change the output.
inline event_stream generate(const std::vector<lifestyle_profile>& profiles, std::int64_t days,
                             const taste_dataset& dataset, std::uint64_t seed, const generator_config& cfg = {}) {
  if (days < 1) fail(errc::invalid_input, "days must be >= 1");
  if (profiles.empty()) fail(errc::invalid_input, "no profiles");
  for (const auto& p : profiles) validate(p);

  std::vector<detail::person_output> outputs(profiles.size());
  if (cfg.threads > 1 && profiles.size() > 1) {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(profiles.size());
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      workers.emplace_back([&, i] {
        try {
          outputs[i] = detail::generate_person(profiles[i], days, dataset, seed, cfg);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (std::size_t i = 0; i < profiles.size(); ++i)
      outputs[i] = detail::generate_person(profiles[i], days, dataset, seed, cfg);
  }

  event_stream s;
  s.seed = seed;
  for (auto& o : outputs) {
    s.events.insert(s.events.end(), std::make_move_iterator(o.events.begin()), std::make_move_iterator(o.events.end()));
    s.day_contexts.insert(s.day_contexts.end(), o.contexts.begin(), o.contexts.end());
  }
  std::sort(s.events.begin(), s.events.end(), event_order);
  sort_day_contexts(s.day_contexts);

  json profile_json = json::array();
  for (const auto& p : profiles) profile_json.push_back(to_json(p));
  std::sort(profile_json.begin(), profile_json.end(),
            [](const json& a, const json& b) { return a.at("person_id") < b.at("person_id"); });
  json dish_ids = json::array();
  for (const auto& d : dataset.dishes()) dish_ids.push_back(to_json(d));
  const json config{{"profiles", profile_json},
                    {"days", days},
                    {"seed", seed},
                    {"epoch", cfg.epoch},
                    {"thresholds", {{"cool_below_c", cfg.thresholds.cool_below_c}, {"hot_above_c", cfg.thresholds.hot_above_c}}},
                    {"taste_dataset", config_fingerprint(json(dish_ids))}};
  s.config_fingerprint = config_fingerprint(config);
  return s;
}

// ---- profile JSON ------------------------------------------------------

inline json to_json(const lifestyle_profile& p) {
  json transitions = json::object();
  for (std::size_t i = 0; i < event_kind_count; ++i)
    for (std::size_t j = 0; j < event_kind_count; ++j)
      if (p.transitions[i][j] != 0.0)
        transitions[std::string(event_kind_names[i])][std::string(event_kind_names[j])] = p.transitions[i][j];
  json effects = json::array();
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t m = 0; m < 3; ++m) {
        const auto& e = p.effects[s * 9 + t * 3 + m];
        json taste = json::object();
        for (std::size_t d = 0; d < taste_dims; ++d)
          if (e.taste[d] != 1.0) taste[std::string(taste_names[d])] = e.taste[d];
        if (e.heavy == 1.0 && e.light == 1.0 && taste.empty()) continue;
        effects.push_back({{"stress", stress_names[s]},
                           {"temperature", temperature_names[t]},
                           {"meal", to_string(static_cast<meal_type>(m))},
                           {"heavy", e.heavy},
                           {"light", e.light},
                           {"taste", taste}});
      }
  return json{{"person_id", p.person_id},
              {"transitions", transitions},
              {"meal_rate", p.meal_rate},
              {"stress_prior", {{"low", p.stress_prior[0]}, {"medium", p.stress_prior[1]}, {"high", p.stress_prior[2]}}},
              {"temperature",
               {{"mean_c", p.temperature.mean_c},
                {"amplitude_c", p.temperature.amplitude_c},
                {"peak_day_of_year", p.temperature.peak_day_of_year},
                {"noise_sd_c", p.temperature.noise_sd_c}}},
              {"stress_response_mode", to_string(p.response)},
              {"skip_probability", p.skip_probability},
              {"home", {{"lat", p.home.lat}, {"lon", p.home.lon}}},
              {"work", {{"lat", p.work.lat}, {"lon", p.work.lon}}},
              {"wake_hour", p.wake_hour},
              {"sleep_hour", p.sleep_hour},
              {"context_effects", effects}};
}

/// Context-effect rules may use "*" for any level; matching rules multiply.
inline lifestyle_profile profile_from_json(const json& j) {
  lifestyle_profile p;
  p.person_id = j.at("person_id").get<std::string>();
  for (auto& row : p.transitions) row.fill(0.0);
  for (const auto& [from, row] : j.at("transitions").items()) {
    const auto i = static_cast<std::size_t>(parse_event_kind(from));
    for (const auto& [to, prob] : row.items()) p.transitions[i][static_cast<std::size_t>(parse_event_kind(to))] = prob.get<double>();
  }
  p.meal_rate = j.value("meal_rate", p.meal_rate);
  if (j.contains("stress_prior")) {
    const auto& sp = j.at("stress_prior");
    p.stress_prior = {sp.value("low", 0.0), sp.value("medium", 0.0), sp.value("high", 0.0)};
  }
  if (j.contains("temperature")) {
    const auto& t = j.at("temperature");
    p.temperature.mean_c = t.value("mean_c", p.temperature.mean_c);
    p.temperature.amplitude_c = t.value("amplitude_c", p.temperature.amplitude_c);
    p.temperature.peak_day_of_year = t.value("peak_day_of_year", p.temperature.peak_day_of_year);
    p.temperature.noise_sd_c = t.value("noise_sd_c", p.temperature.noise_sd_c);
  }
  const std::string mode = j.value("stress_response_mode", std::string("palatable_seeking"));
  if (mode == "palatable_seeking") p.response = stress_response_mode::palatable_seeking;
  else if (mode == "appetite_suppressing") p.response = stress_response_mode::appetite_suppressing;
  else fail(errc::invalid_profile, "unknown stress_response_mode '" + mode + "'");
  p.skip_probability = j.value("skip_probability", p.skip_probability);
  if (j.contains("home")) p.home = {j["home"].at("lat").get<double>(), j["home"].at("lon").get<double>()};
  if (j.contains("work")) p.work = {j["work"].at("lat").get<double>(), j["work"].at("lon").get<double>()};
  p.wake_hour = j.value("wake_hour", p.wake_hour);
  p.sleep_hour = j.value("sleep_hour", p.sleep_hour);
  for (const auto& rule : j.value("context_effects", json::array())) {
    const auto pick = [&](const char* key, std::size_t n, auto parse) {
      std::vector<std::size_t> out;
      const std::string v = rule.value(key, std::string("*"));
      if (v == "*") {
        for (std::size_t i = 0; i < n; ++i) out.push_back(i);
      } else {
        out.push_back(static_cast<std::size_t>(parse(v)));
      }
      return out;
    };
    const json tastes = rule.value("taste", json::object());
    const auto ss = pick("stress", 3, parse_stress_level);
    const auto ts = pick("temperature", 3, parse_temperature_level);
    const auto ms = pick("meal", 3, parse_meal_type);
    for (auto s : ss)
      for (auto t : ts)
        for (auto m : ms) {
          auto& e = p.effects[s * 9 + t * 3 + m];
          e.heavy *= rule.value("heavy", 1.0);
          e.light *= rule.value("light", 1.0);
          for (const auto& [name, factor] : tastes.items()) {
            auto idx = taste_index(name);
            if (!idx) fail(errc::invalid_profile, "unknown taste '" + name + "'");
            e.taste[*idx] *= factor.get<double>();
          }
        }
  }
  validate(p);
  return p;
}

inline std::vector<lifestyle_profile> profiles_from_json(const json& j) {
  std::vector<lifestyle_profile> out;
  for (const auto& p : j.at("profiles")) out.push_back(profile_from_json(p));
  return out;
}

inline json generation_manifest(const event_stream& s, std::int64_t days) {
  std::size_t meals = 0;
  for (const auto& e : s.events)
    if (e.kind == event_kind::meal) ++meals;
  return json{{"seed", s.seed},
              {"config_fingerprint", s.config_fingerprint},
              {"days", days},
              {"persons", s.persons()},
              {"events", s.events.size()},
              {"meal_events", meals}};
}

}  // namespace pfmlab
