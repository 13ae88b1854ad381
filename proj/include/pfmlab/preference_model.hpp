#pragma once

// Contextual taste-preference profiles and cosine top-k prediction.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfmlab/core/error.hpp"
#include "pfmlab/lifelog.hpp"
#include "pfmlab/taste_space.hpp"

namespace pfmlab {

enum class context_mode { none, stress_only, temperature_only, stress_and_temperature };

inline constexpr std::array<context_mode, 4> all_context_modes = {
    context_mode::none, context_mode::stress_only, context_mode::temperature_only, context_mode::stress_and_temperature};

inline std::string_view to_string(context_mode m) {
  switch (m) {
    case context_mode::none: return "none";
    case context_mode::stress_only: return "stress_only";
    case context_mode::temperature_only: return "temperature_only";
    case context_mode::stress_and_temperature: return "stress_and_temperature";
  }
  return "?";
}

inline context_mode parse_context_mode(std::string_view s) {
  for (auto m : all_context_modes)
    if (to_string(m) == s) return m;
  fail(errc::invalid_input, "unknown context mode '" + std::string(s) + "'");
}

struct context_bin {
  meal_type meal = meal_type::breakfast;
  temperature_level temperature = temperature_level::mild;
  stress_level stress = stress_level::low;
};

/// One meal joined to its day context.
struct meal_record {
  std::string event_id;
  std::string person_id;
  timestamp start = 0;
  std::int64_t day = 0;
  std::string dish_id;
  meal_type meal = meal_type::breakfast;
  stress_level stress = stress_level::low;
  temperature_level temperature = temperature_level::mild;

  context_bin bin() const { return {meal, temperature, stress}; }
};

/// Meals of one person (or everyone when `person` is empty), chronological.
inline std::vector<meal_record> extract_meals(const event_stream& s, const std::string& person = {}) {
  std::vector<meal_record> out;
  for (const auto& e : s.events) {
    if (e.kind != event_kind::meal || !e.informational.dish_id || !e.meal) continue;
    if (!person.empty() && e.person_id != person) continue;
    const auto day = day_index(e.start);
    const day_context* c = s.context_for(e.person_id, day);
    if (!c) fail(errc::invalid_input, "meal " + e.event_id + " has no day context");
    out.push_back({e.event_id, e.person_id, e.start, day, *e.informational.dish_id, *e.meal, c->stress, c->temperature});
  }
  std::stable_sort(out.begin(), out.end(), [](const meal_record& a, const meal_record& b) {
    return std::tie(a.start, a.event_id) < std::tie(b.start, b.event_id);
  });
  return out;
}

/// Bin index with ignored dimensions collapsed to 0: meal*9 + temperature*3 + stress.
inline std::size_t collapsed_bin(const context_bin& b, context_mode mode) {
  const bool use_t = mode == context_mode::temperature_only || mode == context_mode::stress_and_temperature;
  const bool use_s = mode == context_mode::stress_only || mode == context_mode::stress_and_temperature;
  return static_cast<std::size_t>(b.meal) * 9 + (use_t ? static_cast<std::size_t>(b.temperature) * 3 : 0) +
         (use_s ? static_cast<std::size_t>(b.stress) : 0);
}

struct bin_mean {
  taste_vector mean;
  std::size_t count = 0;
  bool empty() const { return count == 0; }
};

class preference_profile {
 public:
  preference_profile() = default;
  explicit preference_profile(context_mode mode) : mode_(mode) {}

  context_mode mode() const { return mode_; }

  const bin_mean& bin(const context_bin& b) const { return bins_[collapsed_bin(b, mode_)]; }
  const bin_mean& global(meal_type m) const { return global_[static_cast<std::size_t>(m)]; }

  /// Accumulates sums; call finalize() once afterwards.
  void add(const context_bin& b, const taste_vector& t) {
    auto& cell = bins_[collapsed_bin(b, mode_)];
    cell.mean += t;
    ++cell.count;
    auto& g = global_[static_cast<std::size_t>(b.meal)];
    g.mean += t;
    ++g.count;
  }

  void finalize() {
    for (auto& c : bins_)
      if (c.count) c.mean = c.mean * (1.0 / static_cast<double>(c.count));
    for (auto& g : global_)
      if (g.count) g.mean = g.mean * (1.0 / static_cast<double>(g.count));
  }

 private:
  context_mode mode_ = context_mode::none;
  std::array<bin_mean, 27> bins_{};
  std::array<bin_mean, 3> global_{};
};

inline preference_profile build_profiles(std::span<const meal_record> train, const taste_dataset& dataset,
                                         context_mode mode) {
  if (train.empty()) fail(errc::no_training_data, "no training meals");
  preference_profile p(mode);
  for (const auto& m : train) p.add(m.bin(), dataset.at(m.dish_id).taste);
  p.finalize();
  return p;
}

struct ranking {
  std::vector<std::string> dish_ids;
  bool used_global_fallback = false;  // bin empty or zero
  bool unranked = false;              // no usable profile vector: dish_id order
};

/// Candidates sorted by descending cosine to the context's profile vector,
/// ties by ascending dish_id; the first k are returned.
inline ranking predict_top_k(const preference_profile& profile, const context_bin& ctx,
                             std::span<const dish* const> candidates, std::size_t k) {
  if (k < 1) fail(errc::invalid_input, "k must be >= 1");
  if (candidates.empty()) fail(errc::empty_candidate_set, "no candidates");
  ranking r;
  const taste_vector* target = nullptr;
  if (const auto& b = profile.bin(ctx); !b.empty() && !b.mean.is_zero()) {
    target = &b.mean;
  } else {
    r.used_global_fallback = true;
    if (const auto& g = profile.global(ctx.meal); !g.empty() && !g.mean.is_zero()) target = &g.mean;
  }
  std::vector<std::pair<double, const dish*>> scored;
  scored.reserve(candidates.size());
  for (const dish* d : candidates) scored.emplace_back(target ? cosine(*target, d->taste) : 0.0, d);
  if (!target) r.unranked = true;
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->dish_id < b.second->dish_id;
  });
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) r.dish_ids.push_back(scored[i].second->dish_id);
  return r;
}

struct eval_report {
  context_mode mode = context_mode::none;
  std::size_t top_k = 5;
  double accuracy = 0.0;
  std::size_t hits = 0;
  std::size_t n_test = 0;
  std::size_t n_train = 0;
  std::string split;
};

inline std::size_t count_hits(const preference_profile& profile, std::span<const meal_record> test,
                              const taste_dataset& dataset, std::size_t k) {
  std::array<std::vector<const dish*>, 3> candidates;
  for (auto m : all_meal_types) candidates[static_cast<std::size_t>(m)] = dataset.of_meal(m);
  std::size_t hits = 0;
  for (const auto& meal : test) {
    const auto r = predict_top_k(profile, meal.bin(), candidates[static_cast<std::size_t>(meal.meal)], k);
    if (std::find(r.dish_ids.begin(), r.dish_ids.end(), meal.dish_id) != r.dish_ids.end()) ++hits;
  }
  return hits;
}

/// Chronological split: the first ceil(split * n) meals train, the rest test.
inline eval_report evaluate(std::span<const meal_record> meals, const taste_dataset& dataset, context_mode mode,
                            std::size_t k = 5, double split = 0.8) {
  if (meals.size() < 10) fail(errc::insufficient_data, "need at least 10 meals, got " + std::to_string(meals.size()));
  if (!(split > 0.0 && split < 1.0)) fail(errc::invalid_input, "split must lie in (0,1)");
  const std::size_t n_train = static_cast<std::size_t>(std::ceil(split * static_cast<double>(meals.size())));
  if (n_train >= meals.size()) fail(errc::insufficient_data, "split leaves no test meals");
  const auto train = meals.subspan(0, n_train);
  const auto test = meals.subspan(n_train);
  const auto profile = build_profiles(train, dataset, mode);
  eval_report r;
  r.mode = mode;
  r.top_k = k;
  r.n_train = train.size();
  r.n_test = test.size();
  r.hits = count_hits(profile, test, dataset, k);
  r.accuracy = static_cast<double>(r.hits) / static_cast<double>(r.n_test);
  r.split = "chronological " + std::to_string(n_train) + "/" + std::to_string(test.size());
  return r;
}

inline const std::vector<std::size_t>& default_volume_sizes() {
  static const std::vector<std::size_t> sizes = {4, 8, 16, 32, 64, 128, 256, 400};
  return sizes;
}

struct volume_point {
  std::size_t size_days = 0;
  context_mode mode = context_mode::none;
  double accuracy = 0.0;
  std::size_t hits = 0;
  std::size_t n_test = 0;
  std::size_t n_train = 0;
};

/// Fixed test window = the final `test_days` days; each training window is
/// the `size` days immediately before it.
inline std::vector<volume_point> volume_sweep(std::span<const meal_record> meals, const taste_dataset& dataset,
                                              const std::vector<std::size_t>& sizes, std::size_t test_days,
                                              const std::vector<context_mode>& modes, std::size_t k = 5) {
  if (meals.empty()) fail(errc::insufficient_data, "no meals");
  std::int64_t first_day = meals.front().day, last_day = meals.front().day;
  for (const auto& m : meals) {
    first_day = std::min(first_day, m.day);
    last_day = std::max(last_day, m.day);
  }
  const std::int64_t test_start = last_day - static_cast<std::int64_t>(test_days) + 1;
  const std::size_t max_size = sizes.empty() ? 0 : *std::max_element(sizes.begin(), sizes.end());
  if (test_start - static_cast<std::int64_t>(max_size) < first_day)
    fail(errc::insufficient_data, "stream spans " + std::to_string(last_day - first_day + 1) + " days, need " +
                                      std::to_string(max_size + test_days));
  std::vector<meal_record> test;
  for (const auto& m : meals)
    if (m.day >= test_start) test.push_back(m);
  if (test.empty()) fail(errc::insufficient_data, "empty test window");

  std::vector<volume_point> out;
  for (std::size_t size : sizes) {
    std::vector<meal_record> train;
    for (const auto& m : meals)
      if (m.day >= test_start - static_cast<std::int64_t>(size) && m.day < test_start) train.push_back(m);
    for (auto mode : modes) {
      volume_point pt;
      pt.size_days = size;
      pt.mode = mode;
      pt.n_test = test.size();
      pt.n_train = train.size();
      if (!train.empty()) {
        const auto profile = build_profiles(train, dataset, mode);
        pt.hits = count_hits(profile, test, dataset, k);
      }
      pt.accuracy = static_cast<double>(pt.hits) / static_cast<double>(pt.n_test);
      out.push_back(pt);
    }
  }
  return out;
}

inline json to_json(const eval_report& r) {
  return json{{"context_mode", to_string(r.mode)}, {"top_k", r.top_k}, {"accuracy", r.accuracy},
              {"hits", r.hits},                    {"n_test", r.n_test}, {"n_train", r.n_train},
              {"split", r.split}};
}

}  // namespace pfmlab
