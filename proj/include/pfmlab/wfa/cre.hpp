#pragma once

// Context recognition: turns a context into the list of food options the
// person could actually choose from right now.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfmlab/core/error.hpp"
#include "pfmlab/core/rng.hpp"
#include "pfmlab/taste_space.hpp"
#include "pfmlab/wfa/atlas.hpp"

namespace pfmlab::wfa {

enum class cre_mode { random_sample, geospatial };

inline const char* to_string(cre_mode m) { return m == cre_mode::random_sample ? "random_sample" : "geospatial"; }

inline cre_mode parse_cre_mode(const std::string& s) {
  if (s == "random_sample") return cre_mode::random_sample;
  if (s == "geospatial") return cre_mode::geospatial;
  fail(errc::invalid_input, "unknown option mode '" + s + "'");
}

struct food_option {
  std::string ref;     // dish_id or MenuItem id
  std::string source;  // "recipes" or the Eatery id
  std::string name;
  double distance_km = 0.0;
  nutrition facts;
  std::vector<std::string> ingredients;
  taste_vector taste;
  std::vector<std::string> health_effects;
  std::optional<weight_class> weight;
};

struct option_list {
  std::vector<food_option> options;
  cre_mode provenance = cre_mode::random_sample;
  std::size_t requested = 0;
  bool not_enough = false;  // fewer than `requested` candidates existed
};

inline food_option option_from_dish(const dish& d) {
  food_option o;
  o.ref = d.dish_id;
  o.source = "recipes";
  o.name = d.name;
  o.facts = d.facts;
  o.ingredients = d.ingredients;
  o.taste = d.taste;
  o.health_effects = d.health_effects;
  o.weight = d.weight;
  return o;
}

// Uniform draw of n dishes without replacement. With a meal type in the
// context only that meal's dishes are eligible.
inline option_list random_options(const taste_dataset& ds, std::optional<meal_type> meal, std::size_t n, rng& r) {
  std::vector<const dish*> pool;
  if (meal) {
    pool = ds.of_meal(*meal);
  } else {
    for (const auto& d : ds.dishes()) pool.push_back(&d);
  }
  option_list out;
  out.provenance = cre_mode::random_sample;
  out.requested = n;
  out.not_enough = pool.size() < n;
  const std::size_t k = std::min(n, pool.size());
  for (auto i : r.sample_without_replacement(pool.size(), k)) out.options.push_back(option_from_dish(*pool[i]));
  return out;
}

namespace detail {

inline nutrition atlas_nutrition(const atlas_store& s, const entity& e) {
  nutrition n;
  const entity* ne = nutrition_of(s, e);
  if (!ne) return n;
  const auto num = [&](const char* field) {
    auto it = ne->attributes.find(field);
    return it != ne->attributes.end() && it->is_number() ? it->get<double>() : 0.0;
  };
  n.calories = num("Calories");
  n.protein = num("Protein");
  n.fat = num("Fat");
  n.saturated_fat = num("Saturated Fat");
  n.sugar = num("Sugar");
  n.fiber = num("Fiber");
  n.carbohydrate = num("Carbohydrate");
  return n;
}

// Accepts either a six-element array in canonical order or an object keyed
// by taste name; anything else reads as the zero vector.
inline taste_vector atlas_taste(const entity& e) {
  auto it = e.attributes.find("Taste");
  taste_vector t;
  if (it == e.attributes.end()) return t;
  if (it->is_array() && it->size() == taste_dims) return taste_from_json(*it);
  if (it->is_object())
    for (const auto& [k, v] : it->items())
      if (auto idx = taste_index(k); idx && v.is_number()) t.v[*idx] = v.get<double>();
  return t;
}

}  // namespace detail

// The n nearest menu items inside the radius that pass the context's deny
// list and diet tags. Each item appears once, at its nearest eatery.
inline option_list geospatial_options(const atlas_store& s, const context_vector& ctx, std::size_t n) {
  validate(ctx);
  option_list out;
  out.provenance = cre_mode::geospatial;
  out.requested = n;
  for (const auto& h : foods_in_range(s, ctx)) {
    if (h.cls != entity_class::menu_item) continue;
    const entity& m = s.at(h.cls, h.id);
    if (detail::excludes_any(s, m, ctx.deny_ingredients) || !detail::has_all_diets(m, ctx.suitable_for_diet)) continue;
    if (out.options.size() == n) break;
    food_option o;
    o.ref = m.id;
    o.source = h.venue_id;
    o.name = m.name();
    o.distance_km = h.distance_km;
    o.facts = detail::atlas_nutrition(s, m);
    o.ingredients = detail::ingredient_names(s, m);
    o.taste = detail::atlas_taste(m);
    o.health_effects = query_effect_by_food(s, entity_class::menu_item, m.id, ctx).tags;
    out.options.push_back(std::move(o));
  }
  out.not_enough = out.options.size() < n;
  return out;
}

inline json to_json(const food_option& o) {
  json j{{"ref", o.ref},
         {"source", o.source},
         {"name", o.name},
         {"distance_km", o.distance_km},
         {"nutrition", to_json(o.facts)},
         {"ingredients", o.ingredients},
         {"taste", to_json(o.taste)},
         {"health_effects", o.health_effects}};
  if (o.weight) j["weight_class"] = to_string(*o.weight);
  return j;
}

inline food_option option_from_json(const json& j) {
  food_option o;
  o.ref = j.at("ref").get<std::string>();
  if (o.ref.empty()) fail(errc::invalid_input, "option ref must not be empty");
  o.source = j.value("source", std::string());
  o.name = j.value("name", o.ref);
  o.distance_km = j.value("distance_km", 0.0);
  o.facts = nutrition_from_json(j.value("nutrition", json::object()));
  o.ingredients = j.value("ingredients", std::vector<std::string>{});
  if (j.contains("taste")) o.taste = taste_from_json(j["taste"]);
  o.health_effects = j.value("health_effects", std::vector<std::string>{});
  if (j.contains("weight_class")) o.weight = parse_weight_class(j["weight_class"].get<std::string>());
  return o;
}

// Accepts either a serialized option_list or a bare array of options.
inline option_list option_list_from_json(const json& j) {
  option_list l;
  const json& opts = j.is_array() ? j : j.at("options");
  for (const auto& o : opts) l.options.push_back(option_from_json(o));
  if (j.is_object()) {
    l.provenance = parse_cre_mode(j.value("provenance", std::string("random_sample")));
    l.not_enough = j.value("not_enough", false);
  }
  l.requested = j.is_object() ? j.value("requested", l.options.size()) : l.options.size();
  return l;
}

inline json to_json(const option_list& l) {
  json opts = json::array();
  for (const auto& o : l.options) opts.push_back(to_json(o));
  return json{{"provenance", to_string(l.provenance)},
              {"requested", l.requested},
              {"not_enough", l.not_enough},
              {"options", opts}};
}

}  // namespace pfmlab::wfa
