#pragma once

// Seeded synthetic atlas for tests and demos. Venues scatter around a centre
// point; menu items draw ingredients from a pool that includes the usual
// meat and nut restriction terms.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfmlab/taste_space.hpp"

#include "pfmlab/core/geo.hpp"
#include "pfmlab/core/rng.hpp"
#include "pfmlab/wfa/atlas.hpp"
#include "pfmlab/wfa/schema.hpp"

namespace pfmlab::wfa {

struct synthetic_atlas_config {
  geo::lat_lon center{33.6846, -117.8265};
  double spread_km = 25.0;
  std::size_t health_effects = 8;
  std::size_t compounds = 20;
  std::size_t ingredients = 40;
  std::size_t menu_items = 90;
  std::size_t food_items = 20;
  std::size_t supplements = 12;
  std::size_t recipes = 30;
  std::size_t eateries = 100;
  std::size_t stores = 40;
  // Nutrition records are one per menu item, food item and recipe, so the
  // defaults add up to 500 entities.
};

inline const std::vector<std::string>& synthetic_ingredient_names() {
  static const std::vector<std::string> v{
      "beef",         "chicken breast", "ham",        "lamb",      "turkey",     "pork sausage", "pork rib",
      "goat",         "steak tips",     "hotdog",     "almonds",   "pecans",     "pistachios",   "walnuts",
      "sesame seeds", "chia seeds",     "peanuts",    "tomato",    "rice",       "tofu",         "spinach",
      "lentils",      "chickpeas",      "oats",       "egg",       "milk",       "yogurt",       "cheddar",
      "salmon",       "shrimp",         "mushroom",   "potato",    "carrot",     "broccoli",     "avocado",
      "black beans",  "quinoa",         "bell pepper", "garlic",   "ginger"};
  return v;
}

inline const std::vector<std::string>& synthetic_diet_tags() {
  static const std::vector<std::string> v{"vegan", "vegetarian", "gluten-free", "halal", "low-sodium"};
  return v;
}

namespace detail {

inline std::string synth_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i + 1);
  return buf;
}

// Fills every mandatory non-link field that the caller left unset.
inline void fill_mandatory(entity_class cls, json& rec, rng& r) {
  for (const auto& f : schema_for(cls).fields) {
    if (!f.mandatory || f.kind == field_kind::link || rec.contains(f.name)) continue;
    switch (f.kind) {
      case field_kind::text: rec[f.name] = f.name + " of " + rec["id"].get<std::string>(); break;
      case field_kind::number: rec[f.name] = std::round(r.uniform(1.0, 5.0) * 10.0) / 10.0; break;
      case field_kind::boolean: rec[f.name] = r.bernoulli(0.5); break;
      case field_kind::tags: rec[f.name] = json::array({"general"}); break;
      default: rec[f.name] = "n/a"; break;
    }
  }
}

inline json pick_ids(rng& r, const std::vector<std::string>& pool, std::size_t lo, std::size_t hi) {
  json out = json::array();
  if (pool.empty()) return out;
  const std::size_t k = std::min(pool.size(), lo + r.below(hi - lo + 1));
  for (auto i : r.sample_without_replacement(pool.size(), k)) out.push_back(pool[i]);
  return out;
}

}  // namespace detail

inline record_batch synthetic_atlas(std::uint64_t seed, const synthetic_atlas_config& cfg = {}) {
  using ec = entity_class;
  rng r = rng::split(seed, "atlas");
  record_batch b;
  std::vector<std::string> he_ids, comp_ids, ing_ids, menu_ids, food_ids, supp_ids;
  std::size_t nutrition_count = 0;

  const auto add = [&](ec cls, json rec) {
    detail::fill_mandatory(cls, rec, r);
    rec["contributor_id"] = "synthetic";
    b[cls].push_back(std::move(rec));
  };
  const auto new_nutrition = [&](double kcal_scale) {
    const std::string id = detail::synth_id("nut", nutrition_count++);
    const auto g = [&](double lo, double hi) { return std::round(r.uniform(lo, hi) * 10.0) / 10.0; };
    json n{{"id", id},
           {"Calories", std::round(r.uniform(150.0, 900.0) * kcal_scale)},
           {"Carbohydrate", g(5, 110)},
           {"Cholestorol", g(0, 300)},
           {"Fat", g(1, 60)},
           {"Fiber", g(0, 15)},
           {"Protein", g(2, 55)},
           {"Saturated Fat", g(0, 22)},
           {"Serving Size", "1 serving"},
           {"Sugar", g(0, 45)},
           {"Trans Fat", g(0, 3)},
           {"Unsaturated Fat", g(0, 30)}};
    add(ec::nutrition, n);
    return id;
  };
  const auto diets = [&]() {
    json out = json::array();
    for (const auto& t : synthetic_diet_tags())
      if (r.bernoulli(0.35)) out.push_back(t);
    return out;
  };
  const auto taste = [&]() {
    json t = json::array();
    for (std::size_t i = 0; i < taste_dims; ++i) t.push_back(std::round(r.uniform(0.0, 6.0) * 10.0) / 10.0);
    return t;
  };
  const auto place = [&]() {
    const double d = cfg.spread_km * std::sqrt(r.uniform());
    return geo::destination(cfg.center, r.uniform(0.0, 360.0), d);
  };

  const auto& vocab = health_effect_vocabulary();
  for (std::size_t i = 0; i < cfg.health_effects; ++i) {
    json he{{"id", detail::synth_id("he", i)}};
    he[vocab[i % vocab.size()]] = "reported";
    for (const auto& tag : vocab)
      if (tag != vocab[i % vocab.size()] && r.bernoulli(0.15)) he[tag] = "possible";
    he_ids.push_back(he["id"]);
    add(ec::health_effect, he);
  }
  for (std::size_t i = 0; i < cfg.compounds; ++i) {
    json c{{"id", detail::synth_id("cmp", i)}, {"Health Effect", detail::pick_ids(r, he_ids, 0, 2)},
           {"Molecular Weight", std::round(r.uniform(50.0, 900.0) * 100.0) / 100.0}};
    comp_ids.push_back(c["id"]);
    add(ec::compound, c);
  }
  const auto& names = synthetic_ingredient_names();
  for (std::size_t i = 0; i < cfg.ingredients; ++i) {
    json g{{"id", detail::synth_id("ing", i)},
           {"Name", names[i % names.size()]},
           {"Compound", detail::pick_ids(r, comp_ids, 0, 3)},
           {"Health Effect", detail::pick_ids(r, he_ids, 0, 1)},
           {"Nutrition", json::array()},
           {"Suitable for Diet", diets()}};
    ing_ids.push_back(g["id"]);
    add(ec::ingredient, g);
  }
  for (std::size_t i = 0; i < cfg.menu_items; ++i) {
    json m{{"id", detail::synth_id("mi", i)},
           {"Name", "Menu item " + std::to_string(i + 1)},
           {"Ingredient", detail::pick_ids(r, ing_ids, 1, 5)},
           {"Health Effect", detail::pick_ids(r, he_ids, 0, 2)},
           {"Nutrition", json::array({new_nutrition(1.0)})},
           {"Suitable for Diet", diets()},
           {"Taste", taste()}};
    menu_ids.push_back(m["id"]);
    add(ec::menu_item, m);
  }
  for (std::size_t i = 0; i < cfg.food_items; ++i) {
    json f{{"id", detail::synth_id("fi", i)},
           {"Ingredient", detail::pick_ids(r, ing_ids, 1, 3)},
           {"Health Effect", detail::pick_ids(r, he_ids, 0, 2)},
           {"Nutrition", json::array({new_nutrition(0.5)})},
           {"Suitable for Diet", diets()}};
    food_ids.push_back(f["id"]);
    add(ec::food_item, f);
  }
  for (std::size_t i = 0; i < cfg.supplements; ++i) {
    json d{{"id", detail::synth_id("ds", i)},
           {"Ingredient", detail::pick_ids(r, ing_ids, 0, 2)},
           {"Health Effect", detail::pick_ids(r, he_ids, 1, 2)},
           {"Nutrition", json::array()},
           {"Suitable for Diet", diets()}};
    supp_ids.push_back(d["id"]);
    add(ec::dietary_supplement, d);
  }
  for (std::size_t i = 0; i < cfg.recipes; ++i) {
    json rec{{"id", detail::synth_id("rc", i)},
             {"Name", "Recipe " + std::to_string(i + 1)},
             {"Ingredient", detail::pick_ids(r, ing_ids, 2, 6)},
             {"Nutrition", json::array({new_nutrition(1.0)})},
             {"Suitable for Diet", diets()}};
    add(ec::recipe, rec);
  }
  for (std::size_t i = 0; i < cfg.eateries; ++i) {
    const auto p = place();
    json e{{"id", detail::synth_id("eat", i)},
           {"Name", "Eatery " + std::to_string(i + 1)},
           {"Menu Item", detail::pick_ids(r, menu_ids, 3, 8)},
           {"lat", p.lat},
           {"lon", p.lon},
           {"Star Rating", std::round(r.uniform(1.0, 5.0) * 10.0) / 10.0}};
    add(ec::eatery, e);
  }
  for (std::size_t i = 0; i < cfg.stores; ++i) {
    const auto p = place();
    json s{{"id", detail::synth_id("sto", i)},
           {"Name", "Store " + std::to_string(i + 1)},
           {"Food Item", detail::pick_ids(r, food_ids, 1, 4)},
           {"Dietary Supplement", detail::pick_ids(r, supp_ids, 0, 3)},
           {"lat", p.lat},
           {"lon", p.lon}};
    add(ec::store, s);
  }
  return b;
}

}  // namespace pfmlab::wfa
