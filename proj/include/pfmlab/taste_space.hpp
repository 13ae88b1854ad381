#pragma once

// US4B taste space: six additive taste dimensions. Ingredient vectors are
// molecule counts per taste attribute; dish vectors are ingredient sums.

#include <algorithm>
#include <array>
#include <bitset>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pfmlab/core/error.hpp"

namespace pfmlab {

using nlohmann::json;

inline constexpr std::size_t taste_dims = 6;

/// Canonical order, used by every serialization.
inline constexpr std::array<std::string_view, taste_dims> taste_names = {"umami", "salty", "sweet",
                                                                         "sour",  "spicy", "bitter"};

inline std::optional<std::size_t> taste_index(std::string_view name) {
  for (std::size_t i = 0; i < taste_dims; ++i)
    if (taste_names[i] == name) return i;
  return std::nullopt;
}

struct taste_vector {
  std::array<double, taste_dims> v{};

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  taste_vector& operator+=(const taste_vector& o) {
    for (std::size_t i = 0; i < taste_dims; ++i) v[i] += o.v[i];
    return *this;
  }
  friend taste_vector operator+(taste_vector a, const taste_vector& b) { return a += b; }
  friend taste_vector operator*(taste_vector a, double s) {
    for (auto& x : a.v) x *= s;
    return a;
  }
  friend bool operator==(const taste_vector&, const taste_vector&) = default;

  double norm() const {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }
  double total() const {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  bool is_zero() const {
    for (double x : v)
      if (x != 0.0) return false;
    return true;
  }
  /// Index of the largest component; ties resolve to canonical order.
  std::size_t dominant() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < taste_dims; ++i)
      if (v[i] > v[best]) best = i;
    return best;
  }
};

/// Cosine similarity; 0 when either vector is zero.
inline double cosine(const taste_vector& a, const taste_vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < taste_dims; ++i) dot += a[i] * b[i];
  return dot / (na * nb);
}

inline json to_json(const taste_vector& t) { return json(t.v); }

inline taste_vector taste_from_json(const json& j) {
  if (!j.is_array() || j.size() != taste_dims) fail(errc::invalid_input, "taste vector must be a 6-element array");
  taste_vector t;
  for (std::size_t i = 0; i < taste_dims; ++i) {
    t[i] = j[i].get<double>();
    if (!(t[i] >= 0.0)) fail(errc::invalid_input, "taste component must be non-negative");
  }
  return t;
}

using taste_attributes = std::bitset<taste_dims>;

struct molecule_entry {
  std::string ingredient_id;
  std::string molecule_id;
  taste_attributes attributes;
};

class molecule_table {
 public:
  molecule_table() = default;

  /// Throws DuplicateMolecule on a repeated (ingredient, molecule) pair.
  explicit molecule_table(std::vector<molecule_entry> entries) : entries_(std::move(entries)) {
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.ingredient_id.empty() || e.molecule_id.empty())
        fail(errc::invalid_input, "molecule row " + std::to_string(i) + " has an empty id");
      if (!seen.emplace(e.ingredient_id, e.molecule_id).second)
        fail(errc::duplicate_molecule, "(" + e.ingredient_id + ", " + e.molecule_id + ") appears twice");
      by_ingredient_[e.ingredient_id].push_back(i);
    }
  }

  const std::vector<molecule_entry>& entries() const { return entries_; }

  bool contains(std::string_view ingredient_id) const {
    return by_ingredient_.find(std::string(ingredient_id)) != by_ingredient_.end();
  }

  std::vector<std::string> ingredient_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, rows] : by_ingredient_) out.push_back(id);
    return out;
  }

  const std::vector<std::size_t>& rows_for(const std::string& ingredient_id) const {
    auto it = by_ingredient_.find(ingredient_id);
    if (it == by_ingredient_.end()) fail(errc::unknown_ingredient, ingredient_id);
    return it->second;
  }

 private:
  std::vector<molecule_entry> entries_;
  std::map<std::string, std::vector<std::size_t>> by_ingredient_;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Reads `ingredient_id,molecule_id,taste_attributes` CSV; attributes are
/// `|`-separated US4B labels, possibly empty.
inline molecule_table read_molecule_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "ingredient_id,molecule_id,taste_attributes")
    fail(errc::invalid_input, "molecule CSV header must be 'ingredient_id,molecule_id,taste_attributes'");
  std::vector<molecule_entry> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cols = detail::split(line, ',');
    if (cols.size() != 3) fail(errc::invalid_input, "line " + std::to_string(lineno) + ": expected 3 columns");
    molecule_entry e{detail::trim(cols[0]), detail::trim(cols[1]), {}};
    const std::string attrs = detail::trim(cols[2]);
    if (!attrs.empty()) {
      for (const auto& a : detail::split(attrs, '|')) {
        auto idx = taste_index(detail::trim(a));
        if (!idx) fail(errc::invalid_input, "line " + std::to_string(lineno) + ": unknown taste '" + a + "'");
        e.attributes.set(*idx);
      }
    }
    rows.push_back(std::move(e));
  }
  return molecule_table(std::move(rows));
}

inline molecule_table read_molecule_csv_text(const std::string& text) {
  std::istringstream in(text);
  return read_molecule_csv(in);
}

/// Per-attribute molecule weights. Source data has no intensity, so all 1.0.
using attribute_weights = std::array<double, taste_dims>;
inline constexpr attribute_weights unit_weights = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};

inline taste_vector ingredient_taste_vector(const molecule_table& table, const std::string& ingredient_id,
                                            const attribute_weights& weights = unit_weights) {
  taste_vector t;
  for (std::size_t row : table.rows_for(ingredient_id)) {
    const auto& attrs = table.entries()[row].attributes;
    for (std::size_t d = 0; d < taste_dims; ++d)
      if (attrs.test(d)) t[d] += weights[d];
  }
  return t;
}

inline std::map<std::string, taste_vector> ingredient_taste_vectors(const molecule_table& table,
                                                                    const attribute_weights& weights = unit_weights) {
  std::map<std::string, taste_vector> out;
  for (const auto& id : table.ingredient_ids()) out.emplace(id, ingredient_taste_vector(table, id, weights));
  return out;
}

enum class meal_type { breakfast, lunch, dinner };
enum class weight_class { heavy, light };

inline constexpr std::array<meal_type, 3> all_meal_types = {meal_type::breakfast, meal_type::lunch, meal_type::dinner};

constexpr std::string_view to_string(meal_type m) {
  switch (m) {
    case meal_type::breakfast: return "breakfast";
    case meal_type::lunch: return "lunch";
    case meal_type::dinner: return "dinner";
  }
  return "?";
}
constexpr std::string_view to_string(weight_class w) { return w == weight_class::heavy ? "heavy" : "light"; }

inline meal_type parse_meal_type(std::string_view s) {
  for (auto m : all_meal_types)
    if (to_string(m) == s) return m;
  fail(errc::invalid_input, "unknown meal type '" + std::string(s) + "'");
}
inline weight_class parse_weight_class(std::string_view s) {
  if (s == "heavy") return weight_class::heavy;
  if (s == "light") return weight_class::light;
  fail(errc::invalid_input, "unknown weight class '" + std::string(s) + "'");
}

/// Per-serving nutrition facts: kcal, then grams.
struct nutrition {
  double calories = 0.0;
  double protein = 0.0;
  double fat = 0.0;
  double saturated_fat = 0.0;
  double sugar = 0.0;
  double fiber = 0.0;
  double carbohydrate = 0.0;

  friend bool operator==(const nutrition&, const nutrition&) = default;
};

inline constexpr std::array<std::string_view, 7> nutrient_names = {"calories", "protein", "fat", "saturated_fat",
                                                                   "sugar", "fiber", "carbohydrate"};

inline std::array<double, 7> as_array(const nutrition& n) {
  return {n.calories, n.protein, n.fat, n.saturated_fat, n.sugar, n.fiber, n.carbohydrate};
}

inline std::optional<double> nutrient_value(const nutrition& n, std::string_view name) {
  const auto a = as_array(n);
  for (std::size_t i = 0; i < nutrient_names.size(); ++i)
    if (nutrient_names[i] == name) return a[i];
  return std::nullopt;
}

inline nutrition scaled(const nutrition& n, double s) {
  return {n.calories * s, n.protein * s, n.fat * s, n.saturated_fat * s, n.sugar * s, n.fiber * s, n.carbohydrate * s};
}

inline nutrition& operator+=(nutrition& a, const nutrition& b) {
  a.calories += b.calories;
  a.protein += b.protein;
  a.fat += b.fat;
  a.saturated_fat += b.saturated_fat;
  a.sugar += b.sugar;
  a.fiber += b.fiber;
  a.carbohydrate += b.carbohydrate;
  return a;
}

inline json to_json(const nutrition& n) {
  json j = json::object();
  const auto a = as_array(n);
  for (std::size_t i = 0; i < nutrient_names.size(); ++i) j[std::string(nutrient_names[i])] = a[i];
  return j;
}

inline nutrition nutrition_from_json(const json& j) {
  nutrition n;
  auto get = [&](const char* k) { return j.contains(k) ? j.at(k).get<double>() : 0.0; };
  n.calories = get("calories");
  n.protein = get("protein");
  n.fat = get("fat");
  n.saturated_fat = get("saturated_fat");
  n.sugar = get("sugar");
  n.fiber = get("fiber");
  n.carbohydrate = get("carbohydrate");
  return n;
}

struct recipe {
  std::string dish_id;
  std::string name;
  std::vector<std::string> ingredients;
  nutrition facts;
  std::vector<std::string> health_effects;
};

struct dish {
  std::string dish_id;
  std::string name;
  meal_type meal = meal_type::breakfast;
  weight_class weight = weight_class::light;
  std::vector<std::string> ingredients;
  nutrition facts;
  std::vector<std::string> health_effects;
  taste_vector taste;
};

/// Componentwise sum; throws MissingIngredientVector naming the ingredient.
inline taste_vector dish_taste_vector(std::span<const std::string> ingredients,
                                      const std::map<std::string, taste_vector>& vectors) {
  taste_vector t;
  for (const auto& ing : ingredients) {
    auto it = vectors.find(ing);
    if (it == vectors.end()) fail(errc::missing_ingredient_vector, ing);
    t += it->second;
  }
  return t;
}

inline taste_vector dish_taste_vector(const dish& d, const std::map<std::string, taste_vector>& vectors) {
  return dish_taste_vector(std::span<const std::string>(d.ingredients), vectors);
}

struct dish_assignment {
  meal_type meal;
  weight_class weight;
};

struct structure_requirements {
  std::size_t total = 60;
  std::size_t per_meal = 20;
  std::size_t per_meal_class = 10;
};

class taste_dataset {
 public:
  taste_dataset() = default;
  explicit taste_dataset(std::vector<dish> dishes) : dishes_(std::move(dishes)) {
    for (std::size_t i = 0; i < dishes_.size(); ++i) {
      if (!index_.emplace(dishes_[i].dish_id, i).second)
        fail(errc::invalid_input, "duplicate dish_id " + dishes_[i].dish_id);
    }
  }

  const std::vector<dish>& dishes() const { return dishes_; }
  std::size_t size() const { return dishes_.size(); }

  const dish* find(const std::string& dish_id) const {
    auto it = index_.find(dish_id);
    return it == index_.end() ? nullptr : &dishes_[it->second];
  }
  const dish& at(const std::string& dish_id) const {
    const dish* d = find(dish_id);
    if (!d) fail(errc::not_found, "dish " + dish_id);
    return *d;
  }

  /// Dishes of one meal type in ascending dish_id order.
  std::vector<const dish*> of_meal(meal_type m) const {
    std::vector<const dish*> out;
    for (const auto& d : dishes_)
      if (d.meal == m) out.push_back(&d);
    std::sort(out.begin(), out.end(), [](const dish* a, const dish* b) { return a->dish_id < b->dish_id; });
    return out;
  }

 private:
  std::vector<dish> dishes_;
  std::map<std::string, std::size_t> index_;
};

inline void check_structure(const std::vector<dish>& dishes, const structure_requirements& req) {
  if (dishes.size() != req.total)
    fail(errc::structure_violation, "expected " + std::to_string(req.total) + " dishes, got " +
                                        std::to_string(dishes.size()));
  for (auto m : all_meal_types) {
    std::size_t n = 0, heavy = 0;
    for (const auto& d : dishes) {
      if (d.meal != m) continue;
      ++n;
      if (d.weight == weight_class::heavy) ++heavy;
    }
    const std::string meal(to_string(m));
    if (n != req.per_meal)
      fail(errc::structure_violation, meal + ": expected " + std::to_string(req.per_meal) + " dishes, got " +
                                          std::to_string(n));
    if (heavy != req.per_meal_class)
      fail(errc::structure_violation, meal + "/heavy: expected " + std::to_string(req.per_meal_class) + ", got " +
                                          std::to_string(heavy));
    if (n - heavy != req.per_meal_class)
      fail(errc::structure_violation, meal + "/light: expected " + std::to_string(req.per_meal_class) + ", got " +
                                          std::to_string(n - heavy));
  }
}

/// Joins recipes with meal/weight assignments, computes all taste vectors and
/// enforces the experimental 60 / 20 per meal / 10+10 structure unless
/// `requirements` is empty.
inline taste_dataset build_taste_dataset(const std::vector<recipe>& recipes,
                                         const std::map<std::string, dish_assignment>& assignments,
                                         const molecule_table& table,
                                         std::optional<structure_requirements> requirements = structure_requirements{},
                                         const attribute_weights& weights = unit_weights) {
  std::map<std::string, taste_vector> vectors;
  std::vector<dish> dishes;
  for (const auto& r : recipes) {
    auto a = assignments.find(r.dish_id);
    if (a == assignments.end()) continue;
    if (r.ingredients.empty()) fail(errc::structure_violation, r.dish_id + " has no ingredients");
    for (const auto& ing : r.ingredients)
      if (!vectors.count(ing) && table.contains(ing)) vectors.emplace(ing, ingredient_taste_vector(table, ing, weights));
    dish d{r.dish_id, r.name, a->second.meal, a->second.weight, r.ingredients, r.facts, r.health_effects, {}};
    d.taste = dish_taste_vector(d, vectors);
    dishes.push_back(std::move(d));
  }
  if (requirements) check_structure(dishes, *requirements);
  return taste_dataset(std::move(dishes));
}

inline json to_json(const dish& d) {
  return json{{"dish_id", d.dish_id},
              {"name", d.name},
              {"meal_type", to_string(d.meal)},
              {"weight_class", to_string(d.weight)},
              {"ingredients", d.ingredients},
              {"nutrition", to_json(d.facts)},
              {"health_effects", d.health_effects},
              {"taste", to_json(d.taste)}};
}

inline json to_json(const taste_dataset& ds) {
  json arr = json::array();
  for (const auto& d : ds.dishes()) arr.push_back(to_json(d));
  return json{{"dishes", arr}};
}

inline taste_dataset taste_dataset_from_json(const json& j) {
  std::vector<dish> dishes;
  for (const auto& e : j.at("dishes")) {
    dish d;
    d.dish_id = e.at("dish_id").get<std::string>();
    d.name = e.value("name", d.dish_id);
    d.meal = parse_meal_type(e.at("meal_type").get<std::string>());
    d.weight = parse_weight_class(e.at("weight_class").get<std::string>());
    d.ingredients = e.at("ingredients").get<std::vector<std::string>>();
    d.facts = nutrition_from_json(e.at("nutrition"));
    d.health_effects = e.value("health_effects", std::vector<std::string>{});
    d.taste = taste_from_json(e.at("taste"));
    dishes.push_back(std::move(d));
  }
  return taste_dataset(std::move(dishes));
}

struct recipe_file {
  std::vector<recipe> recipes;
  std::map<std::string, dish_assignment> assignments;
};

/// Recipe document: `{"recipes": [{dish_id, name, meal_type, weight_class,
/// ingredients, nutrition, health_effects}]}`; meal/weight act as assignments.
inline recipe_file recipes_from_json(const json& j) {
  recipe_file out;
  for (const auto& e : j.at("recipes")) {
    recipe r;
    r.dish_id = e.at("dish_id").get<std::string>();
    r.name = e.value("name", r.dish_id);
    r.ingredients = e.at("ingredients").get<std::vector<std::string>>();
    r.facts = nutrition_from_json(e.value("nutrition", json::object()));
    r.health_effects = e.value("health_effects", std::vector<std::string>{});
    if (e.contains("meal_type") && e.contains("weight_class"))
      out.assignments[r.dish_id] = {parse_meal_type(e.at("meal_type").get<std::string>()),
                                    parse_weight_class(e.at("weight_class").get<std::string>())};
    out.recipes.push_back(std::move(r));
  }
  return out;
}

}  // namespace pfmlab
