#pragma once

// Per-class field tables for atlas entities. Field names follow the atlas
// table verbatim (including its "Cholestorol" spelling) except that the single
// "Latitude and Longitude" column is stored as two numeric fields `lat`, `lon`.

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pfmlab/core/error.hpp"

namespace pfmlab::wfa {

using nlohmann::json;

enum class entity_class {
  eatery,
  store,
  recipe,
  menu_item,
  food_item,
  dietary_supplement,
  ingredient,
  compound,
  health_effect,
  nutrition,
};

inline constexpr std::array<entity_class, 10> all_entity_classes{
    entity_class::eatery,     entity_class::store,        entity_class::recipe,     entity_class::menu_item,
    entity_class::food_item,  entity_class::dietary_supplement, entity_class::ingredient, entity_class::compound,
    entity_class::health_effect, entity_class::nutrition};

// Leaves first, so that every link target is already present when a record
// that references it is validated.
inline constexpr std::array<entity_class, 10> ingest_order{
    entity_class::health_effect, entity_class::nutrition, entity_class::compound,  entity_class::ingredient,
    entity_class::menu_item,     entity_class::food_item, entity_class::dietary_supplement, entity_class::recipe,
    entity_class::eatery,        entity_class::store};

inline const char* to_string(entity_class c) {
  switch (c) {
    case entity_class::eatery: return "Eatery";
    case entity_class::store: return "Store";
    case entity_class::recipe: return "Recipe";
    case entity_class::menu_item: return "MenuItem";
    case entity_class::food_item: return "FoodItem";
    case entity_class::dietary_supplement: return "DietarySupplement";
    case entity_class::ingredient: return "Ingredient";
    case entity_class::compound: return "Compound";
    case entity_class::health_effect: return "HealthEffect";
    case entity_class::nutrition: return "Nutrition";
  }
  return "?";
}

inline const char* file_stem(entity_class c) {
  switch (c) {
    case entity_class::eatery: return "eatery";
    case entity_class::store: return "store";
    case entity_class::recipe: return "recipe";
    case entity_class::menu_item: return "menu_item";
    case entity_class::food_item: return "food_item";
    case entity_class::dietary_supplement: return "dietary_supplement";
    case entity_class::ingredient: return "ingredient";
    case entity_class::compound: return "compound";
    case entity_class::health_effect: return "health_effect";
    case entity_class::nutrition: return "nutrition";
  }
  return "?";
}

inline entity_class parse_entity_class(std::string_view s) {
  for (auto c : all_entity_classes)
    if (s == to_string(c) || s == file_stem(c)) return c;
  fail(errc::unknown_category, "unknown entity class '" + std::string(s) + "'");
}

inline bool is_located(entity_class c) { return c == entity_class::eatery || c == entity_class::store; }

inline bool is_food(entity_class c) {
  return c == entity_class::menu_item || c == entity_class::food_item || c == entity_class::dietary_supplement;
}

enum class field_kind { text, number, boolean, tags, link, any };

struct field_spec {
  std::string name;
  field_kind kind = field_kind::any;
  bool mandatory = true;
  std::optional<entity_class> target;  // link fields only
  std::size_t min_links = 0;
  std::size_t max_links = static_cast<std::size_t>(-1);
};

struct class_schema {
  entity_class cls;
  std::vector<field_spec> fields;

  const field_spec* find(std::string_view name) const {
    for (const auto& f : fields)
      if (f.name == name) return &f;
    return nullptr;
  }
};

// Tags recognised as health effects: the questionnaire columns of the
// HealthEffect class. Matching is exact after lower-casing.
inline const std::vector<std::string>& health_effect_vocabulary() {
  static const std::vector<std::string> v{
      "Allergen Effect",          "Effect on blood glucose level", "Effect on cardio-metabolic health",
      "Effect on Pregnancy",      "Effect on triglycerides",       "Fatty acid profile",
      "Pre-, pro-, post- biotic content", "Side Effects"};
  return v;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

// Returns the canonical vocabulary spelling for `tag`, if it is one.
inline std::optional<std::string> canonical_effect(std::string_view tag) {
  const std::string key = lower(tag);
  for (const auto& v : health_effect_vocabulary())
    if (lower(v) == key) return v;
  return std::nullopt;
}

namespace detail {

inline field_spec req(std::string name, field_kind k = field_kind::any) { return {std::move(name), k, true, {}, 0}; }
inline field_spec opt(std::string name, field_kind k = field_kind::any) { return {std::move(name), k, false, {}, 0}; }
inline field_spec link(std::string name, entity_class target, std::size_t min = 0,
                       std::size_t max = static_cast<std::size_t>(-1)) {
  return {std::move(name), field_kind::link, true, target, min, max};
}

inline std::vector<field_spec> opts(std::initializer_list<const char*> names) {
  std::vector<field_spec> out;
  for (auto n : names) out.push_back(opt(n));
  return out;
}

inline void append(std::vector<field_spec>& a, std::vector<field_spec> b) {
  a.insert(a.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
}

inline std::vector<field_spec> venue_fields(bool eatery) {
  using fk = field_kind;
  std::vector<field_spec> f;
  if (eatery) {
    f.push_back(link("Menu Item", entity_class::menu_item));
  } else {
    f.push_back(link("Dietary Supplement", entity_class::dietary_supplement));
    f.push_back(link("Food Item", entity_class::food_item));
  }
  f.push_back(req("Address", fk::text));
  if (eatery) f.push_back(req("Cuisine", fk::tags));
  append(f, {req("Description", fk::text), req("Drive Thru", fk::boolean), req("Email", fk::text),
             req("Item Price"), req("lat", fk::number), req("lon", fk::number), req("Logo", fk::text),
             req("Name", fk::text), req("Open Hours"), req("Payment Method", fk::tags), req("Phone", fk::text),
             req("Photo"), req("Price Range")});
  if (eatery) f.push_back(req("Reservation", fk::boolean));
  append(f, {req("Review"), req("Star Rating", fk::number), req("Website", fk::text)});
  if (eatery) {
    append(f, opts({"Curbside Pickup", "Deals/Offers", "Dine-in", "Events", "Non-Contact Delivery", "Online Order",
                    "Popular Times", "Question and Answers", "Serves Alcohol", "Smoking Allowed", "Social Media",
                    "Take Out", "Videos"}));
  } else {
    append(f, opts({"Curbside Pickup", "Deals/Offers", "Dine-in", "Events", "Non-Contact Delivery", "Online Order",
                    "Pharmacy", "Popular Times", "Product Categories", "Question and Answers", "Serves Alcohol",
                    "Smoking Allowed", "Social Media", "Take Out", "Videos"}));
  }
  return f;
}

inline std::vector<class_schema> build_schemas() {
  using fk = field_kind;
  using ec = entity_class;
  std::vector<class_schema> s;
  s.push_back({ec::eatery, venue_fields(true)});
  s.push_back({ec::store, venue_fields(false)});

  std::vector<field_spec> recipe{link("Ingredient", ec::ingredient, 1), link("Nutrition", ec::nutrition, 0, 1)};
  for (auto n : {"Category", "Cook Time", "Cooking Method", "Copyright Holder", "Copyright Notice", "Copyright Year",
                 "Cuisine", "Date Created", "Date Modified", "Description", "Instructions"})
    recipe.push_back(req(n));
  append(recipe, {req("Name", fk::text), req("Photos"), req("Prep Time"), req("Reviews"),
                  req("Star Rating", fk::number), req("Steps"), req("Suitable for Diet", fk::tags),
                  req("Total Time"), req("Website"), req("Yield"), opt("Videos"), opt("Cost"),
                  opt("Tools/Utensils")});
  s.push_back({ec::recipe, recipe});

  std::vector<field_spec> menu{link("Ingredient", ec::ingredient, 1), link("Health Effect", ec::health_effect),
                               link("Nutrition", ec::nutrition, 0, 1)};
  append(menu, {req("Category"), req("Description", fk::text), req("Name", fk::text), req("Serving Size"),
                req("Suitable for Diet", fk::tags), opt("Deals/Offers"), opt("Allergens", fk::tags), opt("Cost"),
                opt("Taste")});
  s.push_back({ec::menu_item, menu});

  std::vector<field_spec> food{link("Ingredient", ec::ingredient, 1), link("Health Effect", ec::health_effect),
                               link("Nutrition", ec::nutrition, 0, 1)};
  append(food, {req("Category"), req("Description", fk::text), req("Distributor"), req("Name", fk::text),
                req("Net Weight"), req("Serving Size"), req("Suitable for Diet", fk::tags), opt("Taste"),
                opt("Deals/Offers"), opt("Growing Location"), opt("Origin City"), opt("Origin Country"),
                opt("Allergens", fk::tags), opt("Cost"), opt("Shelf Life")});
  s.push_back({ec::food_item, food});

  std::vector<field_spec> supp{link("Ingredient", ec::ingredient), link("Health Effect", ec::health_effect),
                               link("Nutrition", ec::nutrition, 0, 1)};
  for (auto n : {"Active Ingredients", "Category", "Cost", "Description", "Guidelines", "Legal Status",
                 "Manufacturer", "Maximum Intake", "Mechanism of Action", "Medicine System"})
    supp.push_back(req(n));
  append(supp, {req("Name", fk::text), req("Proprietary Name"), req("Recognizing Authority"),
                req("Recommended Intake"), req("Safety Consideration"), req("Suitable for Diet", fk::tags),
                req("Target Population"), opt("Deals/Offers"), opt("Allergens", fk::tags), opt("Shelf Life"),
                opt("Taste")});
  s.push_back({ec::dietary_supplement, supp});

  std::vector<field_spec> ing{link("Compound", ec::compound), link("Health Effect", ec::health_effect),
                              link("Nutrition", ec::nutrition, 0, 1)};
  append(ing, {req("Category"), req("Cost"), req("Description", fk::text), req("Name", fk::text),
               req("Suitable for Diet", fk::tags), opt("Deals/Offers"), opt("Allergens", fk::tags),
               opt("Glycemic Index"), opt("Insulin Index"), opt("Shelf Life"), opt("Taste")});
  s.push_back({ec::ingredient, ing});

  std::vector<field_spec> comp{link("Health Effect", ec::health_effect)};
  for (auto n : {"BioChem Interaction", "BioChem Similarity", "Chemical Role", "Composition", "Description",
                 "Genetic Expression", "inChI", "inChIKey", "IUPAC Name", "Molecular Formula", "Molecular Function"})
    comp.push_back(req(n));
  append(comp, {req("Molecular Weight", fk::number), req("Name", fk::text), req("Potential Use"),
                req("Proprietary Name"), req("Smiles"), req("Subcellular Location"), req("Taxonomic Range"),
                opt("Taste")});
  s.push_back({ec::compound, comp});

  std::vector<field_spec> he{req("Health Benefits"), req("Misconceptions"), req("Symptoms")};
  for (const auto& tag : health_effect_vocabulary()) he.push_back(opt(tag));
  s.push_back({ec::health_effect, he});

  std::vector<field_spec> nut;
  for (auto n : {"Calories", "Carbohydrate", "Cholestorol", "Fat", "Fiber", "Protein", "Saturated Fat"})
    nut.push_back(req(n, fk::number));
  append(nut, {req("Serving Size"), req("Sugar", fk::number), req("Trans Fat", fk::number),
               req("Unsaturated Fat", fk::number), opt("% Daily Value"), opt("Electrolytes"), opt("Minerals"),
               opt("Vitamins")});
  s.push_back({ec::nutrition, nut});
  return s;
}

}  // namespace detail

inline const class_schema& schema_for(entity_class c) {
  static const std::vector<class_schema> all = detail::build_schemas();
  for (const auto& s : all)
    if (s.cls == c) return s;
  fail(errc::unknown_category, "no schema for class");
}

// Reserved keys every record may carry in addition to its schema fields.
inline const std::string id_key = "id";
inline const std::string contributor_key = "contributor_id";

// Field-level problems with one record, excluding link resolution (which
// needs the store). An empty result means the record is well-formed.
inline std::vector<std::string> check_fields(const class_schema& schema, const json& record) {
  std::vector<std::string> reasons;
  if (!record.is_object()) return {"record is not a JSON object"};
  if (!record.contains(id_key) || !record[id_key].is_string() ||
      record[id_key].get<std::string>().empty())
    reasons.push_back("missing or empty 'id'");
  if (record.contains(contributor_key) && !record[contributor_key].is_string())
    reasons.push_back("'contributor_id' must be a string");
  for (const auto& [key, value] : record.items()) {
    if (key == id_key || key == contributor_key) continue;
    if (!schema.find(key)) reasons.push_back("unknown field '" + key + "'");
  }
  for (const auto& f : schema.fields) {
    auto it = record.find(f.name);
    if (it == record.end() || it->is_null()) {
      if (f.mandatory) reasons.push_back("missing mandatory field '" + f.name + "'");
      continue;
    }
    const json& v = *it;
    switch (f.kind) {
      case field_kind::text:
        if (!v.is_string()) reasons.push_back("field '" + f.name + "' must be a string");
        break;
      case field_kind::number:
        if (!v.is_number()) reasons.push_back("field '" + f.name + "' must be a number");
        break;
      case field_kind::boolean:
        if (!v.is_boolean()) reasons.push_back("field '" + f.name + "' must be a boolean");
        break;
      case field_kind::tags: {
        const bool ok = v.is_string() ||
                        (v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); }));
        if (!ok) reasons.push_back("field '" + f.name + "' must be a string or a list of strings");
        break;
      }
      case field_kind::link: {
        if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); })) {
          reasons.push_back("link '" + f.name + "' must be a list of ids");
          break;
        }
        if (v.size() < f.min_links)
          reasons.push_back("link '" + f.name + "' needs at least " + std::to_string(f.min_links) + " entries");
        if (v.size() > f.max_links)
          reasons.push_back("link '" + f.name + "' allows at most " + std::to_string(f.max_links) + " entries");
        break;
      }
      case field_kind::any:
        break;
    }
  }
  if (is_located(schema.cls)) {
    const json lat = record.value("lat", json()), lon = record.value("lon", json());
    if (lat.is_number() && (lat.get<double>() < -90.0 || lat.get<double>() > 90.0))
      reasons.push_back("field 'lat' out of range [-90, 90]");
    if (lon.is_number() && (lon.get<double>() < -180.0 || lon.get<double>() > 180.0))
      reasons.push_back("field 'lon' out of range [-180, 180]");
  }
  return reasons;
}

// Values of a tags field as a list (a bare string is a one-element list).
inline std::vector<std::string> tag_values(const json& record, const std::string& field) {
  std::vector<std::string> out;
  auto it = record.find(field);
  if (it == record.end() || it->is_null()) return out;
  if (it->is_string()) {
    out.push_back(it->get<std::string>());
  } else if (it->is_array()) {
    for (const auto& x : *it)
      if (x.is_string()) out.push_back(x.get<std::string>());
  }
  return out;
}

}  // namespace pfmlab::wfa
