#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "pfmlab/core/error.hpp"
#include "pfmlab/core/geo.hpp"
#include "pfmlab/core/io.hpp"
#include "pfmlab/taste_space.hpp"
#include "pfmlab/wfa/schema.hpp"

namespace pfmlab::wfa {

struct entity {
  entity_class cls = entity_class::ingredient;
  std::string id;
  std::string contributor_id;
  json attributes = json::object();  // schema fields, links included
  std::optional<geo::lat_lon> location;

  std::vector<std::string> links(const std::string& field) const { return tag_values(attributes, field); }
  std::string name() const {
    auto it = attributes.find("Name");
    return it != attributes.end() && it->is_string() ? it->get<std::string>() : id;
  }
};

struct rejection {
  entity_class cls = entity_class::ingredient;
  std::size_t index = 0;  // position within the submitted batch for the class
  std::string id;         // empty if the record had none
  std::vector<std::string> reasons;
};

using record_batch = std::map<entity_class, std::vector<json>>;

// Uniform lat/lon grid over located entities. Candidate cells for a radius
// query are chosen conservatively; exact distances are always re-checked.
class grid_index {
 public:
  explicit grid_index(double cell_deg = 0.05) : cell_deg_(cell_deg) {}

  void clear() { cells_.clear(); }

  void insert(const std::string& key, geo::lat_lon p) { cells_[cell_of(p)].push_back({key, p}); }

  // Every key whose point lies within `radius_km` of `center`, with distance.
  std::vector<std::pair<std::string, double>> within(geo::lat_lon center, double radius_km) const {
    std::vector<std::pair<std::string, double>> out;
    const auto visit = [&](const std::vector<item>& items) {
      for (const auto& it : items) {
        const double d = geo::haversine_km(center, it.p);
        if (d <= radius_km) out.emplace_back(it.key, d);
      }
    };
    const double ang = radius_km / geo::earth_radius_km;
    constexpr double rad2deg = 180.0 / 3.14159265358979323846;
    const double dlat = ang * rad2deg;
    const double lat_lo = center.lat - dlat, lat_hi = center.lat + dlat;
    const bool wide = ang >= 3.14159265358979323846 / 2.0 || lat_hi >= 89.0 || lat_lo <= -89.0;
    double dlon = 180.0;
    if (!wide) {
      const double s = std::sin(ang) / std::cos(center.lat / rad2deg);
      dlon = s >= 1.0 ? 180.0 : std::asin(s) * rad2deg;
    }
    if (wide || dlon >= 179.0 || cell_span(lat_lo, lat_hi, dlon) > cells_.size()) {
      for (const auto& [_, items] : cells_) visit(items);
    } else {
      const long r0 = std::lround(std::floor(lat_lo / cell_deg_)) - 1, r1 = std::lround(std::floor(lat_hi / cell_deg_)) + 1;
      const long c0 = std::lround(std::floor((center.lon - dlon) / cell_deg_)) - 1;
      const long c1 = std::lround(std::floor((center.lon + dlon) / cell_deg_)) + 1;
      const long ncols = std::lround(360.0 / cell_deg_);
      std::set<std::pair<long, long>> seen;
      for (long r = r0; r <= r1; ++r)
        for (long c = c0; c <= c1; ++c) {
          const long wrapped = wrap_col(c, ncols);
          if (!seen.insert({r, wrapped}).second) continue;
          auto it = cells_.find({r, wrapped});
          if (it != cells_.end()) visit(it->second);
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return std::tie(a.second, a.first) < std::tie(b.second, b.first);
    });
    return out;
  }

 private:
  struct item {
    std::string key;
    geo::lat_lon p;
  };

  std::pair<long, long> cell_of(geo::lat_lon p) const {
    const long ncols = std::lround(360.0 / cell_deg_);
    return {std::lround(std::floor(p.lat / cell_deg_)), wrap_col(std::lround(std::floor(p.lon / cell_deg_)), ncols)};
  }

  static long wrap_col(long c, long ncols) {
    // columns indexed from lon = -180
    const long offset = ncols / 2;
    long k = (c + offset) % ncols;
    if (k < 0) k += ncols;
    return k - offset;
  }

  std::size_t cell_span(double lat_lo, double lat_hi, double dlon) const {
    const double rows = (lat_hi - lat_lo) / cell_deg_ + 3.0;
    const double cols = 2.0 * dlon / cell_deg_ + 3.0;
    return static_cast<std::size_t>(std::min(rows * cols, 1e12));
  }

  double cell_deg_;
  std::map<std::pair<long, long>, std::vector<item>> cells_;
};

// In-process atlas. Readers may run concurrently; ingestion takes the lock
// exclusively.
class atlas_store {
 public:
  atlas_store() : mutex_(std::make_unique<std::shared_mutex>()) {}

  // Validates and inserts records class by class in dependency order. Links
  // may point at entities already in the store or accepted earlier in the
  // same call. Records are never partially applied.
  std::vector<rejection> ingest(const record_batch& batch) {
    std::unique_lock lock(*mutex_);
    std::vector<rejection> report;
    for (auto cls : ingest_order) {
      auto it = batch.find(cls);
      if (it == batch.end()) continue;
      const auto& schema = schema_for(cls);
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        const json& rec = it->second[i];
        auto reasons = check_fields(schema, rec);
        std::string id;
        if (rec.is_object() && rec.contains("id") && rec["id"].is_string()) id = rec["id"].get<std::string>();
        if (!id.empty() && entities_[cls].count(id)) reasons.push_back("duplicate id '" + id + "'");
        if (reasons.empty()) {
          for (const auto& f : schema.fields) {
            if (f.kind != field_kind::link) continue;
            for (const auto& target : tag_values(rec, f.name))
              if (!entities_[*f.target].count(target))
                reasons.push_back("link '" + f.name + "' references unknown " + to_string(*f.target) + " '" + target +
                                  "'");
          }
        }
        if (!reasons.empty()) {
          report.push_back({cls, i, id, std::move(reasons)});
          continue;
        }
        entity e;
        e.cls = cls;
        e.id = id;
        e.contributor_id = rec.value("contributor_id", std::string());
        for (const auto& [k, v] : rec.items())
          if (k != "id" && k != "contributor_id" && !v.is_null()) e.attributes[k] = v;
        if (is_located(cls)) {
          e.location = geo::lat_lon{rec["lat"].get<double>(), rec["lon"].get<double>()};
          index_[cls].insert(id, *e.location);
        }
        entities_[cls].emplace(id, std::move(e));
      }
    }
    return report;
  }

  std::size_t size() const {
    std::shared_lock lock(*mutex_);
    std::size_t n = 0;
    for (const auto& [_, m] : entities_) n += m.size();
    return n;
  }

  std::size_t size(entity_class c) const {
    std::shared_lock lock(*mutex_);
    auto it = entities_.find(c);
    return it == entities_.end() ? 0 : it->second.size();
  }

  const entity* find(entity_class c, const std::string& id) const {
    std::shared_lock lock(*mutex_);
    auto it = entities_.find(c);
    if (it == entities_.end()) return nullptr;
    auto jt = it->second.find(id);
    return jt == it->second.end() ? nullptr : &jt->second;
  }

  const entity& at(entity_class c, const std::string& id) const {
    const entity* e = find(c, id);
    if (!e) fail(errc::not_found, std::string(to_string(c)) + " '" + id + "' not in atlas");
    return *e;
  }

  // Entities of one class in ascending id order.
  std::vector<const entity*> all(entity_class c) const {
    std::shared_lock lock(*mutex_);
    std::vector<const entity*> out;
    auto it = entities_.find(c);
    if (it == entities_.end()) return out;
    for (const auto& [_, e] : it->second) out.push_back(&e);
    return out;
  }

  std::vector<std::pair<const entity*, double>> within(entity_class c, geo::lat_lon center, double radius_km) const {
    std::shared_lock lock(*mutex_);
    std::vector<std::pair<const entity*, double>> out;
    auto it = index_.find(c);
    if (it == index_.end()) return out;
    for (const auto& [id, d] : it->second.within(center, radius_km)) out.emplace_back(&entities_.at(c).at(id), d);
    return out;
  }

  // Canonical records for one class, sorted by id.
  std::vector<json> export_class(entity_class c) const {
    std::vector<json> out;
    for (const entity* e : all(c)) {
      json j = e->attributes;
      j["id"] = e->id;
      if (!e->contributor_id.empty()) j["contributor_id"] = e->contributor_id;
      out.push_back(std::move(j));
    }
    return out;
  }

  record_batch export_all() const {
    record_batch b;
    for (auto c : all_entity_classes) b[c] = export_class(c);
    return b;
  }

 private:
  std::unique_ptr<std::shared_mutex> mutex_;
  std::map<entity_class, std::map<std::string, entity>> entities_;
  std::map<entity_class, grid_index> index_;
};

// ---------------------------------------------------------------------------
// Files: one JSON-lines file per class, named <stem>.jsonl
// ---------------------------------------------------------------------------

inline record_batch read_atlas_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(errc::io_failure, "atlas directory not found: " + dir.string());
  record_batch b;
  for (auto c : all_entity_classes) {
    const auto path = dir / (std::string(file_stem(c)) + ".jsonl");
    if (std::filesystem::exists(path)) b[c] = io::read_jsonl(path);
  }
  return b;
}

inline void write_atlas_dir(const record_batch& b, const std::filesystem::path& dir) {
  for (const auto& [c, records] : b) io::write_text(dir / (std::string(file_stem(c)) + ".jsonl"), io::to_jsonl(records));
}

inline json to_json(const rejection& r) {
  return json{{"class", to_string(r.cls)}, {"index", r.index}, {"id", r.id}, {"reasons", r.reasons}};
}

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

struct context_vector {
  geo::lat_lon location;
  double radius_km = 5.0;
  std::optional<std::string> time_of_day;
  std::optional<pfmlab::meal_type> meal;
  std::vector<std::string> deny_ingredients;
  std::vector<std::string> suitable_for_diet;
  std::optional<double> budget;
};

struct requirement_vector {
  std::vector<std::string> exclude_ingredients;
  std::map<std::string, double> max_nutrients;  // Nutrition field name -> upper bound
  std::vector<std::string> suitable_for_diet;
};

inline void validate(const context_vector& c) {
  if (!(c.radius_km > 0.0)) fail(errc::invalid_input, "context radius must be positive");
  if (c.location.lat < -90.0 || c.location.lat > 90.0 || c.location.lon < -180.0 || c.location.lon > 180.0)
    fail(errc::invalid_input, "context location out of range");
}

inline void validate(const requirement_vector& r) {
  const auto& schema = schema_for(entity_class::nutrition);
  for (const auto& [name, _] : r.max_nutrients) {
    const field_spec* f = schema.find(name);
    if (!f || f->kind != field_kind::number) fail(errc::invalid_input, "'" + name + "' is not a numeric Nutrition field");
  }
}

namespace detail {

inline bool contains_ci(const std::string& hay, const std::string& needle) {
  return lower(hay).find(lower(needle)) != std::string::npos;
}

inline bool has_all_diets(const entity& e, const std::vector<std::string>& diets) {
  const auto have = tag_values(e.attributes, "Suitable for Diet");
  for (const auto& d : diets) {
    const bool hit = std::any_of(have.begin(), have.end(), [&](const std::string& h) { return lower(h) == lower(d); });
    if (!hit) return false;
  }
  return true;
}

inline std::vector<std::string> ingredient_names(const atlas_store& s, const entity& e) {
  std::vector<std::string> out;
  for (const auto& id : e.links("Ingredient")) out.push_back(s.at(entity_class::ingredient, id).name());
  return out;
}

inline bool excludes_any(const atlas_store& s, const entity& e, const std::vector<std::string>& terms) {
  if (terms.empty()) return false;
  for (const auto& name : ingredient_names(s, e))
    for (const auto& t : terms)
      if (contains_ci(name, t)) return true;
  return false;
}

inline const entity* nutrition_of(const atlas_store& s, const entity& e) {
  const auto ids = e.links("Nutrition");
  return ids.empty() ? nullptr : s.find(entity_class::nutrition, ids.front());
}

inline bool meets(const atlas_store& s, const entity& e, const requirement_vector& r,
                  const std::vector<std::string>& extra_deny = {}) {
  if (excludes_any(s, e, r.exclude_ingredients) || excludes_any(s, e, extra_deny)) return false;
  if (!has_all_diets(e, r.suitable_for_diet)) return false;
  if (!r.max_nutrients.empty()) {
    const entity* n = nutrition_of(s, e);
    if (!n) return false;
    for (const auto& [name, bound] : r.max_nutrients) {
      auto it = n->attributes.find(name);
      if (it == n->attributes.end() || !it->is_number() || it->get<double>() > bound) return false;
    }
  }
  return true;
}

// Effect tags carried by a HealthEffect entity: the vocabulary fields it fills.
inline std::vector<std::string> effect_tags(const entity& he) {
  std::vector<std::string> out;
  for (const auto& tag : health_effect_vocabulary()) {
    auto it = he.attributes.find(tag);
    if (it == he.attributes.end() || it->is_null()) continue;
    if (it->is_string() && it->get<std::string>().empty()) continue;
    out.push_back(tag);
  }
  return out;
}

// HealthEffect ids reachable from a food: direct links, via its ingredients,
// and via those ingredients' compounds.
inline std::set<std::string> reachable_effects(const atlas_store& s, const entity& food) {
  std::set<std::string> out;
  for (const auto& h : food.links("Health Effect")) out.insert(h);
  for (const auto& ing_id : food.links("Ingredient")) {
    const entity& ing = s.at(entity_class::ingredient, ing_id);
    for (const auto& h : ing.links("Health Effect")) out.insert(h);
    for (const auto& cid : ing.links("Compound"))
      for (const auto& h : s.at(entity_class::compound, cid).links("Health Effect")) out.insert(h);
  }
  return out;
}

// Food class -> the venue class that sells it and the venue's link field.
inline std::pair<entity_class, std::string> venue_of(entity_class food) {
  switch (food) {
    case entity_class::menu_item: return {entity_class::eatery, "Menu Item"};
    case entity_class::food_item: return {entity_class::store, "Food Item"};
    case entity_class::dietary_supplement: return {entity_class::store, "Dietary Supplement"};
    default: fail(errc::invalid_input, "not a food class");
  }
}

}  // namespace detail

struct food_hit {
  entity_class cls = entity_class::menu_item;
  std::string id;
  std::string venue_id;  // nearest venue offering it
  double distance_km = 0.0;

  friend bool operator==(const food_hit&, const food_hit&) = default;
};

inline bool food_hit_less(const food_hit& a, const food_hit& b) {
  return std::tuple(a.distance_km, static_cast<int>(a.cls), a.id) <
         std::tuple(b.distance_km, static_cast<int>(b.cls), b.id);
}

// Foods on offer within the context radius, each at its nearest venue.
inline std::vector<food_hit> foods_in_range(const atlas_store& s, const context_vector& ctx) {
  std::map<std::pair<entity_class, std::string>, food_hit> best;
  for (auto food_cls : {entity_class::menu_item, entity_class::food_item, entity_class::dietary_supplement}) {
    const auto [venue_cls, field] = detail::venue_of(food_cls);
    for (const auto& [venue, d] : s.within(venue_cls, ctx.location, ctx.radius_km)) {
      for (const auto& fid : venue->links(field)) {
        food_hit h{food_cls, fid, venue->id, d};
        auto [it, inserted] = best.emplace(std::pair(food_cls, fid), h);
        if (!inserted && std::tie(d, venue->id) < std::tie(it->second.distance_km, it->second.venue_id)) it->second = h;
      }
    }
  }
  std::vector<food_hit> out;
  for (auto& [_, h] : best) out.push_back(h);
  std::sort(out.begin(), out.end(), food_hit_less);
  return out;
}

inline std::vector<food_hit> query_food_by_effect(const atlas_store& s, const std::string& effect,
                                                  const context_vector& ctx) {
  validate(ctx);
  const auto tag = canonical_effect(effect);
  if (!tag) fail(errc::invalid_input, "unknown health effect '" + effect + "'");
  std::vector<food_hit> out;
  for (const auto& h : foods_in_range(s, ctx)) {
    const entity& food = s.at(h.cls, h.id);
    if (detail::excludes_any(s, food, ctx.deny_ingredients) || !detail::has_all_diets(food, ctx.suitable_for_diet))
      continue;
    bool hit = false;
    for (const auto& he_id : detail::reachable_effects(s, food)) {
      const auto tags = detail::effect_tags(s.at(entity_class::health_effect, he_id));
      if (std::find(tags.begin(), tags.end(), *tag) != tags.end()) hit = true;
    }
    if (hit) out.push_back(h);
  }
  return out;
}

struct effect_result {
  std::vector<std::string> health_effect_ids;  // ascending
  std::vector<std::string> tags;               // vocabulary order
};

// The context is validated but does not narrow the answer: the effects of a
// food do not depend on where it is eaten.
inline effect_result query_effect_by_food(const atlas_store& s, entity_class cls, const std::string& food_id,
                                          const context_vector& ctx) {
  validate(ctx);
  if (!is_food(cls) && cls != entity_class::recipe && cls != entity_class::ingredient)
    fail(errc::invalid_input, std::string(to_string(cls)) + " is not a food class");
  const entity& food = s.at(cls, food_id);
  effect_result r;
  std::set<std::string> ids;
  if (cls == entity_class::ingredient) {
    for (const auto& h : food.links("Health Effect")) ids.insert(h);
    for (const auto& cid : food.links("Compound"))
      for (const auto& h : s.at(entity_class::compound, cid).links("Health Effect")) ids.insert(h);
  } else {
    ids = detail::reachable_effects(s, food);
  }
  r.health_effect_ids.assign(ids.begin(), ids.end());
  std::set<std::string> tags;
  for (const auto& id : ids)
    for (const auto& t : detail::effect_tags(s.at(entity_class::health_effect, id))) tags.insert(t);
  for (const auto& t : health_effect_vocabulary())
    if (tags.count(t)) r.tags.push_back(t);
  return r;
}

inline std::vector<std::string> query_recipes_by_requirements(const atlas_store& s, const requirement_vector& req) {
  validate(req);
  std::vector<std::string> out;
  for (const entity* r : s.all(entity_class::recipe))
    if (detail::meets(s, *r, req)) out.push_back(r->id);
  return out;
}

struct eatery_hit {
  std::string id;
  double distance_km = 0.0;
  std::vector<std::string> menu_items;  // qualifying items, ascending

  friend bool operator==(const eatery_hit&, const eatery_hit&) = default;
};

inline std::vector<eatery_hit> query_eateries(const atlas_store& s, const requirement_vector& req,
                                              const context_vector& ctx) {
  validate(ctx);
  validate(req);
  std::vector<eatery_hit> out;
  for (const auto& [e, d] : s.within(entity_class::eatery, ctx.location, ctx.radius_km)) {
    eatery_hit h{e->id, d, {}};
    for (const auto& mid : e->links("Menu Item")) {
      const entity& m = s.at(entity_class::menu_item, mid);
      if (detail::meets(s, m, req, ctx.deny_ingredients) && detail::has_all_diets(m, ctx.suitable_for_diet))
        h.menu_items.push_back(mid);
    }
    std::sort(h.menu_items.begin(), h.menu_items.end());
    h.menu_items.erase(std::unique(h.menu_items.begin(), h.menu_items.end()), h.menu_items.end());
    if (!h.menu_items.empty()) out.push_back(std::move(h));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON for query inputs and outputs
// ---------------------------------------------------------------------------

inline requirement_vector requirement_from_json(const json& j) {
  requirement_vector r;
  r.exclude_ingredients = j.value("exclude_ingredients", std::vector<std::string>{});
  r.suitable_for_diet = j.value("suitable_for_diet", std::vector<std::string>{});
  if (j.contains("max_nutrients"))
    for (const auto& [k, v] : j["max_nutrients"].items()) r.max_nutrients[k] = v.get<double>();
  validate(r);
  return r;
}

inline json to_json(const food_hit& h) {
  return json{{"class", to_string(h.cls)}, {"id", h.id}, {"venue_id", h.venue_id}, {"distance_km", h.distance_km}};
}

inline json to_json(const eatery_hit& h) {
  return json{{"id", h.id}, {"distance_km", h.distance_km}, {"menu_items", h.menu_items}};
}

}  // namespace pfmlab::wfa
