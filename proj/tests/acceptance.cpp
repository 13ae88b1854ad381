// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Each check runs end to end on the shipped data.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pfmlab/cfg_engine.hpp"
#include "pfmlab/core/io.hpp"
#include "pfmlab/event_mining.hpp"
#include "pfmlab/harness.hpp"
#include "pfmlab/preference_model.hpp"
#include "pfmlab/wfa/synthetic.hpp"
#include "support.hpp"

using namespace pfmlab;
namespace fs = std::filesystem;

namespace {

struct outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. dataset scale
// ---------------------------------------------------------------------------

outcome dataset_scale() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = generate(test::profiles(), 500, test::dataset(), 42);
  const double secs = seconds_since(t0);
  const auto meals = static_cast<double>(
      std::count_if(s.events.begin(), s.events.end(), [](const lifelog_event& e) { return e.kind == event_kind::meal; }));
  const bool ok = std::fabs(meals - 7373.0) <= 0.1 * 7373.0 && secs < 30.0;
  return {ok, "meals=" + fmt(meals, 0) + " (target 7373 +/-10%), " + fmt(secs, 2) + " s"};
}

// ---------------------------------------------------------------------------
// 2. taste dataset structure
// ---------------------------------------------------------------------------

outcome taste_structure() {
  const auto& ds = test::dataset();
  std::map<std::string, int> cells;
  for (const auto& d : ds.dishes()) ++cells[std::string(to_string(d.meal)) + "/" + std::string(to_string(d.weight))];
  bool ok = ds.dishes().size() == 60 && cells.size() == 6;
  for (const auto& [_, n] : cells) ok = ok && n == 10;
  for (auto m : all_meal_types) ok = ok && ds.of_meal(m).size() == 20;
  return {ok, std::to_string(ds.dishes().size()) + " dishes, " + std::to_string(cells.size()) + " meal/weight cells of 10"};
}

// ---------------------------------------------------------------------------
// 3. RQ1 bins vs a groupby over the raw JSONL
// ---------------------------------------------------------------------------

outcome rq1_groupby() {
  const auto& s = test::default_stream();
  const auto rows = io::parse_jsonl(stream_to_jsonl(s));
  std::map<std::pair<std::string, std::string>, std::string> stress, temp;
  static const char* stress_names[] = {"low", "medium", "high"};
  for (const auto& j : rows) {
    const std::string kind = j["kind"], start = j["temporal"]["start"];
    const auto key = std::pair{j["person_id"].get<std::string>(), start.substr(0, 10)};
    if (kind == "stress_report")
      stress[key] = stress_names[static_cast<int>(j["informational"]["metrics"]["stress_level"].get<double>())];
    if (kind == "weather_report") {
      const double c = j["informational"]["metrics"]["temperature_c"];
      temp[key] = c < 15.0 ? "cool" : (c > 25.0 ? "hot" : "mild");
    }
  }
  std::map<std::string, std::pair<std::array<double, 6>, std::size_t>> oracle;
  for (const auto& j : rows) {
    if (j["kind"] != "meal") continue;
    const std::string person = j["person_id"], start = j["temporal"]["start"];
    const auto key = std::pair{person, start.substr(0, 10)};
    const std::string bin = person + "/" + j["structural"]["meal_type"].get<std::string>() + "/" + temp.at(key) + "/" +
                            stress.at(key);
    auto& [sum, n] = oracle[bin];
    const auto& t = test::dataset().at(j["informational"]["dish_id"].get<std::string>()).taste;
    for (std::size_t d = 0; d < 6; ++d) sum[d] += t[d];
    ++n;
  }

  std::size_t bins = 0, filled = 0, mismatches = 0;
  double worst = 0.0;
  for (const auto& person : s.persons()) {
    const auto p = build_profiles(extract_meals(s, person), test::dataset(), context_mode::stress_and_temperature);
    for (auto meal : all_meal_types)
      for (int t = 0; t < 3; ++t)
        for (int st = 0; st < 3; ++st) {
          const context_bin b{meal, static_cast<temperature_level>(t), static_cast<stress_level>(st)};
          ++bins;
          const std::string key = person + "/" + std::string(to_string(meal)) + "/" +
                                  std::string(to_string(b.temperature)) + "/" + std::string(to_string(b.stress));
          const auto& cell = p.bin(b);
          const auto it = oracle.find(key);
          if (it == oracle.end()) {
            mismatches += !cell.empty();
            continue;
          }
          ++filled;
          if (cell.count != it->second.second) ++mismatches;
          for (std::size_t d = 0; d < 6; ++d)
            worst = std::max(worst, std::fabs(cell.mean[d] - it->second.first[d] / static_cast<double>(it->second.second)));
        }
  }
  const bool ok = bins == 5 * 3 * 9 && mismatches == 0 && worst <= 1e-9;
  std::ostringstream d;
  d << bins << " bins (" << filled << " non-empty), max |diff|=" << worst << ", count mismatches=" << mismatches;
  return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// 4. RQ2 context beats no-context on every profile
// ---------------------------------------------------------------------------

outcome rq2_property() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = generate(test::profiles(), 500, test::dataset(), 42);
  bool ok = true;
  std::string d;
  for (const auto& person : s.persons()) {
    const auto meals = extract_meals(s, person);
    const double none = evaluate(meals, test::dataset(), context_mode::none, 5).accuracy;
    const double ctx = evaluate(meals, test::dataset(), context_mode::stress_and_temperature, 5).accuracy;
    ok = ok && ctx - none >= 0.03;
    d += person + " " + fmt(ctx) + " vs " + fmt(none) + "; ";
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60.0;
  return {ok, d + fmt(secs, 2) + " s"};
}

// ---------------------------------------------------------------------------
// 5. RQ3 volume curve
// ---------------------------------------------------------------------------

outcome rq3_property() {
  const auto r = harness::rq3(test::default_stream(), test::dataset());
  const auto acc = [&](std::size_t n, context_mode m) { return harness::pooled_accuracy(r, n, m); };
  const auto ctx = context_mode::stress_and_temperature, none = context_mode::none;
  bool ok = true;
  for (std::size_t n : default_volume_sizes()) (void)acc(n, ctx);  // every ladder point exists
  ok = ok && acc(256, ctx) >= acc(256, none) && acc(400, ctx) >= acc(400, none);
  const double flat = std::fabs(acc(256, ctx) - acc(400, ctx));
  ok = ok && flat <= 0.05;
  return {ok, "pooled ctx/none @256 " + fmt(acc(256, ctx)) + "/" + fmt(acc(256, none)) + ", @400 " + fmt(acc(400, ctx)) +
                  "/" + fmt(acc(400, none)) + ", @4 " + fmt(acc(4, ctx)) + "/" + fmt(acc(4, none)) +
                  ", |acc256-acc400|=" + fmt(flat)};
}

// ---------------------------------------------------------------------------
// 6. cfg_rank vs a brute-force reference
// ---------------------------------------------------------------------------

// Selection-based restatement of the ranking rule: repeatedly pick the best
// remaining element under an explicit key.
std::vector<std::string> reference_rank(const std::vector<cfg::scored_option>& opts, int nl, int pl,
                                        cfg::factor tie_first) {
  using cfg::factor;
  const std::size_t n = opts.size();
  factor p1, p2;
  if (nl != pl) {
    p1 = nl > pl ? factor::nutrition : factor::preference;
  } else {
    p1 = tie_first;
  }
  p2 = p1 == factor::nutrition ? factor::preference : factor::nutrition;
  const int l1 = p1 == factor::nutrition ? nl : pl;
  const int l2 = p2 == factor::nutrition ? nl : pl;

  const auto select_all = [&](std::vector<std::size_t> pool, const std::function<bool(std::size_t, std::size_t)>& better) {
    std::vector<std::size_t> out;
    while (!pool.empty()) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < pool.size(); ++i)
        if (better(pool[i], pool[best])) best = i;
      out.push_back(pool[best]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return out;
  };
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  const auto by_ref = [&](std::size_t a, std::size_t b) { return opts[a].option.ref < opts[b].option.ref; };
  std::vector<std::size_t> order;
  if (l1 == 0) {
    order = select_all(idx, by_ref);
  } else {
    const auto first = select_all(idx, [&](std::size_t a, std::size_t b) {
      const double sa = opts[a].score(p1), sb = opts[b].score(p1);
      return sa != sb ? sa > sb : by_ref(a, b);
    });
    std::size_t batch = n;
    if (l1 >= 2) {
      batch = 1;
      while (batch * static_cast<std::size_t>(l1) < n) ++batch;
    }
    std::vector<std::size_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[first[i]] = i;
    std::vector<std::size_t> head(first.begin(), first.begin() + static_cast<std::ptrdiff_t>(batch));
    if (l2 > 0)
      head = select_all(head, [&](std::size_t a, std::size_t b) {
        const double sa = opts[a].score(p2), sb = opts[b].score(p2);
        return sa != sb ? sa > sb : pos[a] < pos[b];
      });
    order = head;
    order.insert(order.end(), first.begin() + static_cast<std::ptrdiff_t>(batch), first.end());
  }
  std::vector<std::string> out;
  for (auto i : order) out.push_back(opts[i].option.ref);
  return out;
}

cfg::scored_option make_option(std::size_t i, double n, double p) {
  cfg::scored_option s;
  s.option.ref = "o" + std::to_string(10 + i);
  s.nutrition_score = n;
  s.preference_score = p;
  return s;
}

outcome cfg_oracle() {
  std::size_t checked = 0, disagree = 0;
  const auto check = [&](const std::vector<cfg::scored_option>& opts) {
    for (int nl = 0; nl <= 5; ++nl)
      for (int pl = 0; pl <= 5; ++pl)
        for (auto tie : {cfg::factor::nutrition, cfg::factor::preference}) {
          cfg::cfg_settings s;
          s.nutrition_level = nl;
          s.preference_level = pl;
          s.tie_break_first = tie;
          ++checked;
          if (cfg::cfg_rank(opts, s).refs() != reference_rank(opts, nl, pl, tie)) ++disagree;
        }
  };
  // Sizes 1..5: every assignment of scores from {0, 1, 2} to both factors,
  // which covers all tie patterns.
  for (std::size_t n = 1; n <= 5; ++n) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 9;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<cfg::scored_option> opts;
      std::size_t c = code;
      for (std::size_t i = 0; i < n; ++i, c /= 9) opts.push_back(make_option(i, static_cast<double>(c % 9 / 3), static_cast<double>(c % 3)));
      check(opts);
    }
  }
  // Sizes 6..8: all joint orderings of distinct scores. Nutrition is fixed
  // to the identity order; permuting preference covers every configuration
  // up to relabelling. Refs are permuted alongside to exercise input order.
  for (std::size_t n = 6; n <= 8; ++n) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    do {
      std::vector<cfg::scored_option> opts;
      for (std::size_t i = 0; i < n; ++i) opts.push_back(make_option(perm[(i + 3) % n], static_cast<double>(i), static_cast<double>(perm[i])));
      check(opts);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  // 10,000 random n=20 lists with coarse scores so ties are frequent.
  rng r(2024);
  for (int t = 0; t < 10000; ++t) {
    std::vector<cfg::scored_option> opts;
    for (std::size_t i = 0; i < 20; ++i) opts.push_back(make_option(i, static_cast<double>(r.below(6)), std::round(r.uniform() * 40.0) / 4.0));
    for (std::size_t i = opts.size() - 1; i > 0; --i) std::swap(opts[i], opts[r.below(i + 1)]);
    const int nl = static_cast<int>(r.below(6)), pl = static_cast<int>(r.below(6));
    const auto tie = r.bernoulli(0.5) ? cfg::factor::nutrition : cfg::factor::preference;
    cfg::cfg_settings s;
    s.nutrition_level = nl;
    s.preference_level = pl;
    s.tie_break_first = tie;
    ++checked;
    if (cfg::cfg_rank(opts, s).refs() != reference_rank(opts, nl, pl, tie)) ++disagree;
  }
  return {disagree == 0, std::to_string(checked) + " rankings, " + std::to_string(disagree) + " disagreements"};
}

// ---------------------------------------------------------------------------
// 7. batch-division law
// ---------------------------------------------------------------------------

outcome batch_law() {
  std::vector<cfg::scored_option> twenty, nine;
  for (std::size_t i = 0; i < 20; ++i) twenty.push_back(make_option(i, static_cast<double>(i), static_cast<double>(20 - i)));
  for (std::size_t i = 0; i < 9; ++i) nine.push_back(make_option(i, static_cast<double>(i), static_cast<double>(9 - i)));
  cfg::cfg_settings two, three;
  two.nutrition_level = 2;
  two.preference_level = 1;
  three.nutrition_level = 1;
  three.preference_level = 3;
  const auto a = cfg::cfg_rank(twenty, two).batch, b = cfg::cfg_rank(nine, three).batch;
  const bool ok = a == 10 && b == 3 && cfg::batch_size(20, 2) == 10 && cfg::batch_size(9, 3) == 3;
  return {ok, "n=20 level 2 -> " + std::to_string(a) + ", n=9 level 3 -> " + std::to_string(b)};
}

// ---------------------------------------------------------------------------
// 8. restriction soundness
// ---------------------------------------------------------------------------

outcome restriction_soundness() {
  std::string d;
  bool ok = true;
  for (const char* file : {"settings/a_meat.json", "settings/b_nut.json"}) {
    const auto settings = cfg::settings_from_json(io::read_json(test::data_dir() / file));
    const auto em = cfg::emit_counterfactuals(test::default_stream(), test::dataset(), settings, 10000, 99);
    std::size_t leaks = 0, inspected = 0;
    std::vector<std::string> terms;
    for (const auto& t : settings.restriction_list) terms.push_back(wfa::lower(t));
    const auto leaked = [&](const std::vector<std::string>& ings) {
      for (const auto& ing : ings) {
        const auto name = wfa::lower(ing);
        for (const auto& t : terms)
          if (name.find(t) != std::string::npos) return true;
      }
      return false;
    };
    for (const auto& smp : em.samples) {
      for (const auto& o : smp.options) {
        ++inspected;
        leaks += leaked(test::dataset().at(o.ref).ingredients);
      }
      for (const auto& so : smp.ranked) leaks += leaked(so.option.ingredients);
      leaks += leaked(test::dataset().at(smp.target).ingredients);
    }
    ok = ok && leaks == 0 && em.samples.size() + em.skipped_all_restricted == 10000;
    d += settings.name + ": " + std::to_string(em.samples.size()) + " samples, " + std::to_string(inspected) +
         " options, " + std::to_string(leaks) + " leaks; ";
  }
  return {ok, d};
}

// ---------------------------------------------------------------------------
// 9. event-mining recovery and null false-support rate
// ---------------------------------------------------------------------------

lifestyle_profile mining_profile(double heavy_weight) {
  auto p = test::flat_profile("user1");
  for (auto t : {temperature_level::cool, temperature_level::mild, temperature_level::hot})
    for (auto m : all_meal_types) p.effects[context_cell(stress_level::high, t, m)].heavy = heavy_weight;
  return p;
}

outcome mining_recovery() {
  const auto pattern = harness::stress_dinner_pattern();
  mining::verify_options opts;
  opts.alpha = 0.05;
  opts.dataset = &test::dataset();
  const auto count = [&](double w, std::uint64_t seeds) {
    const auto p = mining_profile(w);
    int n = 0;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
      const auto r = mining::verify_hypothesis(generate({p}, 500, test::dataset(), seed), pattern, 10, opts);
      n += r.overall == mining::verdict::supported && r.combined_p < 0.05 && r.direction > 0;
    }
    return n;
  };
  const int planted = count(3.0, 20);
  const int null_support = count(1.0, 100);
  const bool ok = planted >= 18 && null_support <= 7;
  return {ok, "planted supported " + std::to_string(planted) + "/20, null supported " + std::to_string(null_support) + "/100"};
}

// ---------------------------------------------------------------------------
// 10. WFA queries vs full scan
// ---------------------------------------------------------------------------

namespace scan {

using namespace pfmlab::wfa;

bool has(const std::vector<std::string>& v, const std::string& x) { return std::find(v.begin(), v.end(), x) != v.end(); }

bool denied(const atlas_store& s, const entity& food, const std::vector<std::string>& deny) {
  for (const auto& gid : food.links("Ingredient")) {
    const auto name = lower(s.at(entity_class::ingredient, gid).name());
    for (const auto& d : deny)
      if (name.find(lower(d)) != std::string::npos) return true;
  }
  return false;
}

bool diets_ok(const entity& e, const std::vector<std::string>& diets) {
  std::vector<std::string> have;
  for (const auto& t : tag_values(e.attributes, "Suitable for Diet")) have.push_back(lower(t));
  for (const auto& d : diets)
    if (!has(have, lower(d))) return false;
  return true;
}

std::set<std::string> effects_of(const atlas_store& s, const entity& food, bool is_ingredient) {
  std::set<std::string> out;
  std::vector<const entity*> ings;
  if (is_ingredient) {
    ings.push_back(&food);
  } else {
    for (const auto& h : food.links("Health Effect")) out.insert(h);
    for (const auto& gid : food.links("Ingredient")) ings.push_back(&s.at(entity_class::ingredient, gid));
  }
  for (const entity* g : ings) {
    for (const auto& h : g->links("Health Effect")) out.insert(h);
    for (const auto& c : g->links("Compound"))
      for (const auto& h : s.at(entity_class::compound, c).links("Health Effect")) out.insert(h);
  }
  return out;
}

std::set<std::string> tags_of(const atlas_store& s, const std::set<std::string>& he_ids) {
  std::set<std::string> out;
  for (const auto& id : he_ids)
    for (const auto& [k, v] : s.at(entity_class::health_effect, id).attributes.items())
      if (has(health_effect_vocabulary(), k) && !v.is_null() && !(v.is_string() && v.get<std::string>().empty()))
        out.insert(k);
  return out;
}

std::vector<food_hit> food_by_effect(const atlas_store& s, const std::string& tag, const context_vector& ctx) {
  std::vector<food_hit> out;
  const std::vector<std::tuple<entity_class, entity_class, std::string>> routes{
      {entity_class::menu_item, entity_class::eatery, "Menu Item"},
      {entity_class::food_item, entity_class::store, "Food Item"},
      {entity_class::dietary_supplement, entity_class::store, "Dietary Supplement"}};
  for (const auto& [food_cls, venue_cls, field] : routes) {
    std::map<std::string, food_hit> best;
    for (const entity* v : s.all(venue_cls)) {
      const double d = geo::haversine_km(ctx.location, *v->location);
      if (d > ctx.radius_km) continue;
      for (const auto& fid : v->links(field)) {
        auto it = best.find(fid);
        if (it == best.end() || d < it->second.distance_km || (d == it->second.distance_km && v->id < it->second.venue_id))
          best[fid] = food_hit{food_cls, fid, v->id, d};
      }
    }
    for (const auto& [fid, h] : best) {
      const entity& f = s.at(food_cls, fid);
      if (denied(s, f, ctx.deny_ingredients) || !diets_ok(f, ctx.suitable_for_diet)) continue;
      if (tags_of(s, effects_of(s, f, false)).count(tag)) out.push_back(h);
    }
  }
  std::sort(out.begin(), out.end(), [](const food_hit& a, const food_hit& b) {
    if (a.distance_km != b.distance_km) return a.distance_km < b.distance_km;
    if (a.cls != b.cls) return static_cast<int>(a.cls) < static_cast<int>(b.cls);
    return a.id < b.id;
  });
  return out;
}

bool meets(const atlas_store& s, const entity& e, const requirement_vector& r) {
  if (denied(s, e, r.exclude_ingredients) || !diets_ok(e, r.suitable_for_diet)) return false;
  if (r.max_nutrients.empty()) return true;
  const auto ids = e.links("Nutrition");
  if (ids.empty()) return false;
  const json& n = s.at(entity_class::nutrition, ids.front()).attributes;
  for (const auto& [k, bound] : r.max_nutrients)
    if (!n.contains(k) || !n[k].is_number() || n[k].get<double>() > bound) return false;
  return true;
}

std::vector<eatery_hit> eateries(const atlas_store& s, const requirement_vector& r, const context_vector& ctx) {
  std::vector<eatery_hit> out;
  for (const entity* e : s.all(entity_class::eatery)) {
    const double d = geo::haversine_km(ctx.location, *e->location);
    if (d > ctx.radius_km) continue;
    std::set<std::string> items;
    for (const auto& mid : e->links("Menu Item")) {
      const entity& m = s.at(entity_class::menu_item, mid);
      if (meets(s, m, r) && !denied(s, m, ctx.deny_ingredients) && diets_ok(m, ctx.suitable_for_diet)) items.insert(mid);
    }
    if (!items.empty()) out.push_back({e->id, d, {items.begin(), items.end()}});
  }
  std::sort(out.begin(), out.end(), [](const eatery_hit& a, const eatery_hit& b) {
    return a.distance_km != b.distance_km ? a.distance_km < b.distance_km : a.id < b.id;
  });
  return out;
}

}  // namespace scan

template <typename T>
std::vector<std::string> ids_of(const std::vector<T>& hits) {
  std::vector<std::string> out;
  for (const auto& h : hits) out.push_back(h.id);
  return out;
}

outcome wfa_full_scan() {
  using namespace pfmlab::wfa;
  atlas_store s;
  const auto rej = s.ingest(synthetic_atlas(101));
  if (!rej.empty() || s.size() != 500) return {false, "synthetic atlas did not ingest cleanly"};
  const synthetic_atlas_config base;
  const auto& names = synthetic_ingredient_names();
  const auto& diets = synthetic_diet_tags();
  rng r(55);
  std::size_t mismatch[4] = {0, 0, 0, 0};
  std::size_t nonempty[4] = {0, 0, 0, 0};
  const std::vector<entity_class> food_classes{entity_class::menu_item, entity_class::food_item,
                                               entity_class::dietary_supplement, entity_class::recipe,
                                               entity_class::ingredient};
  for (int probe = 0; probe < 100; ++probe) {
    context_vector ctx;
    ctx.location = geo::destination(base.center, r.uniform(0.0, 360.0), r.uniform(0.0, 30.0));
    ctx.radius_km = r.uniform(1.0, 15.0);
    for (std::size_t k = r.below(3); k > 0; --k) ctx.deny_ingredients.push_back(names[r.below(names.size())]);
    if (r.bernoulli(0.3)) ctx.suitable_for_diet.push_back(diets[r.below(diets.size())]);
    requirement_vector req;
    for (std::size_t k = r.below(3); k > 0; --k) req.exclude_ingredients.push_back(names[r.below(names.size())]);
    if (r.bernoulli(0.5)) req.max_nutrients["Calories"] = r.uniform(300.0, 900.0);
    if (r.bernoulli(0.3)) req.max_nutrients["Sugar"] = r.uniform(5.0, 40.0);
    if (r.bernoulli(0.3)) req.suitable_for_diet.push_back(diets[r.below(diets.size())]);

    const std::string tag = health_effect_vocabulary()[r.below(health_effect_vocabulary().size())];
    const auto got1 = query_food_by_effect(s, tag, ctx);
    const auto want1 = scan::food_by_effect(s, tag, ctx);
    bool same = got1.size() == want1.size();
    for (std::size_t i = 0; same && i < got1.size(); ++i)
      same = got1[i].cls == want1[i].cls && got1[i].id == want1[i].id && got1[i].venue_id == want1[i].venue_id &&
             std::fabs(got1[i].distance_km - want1[i].distance_km) < 1e-9;
    mismatch[0] += !same;
    nonempty[0] += !want1.empty();

    const auto cls = food_classes[r.below(food_classes.size())];
    const auto pool = s.all(cls);
    const entity& food = *pool[r.below(pool.size())];
    const auto got2 = query_effect_by_food(s, cls, food.id, ctx);
    const auto ids = scan::effects_of(s, food, cls == entity_class::ingredient);
    const auto tags = scan::tags_of(s, ids);
    mismatch[1] += std::set<std::string>(got2.health_effect_ids.begin(), got2.health_effect_ids.end()) != ids ||
                   std::set<std::string>(got2.tags.begin(), got2.tags.end()) != tags ||
                   got2.health_effect_ids.size() != ids.size();
    nonempty[1] += !ids.empty();

    std::vector<std::string> want3;
    for (const entity* rc : s.all(entity_class::recipe))
      if (scan::meets(s, *rc, req)) want3.push_back(rc->id);
    mismatch[2] += query_recipes_by_requirements(s, req) != want3;
    nonempty[2] += !want3.empty();

    const auto got4 = query_eateries(s, req, ctx);
    auto sorted4 = got4;
    std::sort(sorted4.begin(), sorted4.end(), [](const eatery_hit& a, const eatery_hit& b) {
      return a.distance_km != b.distance_km ? a.distance_km < b.distance_km : a.id < b.id;
    });
    const auto want4 = scan::eateries(s, req, ctx);
    bool same4 = sorted4.size() == want4.size();
    for (std::size_t i = 0; same4 && i < want4.size(); ++i)
      same4 = sorted4[i].id == want4[i].id && sorted4[i].menu_items == want4[i].menu_items &&
              std::fabs(sorted4[i].distance_km - want4[i].distance_km) < 1e-9;
    mismatch[3] += !same4;
    nonempty[3] += !want4.empty();
  }
  const bool ok = mismatch[0] + mismatch[1] + mismatch[2] + mismatch[3] == 0;
  std::ostringstream d;
  d << "100 probes; mismatches food_by_effect=" << mismatch[0] << " effect_by_food=" << mismatch[1]
    << " recipes=" << mismatch[2] << " eateries=" << mismatch[3] << "; non-empty oracle answers " << nonempty[0] << "/"
    << nonempty[1] << "/" << nonempty[2] << "/" << nonempty[3];
  return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// 11. cfg_eval sanity
// ---------------------------------------------------------------------------

outcome cfg_eval_sanity() {
  const auto classes = harness::load_settings([] {
    std::vector<fs::path> files;
    for (const auto& f : harness::default_settings_files()) files.push_back(test::data_dir() / f);
    return files;
  }());
  const auto report = harness::cfg_eval(test::default_stream(), test::dataset(), classes, 42);
  bool ok = report.classes.size() == 4;
  std::string d;
  for (const auto& c : report.classes) {
    const auto& o = c.score("oracle");
    const auto& nn = c.score("nearest_neighbor");
    const auto& rnd = c.score("random");
    ok = ok && o.deviation == 0.0 && o.error_rate == 0.0 && nn.deviation < rnd.deviation && c.n_test >= 500;
    d += c.settings_class + " nn " + fmt(nn.deviation, 2) + " < random " + fmt(rnd.deviation, 2) + " (oracle " +
         fmt(o.deviation, 0) + "/" + fmt(o.error_rate, 0) + "); ";
  }
  // Random backend on 10,000 unrestricted 20-option queries.
  const auto unrestricted = cfg::settings_from_json(io::read_json(test::data_dir() / "settings/nutrition_heavy.json"));
  const auto em = cfg::emit_counterfactuals(test::default_stream(), test::dataset(), unrestricted, 10000, 7);
  bool all20 = em.samples.size() == 10000;
  for (const auto& q : em.samples) all20 = all20 && q.options.size() == 20;
  const auto rnd = harness::score_backend(cfg::random_backend(11), em.samples);
  ok = ok && all20 && std::fabs(rnd.deviation - 9.5) <= 0.5 && std::fabs(rnd.error_rate - 0.95) <= 0.02;
  d += "random over 10000 x 20 options: deviation " + fmt(rnd.deviation) + ", error " + fmt(rnd.error_rate);
  return {ok, d};
}

// ---------------------------------------------------------------------------
// 12. CLI determinism
// ---------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + PFMLAB_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

outcome cli_determinism() {
  test::temp_dir dir("accept_cli");
  std::string d;
  bool ok = true;
  for (const auto& exp : harness::experiment_names()) {
    std::vector<std::map<std::string, std::string>> outputs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = dir.path / (exp + "_" + std::to_string(rep));
      if (run_cli("--seed 42 --out \"" + out.string() + "\" run " + exp, dir.path / "log.txt") != 0) {
        ok = false;
        d += exp + " exited non-zero; ";
        break;
      }
      const json manifest = io::read_json(out / "manifest.json");
      std::map<std::string, std::string> files;
      for (const auto& [name, _] : manifest["metric_files"].items()) files[name] = io::read_text(out / name);
      outputs.push_back(std::move(files));
    }
    if (outputs.size() != 2) continue;
    const bool same = !outputs[0].empty() && outputs[0] == outputs[1];
    ok = ok && same;
    d += exp + (same ? " identical" : " DIFFERS") + " (" + std::to_string(outputs[0].size()) + " files); ";
  }
  // The raw stream from `gen` as well.
  std::string streams[2];
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path out = dir.path / ("gen_" + std::to_string(rep));
    ok = ok && run_cli("--seed 42 --out \"" + out.string() + "\" gen --days 200", dir.path / "log.txt") == 0;
    if (fs::exists(out / "stream.jsonl")) streams[rep] = io::read_text(out / "stream.jsonl");
  }
  const bool gen_same = !streams[0].empty() && streams[0] == streams[1];
  ok = ok && gen_same;
  d += std::string("gen stream ") + (gen_same ? "identical" : "DIFFERS");
  return {ok, d};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<outcome()>>> criteria{
      {"dataset scale", dataset_scale},
      {"taste dataset structure", taste_structure},
      {"RQ1 bins equal groupby means", rq1_groupby},
      {"RQ2 context beats no-context", rq2_property},
      {"RQ3 volume curve", rq3_property},
      {"CFG brute-force equivalence", cfg_oracle},
      {"batch-division law", batch_law},
      {"restriction soundness", restriction_soundness},
      {"event-mining recovery", mining_recovery},
      {"WFA queries vs full scan", wfa_full_scan},
      {"cfg_eval sanity", cfg_eval_sanity},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << (i + 1) << " [" << criteria[i].first << "] "
              << o.detail << "  (" << fmt(seconds_since(t0), 1) << " s)" << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failed ? 1 : 0;
}
