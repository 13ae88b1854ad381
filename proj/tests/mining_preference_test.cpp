#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pfmlab/event_mining.hpp"
#include "pfmlab/personal_vector.hpp"
#include "pfmlab/preference_model.hpp"
#include "support.hpp"

using namespace pfmlab;
using namespace pfmlab::mining;

namespace {

template <typename F>
errc code_of(F&& f) {
  try {
    f();
  } catch (const error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a pfmlab::error";
  return errc::io_failure;
}

lifelog_event make_event(const std::string& person, event_kind kind, timestamp t, const std::string& id) {
  lifelog_event e;
  e.event_id = id;
  e.person_id = person;
  e.kind = kind;
  e.start = e.end = t;
  return e;
}

lifelog_event make_meal(const std::string& person, timestamp t, const dish& d, const std::string& id) {
  auto e = make_event(person, event_kind::meal, t, id);
  e.meal = d.meal;
  e.informational.dish_id = d.dish_id;
  e.informational.servings = 1.0;
  e.informational.facts = d.facts;
  return e;
}

mining_unit unit(const std::string& id, std::map<std::string, field_value> c) {
  mining_unit u;
  u.id = id;
  u.confounders = std::move(c);
  return u;
}

// Raw JSONL records with the context fields needed by the oracles, parsed
// without going through the library's stream reader.
struct raw_meal {
  std::string person, date, dish, meal;
  std::string stress, temperature;
  timestamp start = 0;
  json nutrition;
};

std::vector<raw_meal> raw_meals(const std::string& jsonl) {
  std::map<std::pair<std::string, std::string>, std::string> stress, temp;
  std::vector<json> rows = io::parse_jsonl(jsonl);
  static const char* stress_names[] = {"low", "medium", "high"};
  for (const auto& j : rows) {
    const std::string kind = j["kind"], start = j["temporal"]["start"];
    const auto key = std::pair{j["person_id"].get<std::string>(), start.substr(0, 10)};
    if (kind == "stress_report") stress[key] = stress_names[static_cast<int>(j["informational"]["metrics"]["stress_level"].get<double>())];
    if (kind == "weather_report") {
      const double c = j["informational"]["metrics"]["temperature_c"];
      temp[key] = c < 15.0 ? "cool" : (c > 25.0 ? "hot" : "mild");
    }
  }
  std::vector<raw_meal> out;
  for (const auto& j : rows) {
    if (j["kind"] != "meal") continue;
    raw_meal m;
    m.person = j["person_id"];
    const std::string start = j["temporal"]["start"];
    m.date = start.substr(0, 10);
    m.start = parse_timestamp(start);
    m.dish = j["informational"]["dish_id"];
    m.meal = j["structural"]["meal_type"];
    m.stress = stress.at({m.person, m.date});
    m.temperature = temp.at({m.person, m.date});
    m.nutrition = j["informational"]["nutrition"];
    out.push_back(std::move(m));
  }
  return out;
}

const std::vector<raw_meal>& default_raw() {
  static const auto r = raw_meals(stream_to_jsonl(test::default_stream()));
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// hypothesis generation
// ---------------------------------------------------------------------------

TEST(Heatmap, PerfectCooccurrenceHasMaximalLift) {
  event_stream s;
  for (int d = 0; d < 100; ++d) {
    const timestamp t = default_epoch + d * seconds_per_day + 8 * 3600;
    s.events.push_back(make_event("p", event_kind::stress_report, t, "s" + std::to_string(d)));
    s.events.push_back(make_event("p", event_kind::activity, t + 1800, "a" + std::to_string(d)));
    s.events.push_back(make_event("p", event_kind::sleep, t + 10 * 3600, "z" + std::to_string(d)));
  }
  std::sort(s.events.begin(), s.events.end(), event_order);
  const auto preds = kind_predicates({event_kind::stress_report, event_kind::activity, event_kind::sleep});
  const auto h = generate_hypotheses(s, preds, preds, 1.0);
  const auto& row = h.cells[0];  // stress_report
  ASSERT_TRUE(row[1].lift);
  EXPECT_GT(*row[1].lift, 1.0);
  EXPECT_EQ(row[1].count, 100u);
  for (std::size_t j = 0; j < row.size(); ++j)
    if (j != 1 && row[j].lift) {
      EXPECT_LT(*row[j].lift, *row[1].lift);
    }
}

TEST(Heatmap, IndependentPoissonStreamsHaveUnitLift) {
  rng r(77);
  event_stream s;
  const timestamp span = 500 * seconds_per_day;
  std::size_t id = 0;
  for (event_kind k : {event_kind::stress_report, event_kind::activity}) {
    double t = 0.0;
    for (;;) {
      t += r.exponential(4.0 / seconds_per_day);  // four per day
      if (t >= span) break;
      s.events.push_back(make_event("p", k, default_epoch + static_cast<timestamp>(t), "e" + std::to_string(id++)));
    }
  }
  std::sort(s.events.begin(), s.events.end(), event_order);
  const auto h = generate_hypotheses(s, kind_predicates({event_kind::stress_report}), kind_predicates({event_kind::activity}), 6.0);
  ASSERT_TRUE(h.cells[0][0].lift);
  EXPECT_NEAR(*h.cells[0][0].lift, 1.0, 0.1);
}

TEST(Heatmap, EmptyStreamAndZeroLift) {
  EXPECT_EQ(code_of([] { generate_hypotheses(event_stream{}, kind_predicates({event_kind::meal}), kind_predicates({event_kind::meal}), 1.0); }),
            errc::empty_stream);
  event_stream s;
  s.events.push_back(make_event("p", event_kind::activity, default_epoch, "a"));
  const auto h = generate_hypotheses(s, kind_predicates({event_kind::meal}), kind_predicates({event_kind::activity}), 1.0);
  EXPECT_EQ(h.cells[0][0].count, 0u);
  EXPECT_FALSE(h.cells[0][0].lift);  // 0/0 is absent, not zero
  EXPECT_NE(heatmap_long_csv(h).find(",,"), std::string::npos);
}

// ---------------------------------------------------------------------------
// context matching
// ---------------------------------------------------------------------------

TEST(MatchContexts, SingleThreeLevelConfounderPartitions) {
  std::vector<mining_unit> units;
  const char* lv[] = {"cool", "mild", "hot"};
  for (int i = 0; i < 30; ++i) units.push_back(unit("u" + std::to_string(i), {{"t", std::string(lv[i % 3])}}));
  const auto g = match_contexts(units, {"t"});
  EXPECT_LE(g.size(), 3u);
  std::set<std::size_t> all;
  std::size_t total = 0;
  for (const auto& c : g) {
    total += c.members.size();
    all.insert(c.members.begin(), c.members.end());
  }
  EXPECT_EQ(total, units.size());
  EXPECT_EQ(all.size(), units.size());
}

TEST(MatchContexts, ProductOfTwoConfounders) {
  std::vector<mining_unit> units;
  const char* lv[] = {"a", "b", "c"};
  for (int i = 0; i < 90; ++i)
    units.push_back(unit("u" + std::to_string(i), {{"x", std::string(lv[i % 3])}, {"y", std::string(lv[(i / 3) % 3])}}));
  const auto g = match_contexts(units, {"x", "y"});
  EXPECT_EQ(g.size(), 9u);
  for (const auto& c : g) {
    EXPECT_NE(c.key.find("x="), std::string::npos);
    EXPECT_NE(c.key.find("|y="), std::string::npos);
  }
}

TEST(MatchContexts, TercilesOfContinuousConfounder) {
  rng r(12);
  std::vector<mining_unit> units;
  for (int i = 0; i < 300; ++i) units.push_back(unit("u" + std::to_string(i), {{"temp", r.normal(20.0, 5.0)}}));
  const auto g = match_contexts(units, {"temp"});
  ASSERT_EQ(g.size(), 3u);
  for (const auto& c : g) EXPECT_NEAR(static_cast<double>(c.members.size()), 100.0, 1.0);
}

TEST(MatchContexts, MissingConfounderNamesUnitAndVariable) {
  std::vector<mining_unit> units{unit("u1", {{"t", std::string("hot")}}), unit("u2", {})};
  try {
    match_contexts(units, {"t"});
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::missing_confounder);
    EXPECT_NE(std::string(e.what()).find("u2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("'t'"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// verification
// ---------------------------------------------------------------------------

TEST(Verify, PlantedStressHeavyDinnerOnDefaultStream) {
  const auto s = test::person_stream(test::default_stream(), "user1");
  verify_options opts;
  opts.dataset = &test::dataset();
  const auto r = verify_hypothesis(s, harness::stress_dinner_pattern(), 10, opts);
  EXPECT_EQ(r.overall, verdict::supported);
  EXPECT_EQ(r.direction, 1);
  EXPECT_EQ(r.test, "two_proportion_z");
  EXPECT_LT(r.combined_p, 0.05);
  for (const auto& g : r.groups) {
    EXPECT_GE(g.p_value, 0.0);
    EXPECT_LE(g.p_value, 1.0);
  }
}

TEST(Verify, GatingAndErrors) {
  const auto s = test::person_stream(test::default_stream(), "user1");
  verify_options opts;
  opts.dataset = &test::dataset();
  const auto gated = verify_hypothesis(s, harness::stress_dinner_pattern(), 100000, opts);
  EXPECT_EQ(gated.overall, verdict::inconclusive);
  for (const auto& g : gated.groups) EXPECT_FALSE(g.adequate);

  EXPECT_EQ(code_of([&] { verify_hypothesis(s, harness::stress_dinner_pattern(), 1, opts); }), errc::invalid_input);
  auto never = harness::stress_dinner_pattern();
  never.input.filters[0].value = std::string("extreme");
  EXPECT_EQ(code_of([&] { verify_hypothesis(s, never, 10, opts); }), errc::no_occurrences);
  auto bad = harness::stress_dinner_pattern();
  bad.window_hours = 0.0;
  EXPECT_EQ(code_of([&] { verify_hypothesis(s, bad, 10, opts); }), errc::invalid_input);
}

TEST(Verify, PatternJsonRoundTrip) {
  const auto p = harness::stress_dinner_pattern();
  const auto back = pattern_from_json(to_json(p));
  EXPECT_EQ(to_json(back), to_json(p));
  EXPECT_EQ(back.input.label(), p.input.label());
}

TEST(Verify, MonotonePowerInEffectWeight) {
  // Recovery count over 20 seeds for weights 1.5, 2, 3 on user1's base
  // profile; at most one inversion allowed.
  std::vector<int> recovered;
  for (double w : {1.5, 2.0, 3.0}) {
    auto p = test::flat_profile("user1");
    for (auto t : {temperature_level::cool, temperature_level::mild, temperature_level::hot})
      for (auto m : all_meal_types) p.effects[context_cell(stress_level::high, t, m)].heavy = w;
    int n = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto s = generate({p}, 500, test::dataset(), seed);
      verify_options opts;
      opts.dataset = &test::dataset();
      const auto r = verify_hypothesis(s, harness::stress_dinner_pattern(), 10, opts);
      n += r.overall == verdict::supported && r.direction > 0;
    }
    recovered.push_back(n);
  }
  int inversions = 0;
  for (std::size_t i = 1; i < recovered.size(); ++i) inversions += recovered[i] < recovered[i - 1];
  EXPECT_LE(inversions, 1) << recovered[0] << " " << recovered[1] << " " << recovered[2];
  EXPECT_GE(recovered.back(), 18) << recovered[0] << " " << recovered[1] << " " << recovered[2];
}

// ---------------------------------------------------------------------------
// preference model
// ---------------------------------------------------------------------------

TEST(Profiles, SingleBinMeanEqualsGlobal) {
  std::vector<meal_record> meals;
  const auto lunches = test::dataset().of_meal(meal_type::lunch);
  for (int i = 0; i < 7; ++i) {
    meal_record m;
    m.dish_id = lunches[static_cast<std::size_t>(i)]->dish_id;
    m.meal = meal_type::lunch;
    m.stress = stress_level::high;
    m.temperature = temperature_level::hot;
    meals.push_back(m);
  }
  const auto p = build_profiles(meals, test::dataset(), context_mode::stress_and_temperature);
  const context_bin b{meal_type::lunch, temperature_level::hot, stress_level::high};
  for (std::size_t d = 0; d < taste_dims; ++d) EXPECT_NEAR(p.bin(b).mean[d], p.global(meal_type::lunch).mean[d], 1e-12);
  EXPECT_EQ(p.bin(b).count, 7u);
  EXPECT_TRUE(p.bin({meal_type::lunch, temperature_level::cool, stress_level::high}).empty());
  EXPECT_EQ(code_of([] { build_profiles(std::vector<meal_record>{}, test::dataset(), context_mode::none); }),
            errc::no_training_data);
}

TEST(Profiles, ArithmeticMeanOfTwoVectors) {
  dish a, b;
  a.dish_id = "a";
  b.dish_id = "b";
  a.taste.v = {2, 0, 0, 0, 0, 0};
  b.taste.v = {0, 2, 0, 0, 0, 0};
  const taste_dataset ds({a, b});
  meal_record ma, mb;
  ma.dish_id = "a";
  mb.dish_id = "b";
  const auto p = build_profiles(std::vector<meal_record>{ma, mb}, ds, context_mode::none);
  EXPECT_EQ(p.bin(ma.bin()).mean.v, (std::array<double, 6>{1, 1, 0, 0, 0, 0}));
}

// Criterion-3 style oracle: bin means recomputed from the raw JSONL.
TEST(Profiles, BinMeansMatchRawGroupby) {
  std::map<std::string, std::pair<std::array<double, 6>, std::size_t>> oracle;
  for (const auto& m : default_raw()) {
    auto& [sum, n] = oracle[m.person + "/" + m.meal + "/" + m.temperature + "/" + m.stress];
    const auto& t = test::dataset().at(m.dish).taste;
    for (std::size_t d = 0; d < 6; ++d) sum[d] += t[d];
    ++n;
  }
  const auto& s = test::default_stream();
  std::size_t checked = 0;
  for (const auto& person : s.persons()) {
    const auto meals = extract_meals(s, person);
    const auto p = build_profiles(meals, test::dataset(), context_mode::stress_and_temperature);
    for (auto meal : all_meal_types)
      for (int t = 0; t < 3; ++t)
        for (int st = 0; st < 3; ++st) {
          const context_bin b{meal, static_cast<temperature_level>(t), static_cast<stress_level>(st)};
          const std::string key = person + "/" + std::string(to_string(meal)) + "/" + std::string(to_string(b.temperature)) +
                                  "/" + std::string(to_string(b.stress));
          const auto it = oracle.find(key);
          const auto& cell = p.bin(b);
          if (it == oracle.end()) {
            EXPECT_TRUE(cell.empty()) << key;
            continue;
          }
          ASSERT_EQ(cell.count, it->second.second) << key;
          for (std::size_t d = 0; d < 6; ++d)
            EXPECT_NEAR(cell.mean[d], it->second.first[d] / static_cast<double>(it->second.second), 1e-9) << key;
          ++checked;
        }
  }
  EXPECT_GT(checked, 100u);
}

TEST(PredictTopK, ExactMatchRanksFirstAndCosineOrder) {
  dish a, b;
  a.dish_id = "a";
  b.dish_id = "b";
  a.taste.v = {2, 0, 0, 0, 0, 0};
  b.taste.v = {0, 1, 0, 0, 0, 0};
  const taste_dataset ds({a, b});
  meal_record m;
  m.dish_id = "a";
  const auto p = build_profiles(std::vector<meal_record>{m}, ds, context_mode::none);
  const std::vector<const dish*> cands{&ds.at("b"), &ds.at("a")};
  const auto r = predict_top_k(p, m.bin(), cands, 2);
  EXPECT_EQ(r.dish_ids, (std::vector<std::string>{"a", "b"}));
  EXPECT_FALSE(r.used_global_fallback);
  EXPECT_EQ(code_of([&] { predict_top_k(p, m.bin(), cands, 0); }), errc::invalid_input);
  EXPECT_EQ(code_of([&] { predict_top_k(p, m.bin(), std::vector<const dish*>{}, 1); }), errc::empty_candidate_set);
}

TEST(PredictTopK, MatchesBruteForceCosineSort) {
  rng r(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<dish> dishes(20);
    for (std::size_t i = 0; i < 20; ++i) {
      dishes[i].dish_id = "d" + std::to_string(100 + i);
      for (auto& x : dishes[i].taste.v) x = static_cast<double>(r.below(6));
      if (dishes[i].taste.is_zero()) dishes[i].taste.v[0] = 1;
    }
    const taste_dataset ds(dishes);
    meal_record m;
    m.dish_id = dishes[r.below(20)].dish_id;
    const auto p = build_profiles(std::vector<meal_record>{m}, ds, context_mode::none);
    std::vector<const dish*> cands;
    for (const auto& d : ds.dishes()) cands.push_back(&d);
    const auto got = predict_top_k(p, m.bin(), cands, 20).dish_ids;

    const auto& target = ds.at(m.dish_id).taste.v;
    std::vector<std::pair<long double, std::string>> ref;
    for (const auto& d : dishes) {
      long double dot = 0, na = 0, nb = 0;
      for (std::size_t k = 0; k < 6; ++k) {
        dot += static_cast<long double>(target[k]) * d.taste.v[k];
        na += static_cast<long double>(target[k]) * target[k];
        nb += static_cast<long double>(d.taste.v[k]) * d.taste.v[k];
      }
      ref.emplace_back(dot / std::sqrt(na * nb), d.dish_id);
    }
    std::sort(ref.begin(), ref.end(), [](const auto& a, const auto& b) {
      if (std::fabs(static_cast<double>(a.first - b.first)) > 1e-12) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(got[i], ref[i].second) << "trial " << trial << " rank " << i;
  }
}

TEST(PredictTopK, ScaleInvariance) {
  const auto& ds = test::dataset();
  const auto meals = extract_meals(test::default_stream(), "user2");
  const auto p = build_profiles(meals, ds, context_mode::stress_and_temperature);
  std::vector<dish> scaled;
  for (const auto& d : ds.dishes()) {
    auto c = d;
    c.taste = c.taste * 3.5;
    scaled.push_back(c);
  }
  const taste_dataset ds2(scaled);
  for (auto m : all_meal_types) {
    const auto a = predict_top_k(p, {m, temperature_level::hot, stress_level::high}, ds.of_meal(m), 20).dish_ids;
    const auto b = predict_top_k(p, {m, temperature_level::hot, stress_level::high}, ds2.of_meal(m), 20).dish_ids;
    EXPECT_EQ(a, b);
  }
}

TEST(PredictTopK, ZeroProfileFallsBackThenUnranked) {
  dish z;
  z.dish_id = "z";
  dish a;
  a.dish_id = "a";
  a.taste.v = {1, 0, 0, 0, 0, 0};
  const taste_dataset ds({z, a});
  meal_record m;
  m.dish_id = "z";
  const auto p = build_profiles(std::vector<meal_record>{m}, ds, context_mode::none);
  const std::vector<const dish*> cands{&ds.at("z"), &ds.at("a")};
  const auto r = predict_top_k(p, m.bin(), cands, 2);
  EXPECT_TRUE(r.used_global_fallback);
  EXPECT_TRUE(r.unranked);
  EXPECT_EQ(r.dish_ids, (std::vector<std::string>{"a", "z"}));
}

TEST(Evaluate, SplitAndBounds) {
  const auto meals = extract_meals(test::default_stream(), "user3");
  const auto r = evaluate(meals, test::dataset(), context_mode::none, 5);
  EXPECT_EQ(r.n_train, static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(meals.size()))));
  EXPECT_EQ(r.n_train + r.n_test, meals.size());
  EXPECT_DOUBLE_EQ(r.accuracy, static_cast<double>(r.hits) / r.n_test);
  EXPECT_LT(meals[r.n_train - 1].start, meals[r.n_train].start);
  EXPECT_DOUBLE_EQ(evaluate(meals, test::dataset(), context_mode::stress_and_temperature, 20).accuracy, 1.0);
  double prev = 0.0;
  for (std::size_t k = 1; k <= 20; ++k) {
    const double acc = evaluate(meals, test::dataset(), context_mode::temperature_only, k).accuracy;
    EXPECT_GE(acc, prev);
    prev = acc;
  }
  EXPECT_EQ(code_of([&] { evaluate(std::span(meals).subspan(0, 9), test::dataset(), context_mode::none); }),
            errc::insufficient_data);
}

TEST(Evaluate, UniqueCosineMaxIsHit) {
  // Training and test meal on the same dish make it the cosine-1 candidate.
  const auto& ds = test::dataset();
  std::vector<meal_record> meals(10);
  for (std::size_t i = 0; i < meals.size(); ++i) {
    meals[i].dish_id = "l03";
    meals[i].meal = meal_type::lunch;
    meals[i].start = static_cast<timestamp>(i);
  }
  const auto r = evaluate(meals, ds, context_mode::none, 1);
  EXPECT_EQ(r.hits, r.n_test);
}

TEST(VolumeSweep, LadderAndFallback) {
  const auto meals = extract_meals(test::default_stream(), "user1");
  const std::vector<context_mode> modes{context_mode::none, context_mode::stress_and_temperature};
  const auto pts = volume_sweep(meals, test::dataset(), default_volume_sizes(), 100, modes);
  ASSERT_EQ(pts.size(), 16u);
  EXPECT_EQ(default_volume_sizes(), (std::vector<std::size_t>{4, 8, 16, 32, 64, 128, 256, 400}));
  for (const auto& p : pts) {
    EXPECT_GE(p.accuracy, 0.0);
    EXPECT_LE(p.accuracy, 1.0);
  }
  // Size 4 leaves most of the 27 bins empty; prediction must still work.
  EXPECT_GT(pts[1].n_test, 0u);
  EXPECT_EQ(code_of([&] { volume_sweep(meals, test::dataset(), {450}, 100, modes); }), errc::insufficient_data);
}

// ---------------------------------------------------------------------------
// personal vectors
// ---------------------------------------------------------------------------

TEST(Biological, EmptyWindowAndSummation) {
  const auto& ds = test::dataset();
  const timestamp day0 = default_epoch + 10 * seconds_per_day;
  event_stream s;
  dish a = ds.at("l01"), b = ds.at("l02");
  a.facts.calories = 500;
  b.facts.calories = 300;
  s.events.push_back(make_meal("p", day0 + 8 * 3600, a, "m1"));
  s.events.push_back(make_meal("p", day0 + 13 * 3600, b, "m2"));

  const auto empty = biological_vector_at(s, "p", day0 + 7 * 3600);
  EXPECT_EQ(empty.window_same_day.meal_count, 0u);
  EXPECT_EQ(empty.window_same_day.intake.calories, 0.0);
  EXPECT_FALSE(empty.window_same_day.biometrics.sleep_score);
  EXPECT_TRUE(to_json(empty)["window_same_day"]["biometrics"]["heart_rate"].is_null());

  const auto v = biological_vector_at(s, "p", day0 + 20 * 3600);
  EXPECT_DOUBLE_EQ(v.window_same_day.intake.calories, 800.0);
  EXPECT_EQ(v.window_3_day.meal_count, 0u);
  const auto next = biological_vector_at(s, "p", day0 + seconds_per_day + 3600);
  EXPECT_DOUBLE_EQ(next.window_3_day.intake.calories, 800.0);
  const auto prev = biological_vector_at(s, "p", day0 + seconds_per_day + 3600, {}, short_window_mode::previous_day);
  EXPECT_DOUBLE_EQ(prev.window_same_day.intake.calories, 800.0);

  EXPECT_EQ(code_of([&] { biological_vector_at(s, "nobody", day0); }), errc::unknown_person);
}

TEST(Biological, ThreeDayWindowMatchesRawRecomputation) {
  const auto& raw = default_raw();
  const auto& s = test::default_stream();
  for (int k = 0; k < 10; ++k) {
    const std::string person = "user" + std::to_string(1 + k % 5);
    const timestamp at = default_epoch + (40 + 37 * k) * seconds_per_day + 15 * 3600;
    const auto v = biological_vector_at(s, person, at);
    // Dates of the three previous days as strings.
    std::set<std::string> dates;
    for (int d = 1; d <= 3; ++d) dates.insert(format_timestamp(at - d * seconds_per_day).substr(0, 10));
    double kcal = 0.0, protein = 0.0;
    std::size_t n = 0;
    for (const auto& m : raw) {
      if (m.person != person || !dates.count(m.date)) continue;
      kcal += m.nutrition["calories"].get<double>();
      protein += m.nutrition["protein"].get<double>();
      ++n;
    }
    EXPECT_EQ(v.window_3_day.meal_count, n);
    EXPECT_NEAR(v.window_3_day.intake.calories, kcal, 1e-9);
    EXPECT_NEAR(v.window_3_day.intake.protein, protein, 1e-9);
    ASSERT_TRUE(v.window_3_day.biometrics.activity_minutes);
    EXPECT_GE(v.window_same_day.window.begin, v.window_3_day.window.end);
  }
}

TEST(Directives, ValidationAndPassthrough) {
  const json j = json::parse(R"([
    {"verb": "limit", "subject": "sugar", "quantity": 25, "units": "g", "source": "dietitian"},
    {"verb": "avoid", "subject": "peanuts", "source": "allergist"}])");
  const auto d = directives_from_json(j);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].verb, directive_verb::limit);
  EXPECT_DOUBLE_EQ(*d[0].quantity, 25.0);
  const auto v = biological_vector_at(test::default_stream(), "user1", default_epoch + 50 * seconds_per_day, d);
  EXPECT_EQ(to_json(v)["directives"], json::array({to_json(d[0]), to_json(d[1])}));
  EXPECT_EQ(code_of([] { directives_from_json(json::parse(R"([{"verb":"limit","subject":"salt","source":"x"}])")); }),
            errc::invalid_input);
  EXPECT_EQ(code_of([] { directives_from_json(json::parse(R"([{"verb":"prefer","subject":"salt","source":"x"}])")); }),
            errc::invalid_input);
}

TEST(Preferential, OnlyTomatoDishes) {
  dish a, b;
  a.dish_id = "a";
  a.ingredients = {"tomato", "basil"};
  b.dish_id = "b";
  b.ingredients = {"tomato", "rice"};
  a.taste.v = {1, 0, 0, 0, 0, 0};
  b.taste.v = {0, 0, 0, 3, 0, 0};
  const taste_dataset ds({a, b});
  event_stream s;
  const timestamp t0 = default_epoch + 100 * seconds_per_day;
  s.events.push_back(make_meal("p", t0, a, "m1"));
  s.events.push_back(make_meal("p", t0 + 3600, b, "m2"));
  const auto v = preferential_vector_at(s, ds, "p", t0 + 7200);
  ASSERT_FALSE(v.window_short.ranking.empty());
  EXPECT_EQ(v.window_short.ranking[0].ingredient_id, "tomato");
  EXPECT_DOUBLE_EQ(v.window_short.ranking[0].affinity, 1.0);
  EXPECT_DOUBLE_EQ(v.window_short.ranking[1].affinity, 0.5);
  EXPECT_EQ(v.window_short.taste_centroid.v, (std::array<double, 6>{0.5, 0, 0, 1.5, 0, 0}));

  const auto e = preferential_vector_at(s, ds, "p", t0 - 100 * seconds_per_day);
  EXPECT_TRUE(e.window_short.empty);
  EXPECT_TRUE(e.window_short.ranking.empty());
  EXPECT_TRUE(e.window_short.taste_centroid.is_zero());
  EXPECT_EQ(code_of([&] { preferential_vector_at(s, ds, "q", t0); }), errc::unknown_person);
}

TEST(Preferential, ThirtyDayRankingMatchesRawTally) {
  const auto& raw = default_raw();
  const auto& s = test::default_stream();
  const auto& ds = test::dataset();
  for (int k = 0; k < 5; ++k) {
    const std::string person = "user" + std::to_string(k + 1);
    const timestamp at = default_epoch + (120 + 50 * k) * seconds_per_day + 12 * 3600 + 17;
    const auto v = preferential_vector_at(s, ds, person, at);
    std::map<std::string, std::size_t> tally;
    std::size_t meals = 0;
    for (const auto& m : raw) {
      if (m.person != person || m.start < at - 30 * seconds_per_day || m.start >= at) continue;
      ++meals;
      for (const auto& ing : ds.at(m.dish).ingredients) ++tally[ing];
    }
    EXPECT_EQ(v.window_short.meal_count, meals);
    ASSERT_EQ(v.window_short.ranking.size(), tally.size());
    std::size_t mx = 0;
    for (const auto& [_, c] : tally) mx = std::max(mx, c);
    for (std::size_t i = 0; i < v.window_short.ranking.size(); ++i) {
      const auto& r = v.window_short.ranking[i];
      EXPECT_EQ(r.count, tally.at(r.ingredient_id));
      EXPECT_DOUBLE_EQ(r.affinity, static_cast<double>(r.count) / static_cast<double>(mx));
      if (i) {
        EXPECT_LE(r.affinity, v.window_short.ranking[i - 1].affinity);
      }
    }
    // Window containment: the long window never counts less.
    for (const auto& r : v.window_short.ranking) {
      const auto it = std::find_if(v.window_long.ranking.begin(), v.window_long.ranking.end(),
                                   [&](const ingredient_affinity& x) { return x.ingredient_id == r.ingredient_id; });
      ASSERT_NE(it, v.window_long.ranking.end());
      EXPECT_GE(it->count, r.count);
    }
  }
}

TEST(Preferential, Presets) {
  EXPECT_EQ(parse_window_preset("habit").short_days, 90);
  EXPECT_EQ(parse_window_preset("cfg-study").short_days, 30);
  EXPECT_EQ(code_of([] { parse_window_preset("weekly"); }), errc::invalid_input);
  const auto v = personal_vector_at(test::default_stream(), test::dataset(), "user2",
                                    default_epoch + 400 * seconds_per_day, {}, habit_preset);
  EXPECT_EQ(v.preferential.window_short.days, 90);
  EXPECT_EQ(v.preferential.window_long.days, 365);
  const json j = to_json(v);
  EXPECT_TRUE(j.contains("biological"));
  EXPECT_EQ(j["preferential"]["window_short"]["days"], 90);
}
