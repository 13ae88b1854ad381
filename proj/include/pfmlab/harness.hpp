#pragma once

// Experiment orchestration: loads inputs, runs one experiment and writes its
// metric files plus a manifest into an output directory.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfmlab/cfg_engine.hpp"
#include "pfmlab/core/error.hpp"
#include "pfmlab/core/fingerprint.hpp"
#include "pfmlab/core/io.hpp"
#include "pfmlab/event_mining.hpp"
#include "pfmlab/lifelog_gen.hpp"
#include "pfmlab/preference_model.hpp"
#include "pfmlab/taste_space.hpp"

#ifndef PFMLAB_VERSION
#define PFMLAB_VERSION "0.0.0"
#endif

namespace pfmlab::harness {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

// PFMLAB_DATA_DIR wins; otherwise the data directory of the source tree the
// binary was built from, if known; otherwise ./data.
inline fs::path data_root() {
  if (const char* env = std::getenv("PFMLAB_DATA_DIR"); env && *env) return env;
#ifdef PFMLAB_SOURCE_DATA_DIR
  return PFMLAB_SOURCE_DATA_DIR;
#else
  return "data";
#endif
}

// Relative paths that do not exist as given are looked up under `root`.
inline fs::path resolve(const fs::path& p, const fs::path& root) {
  if (p.empty() || p.is_absolute() || fs::exists(p)) return p;
  return root / p;
}

inline taste_dataset load_taste_dataset(const fs::path& recipes, const fs::path& molecules) {
  const auto file = recipes_from_json(io::read_json(recipes));
  const auto table = read_molecule_csv_text(io::read_text(molecules));
  return build_taste_dataset(file.recipes, file.assignments, table);
}

inline std::vector<cfg::cfg_settings> load_settings(const std::vector<fs::path>& files) {
  std::vector<cfg::cfg_settings> out;
  for (const auto& f : files) out.push_back(cfg::settings_from_json(io::read_json(f)));
  return out;
}

inline const std::vector<std::string>& default_settings_files() {
  static const std::vector<std::string> v{"settings/a_meat.json", "settings/b_nut.json",
                                          "settings/nutrition_heavy.json", "settings/preference_heavy.json"};
  return v;
}

// ---------------------------------------------------------------------------
// KNN baseline
// ---------------------------------------------------------------------------

// Majority vote over the k nearest training contexts, Euclidean distance on
// standardized features. Vote ties go to the smallest dish id; distance ties
// to the earlier training row.
class knn_baseline {
 public:
  using features = std::array<double, cfg::context_feature_dims>;

  explicit knn_baseline(std::size_t k = 15) : k_(k) {
    if (k_ == 0) fail(errc::invalid_input, "k must be at least 1");
  }

  void fit(std::vector<features> x, std::vector<std::string> y) {
    if (x.size() != y.size()) fail(errc::invalid_input, "feature and label counts differ");
    if (x.empty()) fail(errc::no_training_data, "knn baseline needs training rows");
    z_ = cfg::standardizer<cfg::context_feature_dims>::fit(x);
    x_.clear();
    for (const auto& r : x) x_.push_back(z_.apply(r));
    y_ = std::move(y);
  }

  std::size_t size() const { return x_.size(); }

  std::string predict(const features& q) const { return vote(neighbors(q), nullptr); }

  // Only neighbors whose dish is a candidate vote; the k nearest such
  // neighbors are used. With no candidate ever seen, the smallest id wins.
  std::string predict_among(const features& q, const std::vector<std::string>& candidates) const {
    if (candidates.empty()) fail(errc::empty_options, "no candidates");
    const std::set<std::string> allowed(candidates.begin(), candidates.end());
    const std::string v = vote(neighbors(q), &allowed);
    return v.empty() ? *allowed.begin() : v;
  }

 private:
  std::vector<std::size_t> neighbors(const features& q) const {
    const auto zq = z_.apply(q);
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(x_.size());
    for (std::size_t i = 0; i < x_.size(); ++i) d.emplace_back(cfg::squared_distance(zq, x_[i]), i);
    std::sort(d.begin(), d.end());
    std::vector<std::size_t> out;
    for (const auto& [_, i] : d) out.push_back(i);
    return out;
  }

  std::string vote(const std::vector<std::size_t>& order, const std::set<std::string>* allowed) const {
    std::map<std::string, std::size_t> votes;
    std::size_t used = 0;
    for (std::size_t i : order) {
      if (used == k_) break;
      if (allowed && !allowed->count(y_[i])) continue;
      ++votes[y_[i]];
      ++used;
    }
    std::string best;
    std::size_t best_n = 0;
    for (const auto& [dish, n] : votes)
      if (n > best_n) {
        best = dish;
        best_n = n;
      }
    return best;
  }

  std::size_t k_;
  cfg::standardizer<cfg::context_feature_dims> z_;
  std::vector<features> x_;
  std::vector<std::string> y_;
};

// ---------------------------------------------------------------------------
// CFG evaluation
// ---------------------------------------------------------------------------

struct backend_score {
  std::string backend;
  std::size_t queries = 0;
  double deviation = 0.0;   // mean 0-based CFG rank of the pick
  double error_rate = 0.0;  // share of picks that are not the CFG top choice
};

struct settings_class_report {
  std::string settings_class;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t skipped_all_restricted = 0;
  std::vector<backend_score> scores;

  const backend_score& score(const std::string& backend) const {
    for (const auto& s : scores)
      if (s.backend == backend) return s;
    fail(errc::not_found, "no score for backend '" + backend + "'");
  }
};

struct cfg_eval_report {
  std::vector<settings_class_report> classes;
};

template <typename Pick>
inline backend_score score_picks(const std::string& name, std::span<const cfg::counterfactual_sample> test, Pick pick) {
  backend_score s;
  s.backend = name;
  s.queries = test.size();
  if (test.empty()) return s;
  double dev = 0.0;
  std::size_t err = 0;
  for (const auto& q : test) {
    const std::string p = pick(q);
    std::size_t pos = q.ranked.size();
    for (std::size_t i = 0; i < q.ranked.size(); ++i)
      if (q.ranked[i].option.ref == p) pos = i;
    if (pos == q.ranked.size()) fail(errc::invalid_input, "backend picked '" + p + "', which is not an option");
    dev += static_cast<double>(pos);
    if (pos != 0) ++err;
  }
  s.deviation = dev / static_cast<double>(test.size());
  s.error_rate = static_cast<double>(err) / static_cast<double>(test.size());
  return s;
}

inline backend_score score_backend(const cfg::recommender_backend& b, std::span<const cfg::counterfactual_sample> test) {
  return score_picks(b.name(), test, [&](const cfg::counterfactual_sample& q) { return b.pick(q); });
}

struct cfg_eval_config {
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  std::size_t nn_k = 25;
  std::size_t knn_k = 15;
  cfg::emit_config emit;
};

// Per settings class: emit samples, train on the first n_train, evaluate the
// built-in backend, the KNN baseline and the random and oracle references on
// the remaining n_test.
inline cfg_eval_report cfg_eval(const event_stream& stream, const taste_dataset& ds,
                                const std::vector<cfg::cfg_settings>& classes, std::uint64_t seed,
                                const cfg_eval_config& cfg = {}) {
  cfg_eval_report report;
  for (const auto& settings : classes) {
    const std::uint64_t class_seed = derive_seed(seed, "cfg_eval/" + settings.name, 0);
    const auto em = cfg::emit_counterfactuals(stream, ds, settings, cfg.n_train + cfg.n_test, class_seed, cfg.emit);
    const std::size_t n_train = std::min(cfg.n_train, em.samples.size());
    const std::span<const cfg::counterfactual_sample> all(em.samples);
    const auto train = all.subspan(0, n_train);
    const auto test = all.subspan(n_train);
    if (train.empty() || test.empty())
      fail(errc::insufficient_data, "settings class '" + settings.name + "' produced too few samples");

    settings_class_report r;
    r.settings_class = settings.name;
    r.n_train = train.size();
    r.n_test = test.size();
    r.skipped_all_restricted = em.skipped_all_restricted;

    cfg::nearest_neighbor_backend nn(cfg.nn_k);
    nn.train(train);
    r.scores.push_back(score_backend(nn, test));

    knn_baseline knn(cfg.knn_k);
    std::vector<knn_baseline::features> x;
    std::vector<std::string> y;
    for (const auto& s : train) {
      x.push_back(cfg::context_features(s));
      y.push_back(s.eaten_dish);
    }
    knn.fit(std::move(x), std::move(y));
    r.scores.push_back(score_picks("knn_baseline", test, [&](const cfg::counterfactual_sample& q) {
      std::vector<std::string> refs;
      for (const auto& o : q.options) refs.push_back(o.ref);
      return knn.predict_among(cfg::context_features(q), refs);
    }));

    r.scores.push_back(score_backend(cfg::random_backend(derive_seed(class_seed, "random", 0)), test));
    r.scores.push_back(score_backend(cfg::oracle_backend(settings), test));
    report.classes.push_back(std::move(r));
  }
  return report;
}

inline std::string to_csv(const cfg_eval_report& r) {
  std::string out = "settings_class,backend,queries,deviation,error_rate\n";
  for (const auto& c : r.classes)
    for (const auto& s : c.scores)
      out += c.settings_class + "," + s.backend + "," + std::to_string(s.queries) + "," + io::fmt_num(s.deviation) +
             "," + io::fmt_num(s.error_rate) + "\n";
  return out;
}

inline json to_json(const cfg_eval_report& r) {
  json classes = json::array();
  for (const auto& c : r.classes) {
    json scores = json::array();
    for (const auto& s : c.scores)
      scores.push_back({{"backend", s.backend},
                        {"queries", s.queries},
                        {"deviation", s.deviation},
                        {"error_rate", s.error_rate}});
    classes.push_back({{"settings_class", c.settings_class},
                       {"n_train", c.n_train},
                       {"n_test", c.n_test},
                       {"skipped_all_restricted", c.skipped_all_restricted},
                       {"scores", scores}});
  }
  return json{{"metrics",
               {{"deviation", "mean 0-based position of the backend pick in the CFG-sorted list"},
                {"error_rate", "share of queries where the pick is not the CFG top choice"}}},
              {"classes", classes}};
}

// ---------------------------------------------------------------------------
// Experiment tables
// ---------------------------------------------------------------------------

// One row per person x meal x (temperature, stress) bin, over all meals.
inline std::string rq1_csv(const event_stream& s, const taste_dataset& ds) {
  std::string out = "person_id,meal_type,temperature_level,stress_level,meals";
  for (auto t : taste_names) out += "," + std::string(t);
  out += "\n";
  for (const auto& person : s.persons()) {
    const auto meals = extract_meals(s, person);
    const auto profile = build_profiles(meals, ds, context_mode::stress_and_temperature);
    for (auto m : all_meal_types)
      for (int t = 0; t < 3; ++t)
        for (int st = 0; st < 3; ++st) {
          const context_bin b{m, static_cast<temperature_level>(t), static_cast<stress_level>(st)};
          const auto& cell = profile.bin(b);
          out += person + "," + std::string(to_string(m)) + "," + std::string(to_string(b.temperature)) + "," +
                 std::string(to_string(b.stress)) + "," + std::to_string(cell.count);
          for (double v : cell.mean.v) out += "," + io::fmt_num(v, 9);
          out += "\n";
        }
  }
  return out;
}

inline std::string rq2_csv(const event_stream& s, const taste_dataset& ds, std::size_t k = 5) {
  std::string out = "person_id,mode,top_k,n_train,n_test,hits,accuracy\n";
  for (const auto& person : s.persons()) {
    const auto meals = extract_meals(s, person);
    for (auto mode : all_context_modes) {
      const auto r = evaluate(meals, ds, mode, k);
      out += person + "," + std::string(to_string(mode)) + "," + std::to_string(k) + "," + std::to_string(r.n_train) +
             "," + std::to_string(r.n_test) + "," + std::to_string(r.hits) + "," + io::fmt_num(r.accuracy) + "\n";
    }
  }
  return out;
}

struct rq3_result {
  std::map<std::string, std::vector<volume_point>> per_person;
  std::vector<volume_point> pooled;  // hits and test meals summed over persons
};

inline rq3_result rq3(const event_stream& s, const taste_dataset& ds, std::size_t test_days = 100, std::size_t k = 5,
                      const std::vector<std::size_t>& sizes = default_volume_sizes()) {
  rq3_result r;
  const std::vector<context_mode> modes(all_context_modes.begin(), all_context_modes.end());
  for (const auto& person : s.persons()) {
    const auto meals = extract_meals(s, person);
    auto pts = volume_sweep(meals, ds, sizes, test_days, modes, k);
    if (r.pooled.empty()) {
      r.pooled = pts;
      for (auto& p : r.pooled) p.hits = p.n_test = p.n_train = 0;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      r.pooled[i].hits += pts[i].hits;
      r.pooled[i].n_test += pts[i].n_test;
      r.pooled[i].n_train += pts[i].n_train;
    }
    r.per_person[person] = std::move(pts);
  }
  for (auto& p : r.pooled) p.accuracy = p.n_test ? static_cast<double>(p.hits) / static_cast<double>(p.n_test) : 0.0;
  return r;
}

// Accuracy of `mode` at `size` days on the pooled curve.
inline double pooled_accuracy(const rq3_result& r, std::size_t size, context_mode mode) {
  for (const auto& p : r.pooled)
    if (p.size_days == size && p.mode == mode) return p.accuracy;
  fail(errc::not_found, "no pooled point for size " + std::to_string(size));
}

inline std::string rq3_csv(const rq3_result& r) {
  std::string out = "person_id,size_days,mode,n_train,n_test,hits,accuracy\n";
  const auto rows = [&](const std::string& who, const std::vector<volume_point>& pts) {
    for (const auto& p : pts)
      out += who + "," + std::to_string(p.size_days) + "," + std::string(to_string(p.mode)) + "," +
             std::to_string(p.n_train) + "," + std::to_string(p.n_test) + "," + std::to_string(p.hits) + "," +
             io::fmt_num(p.accuracy) + "\n";
  };
  for (const auto& [person, pts] : r.per_person) rows(person, pts);
  rows("pooled", r.pooled);
  return out;
}

// The stress -> heavier dinner pattern, stratified by temperature level.
inline mining::event_pattern stress_dinner_pattern(double window_hours = 18.0) {
  mining::event_pattern p;
  p.input.kind = event_kind::stress_report;
  p.input.filters.push_back({"context.stress_level", mining::compare_op::eq, std::string("high")});
  p.outcome.kind = event_kind::meal;
  p.outcome.filters.push_back({"meal_type", mining::compare_op::eq, std::string("dinner")});
  p.window_hours = window_hours;
  p.confounders = {"context.temperature_level"};
  p.outcome_variable = "heavy";
  p.scale = mining::outcome_scale::binary;
  return p;
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> v{"rq1", "rq2", "rq3", "cfg_eval", "mine_demo"};
  return v;
}

struct experiment_config {
  std::string experiment = "rq2";
  std::uint64_t seed = 42;
  std::int64_t days = 500;
  fs::path profiles = "profiles.json";
  fs::path recipes = "recipes.json";
  fs::path molecules = "molecules.csv";
  std::vector<fs::path> settings;
  fs::path out = "out";
  json overrides = json::object();
};

inline void validate(const experiment_config& c) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end())
    fail(errc::invalid_input, "unknown experiment '" + c.experiment + "'");
  if (c.days < 1) fail(errc::invalid_input, "days must be >= 1");
  for (const auto& p : {c.profiles, c.recipes, c.molecules})
    if (!fs::exists(p)) fail(errc::invalid_input, "input file not found: " + p.string());
  for (const auto& p : c.settings)
    if (!fs::exists(p)) fail(errc::invalid_input, "settings file not found: " + p.string());
  if (!c.overrides.is_object()) fail(errc::invalid_input, "overrides must be an object");
}

// Fills unset paths from the data root and resolves relative ones.
inline experiment_config with_defaults(experiment_config c, const fs::path& root = data_root()) {
  c.profiles = resolve(c.profiles, root);
  c.recipes = resolve(c.recipes, root);
  c.molecules = resolve(c.molecules, root);
  if (c.settings.empty())
    for (const auto& f : default_settings_files()) c.settings.push_back(f);
  for (auto& s : c.settings) s = resolve(s, root);
  return c;
}

inline experiment_config experiment_from_json(const json& j) {
  experiment_config c;
  c.experiment = j.value("experiment", c.experiment);
  c.seed = j.value("seed", c.seed);
  c.days = j.value("days", c.days);
  if (j.contains("profiles")) c.profiles = j["profiles"].get<std::string>();
  if (j.contains("recipes")) c.recipes = j["recipes"].get<std::string>();
  if (j.contains("molecules")) c.molecules = j["molecules"].get<std::string>();
  if (j.contains("settings"))
    for (const auto& s : j["settings"]) c.settings.push_back(s.get<std::string>());
  if (j.contains("out")) c.out = j["out"].get<std::string>();
  c.overrides = j.value("overrides", json::object());
  return c;
}

inline json to_json(const experiment_config& c) {
  json settings = json::array();
  for (const auto& s : c.settings) settings.push_back(s.filename().string());
  return json{{"experiment", c.experiment},
              {"seed", c.seed},
              {"days", c.days},
              {"profiles", c.profiles.filename().string()},
              {"recipes", c.recipes.filename().string()},
              {"molecules", c.molecules.filename().string()},
              {"settings", settings},
              {"overrides", c.overrides}};
}

struct run_result {
  fs::path out;
  std::vector<std::string> metric_files;  // relative to out
  json manifest;
};

// Runs one experiment. Metric files depend only on the inputs and seed; the
// manifest additionally records wall time.
inline run_result run(const experiment_config& config) {
  validate(config);
  const auto t0 = std::chrono::steady_clock::now();
  const auto ds = load_taste_dataset(config.recipes, config.molecules);
  const auto profiles = profiles_from_json(io::read_json(config.profiles));
  const json& ov = config.overrides;
  const auto opt = [&](const char* key, auto fallback) {
    using T = decltype(fallback);
    return ov.contains(key) ? ov[key].get<T>() : fallback;
  };

  const auto stream = generate(profiles, config.days, ds, config.seed);
  run_result res;
  res.out = config.out;
  fs::create_directories(res.out);
  const auto emit = [&](const std::string& name, const std::string& text) {
    io::write_text(res.out / name, text);
    res.metric_files.push_back(name);
  };

  json summary = json::object();
  if (config.experiment == "rq1") {
    emit("rq1_vectors.csv", rq1_csv(stream, ds));
  } else if (config.experiment == "rq2") {
    emit("rq2_accuracy.csv", rq2_csv(stream, ds, opt("top_k", std::size_t{5})));
  } else if (config.experiment == "rq3") {
    const auto r = rq3(stream, ds, opt("test_days", std::size_t{100}), opt("top_k", std::size_t{5}));
    emit("rq3_curve.csv", rq3_csv(r));
  } else if (config.experiment == "cfg_eval") {
    cfg_eval_config ec;
    ec.n_train = opt("n_train", ec.n_train);
    ec.n_test = opt("n_test", ec.n_test);
    const auto report = cfg_eval(stream, ds, load_settings(config.settings), config.seed, ec);
    emit("cfg_eval.csv", to_csv(report));
    emit("cfg_eval.json", to_json(report).dump(2) + "\n");
  } else if (config.experiment == "mine_demo") {
    std::vector<event_kind> kinds(event_kind_names.size());
    for (std::size_t i = 0; i < kinds.size(); ++i) kinds[i] = static_cast<event_kind>(i);
    const auto preds = mining::kind_predicates(kinds);
    const double window = opt("window_hours", 18.0);
    const auto heat = mining::generate_hypotheses(stream, preds, preds, window, &ds);
    emit("mine_heatmap.csv", mining::heatmap_long_csv(heat));
    json rules = json::array();
    const auto pattern = stress_dinner_pattern(window);
    const std::size_t min_group = opt("min_group_size", std::size_t{10});
    rules.push_back({{"scope", "all"}, {"rule", to_json(mining::verify_hypothesis(stream, pattern, min_group, {0.05, false, &ds}))}});
    for (const auto& person : stream.persons()) {
      event_stream one;
      for (const auto& e : stream.events)
        if (e.person_id == person) one.events.push_back(e);
      for (const auto& dc : stream.day_contexts)
        if (dc.person_id == person) one.day_contexts.push_back(dc);
      json rule;
      try {
        rule = to_json(mining::verify_hypothesis(one, pattern, min_group, {0.05, false, &ds}));
      } catch (const error& e) {
        if (e.code() != errc::no_occurrences) throw;
        rule = {{"verdict", "inconclusive"}, {"reason", e.what()}};
      }
      rules.push_back({{"scope", person}, {"rule", rule}});
    }
    emit("mine_rules.json", rules.dump(2) + "\n");
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json files = json::object();
  for (const auto& f : res.metric_files) files[f] = sha256_hex(io::read_text(res.out / f));
  const json cfg_json = to_json(config);
  json inputs = json::object();
  for (const auto& p : {config.profiles, config.recipes, config.molecules})
    inputs[p.filename().string()] = sha256_hex(io::read_text(p));
  if (config.experiment == "cfg_eval")
    for (const auto& p : config.settings) inputs[p.filename().string()] = sha256_hex(io::read_text(p));
  res.manifest = json{{"experiment", config.experiment},
                      {"seed", config.seed},
                      {"config", cfg_json},
                      {"config_fingerprint", config_fingerprint(cfg_json)},
                      {"stream_fingerprint", stream.config_fingerprint},
                      {"module_versions", {{"pfmlab", PFMLAB_VERSION}}},
                      {"input_files", inputs},
                      {"metric_files", files},
                      {"wall_time_s", wall}};
  io::write_json(res.out / "manifest.json", res.manifest);
  return res;
}

}  // namespace pfmlab::harness
