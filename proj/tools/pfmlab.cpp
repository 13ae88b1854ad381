// pfmlab command line: thin wrappers that read files, call the library and
// write results under --out.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pfmlab/cfg_engine.hpp"
#include "pfmlab/core/error.hpp"
#include "pfmlab/core/io.hpp"
#include "pfmlab/event_mining.hpp"
#include "pfmlab/harness.hpp"
#include "pfmlab/lifelog_gen.hpp"
#include "pfmlab/personal_vector.hpp"
#include "pfmlab/preference_model.hpp"
#include "pfmlab/taste_space.hpp"
#include "pfmlab/wfa/atlas.hpp"
#include "pfmlab/wfa/cre.hpp"
#include "pfmlab/wfa/synthetic.hpp"

namespace fs = std::filesystem;
using namespace pfmlab;
using nlohmann::json;

namespace {

struct globals {
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string config;

  harness::experiment_config base;  // paths from --config and the data root

  std::uint64_t seed_or_default() const { return seed.value_or(base.seed); }
};

fs::path pick(const std::string& flag, const fs::path& fallback) { return flag.empty() ? fallback : fs::path(flag); }

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) fail(errc::invalid_input, std::string(what) + " not found: " + p.string());
}

taste_dataset dataset_from(const globals& g, const std::string& taste_flag, const std::string& molecules_flag) {
  // --taste may name either a built dataset or a recipe file.
  if (!taste_flag.empty()) {
    require_file(taste_flag, "taste file");
    const json j = io::read_json(taste_flag);
    if (j.contains("dishes")) return taste_dataset_from_json(j);
  }
  const fs::path recipes = pick(taste_flag, g.base.recipes);
  const fs::path molecules = pick(molecules_flag, g.base.molecules);
  require_file(recipes, "recipe file");
  require_file(molecules, "molecule table");
  return harness::load_taste_dataset(recipes, molecules);
}

event_stream stream_from(const std::string& path) {
  require_file(path, "stream file");
  return stream_from_jsonl(io::read_text(path));
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

// ---------------------------------------------------------------------------

void add_gen(CLI::App& app, globals& g) {
  auto* cmd = app.add_subcommand("gen", "Generate a synthetic multi-person lifelog");
  auto profiles = std::make_shared<std::string>();
  auto taste = std::make_shared<std::string>();
  auto molecules = std::make_shared<std::string>();
  auto days = std::make_shared<std::int64_t>(0);
  auto threads = std::make_shared<unsigned>(1);
  cmd->add_option("--profiles", *profiles, "Lifestyle profile file");
  cmd->add_option("--days", *days, "Days to simulate (default from --config, else 500)");
  cmd->add_option("--taste", *taste, "Taste dataset or recipe file");
  cmd->add_option("--molecules", *molecules, "Taste-molecule table");
  cmd->add_option("--threads", *threads, "Per-person worker threads")->check(CLI::Range(1u, 64u));
  cmd->callback([&g, profiles, taste, molecules, days, threads] {
    const fs::path pf = pick(*profiles, g.base.profiles);
    require_file(pf, "profile file");
    const auto ds = dataset_from(g, *taste, *molecules);
    const std::int64_t n = *days > 0 ? *days : g.base.days;
    generator_config cfg;
    cfg.threads = *threads;
    const auto stream = generate(profiles_from_json(io::read_json(pf)), n, ds, g.seed_or_default(), cfg);
    io::write_text(fs::path(g.out) / "stream.jsonl", stream_to_jsonl(stream));
    const json manifest = generation_manifest(stream, n);
    io::write_json(fs::path(g.out) / "manifest.json", manifest);
    print(manifest);
  });
}

void add_taste(CLI::App& app, globals& g) {
  auto* cmd = app.add_subcommand("taste", "Build the taste dataset from recipes and a molecule table");
  auto recipes = std::make_shared<std::string>();
  auto molecules = std::make_shared<std::string>();
  cmd->add_option("--recipes", *recipes, "Recipe file");
  cmd->add_option("--molecules", *molecules, "Taste-molecule table");
  cmd->callback([&g, recipes, molecules] {
    const fs::path rf = pick(*recipes, g.base.recipes);
    const fs::path mf = pick(*molecules, g.base.molecules);
    require_file(rf, "recipe file");
    require_file(mf, "molecule table");
    const auto ds = harness::load_taste_dataset(rf, mf);
    io::write_json(fs::path(g.out) / "taste_dataset.json", to_json(ds));
    json counts = json::object();
    for (auto m : all_meal_types) counts[std::string(to_string(m))] = ds.of_meal(m).size();
    print({{"dishes", ds.size()}, {"per_meal", counts}});
  });
}

void add_mine(CLI::App& app, globals& g) {
  auto* cmd = app.add_subcommand("mine", "Event mining");
  cmd->require_subcommand(1);

  auto* gen = cmd->add_subcommand("generate", "Co-occurrence heatmap over event kinds");
  auto stream = std::make_shared<std::string>();
  auto taste = std::make_shared<std::string>();
  auto window = std::make_shared<double>(18.0);
  auto kinds = std::make_shared<std::vector<std::string>>();
  gen->add_option("--stream", *stream, "Event stream (JSON lines)")->required();
  gen->add_option("--taste", *taste, "Taste dataset or recipe file");
  gen->add_option("--window-hours", *window, "Co-occurrence window");
  gen->add_option("--kinds", *kinds, "Event kinds to include (default: all)")->delimiter(',');
  gen->callback([&g, stream, taste, window, kinds] {
    const auto s = stream_from(*stream);
    const auto ds = dataset_from(g, *taste, "");
    std::vector<event_kind> ks;
    if (kinds->empty()) {
      for (std::size_t i = 0; i < event_kind_names.size(); ++i) ks.push_back(static_cast<event_kind>(i));
    } else {
      for (const auto& k : *kinds) ks.push_back(parse_event_kind(k));
    }
    const auto preds = mining::kind_predicates(ks);
    const auto heat = mining::generate_hypotheses(s, preds, preds, *window, &ds);
    io::write_text(fs::path(g.out) / "heatmap.csv", mining::heatmap_long_csv(heat));
    io::write_text(fs::path(g.out) / "heatmap_matrix.csv", mining::heatmap_matrix_csv(heat));
    std::cout << mining::heatmap_matrix_csv(heat);
  });

  auto* ver = cmd->add_subcommand("verify", "Verify one hypothesis with confounder stratification");
  auto vstream = std::make_shared<std::string>();
  auto vtaste = std::make_shared<std::string>();
  auto pattern = std::make_shared<std::string>();
  auto min_group = std::make_shared<std::size_t>(10);
  auto alpha = std::make_shared<double>(0.05);
  ver->add_option("--stream", *vstream, "Event stream (JSON lines)")->required();
  ver->add_option("--pattern", *pattern, "Pattern file")->required();
  ver->add_option("--taste", *vtaste, "Taste dataset or recipe file");
  ver->add_option("--min-group", *min_group, "Minimum treated/control size per stratum");
  ver->add_option("--alpha", *alpha, "Per-stratum significance level")->check(CLI::Range(0.0, 1.0));
  ver->callback([&g, vstream, vtaste, pattern, min_group, alpha] {
    require_file(*pattern, "pattern file");
    const auto s = stream_from(*vstream);
    const auto ds = dataset_from(g, *vtaste, "");
    const auto p = mining::pattern_from_json(io::read_json(*pattern));
    mining::verify_options opts;
    opts.alpha = *alpha;
    opts.dataset = &ds;
    const json r = to_json(mining::verify_hypothesis(s, p, *min_group, opts));
    io::write_json(fs::path(g.out) / "rule.json", r);
    print(r);
  });
}

void add_eval(CLI::App& app, globals& g) {
  auto* cmd = app.add_subcommand("eval", "Contextual preference experiments");
  auto which = std::make_shared<std::string>();
  auto stream = std::make_shared<std::string>();
  auto taste = std::make_shared<std::string>();
  auto k = std::make_shared<std::size_t>(5);
  auto test_days = std::make_shared<std::size_t>(100);
  cmd->add_option("experiment", *which, "rq1, rq2 or rq3")->required()->check(CLI::IsMember({"rq1", "rq2", "rq3"}));
  cmd->add_option("--stream", *stream, "Event stream (JSON lines)")->required();
  cmd->add_option("--taste", *taste, "Taste dataset or recipe file");
  cmd->add_option("--top-k", *k, "Top-k cutoff")->check(CLI::PositiveNumber);
  cmd->add_option("--test-days", *test_days, "Held-out days for rq3")->check(CLI::PositiveNumber);
  cmd->callback([&g, which, stream, taste, k, test_days] {
    const auto s = stream_from(*stream);
    const auto ds = dataset_from(g, *taste, "");
    const fs::path out(g.out);
    if (*which == "rq1") {
      io::write_text(out / "rq1_vectors.csv", harness::rq1_csv(s, ds));
    } else if (*which == "rq2") {
      const auto csv = harness::rq2_csv(s, ds, *k);
      io::write_text(out / "rq2_accuracy.csv", csv);
      std::cout << csv;
    } else {
      const auto r = harness::rq3(s, ds, *test_days, *k);
      io::write_text(out / "rq3_curve.csv", harness::rq3_csv(r));
    }
  });
}

wfa::atlas_store load_atlas(const std::string& dir, bool synthetic, std::uint64_t seed, bool quiet = false) {
  wfa::atlas_store store;
  wfa::record_batch batch;
  if (synthetic) {
    batch = wfa::synthetic_atlas(seed);
  } else {
    if (dir.empty()) fail(errc::invalid_input, "either --atlas <dir> or --synthetic is required");
    if (!fs::is_directory(dir)) fail(errc::invalid_input, "atlas directory not found: " + dir);
    batch = wfa::read_atlas_dir(dir);
  }
  const auto rejected = store.ingest(batch);
  if (!quiet)
    for (const auto& r : rejected) std::cerr << "rejected: " << to_json(r).dump() << "\n";
  return store;
}

void add_atlas(CLI::App& app, globals& g) {
  auto* cmd = app.add_subcommand("atlas", "World Food Atlas store and queries");
  cmd->require_subcommand(1);

  auto* ing = cmd->add_subcommand("ingest", "Validate entity files and write the accepted records");
  auto dir = std::make_shared<std::string>();
  auto synthetic = std::make_shared<bool>(false);
  auto strict = std::make_shared<bool>(false);
  ing->add_option("--atlas", *dir, "Directory of <class>.jsonl files");
  ing->add_flag("--synthetic", *synthetic, "Ingest the seeded synthetic atlas instead");
  ing->add_flag("--strict", *strict, "Exit with status 2 if any record is rejected");
  ing->callback([&g, dir, synthetic, strict] {
    wfa::atlas_store store;
    const auto batch = *synthetic ? wfa::synthetic_atlas(g.seed_or_default()) : [&] {
      if (dir->empty()) fail(errc::invalid_input, "either --atlas <dir> or --synthetic is required");
      if (!fs::is_directory(*dir)) fail(errc::invalid_input, "atlas directory not found: " + *dir);
      return wfa::read_atlas_dir(*dir);
    }();
    const auto rejected = store.ingest(batch);
    const fs::path out = fs::path(g.out) / "atlas";
    wfa::write_atlas_dir(store.export_all(), out);
    std::string lines;
    for (const auto& r : rejected) lines += to_json(r).dump() + "\n";
    io::write_text(fs::path(g.out) / "rejections.jsonl", lines);
    json counts = json::object();
    for (auto c : wfa::all_entity_classes) counts[wfa::to_string(c)] = store.size(c);
    print({{"accepted", store.size()}, {"rejected", rejected.size()}, {"per_class", counts}});
    if (*strict && !rejected.empty()) fail(errc::schema_violation, std::to_string(rejected.size()) + " records rejected");
  });

  auto* q = cmd->add_subcommand("query", "Run one of the four query classes");
  struct query_flags {
    std::string kind, atlas, effect, cls = "MenuItem", id, requirements;
    bool synthetic = false;
    double lat = 0, lon = 0, radius_km = 5.0;
    std::vector<std::string> deny, diet;
  };
  auto f = std::make_shared<query_flags>();
  q->add_option("kind", f->kind, "food-by-effect, effect-by-food, recipes or eateries")
      ->required()
      ->check(CLI::IsMember({"food-by-effect", "effect-by-food", "recipes", "eateries"}));
  q->add_option("--atlas", f->atlas, "Directory of <class>.jsonl files");
  q->add_flag("--synthetic", f->synthetic, "Query the seeded synthetic atlas");
  q->add_option("--effect", f->effect, "Health-effect tag");
  q->add_option("--class", f->cls, "Entity class of --id");
  q->add_option("--id", f->id, "Food entity id");
  q->add_option("--lat", f->lat, "Latitude")->check(CLI::Range(-90.0, 90.0));
  q->add_option("--lon", f->lon, "Longitude")->check(CLI::Range(-180.0, 180.0));
  q->add_option("--radius-km", f->radius_km, "Search radius");
  q->add_option("--deny", f->deny, "Ingredients to avoid")->delimiter(',');
  q->add_option("--diet", f->diet, "Required diet tags")->delimiter(',');
  q->add_option("--requirements", f->requirements, "Requirement vector file");
  q->callback([&g, f] {
    const auto store = load_atlas(f->atlas, f->synthetic, g.seed_or_default(), true);
    wfa::context_vector ctx;
    ctx.location = {f->lat, f->lon};
    ctx.radius_km = f->radius_km;
    ctx.deny_ingredients = f->deny;
    ctx.suitable_for_diet = f->diet;
    wfa::requirement_vector req;
    if (!f->requirements.empty()) {
      require_file(f->requirements, "requirements file");
      req = wfa::requirement_from_json(io::read_json(f->requirements));
    }
    json result = json::array();
    if (f->kind == "food-by-effect") {
      if (f->effect.empty()) fail(errc::invalid_input, "--effect is required");
      for (const auto& h : wfa::query_food_by_effect(store, f->effect, ctx)) result.push_back(wfa::to_json(h));
    } else if (f->kind == "effect-by-food") {
      if (f->id.empty()) fail(errc::invalid_input, "--id is required");
      const auto r = wfa::query_effect_by_food(store, wfa::parse_entity_class(f->cls), f->id, ctx);
      result = {{"health_effect_ids", r.health_effect_ids}, {"tags", r.tags}};
    } else if (f->kind == "recipes") {
      result = wfa::query_recipes_by_requirements(store, req);
    } else {
      for (const auto& h : wfa::query_eateries(store, req, ctx)) result.push_back(wfa::to_json(h));
    }
    io::write_json(fs::path(g.out) / "query.json", result);
    print(result);
  });
}

void add_cfg(CLI::App& app, globals& g) {
  auto* cmd = app.add_subcommand("cfg", "Counterfactual generation");
  cmd->require_subcommand(1);

  auto* rank = cmd->add_subcommand("rank", "Rank one option list");
  auto settings = std::make_shared<std::string>();
  auto personal = std::make_shared<std::string>();
  auto options = std::make_shared<std::string>();
  rank->add_option("--settings", *settings, "Settings file")->required();
  rank->add_option("--personal", *personal, "Personal vector file")->required();
  rank->add_option("--options", *options, "Option list file")->required();
  rank->callback([&g, settings, personal, options] {
    for (const auto* p : {settings.get(), personal.get(), options.get()}) require_file(*p, "input file");
    const auto s = cfg::settings_from_json(io::read_json(*settings));
    const auto pref = cfg::preference_input_from_json(io::read_json(*personal), s.favored_count);
    const auto list = wfa::option_list_from_json(io::read_json(*options));
    const auto kept = cfg::apply_restrictions(list.options, s.restriction_list);
    const json r = to_json(cfg::cfg_rank(cfg::score_options(kept, pref, s), s));
    io::write_json(fs::path(g.out) / "ranked.json", r);
    print(r);
  });

  auto* pv = cmd->add_subcommand("personal", "Personal vector of one person at one instant");
  auto pstream = std::make_shared<std::string>();
  auto ptaste = std::make_shared<std::string>();
  auto person = std::make_shared<std::string>();
  auto at = std::make_shared<std::string>();
  auto directives = std::make_shared<std::string>();
  auto preset = std::make_shared<std::string>("cfg-study");
  auto mode = std::make_shared<std::string>("same_day");
  pv->add_option("--stream", *pstream, "Event stream (JSON lines)")->required();
  pv->add_option("--taste", *ptaste, "Taste dataset or recipe file");
  pv->add_option("--person", *person, "Person id")->required();
  pv->add_option("--at", *at, "Instant, YYYY-MM-DDTHH:MM:SSZ")->required();
  pv->add_option("--directives", *directives, "Directives file");
  pv->add_option("--windows", *preset, "cfg-study or habit");
  pv->add_option("--short-window", *mode, "same_day or previous_day");
  pv->callback([&g, pstream, ptaste, person, at, directives, preset, mode] {
    const auto s = stream_from(*pstream);
    const auto ds = dataset_from(g, *ptaste, "");
    std::vector<directive> dirs;
    if (!directives->empty()) {
      require_file(*directives, "directives file");
      dirs = directives_from_json(io::read_json(*directives));
    }
    const json v = to_json(personal_vector_at(s, ds, *person, parse_timestamp(*at), dirs,
                                              parse_window_preset(*preset), parse_short_window_mode(*mode)));
    io::write_json(fs::path(g.out) / "personal.json", v);
    print(v);
  });

  auto* emit = cmd->add_subcommand("emit", "Emit a counterfactual dataset");
  auto estream = std::make_shared<std::string>();
  auto etaste = std::make_shared<std::string>();
  auto esettings = std::make_shared<std::string>();
  auto n = std::make_shared<std::size_t>(1000);
  auto category = std::make_shared<std::string>();
  auto n_options = std::make_shared<std::size_t>(20);
  const auto add_common = [&](CLI::App* c) {
    c->add_option("--stream", *estream, "Event stream (JSON lines)")->required();
    c->add_option("--taste", *etaste, "Taste dataset or recipe file");
    c->add_option("--settings", *esettings, "Settings file")->required();
    c->add_option("-n,--samples", *n, "Number of samples")->check(CLI::PositiveNumber);
    c->add_option("--options", *n_options, "Options per sample")->check(CLI::PositiveNumber);
  };
  add_common(emit);
  const auto run_emission = [&g, estream, etaste, esettings, n, n_options] {
    require_file(*esettings, "settings file");
    const auto s = stream_from(*estream);
    const auto ds = dataset_from(g, *etaste, "");
    const auto settings = cfg::settings_from_json(io::read_json(*esettings));
    cfg::emit_config ec;
    ec.options = *n_options;
    return std::pair{cfg::emit_counterfactuals(s, ds, settings, *n, g.seed_or_default(), ec), ds};
  };
  emit->callback([&g, run_emission] {
    const auto [em, ds] = run_emission();
    std::string lines;
    for (const auto& smp : em.samples) lines += to_json(smp).dump() + "\n";
    io::write_text(fs::path(g.out) / "counterfactuals.jsonl", lines);
    print({{"samples", em.samples.size()}, {"skipped_all_restricted", em.skipped_all_restricted}});
  });

  auto* tpl = cmd->add_subcommand("templates", "Emit fine-tuning template lines");
  add_common(tpl);
  tpl->add_option("--category", *category, "sequential, star_rating or yes_no")->required();
  tpl->callback([&g, run_emission, category] {
    const auto cat = cfg::parse_template_category(*category);
    const auto [em, ds] = run_emission();
    std::vector<std::string> items, users;
    for (const auto& d : ds.dishes()) items.push_back(d.dish_id);
    std::set<std::string> persons;
    for (const auto& smp : em.samples) persons.insert(smp.person_id);
    users.assign(persons.begin(), persons.end());
    const auto ids = cfg::assign_ids(items, users);
    std::string lines;
    for (const auto& r : cfg::emit_templates(em.samples, cat, ids, wfa::health_effect_vocabulary()))
      lines += cfg::to_line(r) + "\n";
    io::write_text(fs::path(g.out) / ("templates_" + *category + ".tsv"), lines);
    io::write_json(fs::path(g.out) / "ids.json", ids.to_json());
    std::cout << lines.size() << " bytes of templates written\n";
  });
}

void add_run(CLI::App& app, globals& g) {
  auto* cmd = app.add_subcommand("run", "Run one experiment end to end");
  auto experiment = std::make_shared<std::string>();
  auto days = std::make_shared<std::int64_t>(0);
  cmd->add_option("experiment", *experiment, "rq1, rq2, rq3, cfg_eval or mine_demo (default from --config)")
      ->check(CLI::IsMember(harness::experiment_names()));
  cmd->add_option("--days", *days, "Days to simulate");
  cmd->callback([&g, experiment, days] {
    auto c = g.base;
    if (!experiment->empty()) c.experiment = *experiment;
    if (*days > 0) c.days = *days;
    c.seed = g.seed_or_default();
    c.out = g.out;
    const auto r = harness::run(c);
    print(r.manifest);
  });
}

int exit_code_for(const error& e) { return is_validation(e.code()) ? 2 : 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pfmlab: personal food modeling laboratory"};
  app.set_version_flag("--version", PFMLAB_VERSION);
  app.require_subcommand(1);
  globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--config", g.config, "Experiment config file (JSON)");

  add_gen(app, g);
  add_taste(app, g);
  add_mine(app, g);
  add_eval(app, g);
  add_atlas(app, g);
  add_cfg(app, g);
  add_run(app, g);

  // Global options must be resolved before any subcommand callback runs.
  app.parse_complete_callback([&g] {
    json j = json::object();
    if (!g.config.empty()) {
      require_file(g.config, "config file");
      j = io::read_json(g.config);
    }
    const fs::path base_dir = g.config.empty() ? fs::path() : fs::path(g.config).parent_path();
    auto c = harness::experiment_from_json(j);
    if (!g.config.empty() && j.contains("out") && g.out == "out") g.out = c.out.string();
    // Paths in a config file are relative to the file itself when they resolve there.
    for (fs::path* p : {&c.profiles, &c.recipes, &c.molecules})
      if (!p->is_absolute() && fs::exists(base_dir / *p) && !base_dir.empty()) *p = base_dir / *p;
    for (auto& p : c.settings)
      if (!p.is_absolute() && fs::exists(base_dir / p) && !base_dir.empty()) p = base_dir / p;
    g.base = harness::with_defaults(c);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
