#pragma once

// Event mining: co-occurrence heatmaps for hypothesis generation and
// contextually matched two-sample tests for hypothesis verification.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pfmlab/core/error.hpp"
#include "pfmlab/core/io.hpp"
#include "pfmlab/core/stats.hpp"
#include "pfmlab/lifelog.hpp"
#include "pfmlab/taste_space.hpp"

namespace pfmlab::mining {

using field_value = std::variant<double, std::string>;

inline std::string to_text(const field_value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  std::ostringstream ss;
  ss << std::get<double>(v);
  return ss.str();
}

inline json to_json(const field_value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return std::get<double>(v);
}

inline field_value field_value_from_json(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number()) return j.get<double>();
  if (j.is_boolean()) return j.get<bool>() ? 1.0 : 0.0;
  fail(errc::invalid_input, "filter value must be string, number or bool");
}

/// Resolves named attributes of an event. Recognized names:
///   kind, person_id, meal_type, dish_id, place_tag, enjoyment, companions,
///   nutrient names (calories, protein, ...), any informational metric,
///   context.stress_level / context.temperature_level (strings),
///   context.raw_temperature (number), and, when a taste dataset is given,
///   weight_class, heavy (0/1) and taste.<dimension>.
class field_resolver {
 public:
  field_resolver(const event_stream& stream, const taste_dataset* dataset) : stream_(stream), dataset_(dataset) {}

  static bool is_known(const std::string& name) {
    static const std::set<std::string> fixed = {"kind",       "person_id",  "meal_type",
                                                "dish_id",    "place_tag",  "enjoyment",
                                                "companions", "context.stress_level", "context.temperature_level",
                                                "context.raw_temperature", "weight_class", "heavy",
                                                "stress_level", "temperature_c", "temperature_level",
                                                "sleep_score", "sleep_hours", "activity_minutes",
                                                "heart_rate", "nap_minutes"};
    if (fixed.count(name)) return true;
    if (nutrient_index(name)) return true;
    if (name.rfind("taste.", 0) == 0) return taste_index(name.substr(6)).has_value();
    return false;
  }

  std::optional<field_value> resolve(const lifelog_event& e, const std::string& name) const {
    if (name == "kind") return std::string(to_string(e.kind));
    if (name == "person_id") return e.person_id;
    if (name == "meal_type") return e.meal ? std::optional<field_value>(std::string(to_string(*e.meal))) : std::nullopt;
    if (name == "dish_id") return e.informational.dish_id ? std::optional<field_value>(*e.informational.dish_id) : std::nullopt;
    if (name == "place_tag") return e.spatial ? std::optional<field_value>(e.spatial->place_tag) : std::nullopt;
    if (name == "enjoyment") return e.enjoyment ? std::optional<field_value>(double(*e.enjoyment)) : std::nullopt;
    if (name == "companions") return e.companions ? std::optional<field_value>(double(*e.companions)) : std::nullopt;
    if (name.rfind("context.", 0) == 0) {
      const day_context* c = stream_.context_for(e.person_id, day_index(e.start));
      if (!c) return std::nullopt;
      if (name == "context.stress_level") return std::string(to_string(c->stress));
      if (name == "context.temperature_level") return std::string(to_string(c->temperature));
      if (name == "context.raw_temperature") return c->raw_temperature_c;
      return std::nullopt;
    }
    if (auto idx = nutrient_index(name)) {
      if (!e.informational.facts) return std::nullopt;
      return as_array(*e.informational.facts)[*idx];
    }
    if (name == "weight_class" || name == "heavy" || name.rfind("taste.", 0) == 0) {
      if (!dataset_ || !e.informational.dish_id) return std::nullopt;
      const dish* d = dataset_->find(*e.informational.dish_id);
      if (!d) return std::nullopt;
      if (name == "weight_class") return std::string(to_string(d->weight));
      if (name == "heavy") return d->weight == weight_class::heavy ? 1.0 : 0.0;
      auto t = taste_index(name.substr(6));
      if (!t) return std::nullopt;
      return d->taste[*t];
    }
    if (auto m = e.metric(name)) return *m;
    return std::nullopt;
  }

 private:
  static std::optional<std::size_t> nutrient_index(const std::string& name) {
    for (std::size_t i = 0; i < nutrient_names.size(); ++i)
      if (nutrient_names[i] == name) return i;
    return std::nullopt;
  }

  const event_stream& stream_;
  const taste_dataset* dataset_;
};

enum class compare_op { eq, ne, lt, le, gt, ge };

inline compare_op parse_op(std::string_view s) {
  if (s == "==" || s == "eq") return compare_op::eq;
  if (s == "!=" || s == "ne") return compare_op::ne;
  if (s == "<" || s == "lt") return compare_op::lt;
  if (s == "<=" || s == "le") return compare_op::le;
  if (s == ">" || s == "gt") return compare_op::gt;
  if (s == ">=" || s == "ge") return compare_op::ge;
  fail(errc::invalid_input, "unknown comparison '" + std::string(s) + "'");
}

inline std::string_view to_string(compare_op op) {
  switch (op) {
    case compare_op::eq: return "==";
    case compare_op::ne: return "!=";
    case compare_op::lt: return "<";
    case compare_op::le: return "<=";
    case compare_op::gt: return ">";
    case compare_op::ge: return ">=";
  }
  return "?";
}

struct field_filter {
  std::string field;
  compare_op op = compare_op::eq;
  field_value value;

  bool matches(const field_value& actual) const {
    if (actual.index() != value.index()) return op == compare_op::ne;
    const int c = actual < value ? -1 : (value < actual ? 1 : 0);
    switch (op) {
      case compare_op::eq: return c == 0;
      case compare_op::ne: return c != 0;
      case compare_op::lt: return c < 0;
      case compare_op::le: return c <= 0;
      case compare_op::gt: return c > 0;
      case compare_op::ge: return c >= 0;
    }
    return false;
  }
};

struct event_predicate {
  event_kind kind = event_kind::meal;
  std::vector<field_filter> filters;

  bool matches(const lifelog_event& e, const field_resolver& r) const {
    if (e.kind != kind) return false;
    for (const auto& f : filters) {
      auto v = r.resolve(e, f.field);
      if (!v || !f.matches(*v)) return false;
    }
    return true;
  }

  std::string label() const {
    std::string out(pfmlab::to_string(kind));
    for (const auto& f : filters) out += "[" + f.field + std::string(to_string(f.op)) + to_text(f.value) + "]";
    return out;
  }
};

enum class outcome_scale { automatic, continuous, binary };

struct binning {
  enum class scheme { exact, quantile } kind = scheme::quantile;
  std::size_t bins = 3;
};

struct event_pattern {
  event_predicate input;
  event_predicate outcome;
  double window_hours = 18.0;
  std::vector<std::string> confounders;
  std::string outcome_variable;
  outcome_scale scale = outcome_scale::automatic;
  std::map<std::string, binning> confounder_binning;  // missing entries: exact for strings, terciles for numbers
};

inline void validate(const event_pattern& p) {
  if (!(p.window_hours > 0.0)) fail(errc::invalid_input, "pattern window must be positive");
  if (p.outcome_variable.empty()) fail(errc::invalid_input, "pattern needs an outcome_variable");
  for (const auto* pred : {&p.input, &p.outcome})
    for (const auto& f : pred->filters)
      if (!field_resolver::is_known(f.field)) fail(errc::invalid_input, "unknown field '" + f.field + "'");
  for (const auto& c : p.confounders)
    if (!field_resolver::is_known(c)) fail(errc::invalid_input, "unknown confounder '" + c + "'");
  if (!field_resolver::is_known(p.outcome_variable))
    fail(errc::invalid_input, "unknown outcome variable '" + p.outcome_variable + "'");
}

inline event_predicate predicate_from_json(const json& j) {
  event_predicate p;
  p.kind = parse_event_kind(j.at("kind").get<std::string>());
  for (const auto& f : j.value("filters", json::array()))
    p.filters.push_back({f.at("field").get<std::string>(), parse_op(f.value("op", std::string("=="))),
                         field_value_from_json(f.at("value"))});
  return p;
}

inline json to_json(const event_predicate& p) {
  json filters = json::array();
  for (const auto& f : p.filters) filters.push_back({{"field", f.field}, {"op", to_string(f.op)}, {"value", to_json(f.value)}});
  return json{{"kind", pfmlab::to_string(p.kind)}, {"filters", filters}};
}

inline event_pattern pattern_from_json(const json& j) {
  event_pattern p;
  p.input = predicate_from_json(j.at("input"));
  p.outcome = predicate_from_json(j.at("outcome"));
  p.window_hours = j.value("window_hours", p.window_hours);
  p.confounders = j.value("confounders", std::vector<std::string>{});
  p.outcome_variable = j.at("outcome_variable").get<std::string>();
  const std::string scale = j.value("outcome_scale", std::string("auto"));
  p.scale = scale == "binary" ? outcome_scale::binary : scale == "continuous" ? outcome_scale::continuous : outcome_scale::automatic;
  const json binnings = j.value("binning", json::object());
  for (const auto& [name, b] : binnings.items()) {
    binning bn;
    const std::string kind = b.value("scheme", std::string("quantile"));
    bn.kind = kind == "exact" ? binning::scheme::exact : binning::scheme::quantile;
    bn.bins = b.value("bins", std::size_t{3});
    p.confounder_binning[name] = bn;
  }
  validate(p);
  return p;
}

inline json to_json(const event_pattern& p) {
  json binning_json = json::object();
  for (const auto& [k, b] : p.confounder_binning)
    binning_json[k] = {{"scheme", b.kind == binning::scheme::exact ? "exact" : "quantile"}, {"bins", b.bins}};
  return json{{"input", to_json(p.input)},
              {"outcome", to_json(p.outcome)},
              {"window_hours", p.window_hours},
              {"confounders", p.confounders},
              {"outcome_variable", p.outcome_variable},
              {"outcome_scale", p.scale == outcome_scale::binary ? "binary" : p.scale == outcome_scale::continuous ? "continuous" : "auto"},
              {"binning", binning_json}};
}

// ---- hypothesis generation ---------------------------------------------

struct heatmap_cell {
  std::size_t n_input = 0;
  std::size_t count = 0;
  std::optional<double> frequency;  // count / n_input
  std::optional<double> lift;       // count / expected; absent when 0/0
  double expected = 0.0;
};

struct cooccurrence_heatmap {
  std::vector<std::string> rows;  // input labels
  std::vector<std::string> cols;  // outcome labels
  std::vector<std::vector<heatmap_cell>> cells;
  double window_hours = 0.0;
};

/// For each (input, outcome) pair counts inputs followed by an outcome of the
/// same person within (t, t + window]. The baseline is the expected count if
/// input instants were re-placed uniformly over the person's observed span.
inline cooccurrence_heatmap generate_hypotheses(const event_stream& stream, const std::vector<event_predicate>& inputs,
                                                const std::vector<event_predicate>& outcomes, double window_hours,
                                                const taste_dataset* dataset = nullptr) {
  if (stream.events.empty()) fail(errc::empty_stream, "event stream has no events");
  if (!(window_hours > 0.0)) fail(errc::invalid_input, "window must be positive");
  const timestamp window = static_cast<timestamp>(std::llround(window_hours * 3600.0));
  const field_resolver resolver(stream, dataset);

  struct person_times {
    timestamp first = 0, last = 0;
    std::vector<std::vector<timestamp>> in, out;
  };
  std::map<std::string, person_times> by_person;
  for (const auto& e : stream.events) {
    auto [it, fresh] = by_person.try_emplace(e.person_id);
    auto& pt = it->second;
    if (fresh) {
      pt.first = pt.last = e.start;
      pt.in.resize(inputs.size());
      pt.out.resize(outcomes.size());
    }
    pt.first = std::min(pt.first, e.start);
    pt.last = std::max(pt.last, e.start);
    for (std::size_t i = 0; i < inputs.size(); ++i)
      if (inputs[i].matches(e, resolver)) pt.in[i].push_back(e.start);
    for (std::size_t j = 0; j < outcomes.size(); ++j)
      if (outcomes[j].matches(e, resolver)) pt.out[j].push_back(e.start);
  }

  cooccurrence_heatmap h;
  h.window_hours = window_hours;
  for (const auto& p : inputs) h.rows.push_back(p.label());
  for (const auto& p : outcomes) h.cols.push_back(p.label());
  h.cells.assign(inputs.size(), std::vector<heatmap_cell>(outcomes.size()));

  for (auto& [person, pt] : by_person) {
    for (auto& v : pt.in) std::sort(v.begin(), v.end());
    for (auto& v : pt.out) std::sort(v.begin(), v.end());
    const double span = static_cast<double>(pt.last - pt.first);
    for (std::size_t j = 0; j < outcomes.size(); ++j) {
      // Measure of {t in [first, last] : some outcome lies in (t, t + window]}.
      double covered = 0.0;
      timestamp cursor = pt.first;
      for (timestamp b : pt.out[j]) {
        const timestamp lo = std::max(cursor, b - window);
        const timestamp hi = std::min(b, pt.last);
        if (hi > lo) covered += static_cast<double>(hi - lo);
        cursor = std::max(cursor, b);
      }
      const double rate = span > 0.0 ? covered / span : 0.0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto& cell = h.cells[i][j];
        cell.expected += rate * static_cast<double>(pt.in[i].size());
        for (timestamp a : pt.in[i]) {
          auto it = std::upper_bound(pt.out[j].begin(), pt.out[j].end(), a);
          if (it != pt.out[j].end() && *it <= a + window) ++cell.count;
        }
      }
    }
    for (std::size_t i = 0; i < inputs.size(); ++i)
      for (std::size_t j = 0; j < outcomes.size(); ++j) h.cells[i][j].n_input += pt.in[i].size();
  }
  for (auto& row : h.cells)
    for (auto& c : row) {
      if (c.n_input > 0) c.frequency = static_cast<double>(c.count) / static_cast<double>(c.n_input);
      if (c.expected > 0.0) c.lift = static_cast<double>(c.count) / c.expected;
    }
  return h;
}

inline std::vector<event_predicate> kind_predicates(const std::vector<event_kind>& kinds) {
  std::vector<event_predicate> out;
  for (auto k : kinds) out.push_back({k, {}});
  return out;
}

/// Long format: input,outcome,n_input,count,frequency,lift (absent cells empty).
inline std::string heatmap_long_csv(const cooccurrence_heatmap& h) {
  std::string out = "input,outcome,n_input,count,expected,frequency,lift\n";
  for (std::size_t i = 0; i < h.rows.size(); ++i)
    for (std::size_t j = 0; j < h.cols.size(); ++j) {
      const auto& c = h.cells[i][j];
      out += h.rows[i] + "," + h.cols[j] + "," + std::to_string(c.n_input) + "," + std::to_string(c.count) + "," +
             io::fmt_num(c.expected) + "," + (c.frequency ? io::fmt_num(*c.frequency) : "") + "," +
             (c.lift ? io::fmt_num(*c.lift) : "") + "\n";
    }
  return out;
}

/// Matrix of lift values for plotting.
inline std::string heatmap_matrix_csv(const cooccurrence_heatmap& h) {
  std::string out = "input";
  for (const auto& c : h.cols) out += "," + c;
  out += "\n";
  for (std::size_t i = 0; i < h.rows.size(); ++i) {
    out += h.rows[i];
    for (const auto& c : h.cells[i]) out += "," + (c.lift ? io::fmt_num(*c.lift) : std::string());
    out += "\n";
  }
  return out;
}

// ---- contextual matching -------------------------------------------------

struct mining_unit {
  std::string id;
  std::map<std::string, field_value> confounders;
  bool treated = false;
  double outcome = 0.0;
};

struct context_group {
  std::string key;
  std::vector<std::size_t> members;  // indices into the unit list
};

/// Partitions units by the product of per-confounder levels. String values
/// match exactly; numbers default to tercile bins.
inline std::vector<context_group> match_contexts(const std::vector<mining_unit>& units,
                                                 const std::vector<std::string>& confounders,
                                                 const std::map<std::string, binning>& schemes = {}) {
  const std::size_t n = units.size();
  std::vector<std::string> keys(n);
  for (const auto& name : confounders) {
    for (const auto& u : units)
      if (!u.confounders.count(name)) fail(errc::missing_confounder, "unit " + u.id + " lacks '" + name + "'");
    bool numeric = true;
    for (const auto& u : units)
      if (!std::holds_alternative<double>(u.confounders.at(name))) numeric = false;
    binning scheme;
    if (auto it = schemes.find(name); it != schemes.end()) scheme = it->second;
    else scheme.kind = numeric ? binning::scheme::quantile : binning::scheme::exact;
    if (scheme.kind == binning::scheme::quantile && !numeric)
      fail(errc::invalid_input, "quantile binning needs numeric values for '" + name + "'");

    std::vector<std::string> level(n);
    if (scheme.kind == binning::scheme::exact) {
      for (std::size_t i = 0; i < n; ++i) level[i] = to_text(units[i].confounders.at(name));
    } else {
      const std::size_t q = std::max<std::size_t>(1, scheme.bins);
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::get<double>(units[a].confounders.at(name)) < std::get<double>(units[b].confounders.at(name));
      });
      std::size_t bin = 0;
      for (std::size_t r = 0; r < n; ++r) {
        const double v = std::get<double>(units[order[r]].confounders.at(name));
        const bool tie = r > 0 && v == std::get<double>(units[order[r - 1]].confounders.at(name));
        if (!tie) bin = r * q / n;
        level[order[r]] = "q" + std::to_string(bin + 1) + "/" + std::to_string(q);
      }
    }
    for (std::size_t i = 0; i < n; ++i) keys[i] += (keys[i].empty() ? "" : "|") + name + "=" + level[i];
  }
  std::map<std::string, std::vector<std::size_t>> grouped;
  for (std::size_t i = 0; i < n; ++i) grouped[keys[i].empty() ? "all" : keys[i]].push_back(i);
  std::vector<context_group> out;
  for (auto& [k, m] : grouped) out.push_back({k, std::move(m)});
  return out;
}

// ---- hypothesis verification ---------------------------------------------

enum class verdict { supported, rejected, inconclusive };

inline std::string_view to_string(verdict v) {
  switch (v) {
    case verdict::supported: return "supported";
    case verdict::rejected: return "rejected";
    case verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct group_result {
  std::string key;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  double effect = 0.0;  // treated minus control, in outcome units
  double p_value = 1.0;
  bool adequate = false;
  bool significant = false;
};

struct verified_rule {
  event_pattern pattern;
  std::vector<group_result> groups;
  verdict overall = verdict::inconclusive;
  int direction = 0;  // sign of the supporting effect
  std::string test;   // "welch_t" or "two_proportion_z"
  double alpha = 0.05;
  // Adequate groups pooled by weighted Stouffer (weights sqrt(group size)).
  double combined_effect = 0.0;
  double combined_p = 1.0;
};

struct verify_options {
  double alpha = 0.05;
  bool bonferroni = false;
  const taste_dataset* dataset = nullptr;
};

/// Outcome events matching the pattern become units; a unit is treated when
/// an input event of the same person starts within the window before it.
inline std::vector<mining_unit> build_units(const event_stream& stream, const event_pattern& pattern,
                                            const taste_dataset* dataset) {
  const field_resolver resolver(stream, dataset);
  const timestamp window = static_cast<timestamp>(std::llround(pattern.window_hours * 3600.0));
  std::map<std::string, std::vector<timestamp>> inputs;
  for (const auto& e : stream.events)
    if (pattern.input.matches(e, resolver)) inputs[e.person_id].push_back(e.start);
  for (auto& [p, v] : inputs) std::sort(v.begin(), v.end());

  std::vector<mining_unit> units;
  for (const auto& e : stream.events) {
    if (!pattern.outcome.matches(e, resolver)) continue;
    auto y = resolver.resolve(e, pattern.outcome_variable);
    if (!y || !std::holds_alternative<double>(*y)) continue;
    mining_unit u;
    u.id = e.event_id;
    u.outcome = std::get<double>(*y);
    if (auto it = inputs.find(e.person_id); it != inputs.end()) {
      auto lo = std::lower_bound(it->second.begin(), it->second.end(), e.start - window);
      u.treated = lo != it->second.end() && *lo <= e.start;
    }
    for (const auto& c : pattern.confounders)
      if (auto v = resolver.resolve(e, c)) u.confounders[c] = *v;
    units.push_back(std::move(u));
  }
  return units;
}

inline verified_rule verify_hypothesis(const event_stream& stream, const event_pattern& pattern,
                                       std::size_t min_group_size, const verify_options& opts = {}) {
  validate(pattern);
  if (min_group_size < 2) fail(errc::invalid_input, "min_group_size must be >= 2");
  const auto units = build_units(stream, pattern, opts.dataset);
  const bool any_treated = std::any_of(units.begin(), units.end(), [](const mining_unit& u) { return u.treated; });
  if (!any_treated) fail(errc::no_occurrences, "input pattern " + pattern.input.label() + " never precedes an outcome");

  bool binary = pattern.scale == outcome_scale::binary;
  if (pattern.scale == outcome_scale::automatic)
    binary = std::all_of(units.begin(), units.end(), [](const mining_unit& u) { return u.outcome == 0.0 || u.outcome == 1.0; });

  verified_rule rule;
  rule.pattern = pattern;
  rule.test = binary ? "two_proportion_z" : "welch_t";
  rule.alpha = opts.alpha;

  const auto groups = match_contexts(units, pattern.confounders, pattern.confounder_binning);
  std::size_t adequate = 0;
  for (const auto& g : groups) {
    group_result r;
    r.key = g.key;
    std::vector<double> treated, control;
    for (std::size_t i : g.members) (units[i].treated ? treated : control).push_back(units[i].outcome);
    r.n_treated = treated.size();
    r.n_control = control.size();
    r.adequate = r.n_treated >= min_group_size && r.n_control >= min_group_size;
    if (r.adequate) {
      ++adequate;
      const auto t = binary ? stats::two_proportion_z_test(treated, control) : stats::welch_t_test(treated, control);
      r.effect = t.effect;
      r.p_value = t.p_value;
    } else {
      r.effect = stats::summarize(treated).mean - stats::summarize(control).mean;
    }
    rule.groups.push_back(std::move(r));
  }
  std::vector<double> ps, effects, weights;
  for (const auto& r : rule.groups) {
    if (!r.adequate) continue;
    ps.push_back(r.p_value);
    effects.push_back(r.effect);
    weights.push_back(std::sqrt(static_cast<double>(r.n_treated + r.n_control)));
  }
  if (!ps.empty()) {
    const auto pooled = stats::stouffer(ps, effects, weights);
    rule.combined_effect = pooled.effect;
    rule.combined_p = pooled.p_value;
  }
  const double level = opts.bonferroni && adequate > 0 ? opts.alpha / static_cast<double>(adequate) : opts.alpha;
  std::size_t pos = 0, neg = 0;
  for (auto& r : rule.groups) {
    if (!r.adequate) continue;
    r.significant = r.p_value < level;
    if (r.significant) (r.effect > 0 ? pos : neg) += 1;
  }
  if (adequate == 0) {
    rule.overall = verdict::inconclusive;
  } else if (2 * std::max(pos, neg) >= adequate) {
    rule.overall = verdict::supported;
    rule.direction = pos >= neg ? 1 : -1;
  } else {
    rule.overall = verdict::rejected;
  }
  return rule;
}

inline json to_json(const verified_rule& r) {
  json groups = json::array();
  for (const auto& g : r.groups)
    groups.push_back({{"key", g.key},
                      {"n_treated", g.n_treated},
                      {"n_control", g.n_control},
                      {"effect", g.effect},
                      {"p_value", g.p_value},
                      {"adequate", g.adequate},
                      {"significant", g.significant}});
  return json{{"pattern", to_json(r.pattern)}, {"groups", groups},   {"verdict", to_string(r.overall)},
              {"direction", r.direction},      {"test", r.test},     {"alpha", r.alpha},
              {"combined_effect", r.combined_effect}, {"combined_p", r.combined_p}};
}

}  // namespace pfmlab::mining
