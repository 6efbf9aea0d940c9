#include "lrq/cli.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "lrq/censoring.hpp"
#include "lrq/discrete_query.hpp"
#include "lrq/hitting_est.hpp"
#include "lrq/mtpp_query.hpp"
#include "lrq/spec_io.hpp"

namespace lrq::cli {

namespace fs = std::filesystem;
using io::Doc;
using io::Fields;
using io::Json;

namespace {

struct Ctx {
  Fields& cfg;
  std::string id;
  std::uint64_t seed = 0;
  int workers = 0;
  bool timing = false;
  std::optional<fs::path> output;

  RngStream rng() const { return RngStream(seed, 0); }

  std::size_t n() {
    const auto v = cfg.integer("n");
    if (v < 1) cfg.fail("n", "must be >= 1");
    return static_cast<std::size_t>(v);
  }

  // Runs f and reports its wall time in ms, or NaN when timing is off.
  template <class F>
  auto timed(double& ms, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto out = f();
    ms = timing ? std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() : kNa;
    return out;
  }
};

using Command = std::function<Result(Ctx&)>;

std::vector<double> grid_from(Fields& cfg, const std::string& key = "grid") {
  const Json& g = cfg.raw(key);
  std::vector<double> out;
  if (g.is_array()) {
    out = cfg.numbers(key);
  } else if (g.is_object()) {
    Fields gf = cfg.object(key);
    const double start = gf.number("start", 0.0);
    const double stop = gf.number("stop");
    const auto count = gf.integer("count");
    gf.finish();
    if (count < 1) gf.fail("count", "must be >= 1");
    if (count == 1) return {stop};
    for (std::int64_t i = 0; i < count; ++i)
      out.push_back(i + 1 == count ? stop
                                   : start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1));
  } else {
    cfg.fail(key, "expected an array of times or {start, stop, count}");
  }
  if (out.empty()) cfg.fail(key, "grid is empty");
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i] < out[i - 1]) cfg.fail(key, "grid must be nondecreasing");
  return out;
}

std::vector<std::string> checked_methods(Fields& cfg, std::vector<std::string> fallback,
                                         const std::vector<std::string>& allowed, const std::string& key = "methods") {
  auto methods = cfg.strings(key, std::move(fallback));
  if (methods.empty()) cfg.fail(key, "at least one method is required");
  for (const auto& m : methods)
    if (std::find(allowed.begin(), allowed.end(), m) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      cfg.fail(key, "unknown method \"" + m + "\" (expected one of " + list + ")");
    }
  return methods;
}

// ---------------------------------------------------------------- discrete

struct DiscreteSetup {
  Doc model_doc;
  MarkovModel model;
  Query query;
  std::vector<Symbol> history;
};

DiscreteSetup discrete_setup(Ctx& c) {
  Doc md = c.cfg.document("model", io::kModelSchema);
  Fields mf = io::root(md);
  MarkovModel model = io::markov_from_json(mf);
  Doc qd = c.cfg.document("query", io::kQuerySchema);
  Fields qf = io::root(qd);
  Query query = io::query_from_json(qf, model.vocab_size());
  std::vector<Symbol> history;
  if (c.cfg.has("history")) {
    history = c.cfg.integers("history");
    for (Symbol s : history)
      if (s < 0 || s >= model.vocab_size()) c.cfg.fail("history", "symbol outside the vocabulary");
  }
  return {std::move(md), std::move(model), std::move(query), std::move(history)};
}

double exact_markov(const MarkovModel& model, const Query& query, std::span<const Symbol> history) {
  double total = 0.0;
  for (const auto& block : query.blocks) total += markov_query_exact(model, block, history);
  return total;
}

Result query_discrete(Ctx& c) {
  auto s = discrete_setup(c);
  const auto methods = checked_methods(c.cfg, {"exact"}, {"exact", "enumerate", "is", "naive", "hybrid"});
  const bool sampled = std::any_of(methods.begin(), methods.end(),
                                   [](const std::string& m) { return m != "exact" && m != "enumerate"; });
  const std::size_t n = sampled ? c.n() : 0;
  const auto cap = static_cast<std::size_t>(c.cfg.integer("cap", 4096));
  const double budget = c.cfg.number("budget", 1e7);
  c.cfg.finish();
  const double K = static_cast<double>(s.query.max_length());
  Result r;
  for (const auto& m : methods) {
    double ms = kNa;
    if (m == "exact" || m == "enumerate") {
      const double v = c.timed(ms, [&] {
        return m == "exact" ? exact_markov(s.model, s.query, s.history)
                            : exact_enumerate(s.model, s.query, s.history, budget);
      });
      ReportRow row{c.id, K, m, v, 0.0, 0.0, kNa, ms};
      r.rows.push_back(row);
      continue;
    }
    EstimateSummary est = c.timed(ms, [&] {
      if (m == "is") return importance_estimate(s.model, s.query, n, c.rng().substream(1), s.history, c.workers);
      if (m == "naive") return naive_estimate(s.model, s.query, n, c.rng().substream(2), s.history, c.workers);
      return hybrid_estimate(s.model, s.query, n, cap, c.rng().substream(3), s.history, c.workers);
    });
    auto row = row_from(c.id, K, est, m);
    row.wall_ms = ms;
    r.rows.push_back(row);
  }
  return r;
}

Result beam(Ctx& c) {
  auto s = discrete_setup(c);
  const auto variant = c.cfg.string("variant", "coverage");
  if (variant != "coverage" && variant != "tail_split") c.cfg.fail("variant", "expected coverage or tail_split");
  const double alpha = variant == "coverage" ? c.cfg.number("alpha", 0.9) : 0.0;
  std::vector<double> schedule;
  if (variant == "coverage" && c.cfg.has("schedule")) schedule = c.cfg.numbers("schedule");
  const auto cap = static_cast<std::size_t>(c.cfg.integer("cap", variant == "coverage" ? (1 << 20) : 4096));
  c.cfg.finish();
  if (variant == "coverage" && !(alpha > 0.0 && alpha <= 1.0)) c.cfg.fail("alpha", "must lie in (0, 1]");
  double lower = 0.0, gap = 0.0, count = 0.0, cap_hit = 0.0, ms = kNa;
  c.timed(ms, [&] {
    for (const auto& block : s.query.blocks) {
      const BeamSet b = variant == "coverage"
                            ? coverage_beam_search(s.model, block, alpha, schedule, cap, s.history)
                            : tail_splitting_beam_search(s.model, block, cap, s.history);
      lower += b.lower_bound();
      gap += b.gap_bound();
      count += static_cast<double>(b.beams.size());
      if (b.cap_hit) cap_hit = 1.0;
    }
    return 0;
  });
  const double K = static_cast<double>(s.query.max_length());
  Result r;
  r.rows.push_back({c.id, K, "beam_lower", lower, 0.0, 0.0, kNa, ms});
  r.rows.push_back({c.id, K, "beam_gap", gap, 0.0, 0.0, kNa, kNa});
  r.rows.push_back({c.id, K, "beam_count", count, 0.0, 0.0, kNa, kNa});
  r.rows.push_back({c.id, K, "beam_cap_hit", cap_hit, 0.0, 0.0, kNa, kNa});
  return r;
}

Result hybrid(Ctx& c) {
  auto s = discrete_setup(c);
  const std::size_t n = c.n();
  const auto cap = static_cast<std::size_t>(c.cfg.integer("cap", 4096));
  c.cfg.finish();
  double ms = kNa;
  const auto est =
      c.timed(ms, [&] { return hybrid_estimate(s.model, s.query, n, cap, c.rng().substream(3), s.history, c.workers); });
  Result r;
  auto row = row_from(c.id, static_cast<double>(s.query.max_length()), est, "hybrid");
  row.wall_ms = ms;
  r.rows.push_back(row);
  return r;
}

// -------------------------------------------------------------------- mtpp

struct MtppSetup {
  Doc model_doc;
  std::unique_ptr<MtppModel> model;
  MtppEstimateOptions options;
};

MtppSetup mtpp_setup(Ctx& c) {
  MtppSetup s;
  s.model_doc = c.cfg.document("model", io::kModelSchema);
  Fields mf = io::root(s.model_doc);
  s.model = io::mtpp_from_json(mf);
  if (c.cfg.has("history")) {
    Doc hd = c.cfg.document("history", io::kSequenceSchema);
    Fields hf = io::root(hd);
    s.options.history = io::sequence_from_json(hf, s.model->num_marks());
  }
  s.options.points = static_cast<int>(c.cfg.integer("points", 0));
  s.options.thinning.segment = c.cfg.number("segment", s.options.thinning.segment);
  if (!(s.options.thinning.segment > 0.0)) c.cfg.fail("segment", "must be positive");
  s.options.workers = c.workers;
  return s;
}

MarkMask marks(Ctx& c, const MtppModel& model, const std::string& key) {
  const Json& v = c.cfg.raw(key);
  return io::mark_set_from_json(v, model.num_marks(), c.cfg, key);
}

Result hit_cdf(Ctx& c) {
  auto s = mtpp_setup(c);
  const MarkMask a = marks(c, *s.model, "a");
  const auto grid = grid_from(c.cfg);
  const auto methods = checked_methods(c.cfg, {"is", "naive"}, {"is", "naive"});
  const std::size_t n = c.n();
  c.cfg.finish();
  Result r;
  for (const auto& m : methods) {
    double ms = kNa;
    const auto curve = c.timed(ms, [&] {
      return m == "is" ? hitting_time_cdf_estimate(*s.model, a, grid, n, c.rng().substream(1), s.options)
                       : naive_hitting_cdf(*s.model, a, grid, n, c.rng().substream(2), s.options);
    });
    for (std::size_t j = 0; j < grid.size(); ++j) {
      auto row = row_from(c.id, grid[j], curve[j], m == "is" ? "IS" : "naive");
      row.wall_ms = ms;
      r.rows.push_back(row);
    }
  }
  return r;
}

Result nth_mark(Ctx& c) {
  auto s = mtpp_setup(c);
  const MarkMask a = marks(c, *s.model, "a");
  std::vector<int> indices;
  if (c.cfg.has("index")) indices.push_back(static_cast<int>(c.cfg.integer("index")));
  if (c.cfg.has("indices")) {
    auto more = c.cfg.integers("indices");
    indices.insert(indices.end(), more.begin(), more.end());
  }
  if (indices.empty()) c.cfg.fail("indices", "give index or indices");
  for (int i : indices)
    if (i < 1) c.cfg.fail("indices", "mark indices start at 1");
  const auto forms = checked_methods(c.cfg, {"direct"}, {"direct", "complement", "conditional"}, "forms");
  NthMarkOptions o;
  static_cast<MtppEstimateOptions&>(o) = s.options;
  o.horizon = c.cfg.number("horizon", o.horizon);
  const std::size_t n = c.n();
  c.cfg.finish();
  Result r;
  for (std::size_t f = 0; f < forms.size(); ++f) {
    o.form = forms[f] == "direct" ? NthMarkForm::direct
             : forms[f] == "complement" ? NthMarkForm::complement
                                        : NthMarkForm::conditional;
    for (std::size_t i = 0; i < indices.size(); ++i) {
      double ms = kNa;
      const auto est =
          c.timed(ms, [&] { return nth_mark_estimate(*s.model, a, indices[i], n, c.rng().substream(100 * f + i), o); });
      auto row = row_from(c.id, indices[i], est, "IS_" + forms[f]);
      row.wall_ms = ms;
      r.rows.push_back(row);
    }
  }
  return r;
}

Result a_before_b(Ctx& c) {
  auto s = mtpp_setup(c);
  const MarkMask a = marks(c, *s.model, "a");
  const MarkMask b = marks(c, *s.model, "b");
  BeforeOptions o;
  static_cast<MtppEstimateOptions&>(o) = s.options;
  o.epsilon = c.cfg.number("epsilon", o.epsilon);
  o.tau = c.cfg.number("tau", o.tau);
  o.tau_cap = c.cfg.number("tau_cap", o.tau_cap);
  o.step = c.cfg.number("step", o.step);
  const auto methods = checked_methods(c.cfg, {"bounds"}, {"bounds", "naive"});
  const bool naive = std::find(methods.begin(), methods.end(), "naive") != methods.end();
  const bool bounds = std::find(methods.begin(), methods.end(), "bounds") != methods.end();
  const double naive_horizon = naive ? c.cfg.number("naive_horizon") : 0.0;
  const std::size_t n = c.n();
  c.cfg.finish();
  const double t_col = o.tau > 0.0 ? o.tau : kNa;
  Result r;
  EstimateSummary mid, plain;
  if (bounds) {
    double ms = kNa;
    const auto res = c.timed(ms, [&] { return a_before_b_estimate(*s.model, a, b, n, c.rng().substream(1), o); });
    mid = res.estimate;
    auto row = row_from(c.id, t_col, res.estimate, "AB_mid");
    row.wall_ms = ms;
    r.rows.push_back(row);
    r.rows.push_back(row_from(c.id, t_col, res.lower, "AB_lower"));
    r.rows.push_back(row_from(c.id, t_col, res.upper, "AB_upper"));
    r.rows.push_back({c.id, t_col, "AB_max_gap", res.max_gap, kNa, kNa, static_cast<double>(n), kNa});
    r.rows.push_back({c.id, t_col, "AB_capped", static_cast<double>(res.capped), kNa, kNa, static_cast<double>(n), kNa});
  }
  if (naive) {
    const double start = s.options.history.window_end;
    if (!(naive_horizon > start)) c.cfg.fail("naive_horizon", "must exceed the end of the history");
    const std::size_t skip = s.options.history.size();
    auto first_in_a = [&, skip](const EventSequence& seq) {
      for (std::size_t i = skip; i < seq.events.size(); ++i) {
        const Mark m = seq.events[i].mark;
        if (a[m]) return true;
        if (b[m]) return false;
      }
      return false;
    };
    double ms = kNa;
    plain = c.timed(ms, [&] {
      return naive_query_estimate(*s.model, first_in_a, naive_horizon, n, c.rng().substream(2), s.options);
    });
    auto row = row_from(c.id, naive_horizon, plain, "naive");
    row.wall_ms = ms;
    r.rows.push_back(row);
  }
  if (bounds && naive) {
    // The bound midpoint is biased, so the ratio is a variance reduction rather than an efficiency.
    const double vr = plain.var == 0.0 && mid.var == 0.0 ? kNa : relative_efficiency(mid, plain);
    r.rows.push_back({c.id, t_col, "variance_reduction:AB_mid/naive", vr, kNa, kNa, static_cast<double>(n), kNa});
  }
  return r;
}

Result censor_ll(Ctx& c) {
  Doc md = c.cfg.document("model", io::kModelSchema);
  Fields mf = io::root(md);
  auto model = io::mtpp_from_json(mf);
  Doc sd = c.cfg.document("sequence", io::kSequenceSchema);
  Fields sf = io::root(sd);
  const EventSequence observed = io::sequence_from_json(sf, model->num_marks());
  Doc cd = c.cfg.document("schedule", io::kScheduleSchema);
  Fields cf = io::root(cd);
  const CensorSchedule schedule = io::censor_schedule_from_json(cf, model->num_marks());
  const double tau = c.cfg.number("tau", observed.window_end);
  CensorOptions o;
  o.samples = static_cast<std::size_t>(c.cfg.integer("samples", static_cast<std::int64_t>(o.samples)));
  o.points = static_cast<int>(c.cfg.integer("points", o.points));
  o.reuse = c.cfg.boolean("reuse", o.reuse);
  o.workers = c.workers;
  c.cfg.finish();
  if (o.samples < 1) c.cfg.fail("samples", "must be >= 1");
  try {
    schedule.check_sequence(observed);
  } catch (const io::SpecError&) {
    throw;
  } catch (const ConfigError& e) {
    c.cfg.fail("sequence", e.what());
  }
  double ms = kNa;
  const auto ll = c.timed(ms, [&] { return censored_likelihood_pair(*model, schedule, observed, tau, c.rng(), o); });
  const double m = static_cast<double>(o.samples);
  Result r;
  r.rows.push_back({c.id, tau, "censored", ll.censored, kNa, kNa, m, ms});
  r.rows.push_back({c.id, tau, "baseline", ll.baseline, 0.0, 0.0, kNa, kNa});
  r.rows.push_back({c.id, tau, "log_ratio", ll.log_ratio, kNa, kNa, m, kNa});
  return r;
}

Result ground_truth(Ctx& c) {
  const auto domain = c.cfg.string("domain", "discrete");
  GroundTruthOptions g;
  g.delta = c.cfg.number("delta", g.delta);
  g.n_low = static_cast<std::size_t>(c.cfg.integer("n_low", static_cast<std::int64_t>(g.n_low)));
  g.n_high = static_cast<std::size_t>(c.cfg.integer("n_high", static_cast<std::int64_t>(g.n_high)));
  g.step = static_cast<std::size_t>(c.cfg.integer("step", static_cast<std::int64_t>(g.step)));
  g.workers = c.workers;
  Sampler sampler;
  double t_col = kNa;
  // Keeps whichever model the sampler refers to alive.
  std::optional<DiscreteSetup> discrete;
  std::optional<MtppSetup> mtpp;
  MarkMask a;
  if (domain == "discrete") {
    discrete.emplace(discrete_setup(c));
    const auto estimator = c.cfg.string("estimator", "is");
    if (estimator != "is" && estimator != "naive") c.cfg.fail("estimator", "expected is or naive");
    t_col = static_cast<double>(discrete->query.max_length());
    sampler = estimator == "is"
                  ? importance_sampler(discrete->model, discrete->query, c.rng().substream(1), discrete->history)
                  : naive_sampler(discrete->model, discrete->query, c.rng().substream(2), discrete->history);
  } else if (domain == "mtpp") {
    mtpp.emplace(mtpp_setup(c));
    a = marks(c, *mtpp->model, "a");
    t_col = c.cfg.number("t");
    mtpp->options.workers = 1;
    const RngStream base = c.rng().substream(1);
    sampler = [&, base, t_col](std::uint64_t i) {
      return hitting_time_cdf_estimate(*mtpp->model, a, {t_col}, 1, base.substream(i), mtpp->options)[0].mean;
    };
  } else {
    c.cfg.fail("domain", "expected discrete or mtpp");
  }
  c.cfg.finish();
  double ms = kNa;
  const auto est = c.timed(ms, [&] { return surrogate_ground_truth(sampler, g); });
  Result r;
  auto row = row_from(c.id, t_col, est, "ground_truth");
  row.wall_ms = ms;
  r.rows.push_back(row);
  r.rows.push_back({c.id, t_col, "tolerance_met", est.extra.at("tolerance_met"), kNa, kNa, kNa, kNa});
  return r;
}

// -------------------------------------------------------------------- jump

struct JumpSetup {
  Doc process_doc;
  std::unique_ptr<JumpProcess> process;
  HitOptions options;
};

JumpSetup jump_setup(Ctx& c, bool exact_default) {
  JumpSetup s;
  s.process_doc = c.cfg.document("process", io::kModelSchema);
  Fields pf = io::root(s.process_doc);
  s.process = io::process_from_json(pf);
  auto& o = s.options;
  o.exact = c.cfg.boolean("exact", exact_default);
  o.dt = c.cfg.number("dt", o.dt);
  o.integration_step = c.cfg.number("integration_step", o.integration_step);
  o.condition_diffusion = c.cfg.boolean("condition_diffusion", o.condition_diffusion);
  o.inner_samples = static_cast<int>(c.cfg.integer("inner_samples", o.inner_samples));
  o.max_retries = static_cast<int>(c.cfg.integer("max_retries", o.max_retries));
  o.workers = c.workers;
  if (!(o.dt > 0.0)) c.cfg.fail("dt", "must be positive");
  if (!(o.integration_step > 0.0)) c.cfg.fail("integration_step", "must be positive");
  return s;
}

struct LabelledGht {
  std::string label;
  Ght ght;
};

Ght ght_entry(Fields& f, const std::string& key, const JumpProcess& p) {
  Doc d = f.document(key, io::kGhtSchema);
  Fields gf = io::root(d);
  return io::ght_from_json(gf, p);
}

// Either "ght" (one hitting time) or "ghts" (labelled list).
std::vector<LabelledGht> ghts_from(Ctx& c, const JumpProcess& p) {
  std::vector<LabelledGht> out;
  if (c.cfg.has("ght")) out.push_back({"", ght_entry(c.cfg, "ght", p)});
  if (c.cfg.has("ghts")) {
    const Json& list = c.cfg.raw("ghts");
    if (!list.is_array() || list.empty()) c.cfg.fail("ghts", "expected a nonempty array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Fields ef(list[i], c.cfg.file(), c.cfg.path_of("ghts") + "[" + std::to_string(i) + "]", c.cfg.dir());
      std::string label = ef.string("label", std::to_string(i));
      Ght g = ght_entry(ef, "ght", p);
      ef.finish();
      out.push_back({std::move(label), std::move(g)});
    }
  }
  if (out.empty()) c.cfg.fail("ght", "give ght or ghts");
  return out;
}

std::string experiment(const Ctx& c, const std::string& label) { return label.empty() ? c.id : c.id + "/" + label; }

std::vector<HitMethod> hit_methods(Ctx& c) {
  const auto names = checked_methods(c.cfg, {"NE", "TR", "IS", "ISP"}, {"NE", "TR", "IS", "ISP"});
  std::vector<HitMethod> out;
  for (const auto& m : names) out.push_back(parse_hit_method(m));
  return out;
}

struct CurveSet {
  std::string label;
  std::vector<CdfCurve> curves;
  double ms = kNa;
};

std::vector<CurveSet> run_curves(Ctx& c, const JumpSetup& s, const std::vector<LabelledGht>& ghts,
                                 const std::vector<double>& grid, std::size_t n, const std::vector<HitMethod>& methods) {
  std::vector<CurveSet> out;
  for (std::size_t g = 0; g < ghts.size(); ++g) {
    CurveSet set;
    set.label = ghts[g].label;
    set.curves = c.timed(set.ms, [&] {
      return cdf_estimate(*s.process, ghts[g].ght, grid, n, methods, c.rng().substream(g), s.options);
    });
    out.push_back(std::move(set));
  }
  return out;
}

void curve_rows(const Ctx& c, const std::vector<CurveSet>& sets, Result& r) {
  for (const auto& set : sets)
    for (const auto& curve : set.curves)
      for (std::size_t j = 0; j < curve.grid.size(); ++j) {
        auto row = row_from(experiment(c, set.label), curve.grid[j], curve.points[j], curve.method);
        row.wall_ms = set.ms;
        r.rows.push_back(row);
      }
}

Result hit_est(Ctx& c) {
  auto s = jump_setup(c, false);
  const auto ghts = ghts_from(c, *s.process);
  const auto grid = grid_from(c.cfg);
  const auto methods = hit_methods(c);
  const std::size_t n = c.n();
  c.cfg.finish();
  Result r;
  curve_rows(c, run_curves(c, s, ghts, grid, n, methods), r);
  return r;
}

Result hit_eff(Ctx& c) {
  auto s = jump_setup(c, false);
  const auto ghts = ghts_from(c, *s.process);
  const auto grid = grid_from(c.cfg);
  const auto methods = hit_methods(c);
  if (methods.size() < 2) c.cfg.fail("methods", "need at least two methods to compare");
  const std::size_t n = c.n();
  c.cfg.finish();
  Result r;
  for (const auto& set : run_curves(c, s, ghts, grid, n, methods)) {
    const auto table = efficiency_report(set.curves);
    for (std::size_t t = 0; t < table.grid.size(); ++t)
      for (std::size_t a = 0; a < table.methods.size(); ++a)
        for (std::size_t b = 0; b < table.methods.size(); ++b) {
          if (a == b) continue;
          r.rows.push_back({experiment(c, set.label), table.grid[t],
                            "eff:" + table.methods[a] + "/" + table.methods[b], table.eff[t][a][b], kNa, kNa,
                            static_cast<double>(n), kNa});
        }
  }
  return r;
}

Result cover(Ctx& c) {
  auto s = jump_setup(c, true);
  const auto* ctmc = dynamic_cast<const CtmcProcess*>(s.process.get());
  if (!ctmc) c.cfg.fail("process", "cover needs a ctmc process (family \"ctmc\" or name \"ctmc_cover\")");
  const auto grid = grid_from(c.cfg);
  const auto methods = hit_methods(c);
  const std::size_t n = c.n();
  c.cfg.finish();
  Result r;
  curve_rows(c, run_curves(c, s, {{"", ctmc->cover_time()}}, grid, n, methods), r);
  return r;
}

Result joint(Ctx& c) {
  auto s = jump_setup(c, false);
  const auto labelled = ghts_from(c, *s.process);
  std::vector<Ght> ghts;
  for (const auto& g : labelled) ghts.push_back(g.ght);
  const double K = static_cast<double>(ghts.size());
  const auto mode = c.cfg.string("mode", "joint");
  const std::size_t n = c.n();
  Result r;
  if (mode == "ordered") {
    const auto grid = grid_from(c.cfg);
    const auto methods = checked_methods(c.cfg, {"IS", "NE"}, {"IS", "NE"});
    c.cfg.finish();
    for (const auto& m : methods) {
      double ms = kNa;
      const auto curve = c.timed(ms, [&] {
        return m == "IS" ? ordered_estimate(*s.process, ghts, grid, n, c.rng().substream(1), s.options)
                         : ordered_naive(*s.process, ghts, grid, n, c.rng().substream(2), s.options);
      });
      for (std::size_t j = 0; j < grid.size(); ++j) {
        auto row = row_from(c.id, grid[j], curve.points[j], curve.method);
        row.wall_ms = ms;
        r.rows.push_back(row);
      }
    }
    return r;
  }
  if (mode != "joint") c.cfg.fail("mode", "expected joint or ordered");
  std::vector<double> times;
  if (c.cfg.has("times")) {
    times = c.cfg.numbers("times");
  } else {
    times.assign(ghts.size(), c.cfg.number("t"));
  }
  if (times.size() != ghts.size()) c.cfg.fail("times", "need one time per hitting time");
  const auto variants = checked_methods(c.cfg, {"ordered", "unordered", "naive"}, {"ordered", "unordered", "naive"},
                                        "variants");
  const int max_ordered = static_cast<int>(c.cfg.integer("max_ordered", 5));
  c.cfg.finish();
  for (const auto& v : variants) {
    double ms = kNa;
    const auto est = c.timed(ms, [&] {
      if (v == "naive") return joint_naive(*s.process, ghts, times, n, c.rng().substream(3), s.options);
      const auto variant = v == "ordered" ? JointVariant::ordered : JointVariant::unordered;
      return joint_estimate(*s.process, ghts, times, n, variant, c.rng().substream(v == "ordered" ? 1 : 2), s.options,
                            max_ordered);
    });
    auto row = row_from(c.id, K, est);
    row.wall_ms = ms;
    r.rows.push_back(row);
    if (v != "naive")
      r.rows.push_back({c.id, K, est.method + "_ties", est.extra.count("ties") ? est.extra.at("ties") : 0.0, kNa, kNa,
                        static_cast<double>(n), kNa});
  }
  return r;
}

// --------------------------------------------------------------- gen-model

Result gen_model(Ctx& c) {
  const auto family = c.cfg.string("family");
  RngStream rng = c.rng();
  Json model;
  if (family == "markov") {
    const auto order = c.cfg.integer("order", 1);
    const auto vocab = c.cfg.integer("vocab");
    const double temperature = c.cfg.number("temperature", 1.0);
    model = io::to_json(MarkovModel::random(static_cast<int>(order), static_cast<int>(vocab), rng, temperature));
  } else if (family == "hawkes") {
    const auto marks = c.cfg.integer("marks");
    const auto law_name = c.cfg.string("law", "dense");
    if (law_name != "dense" && law_name != "block") c.cfg.fail("law", "expected dense or block");
    HawkesExp::Law law = law_name == "dense" ? HawkesExp::dense_law() : HawkesExp::block_law();
    law.alpha_lo = c.cfg.number("alpha_lo", law.alpha_lo);
    law.alpha_hi = c.cfg.number("alpha_hi", law.alpha_hi);
    law.beta_lo = c.cfg.number("beta_lo", law.beta_lo);
    law.beta_hi = c.cfg.number("beta_hi", law.beta_hi);
    law.mu_lo = c.cfg.number("mu_lo", law.mu_lo);
    law.mu_hi = c.cfg.number("mu_hi", law.mu_hi);
    law.block = static_cast<int>(c.cfg.integer("block", law.block));
    law.off_diagonal_scale = c.cfg.number("off_diagonal_scale", law.off_diagonal_scale);
    model = io::to_json(HawkesExp::random(static_cast<int>(marks), rng, law));
  } else if (family == "self_correcting") {
    const auto marks = c.cfg.integer("marks");
    const double delta_lo = c.cfg.number("delta_lo", 0.3), delta_hi = c.cfg.number("delta_hi", 0.8);
    const double eta_lo = c.cfg.number("eta_lo", 0.1), eta_hi = c.cfg.number("eta_hi", 0.5);
    model = io::to_json(SelfCorrecting::random(static_cast<int>(marks), rng, delta_lo, delta_hi, eta_lo, eta_hi));
  } else if (family == "ctmc") {
    CtmcParams p;
    p.vertices = static_cast<int>(c.cfg.integer("vertices", p.vertices));
    p.rate = c.cfg.number("rate", p.rate);
    p.temperature = c.cfg.number("temperature", p.temperature);
    p.start = static_cast<int>(c.cfg.integer("start", p.start));
    model = io::to_json(CtmcProcess::random(p, rng));
  } else {
    c.cfg.fail("family", "unknown family \"" + family + "\" (markov, hawkes, self_correcting, ctmc)");
  }
  c.cfg.finish();
  if (!c.output) c.cfg.fail("output", "gen-model needs an output path");
  std::ofstream out(*c.output);
  if (!out) throw ConfigError("cannot write " + c.output->string());
  out << model.dump(2) << '\n';
  Result r;
  r.written.push_back(c.output->string());
  return r;
}

const std::map<std::string, Command>& registry() {
  static const std::map<std::string, Command> table{
      {"query-discrete", query_discrete}, {"beam", beam},         {"hybrid", hybrid},
      {"hit-cdf", hit_cdf},               {"nth-mark", nth_mark}, {"a-before-b", a_before_b},
      {"censor-ll", censor_ll},           {"hit-est", hit_est},   {"hit-eff", hit_eff},
      {"joint", joint},                   {"cover", cover},       {"gen-model", gen_model},
      {"ground-truth", ground_truth},
  };
  return table;
}

std::string json_line(const Json& j) { return j.dump(); }

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [name, cmd] : registry()) v.push_back(name);
    return v;
  }();
  return names;
}

Result run(const Invocation& inv) {
  const auto it = registry().find(inv.command);
  if (it == registry().end()) throw ConfigError("unknown subcommand \"" + inv.command + "\"");
  const Doc doc = io::load_doc(inv.config);
  Fields cfg = io::root(doc);
  io::check_schema(cfg, io::kExperimentSchema, true);
  if (cfg.has("command") && cfg.string("command") != inv.command)
    cfg.fail("command", "config is for a different subcommand");
  Ctx c{cfg, {}, 0, 0, false, {}};
  c.id = cfg.string("id", inv.config.stem().string());
  c.seed = inv.seed ? *inv.seed : cfg.unsigned_integer("seed", 0);
  if (inv.seed && cfg.has("seed")) cfg.unsigned_integer("seed", 0);
  const auto configured = cfg.integer("workers", 0);
  if (configured < 0) cfg.fail("workers", "must be >= 0");
  c.workers = inv.workers ? *inv.workers : static_cast<int>(configured);
  c.timing = inv.timing;
  if (inv.output) {
    c.output = inv.output;
    if (cfg.has("output")) cfg.string("output");
  } else if (cfg.has("output")) {
    fs::path p = cfg.string("output");
    c.output = p.is_relative() ? doc.dir / p : p;
  }
  Result r = it->second(c);
  if (inv.command != "gen-model") r.csv = c.output;
  return r;
}

int execute(const Invocation& inv, std::ostream& out, std::ostream& err) {
  auto error_record = [&](int code, const char* kind, const std::string& message, const std::string& file,
                          const std::string& field) {
    Json rec{{"status", "error"}, {"exit_code", code}, {"kind", kind}, {"command", inv.command},
             {"message", message}};
    if (!file.empty()) rec["file"] = file;
    if (!field.empty()) rec["field"] = field;
    err << json_line(rec) << '\n';
    return code;
  };
  try {
    Result r = run(inv);
    if (inv.command != "gen-model") {
      if (r.csv) {
        std::ofstream f(*r.csv, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + r.csv->string());
        write_csv(f, r.rows);
      } else {
        write_csv(out, r.rows);
      }
    }
    Json summary{{"status", "ok"}, {"command", inv.command}, {"rows", r.rows.size()}};
    if (r.csv) summary["output"] = r.csv->string();
    if (!r.written.empty()) summary["written"] = r.written;
    err << json_line(summary) << '\n';
    return kExitOk;
  } catch (const io::SpecError& e) {
    return error_record(kExitConfig, "config", e.detail(), e.file(), e.field());
  } catch (const ConfigError& e) {
    return error_record(kExitConfig, "config", e.what(), inv.config.string(), "");
  } catch (const NumericError& e) {
    return error_record(kExitNumeric, "numeric", e.what(), inv.config.string(), "");
  } catch (const std::exception& e) {
    return error_record(kExitInternal, "internal", e.what(), inv.config.string(), "");
  }
}

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Long-range probabilistic queries: exact computation and variance-reduced estimation."};
  app.require_subcommand(1);
  Invocation inv;
  std::string output;
  std::uint64_t seed = 0;
  int workers = 0;
  static const std::map<std::string, std::string> summary{
      {"query-discrete", "discrete query: exact, enumeration and sampled estimates"},
      {"beam", "certified lower bound from coverage or tail-splitting beam search"},
      {"hybrid", "beam search plus importance sampling on the remainder"},
      {"hit-cdf", "point-process hitting-time CDF, importance or naive"},
      {"nth-mark", "probability that the n-th event carries a mark in A"},
      {"a-before-b", "probability that a mark in A precedes any mark in B"},
      {"censor-ll", "censored versus baseline log-likelihood of an observed sequence"},
      {"hit-est", "generalized hitting-time CDF curves (NE, TR, IS, ISP)"},
      {"hit-eff", "pairwise relative efficiencies of hitting-time estimators"},
      {"joint", "joint or ordered hitting-time probabilities"},
      {"cover", "cover-time CDF of a continuous-time random walk"},
      {"gen-model", "write a seeded random model file"},
      {"ground-truth", "surrogate ground truth by sequential sampling"},
  };
  for (const auto& name : commands()) {
    auto* sub = app.add_subcommand(name, summary.at(name));
    sub->add_option("config", inv.config, "experiment config (JSON)")->required();
    sub->add_option("-o,--output", output, "CSV (or model file) path; overrides the config");
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--workers", workers, "worker threads (0: LRQ_WORKERS or hardware)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--timing", inv.timing, "record wall_ms (output is then not reproducible)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    Json rec{{"status", "error"}, {"exit_code", kExitConfig}, {"kind", "usage"}, {"message", e.what()}};
    err << json_line(rec) << '\n';
    return kExitConfig;
  }
  for (auto* sub : app.get_subcommands()) {
    inv.command = sub->get_name();
    if (sub->count("--output")) inv.output = output;
    if (sub->count("--seed")) inv.seed = seed;
    if (sub->count("--workers")) inv.workers = workers;
  }
  return execute(inv, out, err);
}

}  // namespace lrq::cli
