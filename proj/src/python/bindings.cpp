#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "lrq/censoring.hpp"
#include "lrq/cli.hpp"
#include "lrq/discrete_query.hpp"
#include "lrq/error.hpp"
#include "lrq/hitting_est.hpp"
#include "lrq/mtpp_query.hpp"
#include "lrq/spec_io.hpp"

namespace py = pybind11;
using namespace lrq;

namespace {

using EventList = std::vector<std::pair<double, int>>;

io::Json parse(const std::string& text, const char* what) {
  try {
    return io::Json::parse(text);
  } catch (const io::Json::parse_error& e) {
    throw ConfigError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

// Objects built from JSON descriptors. Inline descriptors have no file, so
// relative paths inside them resolve against the working directory.
template <typename T, typename F>
T from_json(const std::string& text, const char* what, F&& build) {
  const auto json = parse(text, what);
  io::Fields f(json, what, "");
  return build(f);
}

EventSequence to_sequence(const EventList& events, double window_end) {
  std::vector<Event> ev;
  ev.reserve(events.size());
  for (const auto& [t, m] : events) ev.push_back({t, m});
  return EventSequence(std::move(ev), window_end);
}

EventList to_list(const EventSequence& s) {
  EventList out;
  out.reserve(s.size());
  for (const auto& e : s.events) out.emplace_back(e.time, e.mark);
  return out;
}

MtppEstimateOptions mtpp_options(const EventList& history, double history_end, int workers) {
  MtppEstimateOptions o;
  o.history = to_sequence(history, history_end);
  o.workers = workers;
  return o;
}

Query make_query(const std::string& kind, int vocab, int x, std::vector<int> a, std::vector<int> b, int k, int n) {
  static const std::map<std::string, QueryKind> kinds{{"first_symbol", QueryKind::first_symbol},
                                                      {"marginal", QueryKind::marginal},
                                                      {"hit_at", QueryKind::hit_at},
                                                      {"hit_before", QueryKind::hit_before},
                                                      {"count", QueryKind::count}};
  const auto it = kinds.find(kind);
  if (it == kinds.end()) throw ConfigError("unknown query kind \"" + kind + "\"");
  QueryParams p;
  p.x = x;
  p.a = std::move(a);
  p.b = std::move(b);
  p.k = k;
  p.n = n;
  return build_query(it->second, vocab, p);
}

struct OwnedGht {
  std::shared_ptr<JumpProcess> process;
  Ght ght;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Probabilistic queries on sequence models";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<EstimateSummary>(m, "Estimate")
      .def_readonly("n", &EstimateSummary::n)
      .def_readonly("mean", &EstimateSummary::mean)
      .def_readonly("var", &EstimateSummary::var)
      .def_readonly("se", &EstimateSummary::se)
      .def_readonly("method", &EstimateSummary::method)
      .def_readonly("extra", &EstimateSummary::extra)
      .def("__repr__", [](const EstimateSummary& s) {
        std::ostringstream os;
        os << "Estimate(method='" << s.method << "', mean=" << s.mean << ", se=" << s.se << ", n=" << s.n << ")";
        return os.str();
      });

  m.def("relative_efficiency", &relative_efficiency, py::arg("a"), py::arg("b"),
        "var(b) / var(a); inf when only a is degenerate.");

  // Discrete sequences.
  py::class_<MarkovModel>(m, "MarkovModel")
      .def(py::init<int, int, std::vector<double>>(), py::arg("order"), py::arg("vocab"), py::arg("table"))
      .def_static(
          "random",
          [](int order, int vocab, std::uint64_t seed, double temperature) {
            RngStream rng(seed, 0);
            return MarkovModel::random(order, vocab, rng, temperature);
          },
          py::arg("order"), py::arg("vocab"), py::arg("seed") = 0, py::arg("temperature") = 1.0)
      .def_static("from_json",
                  [](const std::string& text) {
                    return from_json<MarkovModel>(text, "model", [](io::Fields& f) { return io::markov_from_json(f); });
                  })
      .def("to_json", [](const MarkovModel& model) { return io::to_json(model).dump(); })
      .def_property_readonly("order", &MarkovModel::order)
      .def_property_readonly("vocab", &MarkovModel::vocab_size)
      .def_property_readonly("table", &MarkovModel::table)
      .def("next_dist", [](const MarkovModel& model, const std::vector<int>& history) { return model.next_dist(history); });

  py::class_<Query>(m, "Query")
      .def(py::init(&make_query), py::arg("kind"), py::arg("vocab"), py::kw_only(), py::arg("x") = 0,
           py::arg("a") = std::vector<int>{}, py::arg("b") = std::vector<int>{}, py::arg("k") = 1, py::arg("n") = 0)
      .def_readonly("vocab", &Query::vocab)
      .def_property_readonly("num_blocks", [](const Query& q) { return q.blocks.size(); })
      .def_property_readonly("max_length", &Query::max_length)
      .def("contains", [](const Query& q, const std::vector<int>& path) { return q.contains(path); });

  m.def(
      "markov_query_exact",
      [](const MarkovModel& model, const Query& query, const std::vector<int>& history) {
        double total = 0.0;
        for (const auto& block : query.blocks) total += markov_query_exact(model, block, history);
        return total;
      },
      py::arg("model"), py::arg("query"), py::arg("history") = std::vector<int>{});
  m.def(
      "exact_enumerate",
      [](const MarkovModel& model, const Query& query, const std::vector<int>& history, double budget) {
        return exact_enumerate(model, query, history, budget);
      },
      py::arg("model"), py::arg("query"), py::arg("history") = std::vector<int>{}, py::arg("budget") = 1e7);
  m.def(
      "importance_estimate",
      [](const MarkovModel& model, const Query& query, std::size_t n, std::uint64_t seed,
         const std::vector<int>& history, int workers) {
        return importance_estimate(model, query, n, RngStream(seed, 0), history, workers);
      },
      py::arg("model"), py::arg("query"), py::arg("n"), py::arg("seed") = 0, py::arg("history") = std::vector<int>{},
      py::arg("workers") = 0);
  m.def(
      "naive_estimate",
      [](const MarkovModel& model, const Query& query, std::size_t n, std::uint64_t seed,
         const std::vector<int>& history, int workers) {
        return naive_estimate(model, query, n, RngStream(seed, 0), history, workers);
      },
      py::arg("model"), py::arg("query"), py::arg("n"), py::arg("seed") = 0, py::arg("history") = std::vector<int>{},
      py::arg("workers") = 0);
  m.def(
      "hybrid_estimate",
      [](const MarkovModel& model, const Query& query, std::size_t n, std::size_t cap, std::uint64_t seed,
         const std::vector<int>& history, int workers) {
        return hybrid_estimate(model, query, n, cap, RngStream(seed, 0), history, workers);
      },
      py::arg("model"), py::arg("query"), py::arg("n"), py::arg("cap") = 4096, py::arg("seed") = 0,
      py::arg("history") = std::vector<int>{}, py::arg("workers") = 0);
  m.def(
      "coverage_beam_bounds",
      [](const MarkovModel& model, const Query& query, double alpha, const std::vector<int>& history) {
        double lower = 0.0, gap = 0.0;
        std::size_t beams = 0;
        bool cap_hit = false;
        for (const auto& block : query.blocks) {
          const auto b = coverage_beam_search(model, block, alpha, {}, 1u << 20, history);
          lower += b.lower_bound();
          gap += b.gap_bound();
          beams += b.beams.size();
          cap_hit = cap_hit || b.cap_hit;
        }
        return py::dict(py::arg("lower") = lower, py::arg("gap") = gap, py::arg("beams") = beams,
                        py::arg("cap_hit") = cap_hit);
      },
      py::arg("model"), py::arg("query"), py::arg("alpha"), py::arg("history") = std::vector<int>{},
      "Certified lower bound and gap summed over the query's blocks.");
  m.def("markov_hit_analytic", &markov_hit_analytic, py::arg("model"), py::arg("a"), py::arg("x0"), py::arg("k"));
  m.def(
      "markov_a_before_b_analytic",
      [](const MarkovModel& model, int a, int b, int x0) {
        const auto r = markov_a_before_b_analytic(model, a, b, x0);
        return std::make_pair(r.a_first, r.b_first);
      },
      py::arg("model"), py::arg("a"), py::arg("b"), py::arg("x0"));
  m.def("steady_state", &steady_state, py::arg("model"));

  // Marked temporal point processes.
  py::class_<MtppModel, std::shared_ptr<MtppModel>>(m, "MtppModel")
      .def_static("from_json",
                  [](const std::string& text) {
                    return from_json<std::shared_ptr<MtppModel>>(
                        text, "model", [](io::Fields& f) { return std::shared_ptr<MtppModel>(io::mtpp_from_json(f)); });
                  })
      .def_static(
          "random_hawkes",
          [](int marks, std::uint64_t seed, const std::string& law, double off_diagonal_scale) {
            if (law != "dense" && law != "block") throw ConfigError("law must be dense or block");
            auto l = law == "dense" ? HawkesExp::dense_law() : HawkesExp::block_law();
            l.off_diagonal_scale = off_diagonal_scale;
            RngStream rng(seed, 0);
            return std::shared_ptr<MtppModel>(new HawkesExp(HawkesExp::random(marks, rng, l)));
          },
          py::arg("marks"), py::arg("seed") = 0, py::arg("law") = "dense", py::arg("off_diagonal_scale") = 1.0)
      .def_static(
          "poisson", [](std::vector<double> rates) { return std::shared_ptr<MtppModel>(new PoissonMtpp(std::move(rates))); },
          py::arg("rates"))
      .def_property_readonly("num_marks", &MtppModel::num_marks)
      .def(
          "intensity",
          [](const MtppModel& model, double t, const EventList& history) {
            return marked_intensity(model, t, to_sequence(history, t));
          },
          py::arg("t"), py::arg("history") = EventList{});

  m.def(
      "sample_sequence",
      [](const MtppModel& model, double t_end, std::uint64_t seed, std::size_t max_events) {
        RngStream rng(seed, 0);
        ThinningOptions o;
        o.max_events = max_events;
        return to_list(thinning_sample(model, 0.0, t_end, EventSequence(), rng, o));
      },
      py::arg("model"), py::arg("t_end"), py::arg("seed") = 0, py::arg("max_events") = 1000000);
  m.def(
      "log_likelihood",
      [](const MtppModel& model, const EventList& events, double tau) {
        return log_likelihood(model, to_sequence(events, tau), tau);
      },
      py::arg("model"), py::arg("events"), py::arg("tau"));
  m.def(
      "hitting_cdf",
      [](const MtppModel& model, const std::vector<int>& a, const std::vector<double>& times, std::size_t n,
         std::uint64_t seed, const EventList& history, double history_end, bool naive, int workers) {
        const auto mask = mark_mask(model.num_marks(), a);
        const auto o = mtpp_options(history, history_end, workers);
        return naive ? naive_hitting_cdf(model, mask, times, n, RngStream(seed, 0), o)
                     : hitting_time_cdf_estimate(model, mask, times, n, RngStream(seed, 0), o);
      },
      py::arg("model"), py::arg("a"), py::arg("times"), py::arg("n"), py::arg("seed") = 0,
      py::arg("history") = EventList{}, py::arg("history_end") = 0.0, py::arg("naive") = false, py::arg("workers") = 0,
      "P(first mark in a occurs by t) for each t.");
  m.def(
      "nth_mark",
      [](const MtppModel& model, const std::vector<int>& a, int index, std::size_t n, std::uint64_t seed,
         const std::string& form) {
        NthMarkOptions o;
        if (form == "direct")
          o.form = NthMarkForm::direct;
        else if (form == "complement")
          o.form = NthMarkForm::complement;
        else if (form == "conditional")
          o.form = NthMarkForm::conditional;
        else
          throw ConfigError("form must be direct, complement or conditional");
        return nth_mark_estimate(model, mark_mask(model.num_marks(), a), index, n, RngStream(seed, 0), o);
      },
      py::arg("model"), py::arg("a"), py::arg("index"), py::arg("n"), py::arg("seed") = 0,
      py::arg("form") = "direct");
  m.def(
      "a_before_b",
      [](const MtppModel& model, const std::vector<int>& a, const std::vector<int>& b, std::size_t n,
         std::uint64_t seed, double epsilon) {
        BeforeOptions o;
        o.epsilon = epsilon;
        const int k = model.num_marks();
        const auto r = a_before_b_estimate(model, mark_mask(k, a), mark_mask(k, b), n, RngStream(seed, 0), o);
        return py::dict(py::arg("estimate") = r.estimate, py::arg("lower") = r.lower, py::arg("upper") = r.upper,
                        py::arg("max_gap") = r.max_gap, py::arg("capped") = r.capped);
      },
      py::arg("model"), py::arg("a"), py::arg("b"), py::arg("n"), py::arg("seed") = 0, py::arg("epsilon") = 0.01);
  m.def(
      "censored_likelihood",
      [](const MtppModel& model, const std::vector<int>& hidden, double start, double end, const EventList& observed,
         double tau, std::uint64_t seed, std::size_t samples, int points) {
        const int k = model.num_marks();
        const auto schedule = CensorSchedule::censor(k, mark_mask(k, hidden), start, end);
        CensorOptions o;
        o.samples = samples;
        o.points = points;
        const auto r = censored_likelihood_pair(model, schedule, to_sequence(observed, tau), tau, RngStream(seed, 0), o);
        return py::dict(py::arg("censored") = r.censored, py::arg("baseline") = r.baseline,
                        py::arg("log_ratio") = r.log_ratio);
      },
      py::arg("model"), py::arg("hidden"), py::arg("start"), py::arg("end"), py::arg("observed"), py::arg("tau"),
      py::arg("seed") = 0, py::arg("samples") = 128, py::arg("points") = 1024,
      "Log-likelihood of the observed events with `hidden` marks censored on [start, end].");

  // Jump processes and generalized hitting times.
  py::class_<JumpProcess, std::shared_ptr<JumpProcess>>(m, "JumpProcess")
      .def_static("from_json",
                  [](const std::string& text) {
                    return from_json<std::shared_ptr<JumpProcess>>(text, "process", [](io::Fields& f) {
                      return std::shared_ptr<JumpProcess>(io::process_from_json(f));
                    });
                  })
      .def_property_readonly("name", &JumpProcess::name)
      .def_property_readonly("dim", &JumpProcess::dim)
      .def_property_readonly("x0", &JumpProcess::x0);

  py::class_<OwnedGht>(m, "HittingTime")
      .def(py::init([](std::shared_ptr<JumpProcess> process, const std::string& text) {
             Ght g = from_json<Ght>(text, "ght", [&](io::Fields& f) { return io::ght_from_json(f, *process); });
             return OwnedGht{std::move(process), std::move(g)};
           }),
           py::arg("process"), py::arg("descriptor"));

  m.def(
      "cdf_estimate",
      [](const OwnedGht& g, const std::vector<double>& grid, std::size_t n, const std::vector<std::string>& methods,
         std::uint64_t seed, bool exact, double dt, int workers) {
        std::vector<HitMethod> ms;
        for (const auto& s : methods) ms.push_back(parse_hit_method(s));
        HitOptions o;
        o.exact = exact;
        o.dt = dt;
        o.workers = workers;
        py::dict out;
        for (const auto& c : cdf_estimate(*g.process, g.ght, grid, n, ms, RngStream(seed, 0), o))
          out[py::str(c.method)] = c.points;
        return out;
      },
      py::arg("hitting_time"), py::arg("grid"), py::arg("n"),
      py::arg("methods") = std::vector<std::string>{"NE", "TR", "IS", "ISP"}, py::arg("seed") = 0,
      py::arg("exact") = false, py::arg("dt") = 0.01, py::arg("workers") = 0,
      "P(T <= t) on the grid, keyed by method.");
  m.def(
      "joint_estimate",
      [](const std::vector<OwnedGht>& gs, const std::vector<double>& times, std::size_t n, const std::string& variant,
         std::uint64_t seed, bool exact, double dt) {
        if (gs.empty()) throw ConfigError("need at least one hitting time");
        std::vector<Ght> ghts;
        for (const auto& g : gs) {
          if (g.process != gs.front().process) throw ConfigError("hitting times must share one process");
          ghts.push_back(g.ght);
        }
        HitOptions o;
        o.exact = exact;
        o.dt = dt;
        const auto& p = *gs.front().process;
        if (variant == "naive") return joint_naive(p, ghts, times, n, RngStream(seed, 0), o);
        if (variant != "ordered" && variant != "unordered")
          throw ConfigError("variant must be ordered, unordered or naive");
        const auto v = variant == "ordered" ? JointVariant::ordered : JointVariant::unordered;
        return joint_estimate(p, ghts, times, n, v, RngStream(seed, 0), o);
      },
      py::arg("hitting_times"), py::arg("times"), py::arg("n"), py::arg("variant") = "unordered", py::arg("seed") = 0,
      py::arg("exact") = false, py::arg("dt") = 0.01, "P(T_i <= t_i for all i).");

  // Experiment harness.
  m.def("commands", &cli::commands);
  m.def(
      "run_command",
      [](const std::string& command, const std::string& config, std::optional<std::string> output,
         std::optional<std::uint64_t> seed, std::optional<int> workers) {
        cli::Invocation inv;
        inv.command = command;
        inv.config = config;
        if (output) inv.output = *output;
        inv.seed = seed;
        inv.workers = workers;
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::execute(inv, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("command"), py::arg("config"), py::arg("output") = py::none(), py::arg("seed") = py::none(),
      py::arg("workers") = py::none(), "Runs a harness subcommand; returns (exit code, CSV text, status line).");
}
