#include "lrq/spec_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace lrq::io {

namespace fs = std::filesystem;

SpecError::SpecError(std::string file, std::string field, const std::string& message)
    : ConfigError((file.empty() ? std::string("<inline>") : file) + (field.empty() ? "" : ": " + field) + ": " +
                  message),
      file_(std::move(file)),
      field_(std::move(field)),
      detail_(message) {}

Doc load_doc(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError(path.string(), "", "cannot open file");
  Doc d;
  d.file = path.string();
  d.dir = path.parent_path();
  try {
    d.json = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SpecError(d.file, "", std::string("malformed JSON: ") + e.what());
  }
  if (!d.json.is_object()) throw SpecError(d.file, "", "top level must be an object");
  return d;
}

Fields::Fields(const Json& object, std::string file, std::string where, fs::path dir)
    : object_(&object), file_(std::move(file)), where_(std::move(where)), dir_(std::move(dir)) {
  if (!object.is_object()) throw SpecError(file_, where_, "expected an object");
}

Fields root(const Doc& doc) { return Fields(doc.json, doc.file, doc.where, doc.dir); }

std::string Fields::path_of(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

void Fields::fail(const std::string& key, const std::string& message) const {
  throw SpecError(file_, key.empty() ? where_ : path_of(key), message);
}

bool Fields::has(const std::string& key) const { return object_->contains(key); }

const Json& Fields::raw(const std::string& key) {
  auto it = object_->find(key);
  if (it == object_->end()) fail(key, "required field missing");
  used_.insert(key);
  return *it;
}

double Fields::number(const std::string& key) {
  const Json& v = raw(key);
  if (!v.is_number()) fail(key, "expected a number");
  return v.get<double>();
}

double Fields::number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

double Fields::extended(const std::string& key, double fallback) {
  if (!has(key)) return fallback;
  const Json& v = raw(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  fail(key, "expected a number, \"inf\" or \"-inf\"");
}

std::int64_t Fields::integer(const std::string& key) {
  const Json& v = raw(key);
  if (!v.is_number_integer()) fail(key, "expected an integer");
  return v.get<std::int64_t>();
}

std::int64_t Fields::integer(const std::string& key, std::int64_t fallback) {
  return has(key) ? integer(key) : fallback;
}

std::uint64_t Fields::unsigned_integer(const std::string& key, std::uint64_t fallback) {
  if (!has(key)) return fallback;
  const Json& v = raw(key);
  if (!v.is_number_unsigned()) fail(key, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

bool Fields::boolean(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  const Json& v = raw(key);
  if (!v.is_boolean()) fail(key, "expected true or false");
  return v.get<bool>();
}

std::string Fields::string(const std::string& key) {
  const Json& v = raw(key);
  if (!v.is_string()) fail(key, "expected a string");
  return v.get<std::string>();
}

std::string Fields::string(const std::string& key, const std::string& fallback) {
  return has(key) ? string(key) : fallback;
}

std::vector<double> Fields::numbers(const std::string& key) {
  const Json& v = raw(key);
  if (!v.is_array()) fail(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(key, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<int> Fields::integers(const std::string& key) {
  const Json& v = raw(key);
  if (!v.is_array()) fail(key, "expected an array of integers");
  std::vector<int> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) fail(key, "expected an array of integers");
    out.push_back(x.get<int>());
  }
  return out;
}

std::vector<std::string> Fields::strings(const std::string& key, std::vector<std::string> fallback) {
  if (!has(key)) return fallback;
  const Json& v = raw(key);
  if (!v.is_array()) fail(key, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) fail(key, "expected an array of strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

std::vector<std::vector<double>> Fields::matrix(const std::string& key) {
  const Json& v = raw(key);
  if (!v.is_array()) fail(key, "expected an array of rows");
  std::vector<std::vector<double>> out;
  for (const auto& row : v) {
    if (!row.is_array()) fail(key, "expected an array of rows");
    std::vector<double> r;
    for (const auto& x : row) {
      if (!x.is_number()) fail(key, "matrix entries must be numbers");
      r.push_back(x.get<double>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

Fields Fields::object(const std::string& key) {
  const Json& v = raw(key);
  if (!v.is_object()) fail(key, "expected an object");
  return Fields(v, file_, path_of(key), dir_);
}

Doc Fields::document(const std::string& key, const char* schema) {
  const Json& v = raw(key);
  if (v.is_string()) {
    fs::path p = v.get<std::string>();
    if (p.is_relative()) p = dir_ / p;
    if (!fs::exists(p)) fail(key, "file not found: " + p.string());
    Doc d = load_doc(p);
    Fields f = root(d);
    check_schema(f, schema, true);
    return d;
  }
  if (!v.is_object()) fail(key, "expected an object or a file path");
  Doc d{v, file_, dir_, path_of(key)};
  Fields f = root(d);
  check_schema(f, schema, false);
  return d;
}

void Fields::finish() const {
  for (const auto& [key, value] : object_->items())
    if (!used_.count(key)) fail(key, "unknown field");
}

void check_schema(Fields& f, const char* schema, bool required) {
  if (!f.has("schema")) {
    if (required) f.fail("schema", std::string("required field missing (expected \"") + schema + "\")");
    return;
  }
  const auto s = f.string("schema");
  if (s != schema) f.fail("schema", "unsupported schema \"" + s + "\" (expected \"" + schema + "\")");
}

namespace {

// Re-raises library validation errors at the field being parsed.
template <class F>
auto located(const Fields& f, const std::string& key, F&& build) {
  try {
    return build();
  } catch (const SpecError&) {
    throw;
  } catch (const ConfigError& e) {
    f.fail(key, e.what());
  }
}

Json matrix_json(const std::vector<std::vector<double>>& m) {
  Json out = Json::array();
  for (const auto& row : m) out.push_back(row);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- discrete

MarkovModel markov_from_json(Fields& f) {
  check_schema(f, kModelSchema, false);
  if (f.string("family") != "markov") f.fail("family", "expected \"markov\"");
  const auto order = f.integer("order");
  const auto vocab = f.integer("vocab");
  auto table = f.numbers("table");
  f.finish();
  return located(f, "table",
                 [&] { return MarkovModel(static_cast<int>(order), static_cast<int>(vocab), std::move(table)); });
}

Json to_json(const MarkovModel& model) {
  return Json{{"schema", kModelSchema},
              {"family", "markov"},
              {"order", model.order()},
              {"vocab", model.vocab_size()},
              {"table", model.table()}};
}

namespace {

std::vector<Symbol> symbols(Fields& f, const std::string& key, int vocab) {
  auto out = f.integers(key);
  for (int s : out)
    if (s < 0 || s >= vocab) f.fail(key, "symbol " + std::to_string(s) + " outside the vocabulary");
  return out;
}

}  // namespace

Query query_from_json(Fields& f, int vocab) {
  check_schema(f, kQuerySchema, false);
  const auto kind = f.string("kind");
  Query q;
  if (kind == "blocks") {
    q.vocab = vocab;
    const Json& blocks = f.raw("blocks");
    if (!blocks.is_array()) f.fail("blocks", "expected an array of blocks");
    for (const auto& block : blocks) {
      if (!block.is_array()) f.fail("blocks", "each block is an array of symbol sets");
      QueryBlock qb;
      for (const auto& set : block) {
        if (!set.is_array()) f.fail("blocks", "each step is an array of symbols");
        std::vector<Symbol> members;
        for (const auto& s : set) {
          if (!s.is_number_integer()) f.fail("blocks", "symbols must be integers");
          members.push_back(s.get<int>());
        }
        qb.push_back(located(f, "blocks", [&] { return SymbolSet(vocab, members); }));
      }
      q.blocks.push_back(std::move(qb));
    }
    f.finish();
    located(f, "blocks", [&] {
      validate_query(q);
      return 0;
    });
    return q;
  }
  QueryParams p;
  QueryKind k;
  if (kind == "first_symbol") {
    k = QueryKind::first_symbol;
    p.x = static_cast<Symbol>(f.integer("x"));
  } else if (kind == "marginal") {
    k = QueryKind::marginal;
    p.x = static_cast<Symbol>(f.integer("x"));
    p.k = static_cast<int>(f.integer("k"));
  } else if (kind == "hit_at") {
    k = QueryKind::hit_at;
    p.a = symbols(f, "a", vocab);
    p.k = static_cast<int>(f.integer("k"));
  } else if (kind == "hit_before") {
    k = QueryKind::hit_before;
    p.a = symbols(f, "a", vocab);
    p.b = symbols(f, "b", vocab);
    p.k = static_cast<int>(f.integer("k"));
  } else if (kind == "count") {
    k = QueryKind::count;
    p.a = symbols(f, "a", vocab);
    p.k = static_cast<int>(f.integer("k"));
    p.n = static_cast<int>(f.integer("n"));
  } else {
    f.fail("kind", "unknown query kind \"" + kind + "\"");
  }
  f.finish();
  return located(f, "kind", [&] {
    Query built = build_query(k, vocab, p);
    validate_query(built);
    return built;
  });
}

// -------------------------------------------------------------------- mtpp

std::unique_ptr<MtppModel> mtpp_from_json(Fields& f) {
  check_schema(f, kModelSchema, false);
  const auto family = f.string("family");
  std::unique_ptr<MtppModel> out;
  if (family == "hawkes") {
    auto mu = f.numbers("mu");
    auto alpha = f.matrix("alpha");
    auto beta = f.matrix("beta");
    f.finish();
    out = located(f, "", [&] {
      return std::unique_ptr<MtppModel>(new HawkesExp(std::move(mu), std::move(alpha), std::move(beta)));
    });
  } else if (family == "self_correcting") {
    auto eta = f.numbers("eta");
    auto delta = f.matrix("delta");
    f.finish();
    out = located(f, "", [&] {
      return std::unique_ptr<MtppModel>(new SelfCorrecting(std::move(eta), std::move(delta)));
    });
  } else if (family == "poisson") {
    if (f.has("times")) {
      auto times = f.numbers("times");
      auto rates = f.matrix("rates");
      f.finish();
      out = located(f, "", [&] {
        return std::unique_ptr<MtppModel>(new PoissonMtpp(std::move(times), std::move(rates)));
      });
    } else {
      auto rates = f.numbers("rates");
      f.finish();
      out = located(f, "", [&] { return std::unique_ptr<MtppModel>(new PoissonMtpp(std::move(rates))); });
    }
  } else {
    f.fail("family", "unknown point-process family \"" + family + "\"");
  }
  return out;
}

Json to_json(const HawkesExp& model) {
  return Json{{"schema", kModelSchema},
              {"family", "hawkes"},
              {"mu", model.mu()},
              {"alpha", matrix_json(model.alpha())},
              {"beta", matrix_json(model.beta())}};
}

Json to_json(const SelfCorrecting& model) {
  return Json{{"schema", kModelSchema},
              {"family", "self_correcting"},
              {"eta", model.eta()},
              {"delta", matrix_json(model.delta())}};
}

Json to_json(const PoissonMtpp& model) {
  Json out{{"schema", kModelSchema}, {"family", "poisson"}};
  if (model.homogeneous()) {
    out["rates"] = model.rates().front();
  } else {
    out["times"] = model.times();
    out["rates"] = matrix_json(model.rates());
  }
  return out;
}

MarkMask mark_set_from_json(const Json& value, int num_marks, const Fields& f, const std::string& key) {
  if (value.is_string()) {
    const auto s = value.get<std::string>();
    if (s == "all") return full_mask(num_marks);
    if (s.size() == static_cast<std::size_t>(num_marks) && s.find_first_not_of("01") == std::string::npos) {
      MarkMask m(num_marks, 0);
      for (int k = 0; k < num_marks; ++k) m[k] = s[k] == '1';
      return m;
    }
    f.fail(key, "mark set must be \"all\", a 0/1 string of length " + std::to_string(num_marks) +
                    ", or an array of marks");
  }
  if (!value.is_array()) f.fail(key, "expected an array of marks");
  std::vector<Mark> marks;
  for (const auto& m : value) {
    if (!m.is_number_integer()) f.fail(key, "marks must be integers");
    const int k = m.get<int>();
    if (k < 0 || k >= num_marks) f.fail(key, "mark " + std::to_string(k) + " out of range");
    marks.push_back(k);
  }
  return mark_mask(num_marks, marks);
}

EventSequence sequence_from_json(Fields& f, int num_marks) {
  check_schema(f, kSequenceSchema, false);
  std::vector<Event> events;
  const Json& ev = f.raw("events");
  if (!ev.is_array()) f.fail("events", "expected an array of [time, mark] pairs");
  for (const auto& e : ev) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number_integer())
      f.fail("events", "each event is a [time, mark] pair");
    events.push_back({e[0].get<double>(), e[1].get<int>()});
  }
  const double end = f.number("window_end", -1.0);
  f.finish();
  return located(f, "events", [&] {
    EventSequence seq(std::move(events), end);
    seq.validate(num_marks);
    return seq;
  });
}

CensorSchedule censor_schedule_from_json(Fields& f, int num_marks) {
  check_schema(f, kScheduleSchema, false);
  auto breakpoints = f.numbers("breakpoints");
  const Json& obs = f.raw("observed");
  if (!obs.is_array()) f.fail("observed", "expected one mark set per interval");
  std::vector<MarkMask> observed;
  for (const auto& m : obs) observed.push_back(mark_set_from_json(m, num_marks, f, "observed"));
  f.finish();
  return located(f, "", [&] {
    CensorSchedule s(std::move(breakpoints), std::move(observed));
    s.validate(num_marks);
    return s;
  });
}

// -------------------------------------------------------------------- jump

std::unique_ptr<JumpProcess> process_from_json(Fields& f) {
  check_schema(f, kModelSchema, false);
  const auto family = f.string("family");
  if (family == "ctmc") {
    auto transition = f.matrix("transition");
    const double rate = f.number("rate", 1.0);
    const auto start = f.integer("start", 0);
    f.finish();
    return located(f, "", [&] {
      return std::unique_ptr<JumpProcess>(new CtmcProcess(std::move(transition), rate, static_cast<int>(start)));
    });
  }
  if (family != "process") f.fail("family", "unknown process family \"" + family + "\"");
  const auto name = f.string("name");
  std::map<std::string, double> params;
  if (f.has("params")) {
    Fields p = f.object("params");
    for (const auto& [key, value] : p.json().items()) params[key] = p.number(key);
    p.finish();
  }
  const auto seed = f.unsigned_integer("seed", 0);
  f.finish();
  return located(f, "params", [&] { return make_example_process(name, params, RngStream(seed, 0)); });
}

Json to_json(const CtmcProcess& process) {
  return Json{{"schema", kModelSchema},
              {"family", "ctmc"},
              {"transition", matrix_json(process.transition())},
              {"rate", process.rate()},
              {"start", process.start()}};
}

Region region_from_json(Fields& f, int dim) {
  auto axis_of = [&] {
    const auto a = f.integer("axis", 0);
    if (a < 0 || a >= dim) f.fail("axis", "axis out of range for a " + std::to_string(dim) + "-d process");
    return static_cast<int>(a);
  };
  Region out;
  if (f.has("at_least")) {
    const double c = f.number("at_least");
    out = Region::at_least(c, dim, axis_of());
  } else if (f.has("below")) {
    const double c = f.number("below");
    out = Region::below(c, dim, axis_of());
  } else if (f.has("vertices")) {
    const auto vs = f.integers("vertices");
    out = Region::vertices(vs);
  } else if (f.has("orthant")) {
    const auto i = f.integer("orthant");
    if (dim != 3) f.fail("orthant", "orthant regions need a 3-d process");
    out = located(f, "orthant", [&] { return GaussHawkesProcess::orthant(static_cast<int>(i)); });
  } else if (f.has("everything")) {
    if (!f.boolean("everything", false)) f.fail("everything", "must be true when present");
    out = Region::everything();
  } else if (f.has("box")) {
    const Json& axes = f.raw("box");
    if (!axes.is_array() || axes.size() > static_cast<std::size_t>(dim))
      f.fail("box", "expected at most one interval per coordinate");
    Box b;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      Fields iv(axes[i], f.file(), f.path_of("box") + "[" + std::to_string(i) + "]", f.dir());
      Interval in;
      in.lo = iv.extended("lo", in.lo);
      in.hi = iv.extended("hi", in.hi);
      in.lo_open = iv.boolean("lo_open", false);
      in.hi_open = iv.boolean("hi_open", false);
      iv.finish();
      b.axes.push_back(in);
    }
    out = Region::box(std::move(b));
  } else if (f.has("union") || f.has("intersect")) {
    const bool is_union = f.has("union");
    const std::string key = is_union ? "union" : "intersect";
    const Json& parts = f.raw(key);
    if (!parts.is_array() || parts.empty()) f.fail(key, "expected a nonempty array of regions");
    for (std::size_t i = 0; i < parts.size(); ++i) {
      Fields pf(parts[i], f.file(), f.path_of(key) + "[" + std::to_string(i) + "]", f.dir());
      Region r = region_from_json(pf, dim);
      out = i == 0 ? r : (is_union ? out.unite(r) : out.intersect(r));
    }
  } else {
    f.fail("", "region needs one of at_least, below, vertices, orthant, everything, box, union, intersect");
  }
  f.finish();
  return out;
}

Ght ght_from_json(Fields& f, const JumpProcess& process) {
  check_schema(f, kGhtSchema, false);
  const int dim = process.dim();
  auto children = [&](const std::string& key) {
    const Json& parts = f.raw(key);
    if (!parts.is_array() || parts.empty()) f.fail(key, "expected a nonempty array of hitting times");
    std::vector<Ght> out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      Fields pf(parts[i], f.file(), f.path_of(key) + "[" + std::to_string(i) + "]", f.dir());
      out.push_back(ght_from_json(pf, process));
    }
    return out;
  };
  auto sub = [&](const std::string& key) {
    Fields pf = f.object(key);
    return ght_from_json(pf, process);
  };
  auto region = [&](const std::string& key) {
    Fields rf = f.object(key);
    return region_from_json(rf, dim);
  };
  Ght out;
  if (f.has("hit")) {
    out = Ght::hit(region("hit"));
  } else if (f.has("min")) {
    out = Ght::min_of(children("min"));
  } else if (f.has("max")) {
    out = Ght::max_of(children("max"));
  } else if (f.has("after")) {
    Region r = region("after");
    out = Ght::after(std::move(r), sub("prereq"));
  } else if (f.has("first_if_after")) {
    Region r = region("first_if_after");
    out = Ght::first_if_after(std::move(r), sub("other"));
  } else if (f.has("first_if_before")) {
    Region r = region("first_if_before");
    out = Ght::first_if_before(std::move(r), sub("other"));
  } else if (f.has("passage")) {
    const double c = f.number("passage");
    const auto x0 = process.x0();
    out = Ght::hit(Region::at_least(c * x0.front(), dim, 0));
  } else if (f.has("canonical")) {
    const auto which = f.string("canonical");
    if (which == "cover") {
      const auto* ctmc = dynamic_cast<const CtmcProcess*>(&process);
      if (!ctmc) f.fail("canonical", "cover time needs a ctmc process");
      out = ctmc->cover_time();
    } else if (which == "exit") {
      const auto* de = dynamic_cast<const DriftExitProcess*>(&process);
      if (!de) f.fail("canonical", "exit time needs the drift_exit process");
      out = de->exit_time();
    } else {
      f.fail("canonical", "unknown canonical hitting time \"" + which + "\" (cover, exit)");
    }
  } else {
    f.fail("", "hitting time needs one of hit, min, max, after, first_if_after, first_if_before, passage, canonical");
  }
  f.finish();
  return out;
}

}  // namespace lrq::io
