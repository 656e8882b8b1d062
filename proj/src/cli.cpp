#include "sktlab/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "sktlab/analysis.hpp"
#include "sktlab/parabolic.hpp"
#include "sktlab/picard.hpp"
#include "sktlab/skt.hpp"
#include "sktlab/snapshot.hpp"
#include "sktlab/sparse.hpp"

namespace sktlab::cli {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Normalization helpers

std::string join(const std::string& ptr, const std::string& key) { return ptr + "/" + key; }

/// Reads keys of one JSON object, filling defaults into `out` and rejecting
/// unknown keys once `finish` is called.
class Section {
 public:
  Section(const Json& in, std::string ptr) : in_(in), ptr_(std::move(ptr)) {
    if (!in_.is_object()) throw ConfigError(where() + "expected an object", ptr_);
  }

  double number(const std::string& key, std::optional<double> def) {
    seen_.insert(key);
    if (!in_.contains(key)) {
      if (!def) throw ConfigError(where() + "missing required key '" + key + "'", join(ptr_, key));
      out[key] = *def;
      return *def;
    }
    const auto& v = in_[key];
    if (!v.is_number() || !std::isfinite(v.get<double>()))
      throw ConfigError(where() + "'" + key + "' must be a finite number", join(ptr_, key));
    out[key] = v.get<double>();
    return v.get<double>();
  }

  /// Like number() but null is kept as "automatic".
  std::optional<double> optional_number(const std::string& key) {
    seen_.insert(key);
    if (!in_.contains(key) || in_[key].is_null()) {
      out[key] = nullptr;
      return std::nullopt;
    }
    return number(key, std::nullopt);
  }

  std::uint64_t count(const std::string& key, std::optional<std::uint64_t> def) {
    seen_.insert(key);
    if (!in_.contains(key)) {
      if (!def) throw ConfigError(where() + "missing required key '" + key + "'", join(ptr_, key));
      out[key] = *def;
      return *def;
    }
    const auto& v = in_[key];
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ConfigError(where() + "'" + key + "' must be a non-negative integer", join(ptr_, key));
    out[key] = v.get<std::uint64_t>();
    return v.get<std::uint64_t>();
  }

  std::string text(const std::string& key, std::optional<std::string> def, const std::vector<std::string>& allowed) {
    seen_.insert(key);
    std::string value;
    if (!in_.contains(key)) {
      if (!def) throw ConfigError(where() + "missing required key '" + key + "'", join(ptr_, key));
      value = *def;
    } else {
      if (!in_[key].is_string()) throw ConfigError(where() + "'" + key + "' must be a string", join(ptr_, key));
      value = in_[key].get<std::string>();
    }
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), value) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(where() + "'" + key + "' must be one of: " + list, join(ptr_, key));
    }
    out[key] = value;
    return value;
  }

  bool flag(const std::string& key, bool def) {
    seen_.insert(key);
    if (!in_.contains(key)) {
      out[key] = def;
      return def;
    }
    if (!in_[key].is_boolean()) throw ConfigError(where() + "'" + key + "' must be a boolean", join(ptr_, key));
    out[key] = in_[key].get<bool>();
    return in_[key].get<bool>();
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> def, std::size_t size) {
    seen_.insert(key);
    std::vector<double> v;
    if (!in_.contains(key)) {
      if (!def) throw ConfigError(where() + "missing required key '" + key + "'", join(ptr_, key));
      v = *def;
    } else {
      const auto& a = in_[key];
      if (!a.is_array()) throw ConfigError(where() + "'" + key + "' must be an array", join(ptr_, key));
      for (const auto& e : a) {
        if (!e.is_number() || !std::isfinite(e.get<double>()))
          throw ConfigError(where() + "'" + key + "' must hold finite numbers", join(ptr_, key));
        v.push_back(e.get<double>());
      }
    }
    if (size != 0 && v.size() != size)
      throw ConfigError(where() + "'" + key + "' must have " + std::to_string(size) + " entries", join(ptr_, key));
    out[key] = v;
    return v;
  }

  /// Sub-object (an empty object when absent).
  const Json& object(const std::string& key) {
    seen_.insert(key);
    static const Json empty = Json::object();
    return in_.contains(key) ? in_[key] : empty;
  }

  bool has(const std::string& key) const { return in_.contains(key); }
  void mark(const std::string& key) { seen_.insert(key); }
  const Json& raw(const std::string& key) const { return in_[key]; }
  std::string pointer(const std::string& key) const { return join(ptr_, key); }

  void finish() const {
    for (auto it = in_.begin(); it != in_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError(where() + "unknown key '" + it.key() + "'", join(ptr_, it.key()));
  }

  Json out = Json::object();

 private:
  std::string where() const { return (ptr_.empty() ? std::string("/") : ptr_) + ": "; }

  const Json& in_;
  std::string ptr_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& msg, const std::string& ptr) {
  if (!ok) throw ConfigError(ptr + ": " + msg, ptr);
}

// ---------------------------------------------------------------------------
// Grids, time axes, profiles

Json normalize_grid(const Json& in, const std::string& ptr) {
  Section s(in, ptr);
  const auto dim = s.count("dim", 2);
  require(dim == 1 || dim == 2, "dim must be 1 or 2", join(ptr, "dim"));
  const std::vector<double> zeros(dim, 0.0), ones(dim, 1.0);
  const auto lo = s.numbers("lo", zeros, dim);
  const auto hi = s.numbers("hi", ones, dim);
  s.mark("cells");
  if (!s.has("cells")) throw ConfigError(ptr + ": missing required key 'cells'", join(ptr, "cells"));
  std::vector<std::uint64_t> cells;
  for (const auto& e : s.raw("cells")) {
    require(e.is_number_integer() && e.get<long long>() >= 2, "cells must be integers >= 2", join(ptr, "cells"));
    cells.push_back(e.get<std::uint64_t>());
  }
  require(cells.size() == dim, "cells must have one entry per axis", join(ptr, "cells"));
  for (std::size_t a = 0; a < dim; ++a) require(hi[a] > lo[a], "hi must exceed lo", join(ptr, "hi"));
  s.out["cells"] = cells;
  s.finish();
  return s.out;
}

Grid build_grid(const Json& g) {
  const auto lo = g["lo"].get<std::vector<double>>();
  const auto hi = g["hi"].get<std::vector<double>>();
  const auto cells = g["cells"].get<std::vector<std::size_t>>();
  if (g["dim"].get<int>() == 1) return Grid::line(lo[0], hi[0], cells[0]);
  return Grid::rect({lo[0], lo[1]}, {hi[0], hi[1]}, {cells[0], cells[1]});
}

Json normalize_time(const Json& in, const std::string& ptr) {
  Section s(in, ptr);
  const double t0 = s.number("t0", 0.0);
  const double T = s.number("T", std::nullopt);
  const auto steps = s.count("steps", std::nullopt);
  require(T > t0, "T must exceed t0", join(ptr, "T"));
  require(steps >= 1, "steps must be positive", join(ptr, "steps"));
  s.finish();
  return s.out;
}

TimeAxis build_axis(const Json& t) {
  return TimeAxis(t["t0"].get<double>(), t["T"].get<double>(), t["steps"].get<std::size_t>());
}

const std::vector<std::string> kProfiles = {"constant", "bump", "checkerboard", "linear", "random"};

Json normalize_profile(const Json& in, const std::string& ptr, std::size_t dim) {
  Section s(in, ptr);
  const auto type = s.text("type", std::nullopt, kProfiles);
  const std::vector<double> zeros(dim, 0.0);
  if (type == "constant") {
    s.number("value", std::nullopt);
  } else if (type == "bump") {
    s.numbers("center", std::vector<double>(dim, 0.5), dim);
    const double r = s.number("radius", 0.25);
    require(r > 0.0, "radius must be positive", join(ptr, "radius"));
    s.number("amplitude", 1.0);
    s.number("base", 0.0);
  } else if (type == "checkerboard") {
    const auto tiles = s.count("tiles", 4);
    require(tiles >= 1, "tiles must be positive", join(ptr, "tiles"));
    s.number("low", 0.0);
    s.number("high", 1.0);
  } else if (type == "linear") {
    s.number("base", 0.0);
    s.numbers("slope", std::vector<double>(dim, 1.0), dim);
  } else {
    s.count("seed", std::nullopt);
    const double lo = s.number("low", 0.0);
    const double hi = s.number("high", 1.0);
    require(hi >= lo, "high must not be below low", join(ptr, "high"));
  }
  s.finish();
  return s.out;
}

Field build_profile(const Json& p, const Grid& g, std::uint64_t scenario_seed) {
  const auto type = p["type"].get<std::string>();
  if (type == "constant") return Field::constant(g, p["value"].get<double>());
  if (type == "bump") {
    const auto c = p["center"].get<std::vector<double>>();
    const double r = p["radius"].get<double>();
    const double amp = p["amplitude"].get<double>();
    const double base = p["base"].get<double>();
    return Field::from_function(g, [&](Point x) {
      double d2 = 0.0;
      for (int a = 0; a < g.dim(); ++a) d2 += (x[a] - c[a]) * (x[a] - c[a]);
      const double d = std::sqrt(d2);
      if (d >= r) return base;
      const double cs = std::cos(std::numbers::pi * d / (2.0 * r));
      return base + amp * cs * cs;
    });
  }
  if (type == "checkerboard") {
    const double tiles = p["tiles"].get<double>();
    const double low = p["low"].get<double>();
    const double high = p["high"].get<double>();
    return Field::from_function(g, [&](Point x) {
      long parity = 0;
      for (int a = 0; a < g.dim(); ++a) {
        const double rel = (x[a] - g.lo(a)) / (g.hi(a) - g.lo(a));
        parity += static_cast<long>(std::floor(rel * tiles));
      }
      return parity % 2 == 0 ? low : high;
    });
  }
  if (type == "linear") {
    const double base = p["base"].get<double>();
    const auto slope = p["slope"].get<std::vector<double>>();
    return Field::from_function(g, [&](Point x) {
      double v = base;
      for (int a = 0; a < g.dim(); ++a) v += slope[a] * (x[a] - g.lo(a));
      return v;
    });
  }
  std::mt19937_64 rng(p["seed"].get<std::uint64_t>() ^ (scenario_seed * 0x9E3779B97F4A7C15ULL));
  std::uniform_real_distribution<double> dist(p["low"].get<double>(), p["high"].get<double>());
  std::vector<double> v(g.size());
  for (auto& e : v) e = dist(rng);
  return Field(g, std::move(v));
}

SpaceTimeField constant_in_time(const Field& f, const TimeAxis& axis) {
  return SpaceTimeField(axis, std::vector<Field>(axis.slices(), f));
}

const std::vector<std::string> kCoefficientProfiles = {"identity", "diagonal", "oscillatory"};

Json normalize_coefficient(const Json& in, const std::string& ptr) {
  Section s(in, ptr);
  const auto type = s.text("type", "identity", kCoefficientProfiles);
  if (type == "diagonal") {
    s.number("xx", 1.0);
    s.number("yy", 1.0);
  } else if (type == "oscillatory") {
    const double amp = s.number("amplitude", 0.3);
    require(amp >= 0.0 && amp < 1.0, "amplitude must lie in [0, 1)", join(ptr, "amplitude"));
    const double freq = s.number("frequency", 4.0);
    require(freq > 0.0, "frequency must be positive", join(ptr, "frequency"));
  }
  s.finish();
  return s.out;
}

TensorField build_coefficient(const Json& c, const Grid& g, double ellipticity) {
  const auto type = c["type"].get<std::string>();
  if (type == "identity") return TensorField::identity(g, ellipticity);
  if (type == "diagonal") {
    const SymMat m{c["xx"].get<double>(), 0.0, c["yy"].get<double>()};
    return TensorField::from_function(g, ellipticity, [&](Point) { return m; });
  }
  const double amp = c["amplitude"].get<double>();
  const double freq = c["frequency"].get<double>();
  return TensorField::from_function(g, ellipticity, [&](Point x) {
    double s = std::sin(2.0 * std::numbers::pi * freq * x[0]);
    if (g.dim() == 2) s *= std::sin(2.0 * std::numbers::pi * freq * x[1]);
    const double d = 1.0 + amp * s;
    return SymMat{d, 0.0, d};
  });
}

Json normalize_model(const Json& in, const std::string& ptr) {
  Section s(in, ptr);
  ModelParams m;
  m.alpha = s.number("alpha", 0.0);
  m.lambda = s.number("lambda", 1.0);
  m.theta = s.number("theta", 1.0);
  m.ellipticity = s.number("ellipticity", 1.0);
  s.finish();
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(ptr + ": " + e.what(), ptr);
  }
  return s.out;
}

ModelParams model_from(const Json& p) {
  ModelParams m;
  m.alpha = p["alpha"].get<double>();
  m.lambda = p["lambda"].get<double>();
  m.theta = p["theta"].get<double>();
  m.ellipticity = p["ellipticity"].get<double>();
  return m;
}

Json normalize_skt(const Json& in, const std::string& ptr, std::vector<std::string>& warnings) {
  Section s(in, ptr);
  SKTParams p;
  p.d1 = s.number("d1", p.d1);
  p.d2 = s.number("d2", p.d2);
  p.a11 = s.number("a11", p.a11);
  p.a12 = s.number("a12", p.a12);
  p.a22 = s.number("a22", p.a22);
  p.a1 = s.number("a1", p.a1);
  p.a2 = s.number("a2", p.a2);
  p.b1 = s.number("b1", p.b1);
  p.b2 = s.number("b2", p.b2);
  p.c1 = s.number("c1", p.c1);
  p.c2 = s.number("c2", p.c2);
  if (s.has("a21")) {
    const double a21 = s.number("a21", 0.0);
    if (a21 != 0.0) warnings.push_back("a21 is not supported by the restricted system and is ignored");
  }
  s.finish();
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(ptr + ": " + e.what(), ptr);
  }
  if (p.a11 == 0.0) warnings.push_back("a11 = 0: the global existence result assumes a11 > 0");
  return s.out;
}

SKTParams skt_from(const Json& p) {
  SKTParams s;
  s.d1 = p["d1"].get<double>();
  s.d2 = p["d2"].get<double>();
  s.a11 = p["a11"].get<double>();
  s.a12 = p["a12"].get<double>();
  s.a22 = p["a22"].get<double>();
  s.a1 = p["a1"].get<double>();
  s.a2 = p["a2"].get<double>();
  s.b1 = p["b1"].get<double>();
  s.b2 = p["b2"].get<double>();
  s.c1 = p["c1"].get<double>();
  s.c2 = p["c2"].get<double>();
  return s;
}

Json normalize_picard(const Json& in, const std::string& ptr) {
  Section s(in, ptr);
  PicardConfig c;
  c.max_iterations = s.count("max_iterations", c.max_iterations);
  c.l2_tolerance = s.number("l2_tolerance", c.l2_tolerance);
  c.relaxation = s.number("relaxation", c.relaxation);
  s.text("start", "datum", {"datum", "zero", "upper"});
  c.solve_tolerance = s.number("solve_tolerance", c.solve_tolerance);
  s.finish();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(ptr + ": " + e.what(), ptr);
  }
  return s.out;
}

PicardConfig picard_from(const Json& p) {
  PicardConfig c;
  c.max_iterations = p["max_iterations"].get<std::size_t>();
  c.l2_tolerance = p["l2_tolerance"].get<double>();
  c.relaxation = p["relaxation"].get<double>();
  const auto start = p["start"].get<std::string>();
  c.start = start == "zero" ? StartIterate::zero : start == "upper" ? StartIterate::upper : StartIterate::datum;
  c.solve_tolerance = p["solve_tolerance"].get<double>();
  return c;
}

Json normalize_options(const Json& in, const std::string& ptr, std::size_t dim) {
  Section s(in, ptr);
  const double p = s.number("p", 4.0);
  require(p > 2.0, "p must exceed 2", join(ptr, "p"));
  const double tf = s.number("tbar_fraction", 0.5);
  require(tf > 0.0 && tf < 1.0, "tbar_fraction must lie in (0, 1)", join(ptr, "tbar_fraction"));
  const double p0 = s.number("p0", 4.0);
  require(p0 > 2.0, "p0 must exceed 2", join(ptr, "p0"));
  const double r = s.number("bmo_radius", 0.25);
  require(r > 0.0, "bmo_radius must be positive", join(ptr, "bmo_radius"));
  const auto threads = s.count("threads", 1);
  require(threads >= 1, "threads must be positive", join(ptr, "threads"));
  {
    const std::string lp = join(ptr, "level_set");
    Section l(s.object("level_set"), lp);
    require(l.number("delta", 0.1) > 0.0, "delta must be positive", join(lp, "delta"));
    require(l.number("N", 2.0) > 1.0, "N must exceed 1", join(lp, "N"));
    require(l.number("q", 2.0) > 1.0, "q must exceed 1", join(lp, "q"));
    l.count("j_max", 12);
    l.finish();
    s.out["level_set"] = l.out;
  }
  {
    const std::string dp = join(ptr, "degiorgi");
    Section d(s.object("degiorgi"), dp);
    d.mark("center");
    if (d.has("center") && !d.raw("center").is_null()) {
      const auto c = d.numbers("center", std::nullopt, dim);
      require(c.size() == 1 || c.size() == 2, "center must have one entry per axis", join(dp, "center"));
    } else {
      d.out["center"] = nullptr;
    }
    d.optional_number("time");
    auto radius = d.optional_number("radius");
    if (radius) require(*radius > 0.0, "radius must be positive", join(dp, "radius"));
    const auto j = d.count("j_max", 20);
    require(j <= kMaxDeGiorgiLevel, "j_max at most " + std::to_string(kMaxDeGiorgiLevel), join(dp, "j_max"));
    d.number("m0", 1.0);
    d.number("m1", 1.0);
    d.finish();
    s.out["degiorgi"] = d.out;
  }
  s.finish();
  return s.out;
}

const std::vector<std::string> kScalarDiagnostics = {"energy", "estimate_ratio", "maximal", "bmo", "level_set"};
const std::vector<std::string> kSKTDiagnostics = {"v_max_over_M0", "mass_gronwall", "blowup_monitor",
                                                  "gradient_bound"};
const std::vector<std::string> kStoredDiagnostics = {"norms", "estimate_ratio", "maximal", "level_set", "degiorgi"};

Json normalize_diagnostics(const Json& in, const std::string& ptr, const std::vector<std::string>& allowed) {
  require(in.is_array(), "expected an array of diagnostic names", ptr);
  Json out = Json::array();
  std::set<std::string> seen;
  for (const auto& e : in) {
    require(e.is_string(), "diagnostic names must be strings", ptr);
    const auto name = e.get<std::string>();
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(ptr + ": unknown diagnostic '" + name + "' (allowed: " + list + ")", ptr);
    }
    require(seen.insert(name).second, "diagnostic '" + name + "' listed twice", ptr);
    out.push_back(name);
  }
  return out;
}

/// Builds every field once so invalid data surface as configuration errors.
void dry_build(const Json& doc) {
  const auto kind = doc["kind"].get<std::string>();
  if (kind == "diagnostics-only") return;
  const Grid g = build_grid(doc["grid"]);
  const std::uint64_t seed = doc["seed"].get<std::uint64_t>();
  auto field = [&](const char* ptr, const Json& prof) {
    try {
      return build_profile(prof, g, seed);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(ptr) + ": " + e.what(), ptr);
    }
  };
  if (kind == "scalar-model") {
    const auto m = model_from(doc["params"]);
    try {
      build_coefficient(doc["coefficient"], g, m.ellipticity);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("/coefficient: ") + e.what() + " (raise params.ellipticity?)", "/coefficient");
    }
    const Field u0 = field("/initial/u", doc["initial"]["u"]);
    require(u0.min() * m.lambda >= 0.0 && u0.max() * m.lambda <= 1.0,
            "initial datum must satisfy 0 <= lambda*u0 <= 1", "/initial/u");
    const Field c = field("/forcing", doc["forcing"]);
    require(c.min() >= 0.0, "forcing c must be non-negative", "/forcing");
  } else {
    const Field u0 = field("/initial/u", doc["initial"]["u"]);
    const Field v0 = field("/initial/v", doc["initial"]["v"]);
    require(u0.min() >= 0.0, "initial u must be non-negative", "/initial/u");
    require(v0.min() >= 0.0, "initial v must be non-negative", "/initial/v");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario parsing

Scenario parse_scenario(const Json& in, const fs::path& base_dir) {
  Scenario sc;
  sc.base_dir = base_dir;
  Section s(in, "");
  const auto kind = s.text("kind", std::nullopt, {"scalar-model", "skt", "diagnostics-only"});
  s.count("seed", 0);

  std::size_t dim = 0;  // unknown until stored fields are read
  if (kind == "diagnostics-only") {
    Section i(s.object("input"), "/input");
    s.mark("input");
    if (!s.has("input")) throw ConfigError("/: missing required key 'input'", "/input");
    i.text("dir", std::nullopt, {});
    i.text("stem", "u", {});
    i.finish();
    s.out["input"] = i.out;
    s.out["params"] = normalize_model(s.object("params"), "/params");
    s.out["forcing"] = normalize_profile(
        s.has("forcing") ? s.object("forcing") : Json{{"type", "constant"}, {"value", 0.0}}, "/forcing", 2);
  } else {
    if (!s.has("grid")) throw ConfigError("/: missing required key 'grid'", "/grid");
    if (!s.has("time")) throw ConfigError("/: missing required key 'time'", "/time");
    s.out["grid"] = normalize_grid(s.object("grid"), "/grid");
    dim = s.out["grid"]["dim"].get<std::size_t>();
    s.out["time"] = normalize_time(s.object("time"), "/time");
    if (kind == "scalar-model") {
      s.out["params"] = normalize_model(s.object("params"), "/params");
      s.out["coefficient"] = normalize_coefficient(s.object("coefficient"), "/coefficient");
      Section i(s.object("initial"), "/initial");
      s.mark("initial");
      if (!i.has("u")) throw ConfigError("/initial: missing required key 'u'", "/initial/u");
      i.mark("u");
      i.out["u"] = normalize_profile(i.raw("u"), "/initial/u", dim);
      i.finish();
      s.out["initial"] = i.out;
      s.out["forcing"] = normalize_profile(
          s.has("forcing") ? s.object("forcing") : Json{{"type", "constant"}, {"value", 0.0}}, "/forcing", dim);
      s.out["picard"] = normalize_picard(s.object("picard"), "/picard");
    } else {
      s.out["params"] = normalize_skt(s.object("params"), "/params", sc.warnings);
      Section i(s.object("initial"), "/initial");
      s.mark("initial");
      for (const char* key : {"u", "v"}) {
        if (!i.has(key)) throw ConfigError(std::string("/initial: missing required key '") + key + "'",
                                           std::string("/initial/") + key);
        i.mark(key);
        i.out[key] = normalize_profile(i.raw(key), std::string("/initial/") + key, dim);
      }
      i.finish();
      s.out["initial"] = i.out;
    }
  }
  // Sub-objects consumed through object() above are marked there.
  for (const char* key : {"params", "coefficient", "forcing", "picard", "grid", "time"}) s.mark(key);
  if (kind == "diagnostics-only") {
    for (const char* key : {"grid", "time", "coefficient", "picard"})
      if (s.has(key)) throw ConfigError(std::string("/: '") + key + "' is not used by diagnostics-only scenarios",
                                        std::string("/") + key);
  } else if (kind == "skt") {
    for (const char* key : {"coefficient", "forcing", "picard"})
      if (s.has(key)) throw ConfigError(std::string("/: '") + key + "' is not used by skt scenarios",
                                        std::string("/") + key);
  }

  const auto& allowed = kind == "scalar-model" ? kScalarDiagnostics
                        : kind == "skt"        ? kSKTDiagnostics
                                               : kStoredDiagnostics;
  s.mark("diagnostics");
  s.out["diagnostics"] =
      normalize_diagnostics(s.has("diagnostics") ? s.raw("diagnostics") : Json::array(), "/diagnostics", allowed);
  s.out["options"] = normalize_options(s.object("options"), "/options", dim);
  s.mark("options");
  {
    Section o(s.object("output"), "/output");
    s.mark("output");
    o.flag("fields", false);
    o.finish();
    s.out["output"] = o.out;
  }
  s.finish();

  // Canonical key order.
  Json doc;
  for (const char* key : {"kind", "seed", "grid", "time", "input", "params", "coefficient", "initial", "forcing",
                          "picard", "diagnostics", "options", "output"})
    if (s.out.contains(key)) doc[key] = s.out[key];
  dry_build(doc);
  sc.doc = std::move(doc);
  return sc;
}

Json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string raw = ss.str();
  try {
    return Json::parse(raw);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, raw.size()); ++i)
      if (raw[i] == '\n') ++line;
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + e.what());
  }
}

std::string describe(const ConfigError& e, const fs::path& path, const std::string& raw) {
  std::size_t line = 0;
  const auto slash = e.pointer().find_last_of('/');
  const std::string key = slash == std::string::npos ? e.pointer() : e.pointer().substr(slash + 1);
  if (!key.empty()) {
    const auto pos = raw.find("\"" + key + "\"");
    if (pos != std::string::npos) line = 1 + std::count(raw.begin(), raw.begin() + static_cast<long>(pos), '\n');
  }
  std::string out = path.string();
  if (line > 0) out += ":" + std::to_string(line);
  return out + ": " + e.what();
}

// ---------------------------------------------------------------------------
// Runs

namespace {

Json invariant(const std::string& name, double value, double limit, bool upper = true) {
  const bool pass = upper ? value <= limit : value >= limit;
  return Json{{"name", name},
              {"value", value},
              {"limit", limit},
              {"kind", upper ? "max" : "min"},
              {"margin", upper ? limit - value : value - limit},
              {"pass", pass}};
}

std::string rel(const fs::path& p, const fs::path& base) { return fs::relative(p, base).generic_string(); }

void add_files(Json& manifest, const std::vector<fs::path>& files, const fs::path& base) {
  for (const auto& f : files) manifest.push_back(rel(f, base));
}

SpaceTimeField squared(const SpaceTimeField& f) {
  std::vector<Field> out;
  for (std::size_t k = 0; k < f.slices(); ++k) {
    std::vector<double> v(f.slice(k).values().begin(), f.slice(k).values().end());
    for (auto& e : v) e *= e;
    out.emplace_back(f.grid(), std::move(v));
  }
  return SpaceTimeField(f.axis(), std::move(out));
}

MaximalConfig maximal_config(const Grid& g, const Json& options) {
  auto cfg = MaximalConfig::dyadic(g);
  cfg.threads = options["threads"].get<std::size_t>();
  return cfg;
}

Json maximal_diagnostic(const SpaceTimeField& u, const Json& options, const fs::path& out_dir, bool fields,
                        Json& manifest) {
  const auto cfg = maximal_config(u.grid(), options);
  const auto m = parabolic_maximal(u, std::nullopt, cfg);
  double dominated = 0.0;  // max(|u| - Mu), <= 0 by construction
  for (std::size_t k = 1; k < u.slices(); ++k)
    for (std::size_t i = 0; i < u.grid().size(); ++i)
      dominated = std::max(dominated, std::abs(u.slice(k)[i]) - m.slice(k)[i]);
  Json d{{"radii", cfg.radii}, {"max", m.max()}, {"l2", lp_norm(m, 2.0)}, {"pointwise_excess", dominated}};
  if (fields) add_files(manifest, write_space_time(out_dir / "fields", "maximal", m), out_dir);
  return d;
}

Json level_set_diagnostic(const SpaceTimeField& u, const Json& options, Json& invariants) {
  const auto& ls = options["level_set"];
  const auto m = parabolic_maximal(squared(u), std::nullopt, maximal_config(u.grid(), options));
  const auto r = level_set_sum_from_maximal(m, ls["delta"].get<double>(), ls["N"].get<double>(),
                                            ls["q"].get<double>(), ls["j_max"].get<std::size_t>());
  invariants.push_back(invariant("level_set_sum_le_bound", r.sum, r.bound * (1.0 + 1e-12) + 1e-300));
  return Json{{"delta", ls["delta"]}, {"N", ls["N"]}, {"q", ls["q"]}, {"j_max", ls["j_max"]},
              {"sum", r.sum},         {"bound", r.bound}};
}

Json estimate_diagnostic(const SpaceTimeField& u, const ModelParams& m, const SpaceTimeField& c,
                         const Json& options) {
  const double p = options["p"].get<double>();
  const auto& axis = u.axis();
  const double tbar = axis.t0() + options["tbar_fraction"].get<double>() * (axis.T() - axis.t0());
  return Json{{"p", p}, {"tbar", tbar}, {"ratio", estimate_ratio(u, m, c, p, tbar)}};
}

struct Outcome {
  Json metrics = Json::object();
  Json invariants = Json::array();
  Json diagnostics = Json::object();
  Json files = Json::array();
};

void run_scalar(const Scenario& sc, const fs::path& out_dir, Outcome& o) {
  const auto& doc = sc.doc;
  const Grid g = build_grid(doc["grid"]);
  const TimeAxis axis = build_axis(doc["time"]);
  const auto m = model_from(doc["params"]);
  const std::uint64_t seed = doc["seed"].get<std::uint64_t>();
  const TensorField a = build_coefficient(doc["coefficient"], g, m.ellipticity);
  const Field u0 = build_profile(doc["initial"]["u"], g, seed);
  const SpaceTimeField c = constant_in_time(build_profile(doc["forcing"], g, seed), axis);
  const auto& options = doc["options"];

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t iterates = 0;
  auto observer = [&](std::size_t, const SpaceTimeField& w) {
    ++iterates;
    lo = std::min(lo, m.lambda * w.min());
    hi = std::max(hi, m.lambda * w.max());
  };
  const auto res = picard_solve(m, a, c, u0, picard_from(doc["picard"]), nullptr, observer);
  const auto& u = res.u;

  o.metrics["picard_iterations"] = res.gaps.size();
  o.metrics["gaps"] = res.gaps;
  o.metrics["final_gap"] = res.gaps.back();
  o.metrics["min_u"] = u.min();
  o.metrics["max_u"] = u.max();
  o.metrics["iterate_lambda_u_min"] = lo;
  o.metrics["iterate_lambda_u_max"] = hi;
  o.invariants.push_back(invariant("iterate_lambda_u_min", lo, -1e-10, false));
  o.invariants.push_back(invariant("iterate_lambda_u_max", hi, 1.0 + 1e-10));
  o.invariants.push_back(invariant("picard_final_gap", res.gaps.back(), doc["picard"]["l2_tolerance"].get<double>()));

  const bool fields = doc["output"]["fields"].get<bool>();
  if (fields) add_files(o.files, write_space_time(out_dir / "fields", "u", u), out_dir);

  for (const auto& name_j : doc["diagnostics"]) {
    const auto name = name_j.get<std::string>();
    if (name == "energy") {
      const auto e = energy_report(u, c, u0);
      o.diagnostics[name] = Json{{"sup_l2_sq", e.sup_l2_sq},   {"gradient_sq", e.gradient_sq},
                                 {"lhs", e.lhs},               {"domain_measure", e.domain_measure},
                                 {"reaction_l2_sq", e.reaction_l2_sq}, {"datum_l2_sq", e.datum_l2_sq},
                                 {"rhs_sum", e.rhs_sum()},     {"ratio", e.lhs / e.rhs_sum()}};
    } else if (name == "estimate_ratio") {
      o.diagnostics[name] = estimate_diagnostic(u, m, c, options);
    } else if (name == "maximal") {
      o.diagnostics[name] = maximal_diagnostic(u, options, out_dir, fields, o.files);
    } else if (name == "bmo") {
      const double R = options["bmo_radius"].get<double>();
      o.diagnostics[name] = Json{{"R", R}, {"value", bmo_seminorm(a, axis, R)}};
    } else if (name == "level_set") {
      o.diagnostics[name] = level_set_diagnostic(u, options, o.invariants);
    }
  }
}

void run_skt(const Scenario& sc, const fs::path& out_dir, Outcome& o) {
  const auto& doc = sc.doc;
  const Grid g = build_grid(doc["grid"]);
  const TimeAxis axis = build_axis(doc["time"]);
  const auto p = skt_from(doc["params"]);
  const std::uint64_t seed = doc["seed"].get<std::uint64_t>();
  const Field u0 = build_profile(doc["initial"]["u"], g, seed);
  const Field v0 = build_profile(doc["initial"]["v"], g, seed);
  const double p0 = doc["options"]["p0"].get<double>();

  const auto state = skt_run(p, u0, v0, axis);
  const double m0 = m0_bound(p, v0);
  o.metrics["M0"] = m0;
  o.metrics["min_u"] = state.u.min();
  o.metrics["max_u"] = state.u.max();
  o.metrics["min_v"] = state.v.min();
  o.metrics["max_v"] = state.v.max();
  o.invariants.push_back(invariant("min_u", state.u.min(), kNegativityFloor, false));
  o.invariants.push_back(invariant("min_v", state.v.min(), kNegativityFloor, false));

  const auto rows = monitor_rows(state, p0);
  write_file_atomic(out_dir / "monitor.csv", monitor_csv(rows));
  o.files.push_back("monitor.csv");
  if (doc["output"]["fields"].get<bool>()) {
    add_files(o.files, write_space_time(out_dir / "fields", "u", state.u), out_dir);
    add_files(o.files, write_space_time(out_dir / "fields", "v", state.v), out_dir);
  }

  for (const auto& name_j : doc["diagnostics"]) {
    const auto name = name_j.get<std::string>();
    if (name == "v_max_over_M0") {
      const double r = state.v.max() / m0;
      o.diagnostics[name] = Json{{"value", r}, {"M0", m0}};
      o.invariants.push_back(invariant("v_max_over_M0", r, 1.0 + 1e-10));
    } else if (name == "mass_gronwall") {
      const double mass0 = integrate(u0);
      double worst = 0.0;
      for (std::size_t k = 0; k < state.u.slices(); ++k) {
        const double bound = std::exp(p.a1 * (axis.time(k) - axis.t0())) * mass0 * (1.0 + 5.0 * axis.dt());
        const double mass = integrate(state.u.slice(k));
        worst = std::max(worst, bound > 0.0 ? mass / bound : (mass > 0.0 ? INFINITY : 0.0));
      }
      o.diagnostics[name] = Json{{"max_mass_over_bound", worst}};
      o.invariants.push_back(invariant("mass_gronwall", worst, 1.0));
    } else if (name == "blowup_monitor") {
      const auto series = blowup_monitor(state, p0);
      const std::size_t quarter = static_cast<std::size_t>(std::llround(static_cast<double>(axis.steps()) / 4.0));
      double late = 0.0;
      bool finite = true;
      for (std::size_t k = 0; k < series.size(); ++k) {
        finite = finite && std::isfinite(series[k]);
        if (2 * k >= axis.steps()) late = std::max(late, series[k]);
      }
      const double ratio = series[quarter] > 0.0 ? late / series[quarter] : (late > 0.0 ? INFINITY : 0.0);
      o.diagnostics[name] = Json{{"p0", p0},
                                 {"at_quarter", series[quarter]},
                                 {"max_second_half", late},
                                 {"ratio", ratio},
                                 {"finite", finite},
                                 {"max", *std::max_element(series.begin(), series.end())}};
      o.invariants.push_back(invariant("no_blowup_ratio", finite ? ratio : INFINITY, 3.0));
    } else if (name == "gradient_bound") {
      const double gv = gradient_lp_norm(state.v, 4.0);
      const double ul = lp_norm(state.u, 4.0);
      o.diagnostics[name] = Json{{"grad_v_l4", gv}, {"u_l4", ul}, {"ratio", gv / (1.0 + ul)}};
    }
  }
}

void run_stored(const Scenario& sc, const fs::path& out_dir, Outcome& o) {
  const auto& doc = sc.doc;
  fs::path dir = doc["input"]["dir"].get<std::string>();
  if (dir.is_relative()) dir = sc.base_dir / dir;
  const auto u = read_space_time(dir, doc["input"]["stem"].get<std::string>());
  const auto m = model_from(doc["params"]);
  const auto& options = doc["options"];
  const Grid& g = u.grid();
  const TimeAxis& axis = u.axis();
  o.metrics["cells"] = g.size();
  o.metrics["slices"] = u.slices();
  const bool fields = doc["output"]["fields"].get<bool>();

  for (const auto& name_j : doc["diagnostics"]) {
    const auto name = name_j.get<std::string>();
    if (name == "norms") {
      o.diagnostics[name] = Json{{"l2", lp_norm(u, 2.0)},
                                 {"l4", lp_norm(u, 4.0)},
                                 {"grad_l2", gradient_lp_norm(u, 2.0)},
                                 {"min", u.min()},
                                 {"max", u.max()}};
    } else if (name == "estimate_ratio") {
      const auto c = constant_in_time(build_profile(doc["forcing"], g, doc["seed"].get<std::uint64_t>()), axis);
      o.diagnostics[name] = estimate_diagnostic(u, m, c, options);
    } else if (name == "maximal") {
      o.diagnostics[name] = maximal_diagnostic(u, options, out_dir, fields, o.files);
    } else if (name == "level_set") {
      o.diagnostics[name] = level_set_diagnostic(u, options, o.invariants);
    } else if (name == "degiorgi") {
      const auto& d = options["degiorgi"];
      Point center{0.0, 0.0};
      double max_r = std::numeric_limits<double>::infinity();
      for (int a = 0; a < g.dim(); ++a) {
        center[a] = d["center"].is_null() ? 0.5 * (g.lo(a) + g.hi(a)) : d["center"][a].get<double>();
        max_r = std::min({max_r, center[a] - g.lo(a), g.hi(a) - center[a]});
      }
      const double time = d["time"].is_null() ? 0.5 * (axis.t0() + axis.T()) : d["time"].get<double>();
      max_r = std::min({max_r, std::sqrt(time - axis.t0()), std::sqrt(axis.T() - time)});
      const double radius = d["radius"].is_null() ? max_r : d["radius"].get<double>();
      const ParabolicCube cube{center, time, radius, CubeVariant::centered};
      DeGiorgiConstants k;
      k.n = g.dim();
      k.ellipticity = m.ellipticity;
      k.m0 = d["m0"].get<double>();
      k.m1 = d["m1"].get<double>();
      k.theta = m.theta;
      k.c0 = calibrate_sobolev_constant(g, axis, cube, g.dim());
      const double K = degiorgi_level(u, cube, k);
      Json out{{"center", std::vector<double>(center.begin(), center.begin() + g.dim())},
               {"time", time},
               {"radius", radius},
               {"C0", k.c0},
               {"C2", degiorgi_c2(k)},
               {"K", K}};
      if (K > 0.0) {
        const auto t = degiorgi_trace(u, cube, K, d["j_max"].get<std::size_t>(), k);
        out["levels"] = t.levels;
        out["radii"] = t.radii;
        out["energies"] = t.energies;
        out["r"] = t.r;
        out["mu"] = t.mu;
        out["A"] = t.A;
        out["B"] = t.B;
        out["threshold"] = t.threshold;
        out["fitted_A"] = t.fitted_A;
        out["exceed_inner"] = t.exceed_inner;
        o.invariants.push_back(invariant("degiorgi_exceed_inner", static_cast<double>(t.exceed_inner), 0.0));
      }
      o.diagnostics[name] = out;
    }
  }
}

}  // namespace

RunResult run_scenario(const Scenario& sc, const fs::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  Outcome o;
  Json failure;
  const auto kind = sc.doc["kind"].get<std::string>();
  try {
    if (kind == "scalar-model") run_scalar(sc, out_dir, o);
    else if (kind == "skt") run_skt(sc, out_dir, o);
    else run_stored(sc, out_dir, o);
  } catch (const BlowupError& e) {
    failure = Json{{"type", "blowup"}, {"what", e.what()}, {"slice", e.slice()}};
  } catch (const ConvergenceError& e) {
    failure = Json{{"type", "no_convergence"}, {"what", e.what()}, {"gaps", e.gaps()}};
  } catch (const SolveError& e) {
    failure = Json{{"type", "linear_solve"}, {"what", e.what()}, {"residual", e.residual()}};
  } catch (const std::domain_error& e) {
    failure = Json{{"type", "domain"}, {"what", e.what()}};
  }

  RunResult r;
  bool all_pass = true;
  for (const auto& inv : o.invariants) all_pass = all_pass && inv["pass"].get<bool>();
  std::string status = "ok";
  if (!failure.is_null()) {
    status = "solver_abort";
    r.exit_code = kExitSolver;
  } else if (!all_pass) {
    status = "invariant_failure";
    r.exit_code = kExitInvariant;
  }
  Json report;
  report["status"] = status;
  report["scenario"] = sc.doc;
  report["warnings"] = sc.warnings;
  report["invariants"] = o.invariants;
  report["metrics"] = o.metrics;
  report["diagnostics"] = o.diagnostics;
  if (!failure.is_null()) report["failure"] = failure;
  o.files.push_back("report.json");
  report["files"] = o.files;
  report["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file_atomic(out_dir / "report.json", report.dump(2) + "\n");
  r.report = std::move(report);
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<SweepPoint> expand_sweep(const Json& sweep, const fs::path& base_dir, std::optional<std::uint64_t> seed) {
  Section s(sweep, "");
  s.mark("base");
  s.mark("grid");
  s.mark("aggregate");
  if (!s.has("base")) throw ConfigError("/: missing required key 'base'", "/base");
  if (!s.has("grid")) throw ConfigError("/: missing required key 'grid'", "/grid");
  s.finish();
  const Json& grid = s.raw("grid");
  require(grid.is_object() && !grid.empty(), "grid must be a non-empty object of pointer -> values", "/grid");
  if (s.has("aggregate")) {
    const Json& agg = s.raw("aggregate");
    require(agg.is_array(), "aggregate must be an array", "/aggregate");
    for (std::size_t i = 0; i < agg.size(); ++i) {
      const std::string ptr = "/aggregate/" + std::to_string(i);
      Section a(agg[i], ptr);
      a.text("name", std::nullopt, {});
      const auto metric = a.text("metric", std::nullopt, {});
      require(!metric.empty() && metric[0] == '/', "metric must be a JSON pointer", join(ptr, "metric"));
      require(a.number("max_over_median", std::nullopt) > 0.0, "max_over_median must be positive",
              join(ptr, "max_over_median"));
      a.finish();
    }
  }

  std::vector<std::pair<std::string, Json>> axes;
  std::size_t total = 1;
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    const std::string ptr = "/grid/" + it.key();
    require(!it.key().empty() && it.key()[0] == '/', "keys must be JSON pointers into the scenario", ptr);
    require(it.value().is_array() && !it.value().empty(), "values must be a non-empty array", ptr);
    axes.emplace_back(it.key(), it.value());
    total *= it.value().size();
    require(total <= 10000, "sweep exceeds 10000 scenarios", ptr);
  }

  Json base = s.raw("base");
  if (seed) base["seed"] = *seed;
  std::vector<SweepPoint> points;
  for (std::size_t idx = 0; idx < total; ++idx) {
    Json doc = base;
    Json overrides = Json::object();
    std::size_t rest = idx;
    for (auto a = axes.rbegin(); a != axes.rend(); ++a) {
      const auto& values = a->second;
      const Json& v = values[rest % values.size()];
      rest /= values.size();
      try {
        doc[Json::json_pointer(a->first)] = v;
      } catch (const Json::exception& e) {
        throw ConfigError("/grid/" + a->first + ": " + e.what(), "/grid");
      }
      overrides[a->first] = v;
    }
    Json ordered = Json::object();
    for (const auto& [ptr, values] : axes) ordered[ptr] = overrides[ptr];
    try {
      points.push_back({ordered, parse_scenario(doc, base_dir)});
    } catch (const ConfigError& e) {
      throw ConfigError("sweep point " + std::to_string(idx) + ": " + e.what(), "/base" + e.pointer());
    }
  }
  return points;
}

RunResult run_sweep(const Json& sweep, const fs::path& out_dir, std::size_t jobs, const fs::path& base_dir,
                    std::optional<std::uint64_t> seed) {
  const auto start = std::chrono::steady_clock::now();
  const auto points = expand_sweep(sweep, base_dir, seed);
  fs::create_directories(out_dir);
  std::vector<RunResult> results(points.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      try {
        char name[32];
        std::snprintf(name, sizeof name, "scenario_%04zu", i);
        results[i] = run_scenario(points[i].scenario, out_dir / name);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, points.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  const Json aggregates_in = sweep.contains("aggregate") ? sweep["aggregate"] : Json::array();
  RunResult out;
  Json scenarios = Json::array();
  int worst = kExitOk;
  for (std::size_t i = 0; i < points.size(); ++i) {
    Json metrics = Json::object();
    for (const auto& a : aggregates_in) {
      const Json::json_pointer ptr(a["metric"].get<std::string>());
      metrics[a["metric"].get<std::string>()] =
          results[i].report.contains(ptr) ? results[i].report[ptr] : Json(nullptr);
    }
    scenarios.push_back(Json{{"index", i},
                             {"overrides", points[i].overrides},
                             {"status", results[i].report["status"]},
                             {"exit_code", results[i].exit_code},
                             {"metrics", metrics}});
    worst = std::max(worst, results[i].exit_code);
  }

  Json aggregates = Json::array();
  for (const auto& a : aggregates_in) {
    const auto metric = a["metric"].get<std::string>();
    std::vector<double> values;
    std::size_t missing = 0;
    for (const auto& s : scenarios) {
      const auto& v = s["metrics"][metric];
      if (v.is_number()) values.push_back(v.get<double>());
      else ++missing;
    }
    Json entry{{"name", a["name"]}, {"metric", metric}, {"count", values.size()}, {"missing", missing}};
    bool pass = missing == 0 && !values.empty();
    if (!values.empty()) {
      std::sort(values.begin(), values.end());
      const std::size_t n = values.size();
      const double median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
      const double max = values.back();
      const double ratio = median > 0.0 ? max / median : (max == 0.0 ? 0.0 : INFINITY);
      const double limit = a["max_over_median"].get<double>();
      pass = pass && ratio <= limit;
      entry["median"] = median;
      entry["max"] = max;
      entry["max_over_median"] = ratio;
      entry["limit"] = limit;
    }
    entry["pass"] = pass;
    if (!pass) worst = std::max(worst, kExitInvariant);
    aggregates.push_back(entry);
  }

  Json report;
  report["status"] = worst == kExitOk ? "ok" : worst == kExitSolver ? "solver_abort" : "invariant_failure";
  report["sweep"] = sweep;
  report["scenarios"] = scenarios;
  report["aggregates"] = aggregates;
  report["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file_atomic(out_dir / "report.json", report.dump(2) + "\n");
  out.report = std::move(report);
  out.exit_code = worst;
  return out;
}

Json ladder_report(int n, double l1, double p0, const std::vector<double>& qs) {
  const auto l = bootstrap_ladder(n, l1, p0);
  Json mu = Json::array();
  for (double q : qs) mu.push_back(Json{{"q", q}, {"mu", bootstrap_mu(q, n)}});
  return Json{{"n", n},
              {"l1", l1},
              {"p0", p0},
              {"terms", l.terms},
              {"terminal", l.terminal},
              {"unbounded", l.unbounded},
              {"mu", mu}};
}

// ---------------------------------------------------------------------------
// Entry point

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Common {
  std::string config;
  std::string out = "out";
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;
};

int config_error(const ConfigError& e, const std::string& path) {
  std::cerr << "error: " << describe(e, path, read_text(path)) << "\n";
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sktlab: SKT cross-diffusion simulator and regularity diagnostics"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&c](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", c.config, "scenario JSON file");
    if (need_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
    sub->add_option("--jobs", c.jobs, "maximum concurrent scenarios / worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", c.seed, "override the scenario seed");
  };
  auto* run = app.add_subcommand("run", "run one scenario");
  add_common(run, true);
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(sweep, true);
  auto* diagnose = app.add_subcommand("diagnose", "diagnostics on stored field files");
  add_common(diagnose, true);
  auto* ladder = app.add_subcommand("ladder", "bootstrap exponent ladder calculator");
  add_common(ladder, false);
  int n = 3;
  double l1 = 4.0, p0 = 6.0;
  std::vector<double> qs;
  ladder->add_option("--n", n, "spatial dimension")->capture_default_str();
  ladder->add_option("--l1", l1, "first exponent")->capture_default_str();
  ladder->add_option("--p0", p0, "target exponent")->capture_default_str();
  ladder->add_option("--q", qs, "exponents q at which to report mu(q, n)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ladder) {
      if (!c.config.empty()) {
        const Json cfg = load_json(c.config);
        Section s(cfg, "");
        n = static_cast<int>(s.count("n", static_cast<std::uint64_t>(n)));
        l1 = s.number("l1", l1);
        p0 = s.number("p0", p0);
        qs = s.numbers("q", qs, 0);
        s.finish();
      }
      Json report;
      try {
        report = ladder_report(n, l1, p0, qs);
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
      }
      std::cout << report.dump(2) << "\n";
      if (app.get_subcommand("ladder")->count("--out")) {
        fs::create_directories(c.out);
        write_file_atomic(fs::path(c.out) / "report.json", report.dump(2) + "\n");
      }
      return kExitOk;
    }

    const fs::path cfg_path = c.config;
    const fs::path base_dir = cfg_path.parent_path();
    const Json doc = load_json(cfg_path);
    if (*sweep) {
      RunResult r;
      try {
        r = run_sweep(doc, c.out, c.jobs, base_dir, c.seed);
      } catch (const ConfigError& e) {
        return config_error(e, c.config);
      }
      std::cout << "sweep: " << r.report["scenarios"].size() << " scenarios, status "
                << r.report["status"].get<std::string>() << "\n";
      return r.exit_code;
    }

    Json effective = doc;
    if (c.seed) effective["seed"] = *c.seed;
    Scenario sc;
    try {
      sc = parse_scenario(effective, base_dir);
      if (*diagnose && sc.doc["kind"] != "diagnostics-only")
        throw ConfigError("/kind: diagnose expects a diagnostics-only scenario", "/kind");
    } catch (const ConfigError& e) {
      return config_error(e, c.config);
    }
    if (c.jobs > 1) sc.doc["options"]["threads"] = c.jobs;
    for (const auto& w : sc.warnings) std::cerr << "warning: " << w << "\n";
    const auto r = run_scenario(sc, c.out);
    std::cout << "status: " << r.report["status"].get<std::string>() << "\n";
    return r.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace sktlab::cli
