#pragma once

// Run configuration in INI form. Example:
//
//   [grid]
//   L = 1
//   nx = 64
//   ny = 64
//   nz = 32
//   [model]
//   U0 = 1
//   [time]
//   dt = 0.001          ; or cfl_safety = 0.5, never both
//   t_end = 1
//   output_stride = 1   ; CSV row every k steps
//   cfl_policy = warn   ; warn | error
//   [initial]
//   kind = random_bandlimited
//   amplitude = 0.1
//   cutoff = 4
//   seed = 7
//   [picard]
//   max_iters = 30
//   tol = 1e-8
//   interpolation = linear
//   [constants]
//   C1 = 1
//   [output]
//   directory = run
//   snapshot_stride = 0 ; 0 writes the initial and final states only
//
// Comments start with ';' or '#' at the beginning of a line or after
// whitespace. Unknown sections and keys are
// rejected. to_ini() writes the canonical form: every section and key in the
// order above, numbers printed with 17 significant digits, unset optional
// keys omitted.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "phm/dynamics.hpp"
#include "phm/picard.hpp"
#include "phm/state.hpp"

namespace phm {

struct TimeConfig {
  std::optional<double> dt;
  std::optional<double> cfl_safety;
  double t_end = 0.0;
  std::size_t output_stride = 1;
  CflPolicy cfl_policy = CflPolicy::warn;
  bool operator==(const TimeConfig&) const = default;
};

struct PicardConfig {
  std::size_t max_iters = 30;
  double tol = 1e-8;
  TimeInterpolation interpolation = TimeInterpolation::linear;
  bool operator==(const PicardConfig&) const = default;
};

struct OutputConfig {
  std::string directory = "phm_out";
  std::size_t snapshot_stride = 0;
  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  GridSpec grid{1.0, 64, 64, 32};
  ModelParams model{};
  TimeConfig time{};
  InitialKind kind = InitialKind::random_bandlimited;
  InitialParams initial{};
  bool has_seed = false;
  std::optional<PicardConfig> picard;
  CertificateConstants constants{};
  OutputConfig output{};

  bool operator==(const RunConfig&) const = default;

  /// Checks every cross-field invariant; throws ConfigError naming the field.
  void validate() const {
    grid.validate();
    model.validate(&grid);
    if (time.dt.has_value() == time.cfl_safety.has_value())
      throw ConfigError("[time]: exactly one of dt and cfl_safety must be given");
    if (time.dt && !(*time.dt > 0.0 && std::isfinite(*time.dt))) throw ConfigError("[time] dt: must be positive");
    if (time.cfl_safety && !(*time.cfl_safety > 0.0 && *time.cfl_safety <= 1.0))
      throw ConfigError("[time] cfl_safety: must lie in (0, 1]");
    if (!(time.t_end > 0.0 && std::isfinite(time.t_end))) throw ConfigError("[time] t_end: must be positive");
    if (time.output_stride < 1) throw ConfigError("[time] output_stride: must be >= 1");
    const bool random = kind == InitialKind::random_bandlimited || kind == InitialKind::mean_profile;
    if (random && !has_seed) throw ConfigError("[initial] seed: required for kind " + std::string(to_string(kind)));
    if (kind == InitialKind::mean_profile && initial.mean_amplitude == 0.0)
      throw ConfigError("[initial] mean_amplitude: must be nonzero for kind mean_profile");
    if (picard) {
      if (picard->max_iters < 1) throw ConfigError("[picard] max_iters: must be >= 1");
      if (!(picard->tol >= 0.0)) throw ConfigError("[picard] tol: must be >= 0");
    }
    constants.validate();
  }

  ThetaEtaState initial_state() const { return make_initial(kind, grid, model, initial); }

  /// Uniform time grid reaching t_end. With cfl_safety the step is the CFL
  /// bound of the initial state, shortened so that t_end is hit exactly.
  TimeGrid time_grid(const ThetaEtaState& init) const {
    double dt = 0.0;
    if (time.dt) {
      dt = *time.dt;
      const double n = std::round(time.t_end / dt);
      if (n < 1.0 || std::abs(n * dt - time.t_end) > 1e-9 * time.t_end)
        throw ConfigError("[time]: t_end must be an integer multiple of dt");
      return TimeGrid{0.0, dt, std::size_t(n)};
    }
    const double bound = cfl_dt(init, model, *time.cfl_safety);
    const double n = std::isinf(bound) ? 1.0 : std::max(1.0, std::ceil(time.t_end / bound));
    return TimeGrid{0.0, time.t_end / n, std::size_t(n)};
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class SectionReader {
 public:
  SectionReader(const boost::property_tree::ptree& tree, std::string name) : name_(std::move(name)) {
    if (auto child = tree.get_child_optional(name_)) {
      present_ = true;
      for (const auto& [key, node] : *child) {
        if (!node.empty()) throw ConfigError("[" + name_ + "] " + key + ": nested keys are not supported");
        values_[key] = node.data();
      }
    }
  }

  bool present() const { return present_; }

  std::optional<std::string> text(const std::string& key) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> number(const std::string& key) {
    auto t = text(key);
    if (!t) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(t->c_str(), &end);
    if (t->empty() || end != t->c_str() + t->size() || !std::isfinite(v)) fail(key, "expected a finite number, got '" + *t + "'");
    return v;
  }

  std::optional<std::uint64_t> integer(const std::string& key) {
    auto t = text(key);
    if (!t) return std::nullopt;
    if (t->empty() || t->find_first_not_of("0123456789") != std::string::npos)
      fail(key, "expected a non-negative integer, got '" + *t + "'");
    errno = 0;
    const auto v = std::strtoull(t->c_str(), nullptr, 10);
    if (errno == ERANGE) fail(key, "integer out of range");
    return v;
  }

  int small_int(const std::string& key, int fallback) {
    auto v = integer(key);
    if (!v) return fallback;
    if (*v > 1u << 20) fail(key, "value too large");
    return int(*v);
  }

  template <class T>
  T required(std::optional<T> v, const std::string& key) {
    if (!v) fail(key, "missing required key");
    return *v;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError("[" + name_ + "] " + key + ": " + msg);
  }

  void reject_unknown() const {
    for (const auto& [key, v] : values_)
      if (!used_.count(key)) fail(key, "unknown key");
  }

 private:
  std::string name_;
  bool present_ = false;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

}  // namespace detail

inline RunConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  // drop trailing "  ; comment" / "  # comment"; line numbers are kept
  std::ostringstream cleaned;
  for (std::string line; std::getline(in, line);) {
    for (std::size_t i = 1; i < line.size(); ++i)
      if ((line[i] == ';' || line[i] == '#') && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line.erase(i);
        break;
      }
    cleaned << line << '\n';
  }
  std::istringstream text(cleaned.str());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(text, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source + " line " + std::to_string(e.line()) + ": " + e.message());
  }
  static const std::set<std::string> sections{"grid", "model", "time", "initial", "picard", "constants", "output"};
  for (const auto& [name, node] : tree) {
    if (!sections.count(name)) throw ConfigError(source + ": unknown section [" + name + "]");
    if (node.empty() && !node.data().empty()) throw ConfigError(source + ": key '" + name + "' outside any section");
  }

  RunConfig c;
  try {
    using detail::SectionReader;
    SectionReader grid(tree, "grid");
    c.grid.L = grid.number("L").value_or(1.0);
    c.grid.nx = grid.small_int("nx", -1);
    c.grid.ny = grid.small_int("ny", -1);
    c.grid.nz = grid.small_int("nz", -1);
    for (auto [n, key] : {std::pair{c.grid.nx, "nx"}, {c.grid.ny, "ny"}, {c.grid.nz, "nz"}})
      if (n < 0) grid.fail(key, "missing required key");
    grid.reject_unknown();

    SectionReader model(tree, "model");
    c.model.L = c.grid.L;
    c.model.U0 = model.number("U0").value_or(1.0);
    model.reject_unknown();

    SectionReader time(tree, "time");
    c.time.dt = time.number("dt");
    c.time.cfl_safety = time.number("cfl_safety");
    c.time.t_end = time.required(time.number("t_end"), "t_end");
    c.time.output_stride = std::size_t(time.integer("output_stride").value_or(1));
    if (auto pol = time.text("cfl_policy")) {
      if (*pol == "warn")
        c.time.cfl_policy = CflPolicy::warn;
      else if (*pol == "error")
        c.time.cfl_policy = CflPolicy::error;
      else
        time.fail("cfl_policy", "expected warn or error, got '" + *pol + "'");
    }
    time.reject_unknown();

    SectionReader init(tree, "initial");
    const auto kind = init.required(init.text("kind"), "kind");
    try {
      c.kind = parse_initial_kind(kind);
    } catch (const ConfigError&) {
      init.fail("kind", "unknown kind '" + kind + "'");
    }
    c.initial.amplitude = init.number("amplitude").value_or(c.initial.amplitude);
    c.initial.mode = init.small_int("mode", c.initial.mode);
    c.initial.cutoff = init.small_int("cutoff", c.initial.cutoff);
    c.initial.mean_amplitude = init.number("mean_amplitude").value_or(0.0);
    if (auto seed = init.integer("seed")) {
      c.initial.seed = *seed;
      c.has_seed = true;
    }
    init.reject_unknown();

    SectionReader pic(tree, "picard");
    if (pic.present()) {
      PicardConfig pc;
      pc.max_iters = std::size_t(pic.integer("max_iters").value_or(pc.max_iters));
      pc.tol = pic.number("tol").value_or(pc.tol);
      if (auto mode = pic.text("interpolation")) {
        if (*mode == "linear")
          pc.interpolation = TimeInterpolation::linear;
        else if (*mode == "cubic")
          pc.interpolation = TimeInterpolation::cubic;
        else
          pic.fail("interpolation", "expected linear or cubic, got '" + *mode + "'");
      }
      pic.reject_unknown();
      c.picard = pc;
    }

    SectionReader cons(tree, "constants");
    c.constants.C0 = cons.number("C0");
    c.constants.C1 = cons.number("C1").value_or(1.0);
    c.constants.C2 = cons.number("C2").value_or(1.0);
    c.constants.C3 = cons.number("C3").value_or(1.0);
    cons.reject_unknown();

    SectionReader out(tree, "output");
    c.output.directory = out.text("directory").value_or(c.output.directory);
    c.output.snapshot_stride = std::size_t(out.integer("snapshot_stride").value_or(0));
    out.reject_unknown();

    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

inline RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>") {
  std::istringstream in(text);
  return parse_config(in, source);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

/// Canonical text form; parse_config(to_ini(c)) == c.
inline std::string to_ini(const RunConfig& c) {
  using detail::format_double;
  std::ostringstream o;
  o << "[grid]\nL = " << format_double(c.grid.L) << "\nnx = " << c.grid.nx << "\nny = " << c.grid.ny
    << "\nnz = " << c.grid.nz << "\n\n";
  o << "[model]\nU0 = " << format_double(c.model.U0) << "\n\n";
  o << "[time]\n";
  if (c.time.dt) o << "dt = " << format_double(*c.time.dt) << "\n";
  if (c.time.cfl_safety) o << "cfl_safety = " << format_double(*c.time.cfl_safety) << "\n";
  o << "t_end = " << format_double(c.time.t_end) << "\noutput_stride = " << c.time.output_stride
    << "\ncfl_policy = " << (c.time.cfl_policy == CflPolicy::warn ? "warn" : "error") << "\n\n";
  o << "[initial]\nkind = " << to_string(c.kind) << "\namplitude = " << format_double(c.initial.amplitude)
    << "\nmode = " << c.initial.mode << "\ncutoff = " << c.initial.cutoff
    << "\nmean_amplitude = " << format_double(c.initial.mean_amplitude) << "\n";
  if (c.has_seed) o << "seed = " << c.initial.seed << "\n";
  o << "\n";
  if (c.picard)
    o << "[picard]\nmax_iters = " << c.picard->max_iters << "\ntol = " << format_double(c.picard->tol)
      << "\ninterpolation = " << to_string(c.picard->interpolation) << "\n\n";
  o << "[constants]\n";
  if (c.constants.C0) o << "C0 = " << format_double(*c.constants.C0) << "\n";
  o << "C1 = " << format_double(c.constants.C1) << "\nC2 = " << format_double(c.constants.C2)
    << "\nC3 = " << format_double(c.constants.C3) << "\n\n";
  o << "[output]\ndirectory = " << c.output.directory << "\nsnapshot_stride = " << c.output.snapshot_stride << "\n";
  return o.str();
}

}  // namespace phm
