#include "relaxhjb/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "relaxhjb/errors.hpp"
#include "relaxhjb/expression.hpp"

namespace relaxhjb {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Drops a trailing comment, respecting double quotes.
std::string_view strip_comment(std::string_view line, int line_no) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    else if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  if (quoted) throw ConfigError("unterminated string", line_no);
  return line;
}

struct RawValue {
  std::string text;
  int line = 0;
};

std::string unquote(const RawValue& v) {
  std::string_view s = trim(v.text);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
    if (s.find('"') != std::string_view::npos) throw ConfigError("stray quote in string", v.line);
  } else if (s.find('"') != std::string_view::npos) {
    throw ConfigError("stray quote in value", v.line);
  }
  return std::string(s);
}

std::vector<std::string> split_list(const RawValue& v) {
  std::string_view s = trim(v.text);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw ConfigError("unterminated list", v.line);
    s = trim(s.substr(1, s.size() - 2));
  }
  std::vector<std::string> items;
  if (s.empty()) return items;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    const std::string_view item = trim(s.substr(start, comma - start));
    if (item.empty()) throw ConfigError("empty list item", v.line);
    items.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return items;
}

double to_double(std::string_view s, const std::string& key, int line) {
  s = trim(s);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("'" + key + "' expects a number, got '" + std::string(s) + "'", line);
  }
  return value;
}

template <typename Int>
Int to_integer(std::string_view s, const std::string& key, int line) {
  s = trim(s);
  Int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + std::string(s) + "'", line);
  }
  return value;
}

bool to_bool(std::string_view s, const std::string& key, int line) {
  s = trim(s);
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("'" + key + "' expects true or false", line);
}

std::vector<double> to_doubles(const RawValue& v, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(item, key, v.line));
  return out;
}

std::vector<int> to_ints(const RawValue& v, const std::string& key) {
  std::vector<int> out;
  for (const auto& item : split_list(v)) out.push_back(to_integer<int>(item, key, v.line));
  return out;
}

const std::set<std::string>& known_sections() {
  static const std::set<std::string> names = {"",           "problem",    "solve",
                                              "perturbation", "montecarlo", "surface",
                                              "output"};
  return names;
}

bool is_coefficient_name(const std::string& key) {
  return !key.empty() && (key[0] == 'a' || key[0] == 'b' || key[0] == 'c' || key[0] == 'f' ||
                          key == "g");
}

std::string quote(const std::string& s) {
  if (s.find('"') != std::string::npos || s.find('\n') != std::string::npos) {
    throw ConfigError("string values cannot contain quotes or newlines: " + s);
  }
  return "\"" + s + "\"";
}

std::string list_of(const std::vector<double>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += format_double(xs[i]);
  }
  return out + "]";
}

std::string list_of(const std::vector<int>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(xs[i]);
  }
  return out + "]";
}

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError("invalid '" + key + "': " + what);
  };
  if (c.K < 0) fail("K", "must be >= 0");
  if (c.grid.empty() || c.grid.size() > 2) fail("grid", "needs one or two node counts");
  for (int n : c.grid) {
    if (n < 3) fail("grid", "needs at least 3 nodes per axis");
  }
  if (c.eps_list.empty()) fail("eps", "list is empty");
  for (double e : c.eps_list) {
    if (!(e >= 0.0) || !std::isfinite(e)) fail("eps", "entries must be finite and >= 0");
  }
  if (!(c.beta > 0.0 && c.beta < 1.0)) fail("beta", "must lie in (0, 1)");
  if (!(c.solver.tolerance > 0.0)) fail("tol", "must be positive");
  if (c.solver.max_iterations < 1) fail("max_iterations", "must be >= 1");
  if (!(c.solver.tie_tolerance >= 0.0)) fail("tie_tolerance", "must be >= 0");
  if (!(c.gap_threshold >= 0.0)) fail("gap_threshold", "must be >= 0");
  if (c.threads < 1) fail("threads", "must be >= 1");
  if (!(c.solve_eps >= 0.0) || !std::isfinite(c.solve_eps)) fail("solve.eps", "must be >= 0");
  for (double t : c.t_list) {
    if (!std::isfinite(t)) fail("perturbation.t", "entries must be finite");
  }
  if (c.mc_paths < 1) fail("montecarlo.paths", "must be >= 1");
  if (!(c.mc_dt > 0.0)) fail("montecarlo.dt", "must be positive");
  if (c.surface_points < 2) fail("surface.points", "must be >= 2");
  if (!(c.surface_span > 0.0)) fail("surface.span", "must be positive");
  const ProblemDefinition p = resolve_problem(c);
  if (c.grid.size() == 2 && p.dim != 2) fail("grid", "has two node counts for a 1-D problem");
  if (!c.x0.empty() && static_cast<int>(c.x0.size()) != p.dim) {
    fail("montecarlo.x0", "needs one coordinate per dimension");
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw ArgumentError("cannot format number");
  return std::string(buf, ptr);
}

ExperimentConfig parse_config_text(std::string_view text) {
  std::map<std::string, std::map<std::string, RawValue>> sections;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;

    const std::string_view line = trim(strip_comment(raw, line_no));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header", line_no);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_sections().count(section) || section.empty()) {
        throw ConfigError("unknown section [" + section + "]", line_no);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("missing key", line_no);
    auto& slot = sections[section];
    if (slot.count(key)) throw ConfigError("duplicate key '" + key + "'", line_no);
    slot[key] = RawValue{std::string(trim(line.substr(eq + 1))), line_no};
  }

  ExperimentConfig c;
  c.grid = {101};
  for (const auto& [name, entries] : sections) {
    for (const auto& [key, value] : entries) {
      const int ln = value.line;
      if (name.empty()) {
        if (key == "problem") c.problem = unquote(value);
        else if (key == "K") c.K = to_integer<int>(value.text, key, ln);
        else if (key == "grid") c.grid = to_ints(value, key);
        else if (key == "generator") {
          try {
            c.generator = parse_generator_kind(unquote(value));
          } catch (const ArgumentError& e) {
            throw ConfigError(e.what(), ln);
          }
        } else if (key == "eps") c.eps_list = to_doubles(value, key);
        else if (key == "beta") c.beta = to_double(value.text, key, ln);
        else if (key == "tol") c.solver.tolerance = to_double(value.text, key, ln);
        else if (key == "max_iterations") c.solver.max_iterations = to_integer<int>(value.text, key, ln);
        else if (key == "tie_tolerance") c.solver.tie_tolerance = to_double(value.text, key, ln);
        else if (key == "gap_threshold") c.gap_threshold = to_double(value.text, key, ln);
        else if (key == "seed") c.seed = to_integer<std::uint64_t>(value.text, key, ln);
        else if (key == "threads") c.threads = to_integer<int>(value.text, key, ln);
        else throw ConfigError("unknown key '" + key + "'", ln);
      } else if (name == "problem") {
        if (key == "dim") c.dim = to_integer<int>(value.text, key, ln);
        else if (key == "lo") c.lo = to_doubles(value, key);
        else if (key == "hi") c.hi = to_doubles(value, key);
        else if (key == "nu") c.nu = to_double(value.text, key, ln);
        else if (is_coefficient_name(key)) c.coefficients[key] = unquote(value);
        else throw ConfigError("unknown key '" + key + "' in [problem]", ln);
      } else if (name == "solve") {
        if (key == "eps") c.solve_eps = to_double(value.text, key, ln);
        else throw ConfigError("unknown key '" + key + "' in [solve]", ln);
      } else if (name == "perturbation") {
        if (key == "t") c.t_list = to_doubles(value, key);
        else if (key.size() > 1 && key[0] == 'd' && is_coefficient_name(key.substr(1))) {
          c.perturbation[key.substr(1)] = unquote(value);
        } else {
          throw ConfigError("unknown key '" + key + "' in [perturbation]", ln);
        }
      } else if (name == "montecarlo") {
        if (key == "x0") c.x0 = to_doubles(value, key);
        else if (key == "paths") c.mc_paths = to_integer<int>(value.text, key, ln);
        else if (key == "dt") c.mc_dt = to_double(value.text, key, ln);
        else if (key == "bridge") c.mc_bridge = to_bool(value.text, key, ln);
        else throw ConfigError("unknown key '" + key + "' in [montecarlo]", ln);
      } else if (name == "surface") {
        if (key == "points") c.surface_points = to_integer<int>(value.text, key, ln);
        else if (key == "span") c.surface_span = to_double(value.text, key, ln);
        else throw ConfigError("unknown key '" + key + "' in [surface]", ln);
      } else if (name == "output") {
        if (key == "dir") c.output_dir = unquote(value);
        else throw ConfigError("unknown key '" + key + "' in [output]", ln);
      }
    }
  }
  validate(c);
  return c;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "problem = " << quote(c.problem) << "\n";
  os << "K = " << c.K << "\n";
  os << "grid = " << list_of(c.grid) << "\n";
  os << "generator = " << to_string(c.generator) << "\n";
  os << "eps = " << list_of(c.eps_list) << "\n";
  os << "beta = " << format_double(c.beta) << "\n";
  os << "tol = " << format_double(c.solver.tolerance) << "\n";
  os << "max_iterations = " << c.solver.max_iterations << "\n";
  os << "tie_tolerance = " << format_double(c.solver.tie_tolerance) << "\n";
  os << "gap_threshold = " << format_double(c.gap_threshold) << "\n";
  os << "seed = " << c.seed << "\n";
  os << "threads = " << c.threads << "\n";

  os << "\n[problem]\n";
  if (c.dim) os << "dim = " << *c.dim << "\n";
  if (c.lo) os << "lo = " << list_of(*c.lo) << "\n";
  if (c.hi) os << "hi = " << list_of(*c.hi) << "\n";
  if (c.nu) os << "nu = " << format_double(*c.nu) << "\n";
  for (const auto& [key, expr] : c.coefficients) os << key << " = " << quote(expr) << "\n";

  os << "\n[solve]\neps = " << format_double(c.solve_eps) << "\n";

  os << "\n[perturbation]\nt = " << list_of(c.t_list) << "\n";
  for (const auto& [key, expr] : c.perturbation) os << "d" << key << " = " << quote(expr) << "\n";

  os << "\n[montecarlo]\n";
  os << "x0 = " << list_of(c.x0) << "\n";
  os << "paths = " << c.mc_paths << "\n";
  os << "dt = " << format_double(c.mc_dt) << "\n";
  os << "bridge = " << (c.mc_bridge ? "true" : "false") << "\n";

  os << "\n[surface]\npoints = " << c.surface_points << "\n";
  os << "span = " << format_double(c.surface_span) << "\n";

  os << "\n[output]\ndir = " << quote(c.output_dir) << "\n";
  return os.str();
}

ProblemDefinition resolve_problem(const ExperimentConfig& c) {
  ProblemDefinition p;
  if (!c.problem.empty()) {
    try {
      p = builtin_problem(c.problem, c.K);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("invalid 'problem': ") + e.what());
    }
    if (c.dim && *c.dim != p.dim) {
      throw ConfigError("invalid 'problem.dim': " + c.problem + " is " + std::to_string(p.dim) +
                        "-D");
    }
  } else {
    if (!c.dim || !c.lo || !c.hi || !c.nu || c.K < 1) {
      throw ConfigError(
          "an inline problem needs K and [problem] dim, lo, hi and nu");
    }
    p.name = "inline";
    p.dim = *c.dim;
    p.K = c.K;
  }
  if (p.dim < 1 || p.dim > 2) throw ConfigError("invalid 'problem.dim': must be 1 or 2");
  if (c.lo) p.domain.lo = *c.lo;
  if (c.hi) p.domain.hi = *c.hi;
  if (c.nu) p.nu = *c.nu;
  if (static_cast<int>(p.domain.lo.size()) != p.dim ||
      static_cast<int>(p.domain.hi.size()) != p.dim) {
    throw ConfigError("invalid 'problem.lo/hi': need one bound per dimension");
  }
  for (int i = 0; i < p.dim; ++i) {
    if (!(p.domain.hi[i] > p.domain.lo[i])) {
      throw ConfigError("invalid 'problem.lo/hi': empty box");
    }
  }
  if (!(p.nu > 0.0)) throw ConfigError("invalid 'problem.nu': must be positive");
  for (const auto& [key, expr] : c.coefficients) p.coefficients[key] = expr;

  auto check = [&](const CoefficientExpressions& exprs, const std::string& prefix) {
    for (const auto& [key, expr] : exprs) {
      try {
        check_coefficient_key(key, p.dim, p.K);
        Expression::parse(expr, p.dim);
      } catch (const ArgumentError& e) {
        throw ConfigError("invalid '" + prefix + key + "': " + e.what());
      }
    }
  };
  check(p.coefficients, "");
  check(c.perturbation, "d");
  return p;
}

}  // namespace relaxhjb
