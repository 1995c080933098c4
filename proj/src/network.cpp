#include "cmpsced/network.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace cmpsced {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& row) {
  std::vector<std::string> out;
  std::stringstream ss(row);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!row.empty() && row.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& field, const std::string& where) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  if (!field.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw CaseError(where + ": cannot parse number '" + field + "'");
  }
  return value;
}

BusId parse_bus_id(const std::string& field, const std::string& where) {
  BusId value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw CaseError(where + ": cannot parse bus id '" + field + "'");
  }
  return value;
}

int parse_count(const std::string& field, const std::string& where) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw CaseError(where + ": cannot parse integer '" + field + "'");
  }
  return value;
}

std::vector<double> read_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CaseError("cannot open series file: " + path.string());
  std::vector<double> values;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    values.push_back(parse_number(t, path.string() + ":" + std::to_string(lineno)));
  }
  return values;
}

// Shortest round-trip representation.
std::string fmt_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void expect_fields(const std::vector<std::string>& f, std::size_t lo, std::size_t hi,
                   const std::string& where) {
  if (f.size() < lo || f.size() > hi) {
    throw CaseError(where + ": expected " + std::to_string(lo) +
                    (lo == hi ? "" : "-" + std::to_string(hi)) + " fields, got " +
                    std::to_string(f.size()));
  }
}

}  // namespace

std::size_t Case::bus_index(BusId id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return i;
  }
  throw CaseError("unknown bus id " + std::to_string(id));
}

std::size_t Case::reference_bus() const {
  if (buses.empty()) throw CaseError("case has no buses");
  auto it = std::min_element(buses.begin(), buses.end(),
                             [](const Bus& a, const Bus& b) { return a.id < b.id; });
  return static_cast<std::size_t>(it - buses.begin());
}

void validate(const Case& c) {
  if (c.buses.empty()) throw CaseError("case has no buses");
  std::set<BusId> bus_ids;
  for (const auto& b : c.buses) {
    const std::string who = "bus " + std::to_string(b.id);
    if (!bus_ids.insert(b.id).second) throw CaseError(who + ": duplicate bus id");
    if (!(b.theta_min <= b.theta_max)) throw CaseError(who + ": theta_min > theta_max");
  }
  auto require_bus = [&](BusId id, const std::string& who) {
    if (!bus_ids.count(id)) {
      throw CaseError(who + ": dangling bus id " + std::to_string(id));
    }
  };
  auto check_unique = [](auto& seen, const std::string& id, const std::string& kind) {
    if (!seen.insert(id).second) throw CaseError(kind + " '" + id + "': duplicate id");
  };

  if (c.horizon < 1) throw CaseError("meta: horizon T must be >= 1");
  if (!(c.dt > 0.0)) throw CaseError("meta: dt must be > 0");
  if (c.lte_limit < 1 || c.ste_limit < 1) throw CaseError("meta: T_l and T_s must be >= 1");
  if (c.ste_limit > c.lte_limit) throw CaseError("meta: T_s must not exceed T_l");
  if (!(c.base_mva > 0.0)) throw CaseError("meta: base_mva must be > 0");

  std::set<std::string> line_ids;
  for (const auto& l : c.lines) {
    const std::string who = "line '" + l.id + "'";
    check_unique(line_ids, l.id, "line");
    require_bus(l.from_bus, who);
    require_bus(l.to_bus, who);
    if (l.from_bus == l.to_bus) throw CaseError(who + ": from_bus equals to_bus");
    if (!(l.reactance > 0.0)) throw CaseError(who + ": reactance must be > 0");
    if (!(l.zeta_n > 0.0 && l.zeta_n < l.zeta_l && l.zeta_l < l.zeta_s)) {
      throw CaseError(who + ": threshold ordering violated (need 0 < zeta_n < zeta_l < zeta_s)");
    }
  }

  std::set<std::string> gen_ids;
  for (const auto& g : c.generators) {
    const std::string who = "generator '" + g.id + "'";
    check_unique(gen_ids, g.id, "generator");
    require_bus(g.bus, who);
    if (!(g.p_min >= 0.0 && g.p_min <= g.p_max)) {
      throw CaseError(who + ": capacity bounds violated (need 0 <= pmin <= pmax)");
    }
    if (!(g.ramp_min <= 0.0 && g.ramp_max >= 0.0)) {
      throw CaseError(who + ": ramp limits violated (need ramp_min <= 0 <= ramp_max)");
    }
    if (!std::isfinite(g.cost)) throw CaseError(who + ": cost must be finite");
  }

  std::set<std::string> ren_ids;
  for (const auto& r : c.renewables) {
    const std::string who = "renewable '" + r.id + "'";
    check_unique(ren_ids, r.id, "renewable");
    require_bus(r.bus, who);
    if (!(r.curtail_penalty >= 0.0)) throw CaseError(who + ": penalty must be >= 0");
    if (r.availability.size() < static_cast<std::size_t>(c.horizon)) {
      throw CaseError(who + ": series shorter than horizon");
    }
    for (double v : r.availability) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw CaseError(who + ": negative availability");
    }
  }

  std::set<std::string> load_ids;
  for (const auto& d : c.loads) {
    const std::string who = "load '" + d.id + "'";
    check_unique(load_ids, d.id, "load");
    require_bus(d.bus, who);
    if (!(d.shed_penalty >= 0.0)) throw CaseError(who + ": penalty must be >= 0");
    if (d.demand.size() < static_cast<std::size_t>(c.horizon)) {
      throw CaseError(who + ": series shorter than horizon");
    }
    for (double v : d.demand) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw CaseError(who + ": negative demand");
    }
  }
}

Case parse_case(const std::string& text, const std::filesystem::path& series_dir) {
  Case c;
  bool have_meta = false;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;

  while (std::getline(in, raw)) {
    ++lineno;
    std::string row = trim(raw);
    if (row.empty() || row.front() == '#') continue;
    const std::string where = "line " + std::to_string(lineno);

    if (row.front() == '[') {
      const auto close = row.find(']');
      if (close == std::string::npos) throw CaseError(where + ": unterminated section header");
      section = trim(row.substr(1, close - 1));
      static const std::set<std::string> known = {"buses", "lines", "generators",
                                                  "renewables", "loads", "meta"};
      if (!known.count(section)) throw CaseError(where + ": unknown section [" + section + "]");
      row = trim(row.substr(close + 1));
      if (row.empty()) continue;
    }

    const auto f = split_fields(row);
    if (section.empty()) throw CaseError(where + ": data before any section header");

    if (section == "buses") {
      expect_fields(f, 1, 3, where);
      Bus b;
      b.id = parse_bus_id(f[0], where);
      if (f.size() > 1 && !f[1].empty()) b.theta_min = parse_number(f[1], where);
      if (f.size() > 2 && !f[2].empty()) b.theta_max = parse_number(f[2], where);
      c.buses.push_back(b);
    } else if (section == "lines") {
      expect_fields(f, 7, 7, where);
      c.lines.push_back({f[0], parse_bus_id(f[1], where), parse_bus_id(f[2], where),
                         parse_number(f[3], where), parse_number(f[4], where),
                         parse_number(f[5], where), parse_number(f[6], where)});
    } else if (section == "generators") {
      expect_fields(f, 7, 7, where);
      c.generators.push_back({f[0], parse_bus_id(f[1], where), parse_number(f[2], where),
                              parse_number(f[3], where), parse_number(f[4], where),
                              parse_number(f[5], where), parse_number(f[6], where)});
    } else if (section == "renewables") {
      expect_fields(f, 4, 4, where);
      c.renewables.push_back({f[0], parse_bus_id(f[1], where), parse_number(f[2], where),
                              read_series(series_dir / f[3])});
    } else if (section == "loads") {
      expect_fields(f, 4, 4, where);
      c.loads.push_back({f[0], parse_bus_id(f[1], where), parse_number(f[2], where),
                         read_series(series_dir / f[3])});
    } else if (section == "meta") {
      if (have_meta) throw CaseError(where + ": duplicate meta row");
      expect_fields(f, 4, 5, where);
      c.horizon = parse_count(f[0], where);
      c.dt = parse_number(f[1], where);
      c.lte_limit = parse_count(f[2], where);
      c.ste_limit = parse_count(f[3], where);
      if (f.size() == 5) c.base_mva = parse_number(f[4], where);
      have_meta = true;
    }
  }
  if (!have_meta) throw CaseError("missing [meta] section");
  validate(c);
  return c;
}

Case load_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CaseError("cannot open case file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_case(buf.str(), path.parent_path());
}

void write_case(const Case& c, const std::filesystem::path& path) {
  const auto dir = path.parent_path();
  const auto stem = path.stem().string();
  auto write_series = [&](const std::string& id, const std::vector<double>& values) {
    const std::string name = stem + "." + id + ".series";
    std::ofstream out(dir / name);
    if (!out) throw CaseError("cannot write series file: " + (dir / name).string());
    for (double v : values) out << fmt_number(v) << '\n';
    return name;
  };

  std::ofstream out(path);
  if (!out) throw CaseError("cannot write case file: " + path.string());
  out << "[buses]\n# id,theta_min,theta_max\n";
  for (const auto& b : c.buses) {
    out << b.id << ',' << fmt_number(b.theta_min) << ',' << fmt_number(b.theta_max) << '\n';
  }
  out << "[lines]\n# id,from,to,x,zeta_n,zeta_l,zeta_s\n";
  for (const auto& l : c.lines) {
    out << l.id << ',' << l.from_bus << ',' << l.to_bus << ',' << fmt_number(l.reactance) << ','
        << fmt_number(l.zeta_n) << ',' << fmt_number(l.zeta_l) << ',' << fmt_number(l.zeta_s)
        << '\n';
  }
  out << "[generators]\n# id,bus,pmin,pmax,cost,ramp_min,ramp_max\n";
  for (const auto& g : c.generators) {
    out << g.id << ',' << g.bus << ',' << fmt_number(g.p_min) << ',' << fmt_number(g.p_max)
        << ',' << fmt_number(g.cost) << ',' << fmt_number(g.ramp_min) << ','
        << fmt_number(g.ramp_max) << '\n';
  }
  out << "[renewables]\n# id,bus,penalty,series_file\n";
  for (const auto& r : c.renewables) {
    out << r.id << ',' << r.bus << ',' << fmt_number(r.curtail_penalty) << ','
        << write_series(r.id, r.availability) << '\n';
  }
  out << "[loads]\n# id,bus,penalty,series_file\n";
  for (const auto& d : c.loads) {
    out << d.id << ',' << d.bus << ',' << fmt_number(d.shed_penalty) << ','
        << write_series(d.id, d.demand) << '\n';
  }
  out << "[meta]\n# T,dt,T_l,T_s,base_mva\n";
  out << c.horizon << ',' << fmt_number(c.dt) << ',' << c.lte_limit << ',' << c.ste_limit << ','
      << fmt_number(c.base_mva) << '\n';
}

Case scale_loads(const Case& c, double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("scale_loads: factor must be > 0");
  Case scaled = c;
  for (auto& d : scaled.loads) {
    for (auto& v : d.demand) v *= factor;
  }
  return scaled;
}

Case synthesize_case(const SynthSpec& spec) {
  if (spec.buses < 2 || spec.lines < spec.buses - 1) {
    throw std::invalid_argument("synthesize_case: need buses >= 2 and lines >= buses - 1");
  }
  const long max_lines = static_cast<long>(spec.buses) * (spec.buses - 1) / 2;
  if (spec.lines > max_lines) throw std::invalid_argument("synthesize_case: too many lines");

  std::mt19937_64 rng(spec.seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };

  Case c;
  c.horizon = spec.horizon;
  c.dt = spec.dt;
  c.lte_limit = spec.lte_limit;
  c.ste_limit = spec.ste_limit;
  for (int i = 0; i < spec.buses; ++i) c.buses.push_back({101 + i});

  // Random spanning tree, then extra edges among nearby buses.
  std::set<std::pair<int, int>> edges;
  for (int i = 1; i < spec.buses; ++i) {
    const int j = std::max(0, i - 1 - pick(std::min(i, 4)));
    edges.insert({j, i});
  }
  while (static_cast<int>(edges.size()) < spec.lines) {
    const int a = pick(spec.buses);
    const int b = std::clamp(a + 1 + pick(8), 0, spec.buses - 1);
    if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
    if (static_cast<int>(edges.size()) < spec.lines && pick(10) == 0) {
      const int u = pick(spec.buses), v = pick(spec.buses);
      if (u != v) edges.insert({std::min(u, v), std::max(u, v)});
    }
  }

  std::vector<std::pair<int, int>> edge_list(edges.begin(), edges.end());
  for (std::size_t k = 0; k < edge_list.size(); ++k) {
    const auto [a, b] = edge_list[k];
    c.lines.push_back({"L" + std::to_string(k + 1), c.buses[a].id, c.buses[b].id,
                       uniform(0.02, 0.12), 0.0, 0.0, 0.0});
  }

  // Daily profile: morning and evening peaks.
  std::vector<double> profile(spec.horizon);
  for (int t = 0; t < spec.horizon; ++t) {
    const double hour = 24.0 * t / spec.horizon;
    profile[t] = 0.65 + 0.2 * std::exp(-std::pow((hour - 8.0) / 2.0, 2)) +
                 0.35 * std::exp(-std::pow((hour - 18.0) / 2.5, 2));
  }

  double peak_demand = 0.0;
  std::vector<double> bus_peak_load(spec.buses, 0.0);
  for (int d = 0; d < spec.loads; ++d) {
    const int b = pick(spec.buses);
    const double size = uniform(40.0, 180.0);
    Load load{"D" + std::to_string(d + 1), c.buses[b].id, spec.shed_penalty, {}};
    for (int t = 0; t < spec.horizon; ++t) {
      load.demand.push_back(size * profile[t] * uniform(0.97, 1.03));
    }
    bus_peak_load[b] += size;
    peak_demand += size;
    c.loads.push_back(std::move(load));
  }

  std::vector<double> bus_capacity(spec.buses, 0.0);
  double total_capacity = 0.0;
  for (int g = 0; g < spec.generators; ++g) {
    const int b = pick(spec.buses);
    const double pmax = uniform(10.0, 120.0);
    const double pmin = pick(3) == 0 ? 0.0 : uniform(0.0, 0.2) * pmax;
    const double ramp = uniform(0.2, 0.6) * pmax;
    c.generators.push_back({"G" + std::to_string(g + 1), c.buses[b].id, pmin, pmax,
                            uniform(10.0, 60.0), -ramp, ramp});
    bus_capacity[b] += pmax;
    total_capacity += pmax;
  }
  // Must-run output above the lightest demand would leave no feasible dispatch.
  double min_demand = std::numeric_limits<double>::infinity();
  for (int t = 0; t < spec.horizon; ++t) {
    double total = 0.0;
    for (const auto& d : c.loads) total += d.demand[t];
    min_demand = std::min(min_demand, total);
  }
  double total_pmin = 0.0;
  for (const auto& g : c.generators) total_pmin += g.p_min;
  if (total_pmin > 0.5 * min_demand) {
    const double f = 0.5 * min_demand / total_pmin;
    for (auto& g : c.generators) g.p_min *= f;
  }
  for (int r = 0; r < spec.renewables; ++r) {
    const int b = pick(spec.buses);
    const double size = uniform(20.0, 80.0);
    RenewableSource src{"R" + std::to_string(r + 1), c.buses[b].id, spec.curtail_penalty, {}};
    for (int t = 0; t < spec.horizon; ++t) {
      const double hour = 24.0 * t / spec.horizon;
      const double solar = std::max(0.0, std::sin((hour - 6.0) / 12.0 * std::numbers::pi));
      src.availability.push_back(size * (r % 2 == 0 ? solar : uniform(0.2, 0.9)));
    }
    c.renewables.push_back(std::move(src));
  }

  // Reference flows: peak demand served by capacity-proportional generation.
  const double share = peak_demand / std::max(total_capacity, 1.0);
  Eigen::VectorXd injection(spec.buses);
  for (int b = 0; b < spec.buses; ++b) injection[b] = share * bus_capacity[b] - bus_peak_load[b];
  Eigen::MatrixXd laplacian = Eigen::MatrixXd::Zero(spec.buses, spec.buses);
  for (std::size_t k = 0; k < edge_list.size(); ++k) {
    const auto [a, b] = edge_list[k];
    const double y = c.base_mva / c.lines[k].reactance;
    laplacian(a, a) += y;
    laplacian(b, b) += y;
    laplacian(a, b) -= y;
    laplacian(b, a) -= y;
  }
  // Bus 0 is the angle reference.
  const Eigen::VectorXd theta_rest = laplacian.bottomRightCorner(spec.buses - 1, spec.buses - 1)
                                         .ldlt()
                                         .solve(injection.tail(spec.buses - 1));
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(spec.buses);
  theta.tail(spec.buses - 1) = theta_rest;

  for (std::size_t k = 0; k < edge_list.size(); ++k) {
    const auto [a, b] = edge_list[k];
    auto& line = c.lines[k];
    const double flow = c.base_mva * (theta[a] - theta[b]) / line.reactance;
    line.zeta_n = std::max(25.0, std::round(std::abs(flow) * uniform(0.85, 1.4)));
    line.zeta_l = std::round(line.zeta_n * 1.15);
    line.zeta_s = std::round(line.zeta_n * 1.3);
  }
  validate(c);
  return c;
}

}  // namespace cmpsced
