#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmpsced {

using BusId = std::int64_t;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kDefaultAngleBound = std::numbers::pi / 2.0;

/// Raised by the case reader for malformed text or violated invariants.
class CaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Bus {
  BusId id = 0;
  double theta_min = -kDefaultAngleBound;
  double theta_max = kDefaultAngleBound;

  bool operator==(const Bus&) const = default;
};

/// A transmission line with three nested thermal thresholds (MW):
/// normal (zeta_n) < long-term emergency (zeta_l) < short-term emergency (zeta_s).
struct Line {
  std::string id;
  BusId from_bus = 0;
  BusId to_bus = 0;
  double reactance = 0.0;
  double zeta_n = 0.0;
  double zeta_l = 0.0;
  double zeta_s = 0.0;

  bool operator==(const Line&) const = default;
};

struct Generator {
  std::string id;
  BusId bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double cost = 0.0;  // $/MWh
  double ramp_min = -kInf;  // MW per period, <= 0
  double ramp_max = kInf;   // MW per period, >= 0

  bool operator==(const Generator&) const = default;
};

struct RenewableSource {
  std::string id;
  BusId bus = 0;
  double curtail_penalty = 0.0;  // $/MWh
  std::vector<double> availability;  // MW per period

  bool operator==(const RenewableSource&) const = default;
};

struct Load {
  std::string id;
  BusId bus = 0;
  double shed_penalty = 0.0;  // $/MWh
  std::vector<double> demand;  // MW per period

  bool operator==(const Load&) const = default;
};

/// Network and market description. Immutable once validated; share freely
/// across threads by const reference.
struct Case {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  std::vector<RenewableSource> renewables;
  std::vector<Load> loads;
  int horizon = 1;       // T
  double dt = 1.0;       // hours per period
  int lte_limit = 1;     // T_l, periods
  int ste_limit = 1;     // T_s, periods
  double base_mva = 100.0;

  bool operator==(const Case&) const = default;

  /// Position of a bus in `buses`; throws CaseError for unknown ids.
  std::size_t bus_index(BusId id) const;
  /// Bus fixed at zero angle (lowest id).
  std::size_t reference_bus() const;
};

/// Checks every structural invariant; throws CaseError naming the first violation.
void validate(const Case& c);

/// Reads a case file (and the series files it references, resolved relative
/// to the case file's directory) and validates it.
Case load_case(const std::filesystem::path& path);

/// Writes `c` as a case file plus one series file per renewable/load, placed
/// next to the case file as `<stem>.<id>.series`.
void write_case(const Case& c, const std::filesystem::path& path);

/// Parses case text directly. `series_dir` resolves relative series paths.
Case parse_case(const std::string& text, const std::filesystem::path& series_dir);

/// Returns a copy with every demand series multiplied by `factor` (> 0).
Case scale_loads(const Case& c, double factor);

/// Parameters for a synthetic test network.
struct SynthSpec {
  int buses = 73;
  int lines = 108;
  int generators = 158;
  int renewables = 20;
  int loads = 51;
  int horizon = 96;
  double dt = 0.25;
  int lte_limit = 16;
  int ste_limit = 1;
  double shed_penalty = 1000.0;
  double curtail_penalty = 300.0;
  std::uint64_t seed = 1;
};

/// Random connected network with the requested cardinalities. Thermal
/// ratings are set from a reference dispatch so that demand peaks push a
/// subset of lines past their normal threshold.
Case synthesize_case(const SynthSpec& spec);

}  // namespace cmpsced
