#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "condstable/conditioned.hpp"
#include "condstable/path_engine.hpp"

namespace condstable {

enum class Subcommand {
  VerifyH,
  Overshoot,
  Martingale,
  Kernel,
  CkCheck,
  ExpCond,
  TimeCond,
  TailExponent,
  Profile,
  Bound,
  Cancellation,
  Drift,
};

enum class OutputFormat { Csv, Json };

std::string to_string(Subcommand sc);
/// Throws ConfigError for unknown names.
Subcommand parse_subcommand(const std::string& name);
std::vector<std::string> subcommand_names();

struct ExperimentConfig {
  Subcommand subcommand = Subcommand::Martingale;
  double alpha = 1.5;
  double x0 = 2.0;
  /// Empty grids fall back to the scalar of the same name.
  std::vector<double> t_grid;
  std::vector<double> s_grid;
  std::vector<double> q_grid;
  std::vector<double> x_list;
  std::vector<double> z_grid;
  double t = 0.5;
  double s = 0.25;
  double q = 1e-3;
  std::uint64_t n = 100000;
  double dt = 1e-3;
  double eps = 1e-4;
  int refine_levels = 4;
  /// skeleton or jump-adapted; empty selects the subcommand default.
  std::string scheme;
  /// sampled or integrated; empty selects integrated for cancellation and
  /// sampled otherwise.
  std::string clock;
  /// always, in, inf-above or sup-below, with event_a / event_b.
  std::string event = "always";
  double event_a = 0.0;
  double event_b = 0.0;
  int bins = 40;
  double bin_lo = 1.0;
  double bin_hi = 10.0;
  std::uint64_t pool = 64;
  std::uint64_t seed = 1;
  std::string out_path;
  std::string plot_path;
  OutputFormat format = OutputFormat::Csv;
  /// 0 keeps the process default.
  unsigned workers = 0;

  /// Throws ConfigError on missing or inconsistent fields.
  void validate() const;
};

struct ResultRecord {
  std::string quantity;
  double value = 0.0;
  double stderr = 0.0;
  std::uint64_t n = 0;
  /// Grid coordinates of this record; NaN falls back to the configured value.
  double t = std::numeric_limits<double>::quiet_NaN();
  double s = std::numeric_limits<double>::quiet_NaN();
  double q = std::numeric_limits<double>::quiet_NaN();
  double abscissa = std::numeric_limits<double>::quiet_NaN();
  /// Start point when it differs from the configured x0.
  double x0 = std::numeric_limits<double>::quiet_NaN();
  std::string notes;
  std::optional<Diagnostics> diagnostics;
};

/// Runs the configured experiment and returns its records; output files are
/// written by write_outputs. Wall time is not part of the records.
std::vector<ResultRecord> run(const ExperimentConfig& cfg);

void write_csv(const ExperimentConfig& cfg, const std::vector<ResultRecord>& records,
               std::ostream& os);
void write_json(const ExperimentConfig& cfg, const std::vector<ResultRecord>& records,
                std::ostream& os);
/// "abscissa value stderr" rows for every record with a finite abscissa.
void write_plot_data(const std::vector<ResultRecord>& records, std::ostream& os);

/// Writes records to cfg.out_path (stdout when empty) and plot data to
/// cfg.plot_path when set.
void write_outputs(const ExperimentConfig& cfg, const std::vector<ResultRecord>& records);

/// Effective path configuration of a subcommand.
PathConfig path_config(const ExperimentConfig& cfg);

struct IntervalReduction {
  double x_std = 0.0;
  double scale = 1.0;
  double shift = 0.0;
  /// x = scale * x_std + shift.
  double inverse(double y) const { return scale * y + shift; }
};

/// Affine map sending [a, b] to [-1, 1]: x_std = (x - shift) / scale.
IntervalReduction reduce_general_interval(double a, double b, double x);

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDomain = 3;
inline constexpr int kExitDegenerate = 4;
inline constexpr int kExitTolerance = 5;

/// Maps the active exception to an exit code; call inside a catch block.
int exit_code_for_current_exception();

struct Invocation {
  ExperimentConfig config;
  bool self_check = false;
  /// Replicate scale of the self-check.
  double check_scale = 0.1;
  /// Set when --help was requested; holds the help text.
  std::string help;
};

/// Flags override values from a flat key=value file given by --config.
/// Throws ConfigError.
Invocation parse_command_line(int argc, const char* const* argv);

/// Full command-line program; returns the exit code.
int main_entry(int argc, const char* const* argv);

}  // namespace condstable
