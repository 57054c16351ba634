#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mtdc/simulator.hpp"

namespace mtdc {

/// Shortest text with 17 significant digits; parses back to the same double.
std::string format_full(double value);

/// Writes "t,V_1..V_n,u_1..u_n[,Vhat_1..Vhat_n]" rows in time order.
void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path);

/// Reads a file written by write_trajectory_csv.
Trajectory read_trajectory_csv(const std::filesystem::path& path);

/// One row of the plot layout: a trajectory CSV and its caption.
struct PlotRow {
  std::string label;             ///< e.g. "tau = 0.1 s"
  std::filesystem::path csv;     ///< referenced relative to the script directory
  std::size_t node_count = 0;
};

/// Emits a gnuplot script with two panels per row (V_i − V^nom and u_i).
/// Throws ValidationError when `rows` is empty or a CSV does not exist.
void emit_plot_script(const std::vector<PlotRow>& rows, double nominal_voltage,
                      const std::filesystem::path& path);

/// Flat, ordered key-value report; one "key=value" line per entry.
class Report {
 public:
  void add(std::string key, double value);
  void add(std::string key, bool value);
  void add(std::string key, std::string value);
  void add_vector(const std::string& key, const Eigen::VectorXd& values);

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string to_text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace mtdc
