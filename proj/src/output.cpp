#include "mtdc/output.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "mtdc/errors.hpp"

namespace mtdc {
namespace {

void append_row(std::string& line, const Eigen::VectorXd& values) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    line += ',';
    line += format_full(values(i));
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError(path.string() + ": malformed number '" + s + "'");
  }
  return value;
}

}  // namespace

std::string format_full(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory CSV " + path.string());
  const std::size_t n = trajectory.node_count;
  std::string header = "t";
  for (std::size_t i = 1; i <= n; ++i) header += ",V_" + std::to_string(i);
  for (std::size_t i = 1; i <= n; ++i) header += ",u_" + std::to_string(i);
  if (trajectory.has_references) {
    for (std::size_t i = 1; i <= n; ++i) header += ",Vhat_" + std::to_string(i);
  }
  out << header << '\n';
  std::string line;
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    line = format_full(trajectory.times[k]);
    append_row(line, trajectory.voltages[k]);
    append_row(line, trajectory.currents[k]);
    if (trajectory.has_references) append_row(line, trajectory.references[k]);
    out << line << '\n';
  }
  if (!out) throw IoError("error while writing " + path.string());
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read trajectory CSV " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing header");
  const auto header = split(line, ',');
  Trajectory traj;
  std::size_t voltage_columns = 0;
  std::size_t reference_columns = 0;
  for (const auto& h : header) {
    if (h.rfind("V_", 0) == 0) ++voltage_columns;
    if (h.rfind("Vhat_", 0) == 0) ++reference_columns;
  }
  traj.node_count = voltage_columns;
  traj.has_references = reference_columns > 0;
  const std::size_t n = traj.node_count;
  const std::size_t expected = 1 + 2 * n + (traj.has_references ? n : 0);
  if (header.empty() || header[0] != "t" || header.size() != expected) {
    throw IoError(path.string() + ": unexpected header");
  }
  const auto N = static_cast<Eigen::Index>(n);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != expected) throw IoError(path.string() + ": row has wrong column count");
    traj.times.push_back(parse_double(cells[0], path));
    Eigen::VectorXd v(N), u(N);
    for (std::size_t i = 0; i < n; ++i) {
      v(static_cast<Eigen::Index>(i)) = parse_double(cells[1 + i], path);
      u(static_cast<Eigen::Index>(i)) = parse_double(cells[1 + n + i], path);
    }
    traj.voltages.push_back(std::move(v));
    traj.currents.push_back(std::move(u));
    if (traj.has_references) {
      Eigen::VectorXd r(N);
      for (std::size_t i = 0; i < n; ++i) r(static_cast<Eigen::Index>(i)) = parse_double(cells[1 + 2 * n + i], path);
      traj.references.push_back(std::move(r));
    }
  }
  return traj;
}

void emit_plot_script(const std::vector<PlotRow>& rows, double nominal_voltage,
                      const std::filesystem::path& path) {
  if (rows.empty()) {
    throw ValidationError("no trajectory to plot; run 'simulate' or 'sweep-delay' first");
  }
  const std::filesystem::path dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  for (const PlotRow& row : rows) {
    if (!std::filesystem::exists(dir / row.csv)) {
      throw ValidationError("trajectory CSV " + (dir / row.csv).string() +
                            " does not exist; run 'simulate' first");
    }
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write plot script " + path.string());
  const std::string stem = path.stem().string();
  out << "# gnuplot script; run from this directory: gnuplot " << path.filename().string() << "\n";
  out << "set datafile separator ','\n";
  out << "set terminal pngcairo size 1200," << 320 * rows.size() << "\n";
  out << "set output '" << stem << ".png'\n";
  out << "vnom = " << format_full(nominal_voltage) << "\n";
  out << "set multiplot layout " << rows.size() << ",2\n";
  out << "set grid\nset key outside right\n";
  for (const PlotRow& row : rows) {
    const std::string csv = row.csv.generic_string();
    const std::size_t n = row.node_count;
    out << "\nset title 'Voltages, " << row.label << "'\n";
    out << "set xlabel 'Time (s)'\nset ylabel 'V_i - V^{nom} (V)'\n";
    out << "plot ";
    for (std::size_t i = 1; i <= n; ++i) {
      out << (i > 1 ? ", \\\n     " : "") << "'" << csv << "' using 1:($" << (1 + i)
          << " - vnom) skip 1 with lines title 'V_" << i << "'";
    }
    out << "\nset title 'Controlled currents, " << row.label << "'\n";
    out << "set ylabel 'u_i (A)'\n";
    out << "plot ";
    for (std::size_t i = 1; i <= n; ++i) {
      out << (i > 1 ? ", \\\n     " : "") << "'" << csv << "' using 1:" << (1 + n + i)
          << " skip 1 with lines title 'u_" << i << "'";
    }
    out << "\n";
  }
  out << "\nunset multiplot\n";
  if (!out) throw IoError("error while writing " + path.string());
}

void Report::add(std::string key, double value) { entries_.emplace_back(std::move(key), format_full(value)); }

void Report::add(std::string key, bool value) {
  entries_.emplace_back(std::move(key), value ? "true" : "false");
}

void Report::add(std::string key, std::string value) { entries_.emplace_back(std::move(key), std::move(value)); }

void Report::add_vector(const std::string& key, const Eigen::VectorXd& values) {
  for (Eigen::Index i = 0; i < values.size(); ++i) add(key + "_" + std::to_string(i + 1), values(i));
}

std::string Report::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

}  // namespace mtdc
