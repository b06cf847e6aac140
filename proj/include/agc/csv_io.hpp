#pragma once

// CSV serialization of recorded trajectories. Values are written with 17
// significant digits so a write/read round trip reproduces every double
// exactly.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "agc/sim.hpp"

namespace agc {

inline void write_csv(const std::string& path, const TimeSeries& ts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");

  out << "time_s";
  for (const std::string& name : ts.channel_names) out << ',' << name;
  out << '\n';

  char buf[32];
  for (Eigen::Index s = 0; s < ts.num_samples(); ++s) {
    std::snprintf(buf, sizeof buf, "%.17g", ts.time[s]);
    out << buf;
    for (Eigen::Index c = 0; c < ts.values.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", ts.values(s, c));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

[[nodiscard]] inline TimeSeries read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("'" + path + "' is empty");

  TimeSeries ts;
  {
    std::stringstream header(line);
    std::string cell;
    bool first = true;
    while (std::getline(header, cell, ',')) {
      if (first) {
        if (cell != "time_s")
          throw std::invalid_argument("'" + path + "': first column must be time_s");
        first = false;
      } else {
        ts.channel_names.push_back(cell);
      }
    }
    if (first) throw std::invalid_argument("'" + path + "': missing header");
  }

  const auto ncols = static_cast<Eigen::Index>(ts.channel_names.size());
  std::vector<double> flat;
  std::vector<double> times;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    Eigen::Index c = -1;
    while (std::getline(row, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("'" + path + "': malformed number '" + cell + "'");
      }
      if (used != cell.size())
        throw std::invalid_argument("'" + path + "': malformed number '" + cell + "'");
      if (c < 0)
        times.push_back(v);
      else
        flat.push_back(v);
      ++c;
    }
    if (c != ncols)
      throw std::invalid_argument("'" + path + "': row has " + std::to_string(c) +
                               " value columns, expected " + std::to_string(ncols));
  }

  const auto rows = static_cast<Eigen::Index>(times.size());
  ts.time = Eigen::Map<const Eigen::VectorXd>(times.data(), rows);
  ts.values.resize(rows, ncols);
  for (Eigen::Index s = 0; s < rows; ++s)
    for (Eigen::Index c = 0; c < ncols; ++c) ts.values(s, c) = flat[static_cast<std::size_t>(s * ncols + c)];
  return ts;
}

}  // namespace agc
