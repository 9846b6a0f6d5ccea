#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>

#include "adjopt/error.hpp"
#include "adjopt/grayscott/grayscott.hpp"

namespace adjopt::driver {

/// Output could not be written; maps to exit status 4.
class IoError : public Error {
public:
  using Error::Error;
};

/// One row per node in row-major order (j outer, i inner), 17 significant
/// digits. `header` names the two value columns, e.g. "u,v" or "du,dv".
inline void write_field_csv(const std::filesystem::path& path, const grayscott::GrayScottParams& p,
                            std::span<const double> field, const std::string& header) {
  require_size(field.size(), p.n_dofs(), "write_field_csv field");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const auto geo = grayscott::GridGeometry::of(p);
  os << "x,y," << header << '\n';
  char line[160];
  for (std::size_t j = 0; j < p.my; ++j) {
    for (std::size_t i = 0; i < p.mx; ++i) {
      const std::size_t k = 2 * (j * p.mx + i);
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", static_cast<double>(i) * geo.hx,
                    static_cast<double>(j) * geo.hy, field[k], field[k + 1]);
      os << line;
    }
  }
  if (!os) throw IoError("failed writing " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace adjopt::driver
