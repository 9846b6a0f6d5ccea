#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "adjopt/adjoint/adjoint.hpp"
#include "adjopt/error.hpp"
#include "adjopt/grayscott/grayscott.hpp"
#include "adjopt/integrate/jacobian.hpp"
#include "adjopt/integrate/theta.hpp"

namespace adjopt::driver {

/// Invalid user input; maps to exit status 2.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// `u@center`, `v@center` or `u@i,j`.
struct ObjectiveSpec {
  grayscott::Species species = grayscott::Species::u;
  bool centre = true;
  std::size_t i = 0;
  std::size_t j = 0;

  std::string str() const {
    std::string s = species == grayscott::Species::u ? "u" : "v";
    if (centre) return s + "@center";
    return s + "@" + std::to_string(i) + "," + std::to_string(j);
  }

  adjoint::Objective resolve(const grayscott::GrayScottParams& p) const {
    if (centre) return adjoint::Objective::centre(p, species);
    if (i >= p.mx || j >= p.my)
      throw ConfigError("objective node " + str() + " lies outside the grid");
    return adjoint::Objective::at(p, i, j, species);
  }
};

inline ObjectiveSpec parse_objective(std::string_view text) {
  const auto at = text.find('@');
  if (at == std::string_view::npos) throw ConfigError("objective must look like u@center or v@i,j");
  ObjectiveSpec spec;
  const auto species = text.substr(0, at);
  if (species == "u") {
    spec.species = grayscott::Species::u;
  } else if (species == "v") {
    spec.species = grayscott::Species::v;
  } else {
    throw ConfigError("objective species must be u or v");
  }
  const auto where = text.substr(at + 1);
  if (where == "center" || where == "centre") return spec;
  const auto comma = where.find(',');
  if (comma == std::string_view::npos) throw ConfigError("objective node must be 'center' or i,j");
  auto parse_index = [](std::string_view s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
      throw ConfigError("bad objective node index '" + std::string(s) + "'");
    return v;
  };
  spec.centre = false;
  spec.i = parse_index(where.substr(0, comma));
  spec.j = parse_index(where.substr(comma + 1));
  return spec;
}

struct RunConfig {
  grayscott::GrayScottParams params{};  // includes mx, my
  double dt = 0.5;
  std::size_t steps = 100;
  double theta = 0.5;
  integrate::JacobianStrategy strategy = integrate::JacobianStrategy::ad_compressed;
  ObjectiveSpec objective{};
  std::filesystem::path out_dir = ".";
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  integrate::NewtonSettings newton{};
  adjoint::AdjointSettings adjoint{};

  integrate::ThetaScheme scheme() const { return {theta, dt, steps}; }

  void validate() const {
    try {
      params.validate();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    if (!(dt > 0.0)) throw ConfigError("--dt must be positive");
    if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("--theta must lie in (0, 1]");
    if (threads == 0) throw ConfigError("--threads must be at least 1");
    (void)objective.resolve(params);
  }
};

}  // namespace adjopt::driver
