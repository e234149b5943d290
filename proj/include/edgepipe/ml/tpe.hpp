#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "edgepipe/common/rng.hpp"

namespace edgepipe {

struct ParamDim {
  enum class Kind { real, integer, categorical };
  std::string name;
  Kind kind = Kind::real;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::string> choices;  // categorical only

  static ParamDim real(std::string name, double lo, double hi);
  static ParamDim integer(std::string name, std::int64_t lo, std::int64_t hi);
  static ParamDim categorical(std::string name, std::vector<std::string> choices);
};

using SearchSpace = std::vector<ParamDim>;

// Values by dimension name. Categorical dimensions hold the choice index.
using ParamPoint = std::map<std::string, double>;

struct Trial {
  ParamPoint point;
  double loss = 0.0;  // lower is better
};

struct TpeOptions {
  double gamma = 0.25;
  std::size_t n_startup = 10;
  std::size_t n_candidates = 24;
};

struct TpeState {
  SearchSpace space;
  std::vector<Trial> trials;
  TpeOptions options;
};

// Throws std::invalid_argument for an empty space, lo > hi, or a
// categorical dimension without choices.
void validate_space(const SearchSpace& space);

bool point_in_space(const SearchSpace& space, const ParamPoint& p);

// Number of trials treated as "good": ceil(gamma * n), at least 1.
std::size_t tpe_good_count(std::size_t n, double gamma);

// Log densities of `x` under the good (l) and bad (g) models for one dim.
struct DimDensity {
  double log_l;
  double log_g;
};
DimDensity tpe_dim_density(const ParamDim& dim, const std::vector<double>& good, const std::vector<double>& bad,
                           double x);

// Uniform point while fewer than n_startup trials exist; afterwards the
// l/g ratio maximizer among n_candidates draws from l. When g has no mass
// at any candidate the candidate with the highest l wins.
ParamPoint tpe_suggest(const TpeState& state, Rng& rng);

struct TpeResult {
  std::vector<Trial> trials;
  std::size_t best_index = 0;
  const Trial& best() const { return trials[best_index]; }
};

TpeResult tpe_minimize(const SearchSpace& space, const std::function<double(const ParamPoint&)>& objective,
                       std::size_t n_trials, std::uint64_t seed, const TpeOptions& options = {});

const std::string& choice_of(const ParamDim& dim, const ParamPoint& p);

}  // namespace edgepipe
