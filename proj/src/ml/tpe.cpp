#include "edgepipe/ml/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace edgepipe {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Equal-weight Gaussian mixture centred on `centres`.
double log_mixture(const std::vector<double>& centres, double sigma, double x) {
  if (centres.empty()) return kNegInf;
  std::vector<double> terms;
  terms.reserve(centres.size());
  const double norm = -std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
  for (double c : centres) {
    const double z = (x - c) / sigma;
    terms.push_back(norm - 0.5 * z * z);
  }
  return log_sum_exp(terms) - std::log(static_cast<double>(centres.size()));
}

double bandwidth(const ParamDim& dim, std::size_t n) {
  const double range = dim.hi - dim.lo;
  const double bw = range / std::sqrt(static_cast<double>(std::max<std::size_t>(n, 1)));
  return bw > 0.0 ? bw : 1.0;
}

double snap(const ParamDim& dim, double v) {
  v = std::clamp(v, dim.lo, dim.hi);
  if (dim.kind == ParamDim::Kind::integer) v = std::clamp(std::round(v), dim.lo, dim.hi);
  return v;
}

double sample_uniform(const ParamDim& dim, Rng& rng) {
  switch (dim.kind) {
    case ParamDim::Kind::real:
      return dim.lo + uniform01(rng) * (dim.hi - dim.lo);
    case ParamDim::Kind::integer:
      return static_cast<double>(std::uniform_int_distribution<std::int64_t>(
          static_cast<std::int64_t>(dim.lo), static_cast<std::int64_t>(dim.hi))(rng));
    case ParamDim::Kind::categorical:
      return static_cast<double>(std::uniform_int_distribution<std::size_t>(0, dim.choices.size() - 1)(rng));
  }
  return dim.lo;
}

double sample_from_good(const ParamDim& dim, const std::vector<double>& good, Rng& rng) {
  if (dim.kind == ParamDim::Kind::categorical) {
    std::vector<double> w(dim.choices.size(), 1.0);
    for (double g : good) w[static_cast<std::size_t>(g)] += 1.0;
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    return static_cast<double>(pick(rng));
  }
  const double centre = good[std::uniform_int_distribution<std::size_t>(0, good.size() - 1)(rng)];
  const double sigma = bandwidth(dim, good.size());
  std::normal_distribution<double> noise(centre, sigma);
  // Redraw a few times before clamping so mass is not piled on the bounds.
  for (int i = 0; i < 16; ++i) {
    const double v = noise(rng);
    if (v >= dim.lo && v <= dim.hi) return snap(dim, v);
  }
  return snap(dim, centre);
}

}  // namespace

ParamDim ParamDim::real(std::string name, double lo, double hi) {
  return ParamDim{std::move(name), Kind::real, lo, hi, {}};
}

ParamDim ParamDim::integer(std::string name, std::int64_t lo, std::int64_t hi) {
  return ParamDim{std::move(name), Kind::integer, static_cast<double>(lo), static_cast<double>(hi), {}};
}

ParamDim ParamDim::categorical(std::string name, std::vector<std::string> choices) {
  ParamDim d{std::move(name), Kind::categorical, 0.0, 0.0, std::move(choices)};
  d.hi = d.choices.empty() ? 0.0 : static_cast<double>(d.choices.size() - 1);
  return d;
}

void validate_space(const SearchSpace& space) {
  if (space.empty()) throw std::invalid_argument("tpe: empty search space");
  for (const auto& d : space) {
    if (d.kind == ParamDim::Kind::categorical && d.choices.empty()) {
      throw std::invalid_argument("tpe: categorical dimension '" + d.name + "' has no choices");
    }
    if (!(d.lo <= d.hi)) throw std::invalid_argument("tpe: dimension '" + d.name + "' has lo > hi");
  }
}

bool point_in_space(const SearchSpace& space, const ParamPoint& p) {
  for (const auto& d : space) {
    auto it = p.find(d.name);
    if (it == p.end()) return false;
    const double v = it->second;
    if (!(v >= d.lo && v <= d.hi)) return false;
    if (d.kind != ParamDim::Kind::real && v != std::round(v)) return false;
  }
  return true;
}

std::size_t tpe_good_count(std::size_t n, double gamma) {
  const auto k = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

DimDensity tpe_dim_density(const ParamDim& dim, const std::vector<double>& good, const std::vector<double>& bad,
                           double x) {
  if (dim.kind == ParamDim::Kind::categorical) {
    const auto k = static_cast<double>(dim.choices.size());
    auto freq = [&](const std::vector<double>& set) {
      double c = 1.0;
      for (double v : set) c += v == x ? 1.0 : 0.0;
      return std::log(c / (static_cast<double>(set.size()) + k));
    };
    return {freq(good), freq(bad)};
  }
  return {log_mixture(good, bandwidth(dim, good.size()), x), log_mixture(bad, bandwidth(dim, bad.size()), x)};
}

ParamPoint tpe_suggest(const TpeState& state, Rng& rng) {
  validate_space(state.space);
  ParamPoint out;
  if (state.trials.size() < std::max<std::size_t>(state.options.n_startup, 1)) {
    for (const auto& d : state.space) out[d.name] = sample_uniform(d, rng);
    return out;
  }

  std::vector<std::size_t> order(state.trials.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return state.trials[a].loss < state.trials[b].loss; });
  const std::size_t n_good = tpe_good_count(order.size(), state.options.gamma);

  std::map<std::string, std::vector<double>> good, bad;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (const auto& d : state.space) {
      (i < n_good ? good : bad)[d.name].push_back(state.trials[order[i]].point.at(d.name));
    }
  }

  struct Cand {
    ParamPoint p;
    double log_l = 0.0;
    double log_g = 0.0;
  };
  std::vector<Cand> cands(std::max<std::size_t>(state.options.n_candidates, 1));
  for (auto& c : cands) {
    for (const auto& d : state.space) {
      const double v = sample_from_good(d, good[d.name], rng);
      c.p[d.name] = v;
      const auto dens = tpe_dim_density(d, good[d.name], bad[d.name], v);
      c.log_l += dens.log_l;
      c.log_g += dens.log_g;
    }
  }
  const bool g_degenerate = std::all_of(cands.begin(), cands.end(), [](const Cand& c) { return c.log_g == kNegInf; });
  std::size_t best = 0;
  double best_v = kNegInf;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    double v;
    if (g_degenerate) v = cands[i].log_l;
    else v = cands[i].log_g == kNegInf ? std::numeric_limits<double>::infinity() : cands[i].log_l - cands[i].log_g;
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return cands[best].p;
}

TpeResult tpe_minimize(const SearchSpace& space, const std::function<double(const ParamPoint&)>& objective,
                       std::size_t n_trials, std::uint64_t seed, const TpeOptions& options) {
  if (n_trials == 0) throw std::invalid_argument("tpe: trial budget must be >= 1");
  TpeState state{space, {}, options};
  Rng rng = make_rng(seed, 0x79e);
  TpeResult out;
  for (std::size_t t = 0; t < n_trials; ++t) {
    ParamPoint p = tpe_suggest(state, rng);
    const double loss = objective(p);
    state.trials.push_back({p, loss});
    if (t == 0 || loss < state.trials[out.best_index].loss) out.best_index = t;
  }
  out.trials = std::move(state.trials);
  return out;
}

const std::string& choice_of(const ParamDim& dim, const ParamPoint& p) {
  return dim.choices.at(static_cast<std::size_t>(p.at(dim.name)));
}

}  // namespace edgepipe
