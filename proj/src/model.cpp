#include "cmm/model.hpp"

#include <cmath>
#include <limits>

namespace cmm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPriorTol = 1e-12;

void validate_priors(const Vec& priors, const char* which) {
  using std::string;
  if (priors.size() < 1) throw std::invalid_argument(string("priors ") + which + ": empty");
  if ((priors.array() < 0.0).any() || !priors.allFinite())
    throw std::invalid_argument(string("priors ") + which + ": negative or non-finite entry");
  if (std::abs(priors.sum() - 1.0) > kPriorTol)
    throw std::invalid_argument(string("priors ") + which + ": must sum to 1");
}
}  // namespace

void ModelParams::validate() const {
  const int n = n_objects();
  validate_priors(priors_f, "f");
  validate_priors(priors_g, "g");
  if (priors_f.size() != n + 1 || priors_g.size() != n + 1)
    throw std::invalid_argument("priors: length must be object count + 1");
  if (static_cast<int>(cov_f.size()) != n || static_cast<int>(cov_g.size()) != n)
    throw std::invalid_argument("covariances: one matrix per object required");
  for (int i = 0; i < n; ++i) {
    if (objects[i].position.size() == 0)
      throw std::invalid_argument("object position: empty vector");
    if (!objects[i].position.allFinite())
      throw std::invalid_argument("object position: non-finite entry");
    if (!spd_check(cov_f[i]) || !spd_check(cov_g[i]))
      throw std::invalid_argument("covariance not positive definite");
  }
}

void ObservationSet::validate() const {
  if (f.rows() < 1 || g.rows() < 1)
    throw std::invalid_argument("observations: each space needs at least one row");
  if (!f.allFinite() || !g.allFinite())
    throw std::invalid_argument("observations: non-finite entry");
  box_f.validate();
  box_g.validate();
  if (box_f.dim() != f.cols() || box_g.dim() != g.cols())
    throw std::invalid_argument("observations: support box dimension mismatch");
  if (!(support_f > 0.0) || !(support_g > 0.0))
    throw std::invalid_argument("observations: support volume must be positive");
  if (std::abs(support_f - box_f.volume()) > 1e-9 * box_f.volume() ||
      std::abs(support_g - box_g.volume()) > 1e-9 * box_g.volume())
    throw std::invalid_argument("observations: support volume inconsistent with box");
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    if (!box_f.contains(f.row(i).transpose()))
      throw std::invalid_argument("observations: row outside declared support (space F, row " +
                                  std::to_string(i) + ")");
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    if (!box_g.contains(g.row(i).transpose()))
      throw std::invalid_argument("observations: row outside declared support (space G, row " +
                                  std::to_string(i) + ")");
}

double log_sum_exp(const Vec& terms) {
  double hi = terms.maxCoeff();
  if (hi == -kInf) return -kInf;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < terms.size(); ++i) acc += std::exp(terms[i] - hi);
  return hi + std::log(acc);
}

MixtureCache build_mixture_cache(const ModelParams& params, const SensorMapPair& maps,
                                 double support_f, double support_g) {
  params.validate();
  if (!(support_f > 0.0) || !(support_g > 0.0))
    throw std::invalid_argument("mixture: support volume must be positive");
  const int n = params.n_objects();
  MixtureCache cache;
  cache.comps_f.reserve(n);
  cache.comps_g.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Vec& s = params.objects[i].position;
    cache.comps_f.emplace_back(maps.f->eval(s), params.cov_f[i]);
    cache.comps_g.emplace_back(maps.g->eval(s), params.cov_g[i]);
  }
  auto log_or_ninf = [](double v) { return v > 0.0 ? std::log(v) : -kInf; };
  cache.log_prior_f = params.priors_f.unaryExpr(log_or_ninf);
  cache.log_prior_g = params.priors_g.unaryExpr(log_or_ninf);
  cache.log_unif_f = -std::log(support_f);
  cache.log_unif_g = -std::log(support_g);
  return cache;
}

namespace {
double log_mixture(const std::vector<GaussianPdf>& comps, const Vec& log_prior, double log_unif,
                   const Vec& x) {
  const int n = static_cast<int>(comps.size());
  Vec terms(n + 1);
  for (int i = 0; i < n; ++i)
    terms[i] = log_prior[i] == -kInf ? -kInf : log_prior[i] + comps[i].log_density(x);
  terms[n] = log_prior[n] == -kInf ? -kInf : log_prior[n] + log_unif;
  return log_sum_exp(terms);
}
}  // namespace

double log_mixture_f(const MixtureCache& cache, const Vec& x) {
  return log_mixture(cache.comps_f, cache.log_prior_f, cache.log_unif_f, x);
}

double log_mixture_g(const MixtureCache& cache, const Vec& x) {
  return log_mixture(cache.comps_g, cache.log_prior_g, cache.log_unif_g, x);
}

double mixture_density_f(const Vec& x, const ModelParams& params, const SensorMapPair& maps,
                         double support) {
  MixtureCache cache = build_mixture_cache(params, maps, support, support);
  return std::exp(log_mixture_f(cache, x));
}

double mixture_density_g(const Vec& x, const ModelParams& params, const SensorMapPair& maps,
                         double support) {
  MixtureCache cache = build_mixture_cache(params, maps, support, support);
  return std::exp(log_mixture_g(cache, x));
}

double log_likelihood(const ObservationSet& obs, const MixtureCache& cache) {
  double total = 0.0;
  for (Eigen::Index m = 0; m < obs.f.rows(); ++m) {
    double l = log_mixture_f(cache, obs.f.row(m).transpose());
    if (l == -kInf) throw std::domain_error("zero-density observation");
    total += l;
  }
  for (Eigen::Index k = 0; k < obs.g.rows(); ++k) {
    double l = log_mixture_g(cache, obs.g.row(k).transpose());
    if (l == -kInf) throw std::domain_error("zero-density observation");
    total += l;
  }
  return total;
}

double log_likelihood(const ObservationSet& obs, const ModelParams& params,
                      const SensorMapPair& maps) {
  return log_likelihood(obs, build_mixture_cache(params, maps, obs.support_f, obs.support_g));
}

}  // namespace cmm
