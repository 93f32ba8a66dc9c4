#include "cmm/select.hpp"

#include "cmm/rng.hpp"

#include <cmath>
#include <limits>

namespace cmm {

int model_dimension(int n_objects, int latent_dim, int obs_dim_f, int obs_dim_g) {
  if (n_objects < 0 || latent_dim < 1 || obs_dim_f < 1 || obs_dim_g < 1)
    throw std::invalid_argument("model dimension: invalid sizes");
  int per_object = latent_dim + 2 +
                   (obs_dim_f * obs_dim_f + obs_dim_g * obs_dim_g + obs_dim_f + obs_dim_g) / 2;
  return n_objects * per_object;
}

BicScore bic_score(const FitReport& fit, const ObservationSet& obs, const SensorMapPair& maps) {
  BicScore out;
  out.n_objects = fit.params.n_objects();
  out.final_loglik = fit.final_loglik;
  out.dimension = model_dimension(out.n_objects, maps.f->latent_dim(), maps.f->obs_dim(),
                                  maps.g->obs_dim());
  double count = static_cast<double>(obs.f.rows() + obs.g.rows());
  out.score = -2.0 * fit.final_loglik + out.dimension * std::log(count);
  return out;
}

SelectResult select_n(const ObservationSet& obs, const SensorMapPair& maps, int n_max,
                      const SearchOptions& search_opts, const InitOptions& init_opts) {
  if (n_max < 1) throw std::invalid_argument("model selection: n_max must be positive");
  SelectResult result;
  double best = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= n_max; ++n) {
    BicScore entry;
    entry.n_objects = n;
    FitReport fit_report;
    try {
      Rng rng = make_rng(search_opts.seed, 0x5e1ec7ULL, static_cast<std::uint64_t>(n));
      InitResult start = run_init(obs, maps, n, init_opts, rng);
      fit_report = fit(obs, n, start.params, maps, search_opts);
      entry = bic_score(fit_report, obs, maps);
    } catch (const std::exception&) {
      entry.score = std::numeric_limits<double>::infinity();
      entry.fit_failed = true;
      entry.dimension = model_dimension(n, maps.f->latent_dim(), maps.f->obs_dim(),
                                        maps.g->obs_dim());
    }
    if (entry.score < best) {
      best = entry.score;
      result.best_n = n;
    }
    result.curve.push_back(entry);
    result.fits.push_back(std::move(fit_report));
  }
  return result;
}

}  // namespace cmm
