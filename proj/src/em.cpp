#include "cmm/em.hpp"

#include "cmm/parallel.hpp"
#include "cmm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kAscentSlack = 1e-10;
constexpr double kEmptyMassFactor = 1e-8;

struct SpdEigen {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

SpdEigen spd_eigen(const Mat& c) {
  Eigen::SelfAdjointEigenSolver<Mat> es(c);
  if (es.info() != Eigen::Success)
    throw std::invalid_argument("covariance not positive definite");
  SpdEigen out{es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
  if (!(out.lambda_min > 0.0)) throw std::invalid_argument("covariance not positive definite");
  return out;
}

Eigen::LLT<Mat> factorize(const Mat& c) {
  Eigen::LLT<Mat> llt(c);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("covariance not positive definite");
  return llt;
}

double mahalanobis2(const Eigen::LLT<Mat>& llt, const Vec& v) {
  return llt.matrixL().solve(v).squaredNorm();
}

double log_det(const Eigen::LLT<Mat>& llt) {
  return 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
}

}  // namespace

// ---------------------------------------------------------------------------
// Variant plumbing.

ChooseStrategy choose_of(Variant v) {
  switch (v) {
    case Variant::IPBA:
    case Variant::IPAA:
      return ChooseStrategy::IP;
    case Variant::IGAA:
      return ChooseStrategy::IG;
    case Variant::IVAA:
      return ChooseStrategy::IV;
    case Variant::IAAA:
      return ChooseStrategy::IA;
  }
  throw std::logic_error("unknown variant");
}

LocalVariant local_of(Variant v) {
  return v == Variant::IPBA ? LocalVariant::BA : LocalVariant::AA;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::IPBA: return "IPBA";
    case Variant::IGAA: return "IGAA";
    case Variant::IVAA: return "IVAA";
    case Variant::IPAA: return "IPAA";
    case Variant::IAAA: return "IAAA";
  }
  throw std::logic_error("unknown variant");
}

Variant variant_from_string(const std::string& name) {
  if (name == "IPBA") return Variant::IPBA;
  if (name == "IGAA") return Variant::IGAA;
  if (name == "IVAA") return Variant::IVAA;
  if (name == "IPAA") return Variant::IPAA;
  if (name == "IAAA") return Variant::IAAA;
  throw std::invalid_argument("unknown search variant: " + name);
}

// ---------------------------------------------------------------------------
// E step.

Posteriors e_step(const ObservationSet& obs, const MixtureCache& cache, int threads) {
  const int n = static_cast<int>(cache.comps_f.size());
  Posteriors post;
  post.resp_f.resize(obs.f.rows(), n + 1);
  post.resp_g.resize(obs.g.rows(), n + 1);

  auto fill_rows = [n](const Mat& data, const std::vector<GaussianPdf>& comps,
                       const Vec& log_prior, double log_unif, Mat& resp, int workers) {
    std::vector<char> dead(data.rows(), 0);
    parallel_for(static_cast<std::size_t>(data.rows()), workers, [&](std::size_t m) {
      Vec terms(n + 1);
      Vec x = data.row(m).transpose();
      for (int i = 0; i < n; ++i)
        terms[i] = log_prior[i] == -kInf ? -kInf : log_prior[i] + comps[i].log_density(x);
      terms[n] = log_prior[n] == -kInf ? -kInf : log_prior[n] + log_unif;
      double lse = log_sum_exp(terms);
      if (lse == -kInf) {
        dead[m] = 1;
        return;
      }
      for (int i = 0; i <= n; ++i)
        resp(m, i) = terms[i] == -kInf ? 0.0 : std::exp(terms[i] - lse);
    });
    if (std::find(dead.begin(), dead.end(), 1) != dead.end())
      throw std::domain_error("zero-density observation");
  };

  fill_rows(obs.f, cache.comps_f, cache.log_prior_f, cache.log_unif_f, post.resp_f, threads);
  fill_rows(obs.g, cache.comps_g, cache.log_prior_g, cache.log_unif_g, post.resp_g, threads);
  return post;
}

Posteriors e_step(const ObservationSet& obs, const ModelParams& params,
                  const SensorMapPair& maps) {
  return e_step(obs, build_mixture_cache(params, maps, obs.support_f, obs.support_g));
}

std::pair<Vec, Vec> update_priors(const Posteriors& post) {
  if (post.resp_f.rows() == 0 || post.resp_g.rows() == 0)
    throw std::invalid_argument("priors update: empty responsibilities");
  Vec pf = post.resp_f.colwise().mean().transpose();
  Vec pg = post.resp_g.colwise().mean().transpose();
  pf /= pf.sum();
  pg /= pg.sum();
  return {pf, pg};
}

// ---------------------------------------------------------------------------
// Sufficient statistics.

namespace {
void weighted_stats(const Mat& data, const Vec& w, double mass, double reg, Vec& mean, Mat& cov) {
  mean = (data.transpose() * w) / mass;
  const Eigen::Index dim = data.cols();
  cov.setZero(dim, dim);
  for (Eigen::Index m = 0; m < data.rows(); ++m) {
    if (w[m] == 0.0) continue;
    Vec d = data.row(m).transpose() - mean;
    cov.noalias() += w[m] * (d * d.transpose());
  }
  cov /= mass;
  cov = 0.5 * (cov + cov.transpose()).eval();
  double tr = cov.trace();
  double ridge = reg * (tr > 0.0 ? tr / static_cast<double>(dim) : 1.0);
  cov.diagonal().array() += ridge;
}
}  // namespace

ObjectStats object_stats(const Posteriors& post, const ObservationSet& obs, int index,
                         double regularization) {
  if (index < 0 || index + 1 >= post.resp_f.cols())
    throw std::invalid_argument("object stats: index out of range");
  ObjectStats st;
  st.weights_f = post.resp_f.col(index);
  st.weights_g = post.resp_g.col(index);
  st.mass_f = st.weights_f.sum();
  st.mass_g = st.weights_g.sum();
  if (!(st.mass_f > 0.0) || !(st.mass_g > 0.0)) throw EmptyComponentError();
  weighted_stats(obs.f, st.weights_f, st.mass_f, regularization, st.mean_f, st.cov_f);
  weighted_stats(obs.g, st.weights_g, st.mass_g, regularization, st.mean_g, st.cov_g);
  return st;
}

std::pair<Mat, Mat> update_covariances(const Vec& s_new, const ObjectStats& stats,
                                       const SensorMapPair& maps) {
  Vec vf = stats.mean_f - maps.f->eval(s_new);
  Vec vg = stats.mean_g - maps.g->eval(s_new);
  Mat cf = stats.cov_f + vf * vf.transpose();
  Mat cg = stats.cov_g + vg * vg.transpose();
  return {cf, cg};
}

// ---------------------------------------------------------------------------
// Objective evaluations.

double q_complete(const Vec& s, const Mat& cov_f, const Mat& cov_g, const ObjectStats& stats,
                  const ObservationSet& obs, const SensorMapPair& maps) {
  Vec img_f = maps.f->eval(s);
  Vec img_g = maps.g->eval(s);
  auto llt_f = factorize(cov_f);
  auto llt_g = factorize(cov_g);
  double acc = -stats.mass_f * log_det(llt_f) - stats.mass_g * log_det(llt_g);
  for (Eigen::Index m = 0; m < obs.f.rows(); ++m) {
    double w = stats.weights_f[m];
    if (w == 0.0) continue;
    acc -= w * mahalanobis2(llt_f, obs.f.row(m).transpose() - img_f);
  }
  for (Eigen::Index k = 0; k < obs.g.rows(); ++k) {
    double w = stats.weights_g[k];
    if (w == 0.0) continue;
    acc -= w * mahalanobis2(llt_g, obs.g.row(k).transpose() - img_g);
  }
  return acc;
}

double q_direct(const Vec& s, const ObjectStats& stats, const ObservationSet& obs,
                const SensorMapPair& maps) {
  auto [cf, cg] = update_covariances(s, stats, maps);
  return q_complete(s, cf, cg, stats, obs, maps);
}

double q_simplified(const Vec& s, const ObjectStats& stats, const SensorMapPair& maps) {
  double df = mahalanobis2(factorize(stats.cov_f), stats.mean_f - maps.f->eval(s));
  double dg = mahalanobis2(factorize(stats.cov_g), stats.mean_g - maps.g->eval(s));
  return -stats.mass_f * std::log1p(df) - stats.mass_g * std::log1p(dg);
}

Vec q_gradient(const Vec& s, const ObjectStats& stats, const SensorMapPair& maps) {
  auto llt_f = factorize(stats.cov_f);
  auto llt_g = factorize(stats.cov_g);
  Vec vf = stats.mean_f - maps.f->eval(s);
  Vec vg = stats.mean_g - maps.g->eval(s);
  Vec wf = llt_f.solve(vf);
  Vec wg = llt_g.solve(vg);
  double df = vf.dot(wf);
  double dg = vg.dot(wg);
  return 2.0 * stats.mass_f / (1.0 + df) * (maps.f->jacobian(s).transpose() * wf) +
         2.0 * stats.mass_g / (1.0 + dg) * (maps.g->jacobian(s).transpose() * wg);
}

// ---------------------------------------------------------------------------
// Certified constants.

double phi_bound(const Mat& v_spd) {
  return 0.5 * std::sqrt(spd_eigen(v_spd).lambda_max);
}

double phi_lipschitz(const Mat& v_spd) {
  auto ev = spd_eigen(v_spd);
  double cond = ev.lambda_max / ev.lambda_min;
  return ev.lambda_max * (1.0 + 0.5 * cond);
}

double phi_value(const Mat& v_spd, const Vec& v) {
  return (v_spd * v).norm() / (1.0 + v.dot(v_spd * v));
}

namespace {
// phi constants of the inverse covariance, from the covariance's spectrum.
struct InvPhi {
  double bound;      // phi_bound(cov^{-1})
  double lipschitz;  // phi_lipschitz(cov^{-1})
};

InvPhi inv_phi(const Mat& cov) {
  auto ev = spd_eigen(cov);
  double norm_inv = 1.0 / ev.lambda_min;          // largest eigenvalue of cov^{-1}
  double cond = ev.lambda_max / ev.lambda_min;    // condition number is inversion-invariant
  return {0.5 * std::sqrt(norm_inv), norm_inv * (1.0 + 0.5 * cond)};
}
}  // namespace

double q_gradient_bound(const ObjectStats& stats, const LipschitzPair& f_consts,
                        const LipschitzPair& g_consts) {
  return 2.0 * f_consts.map * stats.mass_f * inv_phi(stats.cov_f).bound +
         2.0 * g_consts.map * stats.mass_g * inv_phi(stats.cov_g).bound;
}

double q_lipschitz(const ObjectStats& stats, const LipschitzPair& f_consts,
                   const LipschitzPair& g_consts) {
  InvPhi pf = inv_phi(stats.cov_f);
  InvPhi pg = inv_phi(stats.cov_g);
  return 2.0 * stats.mass_f * (f_consts.deriv * pf.bound + f_consts.map * f_consts.map * pf.lipschitz) +
         2.0 * stats.mass_g * (g_consts.deriv * pg.bound + g_consts.map * g_consts.map * pg.lipschitz);
}

double q_lipschitz(const ObjectStats& stats, const SensorMapPair& maps) {
  return q_lipschitz(stats, maps.f->lipschitz(), maps.g->lipschitz());
}

std::optional<double> ascent_radius(const Vec& s, const ObjectStats& stats,
                                    const SensorMapPair& maps) {
  auto cf = maps.f->local_lipschitz(s, 0.0);
  auto cg = maps.g->local_lipschitz(s, 0.0);
  if (!cf || !cg) return std::nullopt;
  double l0 = q_lipschitz(stats, *cf, *cg);
  if (!(l0 > 0.0) || !std::isfinite(l0)) return std::nullopt;
  return (2.0 / l0) * q_gradient_bound(stats, *cf, *cg);
}

// ---------------------------------------------------------------------------
// Choose.

namespace {
Vec argmax_q(const std::vector<Vec>& candidates, const ObjectStats& stats,
             const SensorMapPair& maps) {
  const Vec* pick = &candidates.front();
  double best = q_simplified(*pick, stats, maps);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    double q = q_simplified(candidates[i], stats, maps);
    if (q > best) {
      best = q;
      pick = &candidates[i];
    }
  }
  return *pick;
}
}  // namespace

ChooseResult choose(ChooseStrategy strategy, const Vec& prev, const ObjectStats& stats,
                    const SensorMapPair& maps, const Box& bounds, const SearchOptions& opts,
                    Rng& rng) {
  switch (strategy) {
    case ChooseStrategy::IP:
      return {prev, false};

    case ChooseStrategy::IV: {
      Vec s = maps.f->preimage(stats.mean_f);  // throws when no preimage exists
      if (!maps.admissible(s)) s = maps.project(s);
      return {s, false};
    }

    case ChooseStrategy::IA: {
      if (!maps.g->has_level_set_sampler()) return {prev, true};
      std::vector<Vec> samples;
      try {
        samples = maps.g->level_set_sample(stats.mean_g, opts.manifold_samples, bounds, rng);
      } catch (const std::domain_error&) {
        return {prev, true};  // mean beyond the representable level range
      } catch (const std::runtime_error&) {
        return {prev, true};  // sampling budget exhausted
      }
      std::vector<Vec> admissible;
      admissible.reserve(samples.size());
      for (Vec& s : samples)
        if (maps.in_domain(s)) admissible.push_back(std::move(s));
      if (admissible.empty()) return {prev, true};
      return {argmax_q(admissible, stats, maps), false};
    }

    case ChooseStrategy::IG: {
      std::vector<Vec> draws;
      draws.reserve(opts.global_samples);
      const long budget = 20L * opts.global_samples;
      for (long i = 0; i < budget && static_cast<int>(draws.size()) < opts.global_samples; ++i) {
        Vec s = bounds.sample(rng);
        if (maps.in_domain(s)) draws.push_back(std::move(s));
      }
      if (draws.empty()) return {prev, true};
      return {argmax_q(draws, stats, maps), false};
    }
  }
  throw std::logic_error("unknown choose strategy");
}

// ---------------------------------------------------------------------------
// Local search.

Vec local_search(const Vec& s0, const ObjectStats& stats, const SensorMapPair& maps,
                 const SearchOptions& opts) {
  const LocalVariant flavor = local_of(opts.variant);
  const LipschitzPair global_f = maps.f->lipschitz();
  const LipschitzPair global_g = maps.g->lipschitz();
  const double global_l = q_lipschitz(stats, global_f, global_g);

  Vec s = maps.admissible(s0) ? s0 : maps.project(s0);
  double q = q_simplified(s, stats, maps);

  for (int it = 0; it < opts.mstep_iters; ++it) {
    Vec grad = q_gradient(s, stats, maps);
    if (!(grad.norm() > 0.0)) break;

    double l = global_l;
    if (flavor == LocalVariant::AA) {
      if (auto rho = ascent_radius(s, stats, maps); rho && *rho > 0.0) {
        auto cf = maps.f->local_lipschitz(s, *rho);
        auto cg = maps.g->local_lipschitz(s, *rho);
        if (cf && cg) l = q_lipschitz(stats, *cf, *cg);
      }
    }
    if (!(l > 0.0) || !std::isfinite(l)) break;

    Vec step = (2.0 / l) * grad;
    double t = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 60; ++halving) {
      Vec cand = maps.project(s + t * step);
      double qc = q_simplified(cand, stats, maps);
      // Non-decrease within slack is enforced here, never assumed.
      if (qc >= q - kAscentSlack) {
        moved = (cand - s).norm() > 0.0;
        s = std::move(cand);
        q = qc;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Fit.

namespace {

struct ObjectUpdate {
  Vec position;
  Mat cov_f;
  Mat cov_g;
  bool respawned = false;
  bool fell_back = false;
};

/// Scatter of the `take` nearest rows to `center`, ridge-regularized.
Mat neighborhood_cov(const Mat& data, const Vec& center, int take, double reg) {
  const Eigen::Index rows = data.rows();
  take = static_cast<int>(std::min<Eigen::Index>(take, rows));
  std::vector<Eigen::Index> order(rows);
  std::iota(order.begin(), order.end(), 0);
  std::nth_element(order.begin(), order.begin() + (take - 1), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return (data.row(a).transpose() - center).squaredNorm() <
                            (data.row(b).transpose() - center).squaredNorm();
                   });
  Vec w = Vec::Zero(rows);
  for (int i = 0; i < take; ++i) w[order[i]] = 1.0;
  Vec mean;
  Mat cov;
  weighted_stats(data, w, static_cast<double>(take), reg, mean, cov);
  // A handful of coincident rows can still leave the ridge as the only mass.
  return cov;
}

/// Fresh component for a starved slot: an admissible candidate mapped from a
/// random first-space observation (or drawn from the bounds), covariances from
/// its neighborhoods.
ObjectUpdate respawn_object(const ObservationSet& obs, const SensorMapPair& maps,
                            double reg, Rng& rng) {
  ObjectUpdate up;
  up.respawned = true;
  std::uniform_int_distribution<Eigen::Index> pick_row(0, obs.f.rows() - 1);
  for (int attempt = 0; attempt < 200; ++attempt) {
    Vec s;
    if (maps.f->has_preimage() && attempt < 100) {
      try {
        s = maps.f->preimage(obs.f.row(pick_row(rng)).transpose());
      } catch (const std::domain_error&) {
        continue;
      }
    } else {
      s = maps.latent_bounds.sample(rng);
    }
    if (!maps.admissible(s)) s = maps.project(s);
    if (!maps.admissible(s)) continue;
    up.position = std::move(s);
    break;
  }
  if (up.position.size() == 0) up.position = maps.project(maps.latent_bounds.sample(rng));
  up.cov_f = neighborhood_cov(obs.f, maps.f->eval(up.position), 25, std::max(reg, 1e-9));
  up.cov_g = neighborhood_cov(obs.g, maps.g->eval(up.position), 25, std::max(reg, 1e-9));
  return up;
}

/// Reset one prior entry to 1/(N+1), rescaling the rest to keep the simplex.
void reset_prior_entry(Vec& priors, int index) {
  const double target = 1.0 / static_cast<double>(priors.size());
  double others = priors.sum() - priors[index];
  if (others > 0.0) {
    double scale = (1.0 - target) / others;
    priors *= scale;
  } else {
    priors.setConstant((1.0 - target) / static_cast<double>(priors.size() - 1));
  }
  priors[index] = target;
  priors /= priors.sum();
}

VecI argmax_labels(const Mat& resp) {
  VecI labels(resp.rows());
  for (Eigen::Index m = 0; m < resp.rows(); ++m) {
    Eigen::Index arg;
    resp.row(m).maxCoeff(&arg);
    labels[m] = static_cast<int>(arg) + 1;  // 1-based, outlier = N+1
  }
  return labels;
}

}  // namespace

FitReport fit(const ObservationSet& obs, int n_objects, const ModelParams& theta0,
              const SensorMapPair& maps, const SearchOptions& opts) {
  obs.validate();
  maps.validate();
  theta0.validate();
  if (theta0.n_objects() != n_objects)
    throw std::invalid_argument("fit: object count does not match initial parameters");
  if (obs.f.cols() != maps.f->obs_dim() || obs.g.cols() != maps.g->obs_dim())
    throw std::invalid_argument("fit: observation dimension does not match maps");
  if (opts.max_em_iters < 1 || opts.mstep_iters < 1)
    throw std::invalid_argument("fit: iteration counts must be positive");

  ModelParams params = theta0;
  for (auto& obj : params.objects)
    if (!maps.admissible(obj.position)) obj.position = maps.project(obj.position);

  const double empty_mass =
      kEmptyMassFactor * static_cast<double>(obs.f.rows() + obs.g.rows());

  FitReport report;
  auto record_positions = [&] {
    std::vector<Vec> snap;
    snap.reserve(params.objects.size());
    for (const auto& o : params.objects) snap.push_back(o.position);
    report.trajectory.push_back(std::move(snap));
  };

  MixtureCache cache = build_mixture_cache(params, maps, obs.support_f, obs.support_g);
  double loglik = log_likelihood(obs, cache);
  report.loglik_trace.push_back(loglik);
  record_positions();

  const ChooseStrategy strategy = choose_of(opts.variant);
  int stall = 0;
  int iterations = 0;
  bool converged = false;

  for (int it = 1; it <= opts.max_em_iters; ++it) {
    Posteriors post = e_step(obs, cache, opts.threads);
    auto [priors_f, priors_g] = update_priors(post);
    params.priors_f = priors_f;
    params.priors_g = priors_g;

    std::vector<ObjectUpdate> updates(n_objects);
    parallel_for(static_cast<std::size_t>(n_objects), opts.threads, [&](std::size_t n) {
      Rng rng = make_rng(opts.seed, static_cast<std::uint64_t>(it), n);
      double mass_f = post.resp_f.col(n).sum();
      double mass_g = post.resp_g.col(n).sum();
      if (mass_f + mass_g < empty_mass || !(mass_f > 0.0) || !(mass_g > 0.0)) {
        updates[n] = respawn_object(obs, maps, opts.regularization, rng);
        return;
      }
      ObjectStats stats = object_stats(post, obs, static_cast<int>(n), opts.regularization);
      const Vec prev = params.objects[n].position;

      ChooseResult start = choose(strategy, prev, stats, maps, maps.latent_bounds, opts, rng);
      Vec refined = local_search(start.position, stats, maps, opts);

      // Vet the move against the exact complete-data term so the observed
      // log-likelihood cannot decrease: keeping the previous position with its
      // previous covariances is always on the candidate list.
      auto [cf_prev, cg_prev] = update_covariances(prev, stats, maps);
      auto [cf_new, cg_new] = update_covariances(refined, stats, maps);
      double q_keep = q_complete(prev, params.cov_f[n], params.cov_g[n], stats, obs, maps);
      double q_refresh = q_complete(prev, cf_prev, cg_prev, stats, obs, maps);
      double q_moved = q_complete(refined, cf_new, cg_new, stats, obs, maps);

      ObjectUpdate& up = updates[n];
      up.fell_back = start.fell_back;
      if (q_moved > q_keep && q_moved >= q_refresh) {
        up.position = refined;
        up.cov_f = cf_new;
        up.cov_g = cg_new;
      } else if (q_refresh > q_keep) {
        up.position = prev;
        up.cov_f = cf_prev;
        up.cov_g = cg_prev;
      } else {
        up.position = prev;
        up.cov_f = params.cov_f[n];
        up.cov_g = params.cov_g[n];
      }
    });

    for (int n = 0; n < n_objects; ++n) {
      ObjectUpdate& up = updates[n];
      params.objects[n].position = up.position;
      params.cov_f[n] = up.cov_f;
      params.cov_g[n] = up.cov_g;
      if (up.fell_back) ++report.choose_fallbacks;
      if (up.respawned) {
        ++report.respawns;
        reset_prior_entry(params.priors_f, n);
        reset_prior_entry(params.priors_g, n);
      }
    }

    cache = build_mixture_cache(params, maps, obs.support_f, obs.support_g);
    double next = log_likelihood(obs, cache);
    report.loglik_trace.push_back(next);
    record_positions();
    iterations = it;

    double rel = (next - loglik) / std::max(1.0, std::abs(next));
    loglik = next;
    if (opts.converge_early) {
      stall = rel < opts.likelihood_tol ? stall + 1 : 0;
      if (stall >= 3) {
        converged = true;
        break;
      }
    }
  }

  Posteriors final_post = e_step(obs, cache, opts.threads);
  report.assignment.labels_f = argmax_labels(final_post.resp_f);
  report.assignment.labels_g = argmax_labels(final_post.resp_g);
  report.params = std::move(params);
  report.iterations_run = iterations;
  report.converged = opts.converge_early ? converged : true;
  report.final_loglik = loglik;
  return report;
}

}  // namespace cmm
