#include "cmm/init.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>

namespace cmm {

namespace {

constexpr int kMeanShiftIters = 500;
constexpr double kMeanShiftTol = 1e-6;
// Candidates claiming less than this fraction of the strongest candidate's
// observation mass are treated as outlier-clump artifacts: a real structure in
// a roughly balanced scene attracts a comparable share of the data, while
// clumps of background points attract a few percent.  Pruned candidates still
// return, strongest first, when the surviving pool cannot fill the requested
// component count.
constexpr double kMinModeWeight = 0.2;
// Level-set handling when carrying a non-injective observation into latent
// space: a fine sample covers the curve, then a small stratified subset is
// actually scored.  Scoring everything would make every observation of a
// cluster elect the same accidental tightest clump of opposite-space
// neighbours (the k-NN score is a noisy density estimate, and its global
// arg-best over the curve is a dataset-level accident), so the per-pick error
// would be perfectly correlated and never average out; scoring a private
// evenly-spread subset keeps picks independent across observations while
// giving every stretch of the curve equal chances regardless of the
// sampler's parametrization.
constexpr int kLevelSetSamples = 200;
constexpr int kScoredTickets = 20;
constexpr double kCovRidge = 1e-9;

Vec auto_bandwidth(const Mat& points) {
  const double n = static_cast<double>(points.rows());
  Vec mean = points.colwise().mean().transpose();
  Vec h(points.cols());
  std::vector<double> col(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    double var = (points.col(i).array() - mean[i]).square().sum() / std::max(1.0, n - 1.0);
    double sd = std::sqrt(var);
    // Robust spread: clustered data with outlier tails and fold pile-ups makes
    // the raw standard deviation overshoot the kernel scale badly, so take the
    // smaller of sd and the normalized interquartile range.
    for (Eigen::Index m = 0; m < points.rows(); ++m)
      col[static_cast<std::size_t>(m)] = points(m, i);
    std::sort(col.begin(), col.end());
    const auto quartile = [&](double q) {
      double pos = q * (n - 1.0);
      auto lo = static_cast<std::size_t>(pos);
      double frac = pos - static_cast<double>(lo);
      return col[lo] + frac * (col[std::min(lo + 1, col.size() - 1)] - col[lo]);
    };
    double iqr = (quartile(0.75) - quartile(0.25)) / 1.34;
    double spread = iqr > 0.0 ? std::min(sd, iqr) : sd;
    h[i] = spread > 0.0 ? 1.06 * spread * std::pow(n, -0.2) : 1.0;
  }
  return h;
}

Vec bandwidth_for(const Mat& points, double configured) {
  if (configured > 0.0) return Vec::Constant(points.cols(), configured);
  return auto_bandwidth(points);
}

struct ShiftOutcome {
  Vec mode;
  double kde = 0.0;  // unnormalized product-kernel density at the mode
};

double kde_at(const Mat& points, const Vec& h, const Vec& x, Vec* weights) {
  double total = 0.0;
  for (Eigen::Index m = 0; m < points.rows(); ++m) {
    double e = ((points.row(m).transpose() - x).array() / h.array()).square().sum();
    double w = std::exp(-0.5 * e);
    if (weights) (*weights)[m] = w;
    total += w;
  }
  return total / static_cast<double>(points.rows());
}

ShiftOutcome mean_shift_impl(const Mat& points, const Vec& start, const Vec& h) {
  Vec x = start;
  Vec w(points.rows());
#ifndef NDEBUG
  double prev_kde = -1.0;
#endif
  for (int it = 0; it < kMeanShiftIters; ++it) {
    const double kde = kde_at(points, h, x, &w);
    (void)kde;
#ifndef NDEBUG
    assert(kde >= prev_kde * (1.0 - 1e-12));  // classic ascent property
    prev_kde = kde;
#endif
    double wsum = w.sum();
    if (!(wsum > 0.0)) break;  // started beyond kernel reach of every point
    Vec next = (points.transpose() * w) / wsum;
    double shift = ((next - x).array() / h.array()).abs().maxCoeff();
    x = next;
    if (shift < kMeanShiftTol) break;
  }
  return {x, kde_at(points, h, x, nullptr)};
}

struct Candidate {
  Vec point;
  // Provisional while a pool is being assembled (kernel density from the mode
  // search); before pruning and selection it is replaced by the
  // observation-support score, which is comparable across candidates from
  // different sources.
  double weight = 0.0;
};

bool lex_less(const Vec& a, const Vec& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

/// Random mean-shift start points, drawn so that coverage does not depend on
/// luck alone: the first start is uniform over the points, each further one is
/// drawn with probability proportional to the squared bandwidth-scaled
/// distance from the starts already taken.  Uniform draws miss a basin holding
/// a few percent of the points with noticeable probability, and a basin missed
/// here is unrecoverable downstream; distance-weighted draws favor regions no
/// start has reached while still following the mass of the data.
std::vector<Eigen::Index> seeded_starts(const Mat& points, const Vec& h, int count, Rng& rng) {
  const Eigen::Index n = points.rows();
  Mat scaled = points * h.cwiseInverse().asDiagonal();
  std::vector<Eigen::Index> starts;
  std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  Eigen::Index next = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
  while (starts.size() < std::min<std::size_t>(static_cast<std::size_t>(count),
                                               static_cast<std::size_t>(n))) {
    starts.push_back(next);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& d = dist[static_cast<std::size_t>(i)];
      d = std::min(d, (scaled.row(i) - scaled.row(next)).squaredNorm());
      total += d;
    }
    if (!(total > 0.0)) break;  // every point already coincides with a start
    double ticket = std::uniform_real_distribution<double>(0.0, total)(rng);
    next = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      ticket -= dist[static_cast<std::size_t>(i)];
      if (ticket <= 0.0) {
        next = i;
        break;
      }
    }
  }
  return starts;
}

/// Restarted mean shift on one point set: de-duplicated modes with their
/// kernel densities as provisional weights.
std::vector<Candidate> mode_search(const Mat& points, const Vec& h, double rarefy_eps,
                                   int restarts, Rng& rng) {
  std::vector<ShiftOutcome> runs;
  runs.reserve(static_cast<std::size_t>(restarts));
  for (Eigen::Index i : seeded_starts(points, h, restarts, rng))
    runs.push_back(mean_shift_impl(points, points.row(i).transpose(), h));

  // De-duplicate: an explicit radius works in data units; the default merges
  // within one bandwidth (unit distance in bandwidth-scaled coordinates), the
  // resolution limit of the mode search itself.
  std::vector<ShiftOutcome> kept;
  for (auto& run : runs) {
    bool dup = false;
    for (const auto& k : kept) {
      double d = rarefy_eps > 0.0 ? (run.mode - k.mode).norm()
                                  : ((run.mode - k.mode).array() / h.array()).matrix().norm();
      if (d <= (rarefy_eps > 0.0 ? rarefy_eps : 1.0)) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(std::move(run));
  }

  double top = 0.0;
  for (const auto& k : kept) top = std::max(top, k.kde);
  std::vector<Candidate> out;
  for (auto& k : kept) out.push_back({std::move(k.mode), top > 0.0 ? k.kde / top : 1.0});
  return out;
}

/// Mass pruning at the pool level: candidates below kMinModeWeight of the
/// strongest are dropped — unless the strong ones cannot fill `want`, in which
/// case weak candidates return heaviest-first.  A weak candidate with some
/// data behind it is still a better extra center than a uniform draw.
/// Number of candidates carrying at least the pruning threshold's share of the
/// strongest candidate's mass — the part of the pool that would survive
/// pruning on its own merit.
int strong_count(const std::vector<Candidate>& pool) {
  double top = 0.0;
  for (const auto& c : pool) top = std::max(top, c.weight);
  int n = 0;
  for (const auto& c : pool)
    if (top <= 0.0 || c.weight >= kMinModeWeight * top) ++n;
  return n;
}

/// Appends up to `max_new` cloud points to the pool as extra center
/// candidates, two vocabularies in priority order.  First, a split candidate
/// per existing candidate (heaviest first): the densest cloud point in a tight
/// annulus around it, expressing where that structure's mass concentrates
/// internally — the extra center the likelihood rewards most on a heavy tight
/// cluster is a second one right beside the first.  Then new-territory
/// candidates: the densest points at least one bandwidth away from everything
/// already kept.  The rescoring and slot allocation afterwards decide which of
/// them actually earn a place.
void supplement_from_cloud(std::vector<Candidate>& pool, const Mat& cloud_m, const Vec& h,
                           int max_new) {
  if (max_new <= 0 || cloud_m.rows() == 0) return;
  Mat scaled = cloud_m * h.cwiseInverse().asDiagonal();
  Vec density(scaled.rows());
  for (Eigen::Index i = 0; i < scaled.rows(); ++i)
    density(i) = kde_at(cloud_m, h, cloud_m.row(i).transpose(), nullptr);
  std::vector<Vec> kept;
  kept.reserve(pool.size() + static_cast<std::size_t>(max_new));
  for (const auto& c : pool) kept.push_back(c.point.cwiseQuotient(h));
  int added = 0;

  std::vector<std::size_t> anchors(pool.size());
  std::iota(anchors.begin(), anchors.end(), std::size_t{0});
  std::sort(anchors.begin(), anchors.end(), [&](std::size_t x, std::size_t y) {
    if (pool[x].weight != pool[y].weight) return pool[x].weight > pool[y].weight;
    return lex_less(pool[x].point, pool[y].point);
  });
  for (std::size_t a : anchors) {
    if (added >= max_new) break;
    const Vec anchor = pool[a].point.cwiseQuotient(h);
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < scaled.rows(); ++i) {
      double d = (scaled.row(i).transpose() - anchor).norm();
      if (d < 0.1 || d > 0.35) continue;
      if (best < 0 || density(i) > density(best)) best = i;
    }
    if (best < 0) continue;
    bool taken_already = false;
    for (const auto& k : kept)
      if ((scaled.row(best).transpose() - k).norm() < 0.05) {
        taken_already = true;
        break;
      }
    if (taken_already) continue;
    kept.push_back(scaled.row(best).transpose());
    pool.push_back({cloud_m.row(best).transpose(), density(best)});
    ++added;
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(scaled.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return density(a) > density(b); });
  for (Eigen::Index i : order) {
    if (added >= max_new) break;
    bool fresh = true;
    for (const auto& k : kept)
      if ((scaled.row(i).transpose() - k).norm() < 1.0) {
        fresh = false;
        break;
      }
    if (!fresh) continue;
    kept.push_back(scaled.row(i).transpose());
    pool.push_back({cloud_m.row(i).transpose(), density(i)});
    ++added;
  }
}

std::vector<Candidate> prune_pool(std::vector<Candidate> pool, int want) {
  double top = 0.0;
  for (const auto& c : pool) top = std::max(top, c.weight);
  std::vector<Candidate> strong, weak;
  for (auto& c : pool) {
    if (top <= 0.0 || c.weight >= kMinModeWeight * top) {
      strong.push_back(std::move(c));
    } else {
      weak.push_back(std::move(c));
    }
  }
  std::sort(weak.begin(), weak.end(), [](const Candidate& a, const Candidate& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return lex_less(a.point, b.point);
  });
  for (auto& c : weak) {
    if (static_cast<int>(strong.size()) >= want) break;
    strong.push_back(std::move(c));
  }
  return strong;
}

/// Observations of one space rescaled to unit bandwidth per dimension, so
/// nearest-neighbour distances weigh every dimension by its data resolution
/// rather than its raw units.
struct ScaledSpace {
  Mat points;  // rows divided elementwise by the bandwidth
  Vec inv_h;

  Vec scale(const Vec& x) const { return x.cwiseProduct(inv_h); }
};

ScaledSpace scaled_space(const Mat& data, double configured) {
  ScaledSpace s;
  s.inv_h = bandwidth_for(data, configured).cwiseInverse();
  s.points = data * s.inv_h.asDiagonal();
  return s;
}

/// Replaces provisional pool weights by the captured-mass score: every
/// observation goes to the nearest candidate image in bandwidth-scaled
/// coordinates, and a candidate's weight is the fraction of each space's
/// observations it attracts, summed over the spaces and normalized to a unit
/// maximum.  Kernel densities of modes found in different searches are not
/// comparable, and pointwise density at an image cannot tell a candidate
/// supported in both spaces from one lying on a dense structure of a single
/// space; the mass a candidate would claim from the shared observations —
/// under the same nearest-image assignment the covariance construction uses —
/// is the one yardstick every candidate can be held to.
void score_pool(std::vector<Candidate>& pool, const ScaledSpace& f, const ScaledSpace& g,
                const SensorMapPair& maps) {
  if (pool.empty()) return;
  for (auto& c : pool) c.weight = 0.0;
  for (const auto* space : {&f, &g}) {
    std::vector<Vec> images;
    images.reserve(pool.size());
    for (const auto& c : pool)
      images.push_back(space->scale((space == &f ? maps.f : maps.g)->eval(c.point)));
    const Mat& pts = space->points;
    for (Eigen::Index m = 0; m < pts.rows(); ++m) {
      std::size_t arg = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pool.size(); ++i) {
        double d = (pts.row(m).transpose() - images[i]).squaredNorm();
        if (d < best) {
          best = d;
          arg = i;
        }
      }
      pool[arg].weight += 1.0 / static_cast<double>(pts.rows());
    }
  }
  double top = 0.0;
  for (const auto& c : pool) top = std::max(top, c.weight);
  if (top > 0.0)
    for (auto& c : pool) c.weight /= top;
}

/// Candidate separation measured where the mixture lives: between the
/// candidates' images in the two observation spaces, scaled by the same
/// bandwidths the mode search used.  Latent Euclidean distance is the wrong
/// yardstick for center spreading — a poorly separated scene keeps objects far
/// apart in depth while their images nearly coincide, and coverage depends on
/// the images.
struct ImageMetric {
  const SensorMapPair* maps = nullptr;
  Vec inv_h_f;  // elementwise 1 / bandwidth per image dimension
  Vec inv_h_g;
};

ImageMetric image_metric(const SensorMapPair& maps, const ScaledSpace& f, const ScaledSpace& g) {
  ImageMetric m;
  m.maps = &maps;
  m.inv_h_f = f.inv_h;
  m.inv_h_g = g.inv_h;
  return m;
}

/// Center selection by complete-linkage agglomerative clustering of the
/// candidate pool in the image metric, cut at `want` groups; each group is
/// represented by its best-supported member.  Mutually far groups give
/// mutually far centers, while an isolated stray candidate merely joins the
/// group of the structure it hangs off — a greedy max-min pick would chase the
/// stray itself, trading a true mode for an artifact.
std::vector<Vec> select_centers(const std::vector<Candidate>& pool, int want,
                                const ImageMetric& metric) {
  std::vector<Vec> centers;
  if (pool.empty() || want <= 0) return centers;
  const std::size_t n = pool.size();

  std::vector<Vec> img_f(n), img_g(n);
  for (std::size_t i = 0; i < n; ++i) {
    img_f[i] = metric.maps->f->eval(pool[i].point);
    img_g[i] = metric.maps->g->eval(pool[i].point);
  }
  auto distance = [&](std::size_t i, std::size_t j) {
    const double df = ((img_f[i] - img_f[j]).array() * metric.inv_h_f.array()).square().sum();
    const double dg = ((img_g[i] - img_g[j]).array() * metric.inv_h_g.array()).square().sum();
    return std::sqrt(df + dg);
  };

  // groups as index lists; linkage = max pairwise distance between groups.
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups.push_back({i});
  while (groups.size() > static_cast<std::size_t>(want)) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t a = 0, b = 1;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        double link = 0.0;
        for (std::size_t p : groups[i])
          for (std::size_t q : groups[j]) link = std::max(link, distance(p, q));
        if (link < best) {
          best = link;
          a = i;
          b = j;
        }
      }
    }
    groups[a].insert(groups[a].end(), groups[b].begin(), groups[b].end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(b));
  }

  // Best-supported representative per group; best-supported groups first for
  // a stable, meaningful component order.
  for (auto& g : groups) {
    std::sort(g.begin(), g.end(), [&](std::size_t x, std::size_t y) {
      if (pool[x].weight != pool[y].weight) return pool[x].weight > pool[y].weight;
      return lex_less(pool[x].point, pool[y].point);
    });
  }
  std::vector<double> gmass(groups.size(), 0.0);
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (std::size_t i : groups[gi]) gmass[gi] += pool[i].weight;

  // Apportion the slots over groups by captured mass (highest-quotient rule):
  // the k-th slot a group earns goes to its k-th best member, and a group
  // holding twice the data earns a second center before a marginal group earns
  // its first.  With balanced groups this reduces to one representative per
  // group; with surplus slots it spends them on the heavy structures instead
  // of handing every stray clump a center by default.
  std::vector<std::size_t> taken(groups.size(), 0);
  std::vector<std::size_t> reps;
  while (reps.size() < static_cast<std::size_t>(want)) {
    std::size_t best = groups.size();
    double best_q = -1.0;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      if (taken[gi] >= groups[gi].size()) continue;
      double q = gmass[gi] / static_cast<double>(taken[gi] + 1);
      bool better = q > best_q;
      if (!better && q == best_q && best < groups.size()) {
        if (gmass[gi] != gmass[best])
          better = gmass[gi] > gmass[best];
        else
          better = lex_less(pool[groups[gi][taken[gi]]].point,
                            pool[groups[best][taken[best]]].point);
      }
      if (better) {
        best = gi;
        best_q = q;
      }
    }
    if (best >= groups.size()) break;  // every candidate already holds a slot
    reps.push_back(groups[best][taken[best]]);
    ++taken[best];
  }
  std::sort(reps.begin(), reps.end(), [&](std::size_t x, std::size_t y) {
    if (pool[x].weight != pool[y].weight) return pool[x].weight > pool[y].weight;
    return lex_less(pool[x].point, pool[y].point);
  });
  for (std::size_t r : reps) centers.push_back(pool[r].point);
  return centers;
}

void cov_from_rows(const Mat& data, const std::vector<Eigen::Index>& rows, Mat& cov) {
  const Eigen::Index dim = data.cols();
  Vec mean = Vec::Zero(dim);
  for (auto r : rows) mean += data.row(r).transpose();
  mean /= static_cast<double>(rows.size());
  cov.setZero(dim, dim);
  for (auto r : rows) {
    Vec d = data.row(r).transpose() - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(rows.size());
}

/// Nearest-image assignment scatter per center; degenerate groups fall back to
/// the bandwidth scale of the space.
std::vector<Mat> space_covariances(const Mat& data, const std::vector<Vec>& images) {
  const int n = static_cast<int>(images.size());
  std::vector<std::vector<Eigen::Index>> groups(n);
  for (Eigen::Index m = 0; m < data.rows(); ++m) {
    int arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      double d = (data.row(m).transpose() - images[i]).squaredNorm();
      if (d < best) {
        best = d;
        arg = i;
      }
    }
    groups[arg].push_back(m);
  }
  Vec h = auto_bandwidth(data);
  std::vector<Mat> covs(n);
  const Eigen::Index dim = data.cols();
  for (int i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(groups[i].size()) >= 2 * dim) {
      cov_from_rows(data, groups[i], covs[i]);
    } else {
      covs[i] = h.array().square().matrix().asDiagonal();
    }
    double tr = covs[i].trace();
    covs[i].diagonal().array() += kCovRidge * (tr > 0.0 ? tr / static_cast<double>(dim) : 1.0);
  }
  return covs;
}

InitResult params_from_centers(std::vector<Vec> centers, const ObservationSet& obs,
                               const SensorMapPair& maps, int n_objects, Rng& rng) {
  InitResult result;
  // Pad with admissible uniform draws when the candidate pool ran short.
  while (static_cast<int>(centers.size()) < n_objects) {
    result.padded = true;
    Vec s;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      s = maps.latent_bounds.sample(rng);
      if (maps.in_domain(s)) break;
      s.resize(0);
    }
    if (s.size() == 0) s = maps.project(maps.latent_bounds.sample(rng));
    centers.push_back(std::move(s));
  }

  ModelParams& p = result.params;
  const int n = n_objects;
  p.priors_f = Vec::Constant(n + 1, 1.0 / (n + 1.0));
  p.priors_g = Vec::Constant(n + 1, 1.0 / (n + 1.0));
  std::vector<Vec> img_f, img_g;
  for (const Vec& c : centers) {
    p.objects.push_back({c});
    img_f.push_back(maps.f->eval(c));
    img_g.push_back(maps.g->eval(c));
  }
  if (n > 0) {
    p.cov_f = space_covariances(obs.f, img_f);
    p.cov_g = space_covariances(obs.g, img_g);
  }
  p.validate();
  return result;
}

/// Latent candidates for one non-injective observation value: level-set
/// samples scored by neighbor density of their images in the other space,
/// measured in that space's bandwidth-scaled coordinates.
std::optional<Vec> best_level_candidate(const Vec& value, const ScaledSpace& other,
                                        const SensorMapPair& maps, int knn_k, Rng& rng) {
  std::vector<Vec> draws;
  try {
    draws = maps.g->level_set_sample(value, kLevelSetSamples, maps.latent_bounds, rng);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  std::vector<Vec> latent;
  std::vector<Vec> image;  // scaled opposite-space image per admissible draw
  for (Vec& s : draws) {
    if (!maps.in_domain(s)) continue;
    image.push_back(other.scale(maps.f->eval(s)));
    latent.push_back(std::move(s));
  }
  if (latent.empty()) return std::nullopt;

  // Stratify: farthest-point thinning in image space spreads the scored
  // tickets evenly over the curve as the density estimate sees it.
  std::vector<std::size_t> tickets;
  const std::size_t want = std::min<std::size_t>(kScoredTickets, latent.size());
  std::vector<double> dist(latent.size(), std::numeric_limits<double>::infinity());
  std::size_t next = 0;  // draws arrive in random order; the first is a fair anchor
  while (tickets.size() < want) {
    tickets.push_back(next);
    std::size_t arg = latent.size();
    double best_d = -1.0;
    for (std::size_t i = 0; i < latent.size(); ++i) {
      dist[i] = std::min(dist[i], (image[i] - image[next]).squaredNorm());
      if (dist[i] > best_d) {
        best_d = dist[i];
        arg = i;
      }
    }
    if (arg == latent.size() || best_d <= 0.0) break;
    next = arg;
  }

  const int k = std::min<int>(knn_k, static_cast<int>(other.points.rows()));
  double best = -1.0;
  std::optional<Vec> pick;
  for (std::size_t t : tickets) {
    double d = knn_distance(other.points, image[t], k);
    double score = 1.0 / std::max(d, 1e-300);
    if (score > best) {
      best = score;
      pick = latent[t];
    }
  }
  return pick;
}

}  // namespace

std::string to_string(InitStrategy s) { return s == InitStrategy::OSC ? "OSC" : "PSC"; }

InitStrategy init_strategy_from_string(const std::string& name) {
  if (name == "OSC") return InitStrategy::OSC;
  if (name == "PSC") return InitStrategy::PSC;
  throw std::invalid_argument("unknown init strategy: " + name);
}

Vec mean_shift(const Mat& points, const Vec& start, double bandwidth) {
  if (points.rows() < 1) throw std::invalid_argument("mean shift: empty point set");
  if (points.cols() != start.size())
    throw std::invalid_argument("mean shift: dimension mismatch");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("mean shift: bandwidth must be positive");
  return mean_shift_impl(points, start, Vec::Constant(points.cols(), bandwidth)).mode;
}

double knn_distance(const Mat& points, const Vec& x, int k) {
  if (k < 1 || k > points.rows())
    throw std::invalid_argument("knn distance: order out of range");
  std::vector<double> d2(points.rows());
  for (Eigen::Index m = 0; m < points.rows(); ++m)
    d2[m] = (points.row(m).transpose() - x).squaredNorm();
  std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.end());
  return std::sqrt(d2[k - 1]);
}

std::vector<Vec> rarefy(const std::vector<Vec>& candidates, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("rarefy: radius must be non-negative");
  std::vector<Vec> kept;
  for (const Vec& c : candidates) {
    bool dup = false;
    for (const Vec& k : kept)
      if ((c - k).norm() <= eps) {
        dup = true;
        break;
      }
    if (!dup) kept.push_back(c);
  }
  return kept;
}

InitResult osc_init(const ObservationSet& obs, const SensorMapPair& maps, int n_objects,
                    const InitOptions& opts, Rng& rng) {
  obs.validate();
  maps.validate();
  if (n_objects < 0) throw std::invalid_argument("init: negative object count");

  const ScaledSpace f_scaled = scaled_space(obs.f, opts.bandwidth_f);
  const ScaledSpace g_scaled = scaled_space(obs.g, opts.bandwidth_g);
  std::vector<Candidate> pool;

  // First space: injective, each mode maps straight back.
  auto modes_f = mode_search(obs.f, bandwidth_for(obs.f, opts.bandwidth_f), opts.rarefy_f,
                             opts.restarts, rng);
  for (const auto& m : modes_f) {
    try {
      Vec s = maps.f->preimage(m.point);
      if (maps.admissible(s)) pool.push_back({std::move(s), m.weight});
    } catch (const std::domain_error&) {
      // mode at infinity, nothing to carry over
    }
  }

  // Second space: pick the densest-image point on each mode's level set.
  auto modes_g = mode_search(obs.g, bandwidth_for(obs.g, opts.bandwidth_g), opts.rarefy_g,
                             opts.restarts, rng);
  for (const auto& m : modes_g) {
    auto s = best_level_candidate(m.point, f_scaled, maps, opts.knn_k, rng);
    if (s && maps.latent_bounds.contains(*s)) pool.push_back({std::move(*s), m.weight});
  }

  score_pool(pool, f_scaled, g_scaled, maps);
  pool = prune_pool(std::move(pool), n_objects);
  score_pool(pool, f_scaled, g_scaled, maps);  // survivors inherit the pruned share
  return params_from_centers(select_centers(pool, n_objects,
                                            image_metric(maps, f_scaled, g_scaled)),
                             obs, maps, n_objects, rng);
}

InitResult psc_init(const ObservationSet& obs, const SensorMapPair& maps, int n_objects,
                    const InitOptions& opts, Rng& rng) {
  obs.validate();
  maps.validate();
  if (n_objects < 0) throw std::invalid_argument("init: negative object count");

  const ScaledSpace f_scaled = scaled_space(obs.f, opts.bandwidth_f);
  const ScaledSpace g_scaled = scaled_space(obs.g, opts.bandwidth_g);

  std::vector<Vec> cloud;
  cloud.reserve(obs.f.rows() + obs.g.rows());
  for (Eigen::Index m = 0; m < obs.f.rows(); ++m) {
    try {
      Vec s = maps.f->preimage(obs.f.row(m).transpose());
      if (maps.admissible(s)) cloud.push_back(std::move(s));
    } catch (const std::domain_error&) {
      // unmappable observation, skip
    }
  }
  for (Eigen::Index k = 0; k < obs.g.rows(); ++k) {
    auto s = best_level_candidate(obs.g.row(k).transpose(), f_scaled, maps, opts.knn_k, rng);
    if (s && maps.latent_bounds.contains(*s)) cloud.push_back(std::move(*s));
  }

  std::vector<Candidate> pool;
  Mat cloud_m;
  Vec h;
  if (!cloud.empty()) {
    cloud_m.resize(static_cast<Eigen::Index>(cloud.size()), maps.f->latent_dim());
    for (std::size_t i = 0; i < cloud.size(); ++i) cloud_m.row(i) = cloud[i].transpose();
    h = bandwidth_for(cloud_m, opts.bandwidth_s);
    pool = mode_search(cloud_m, h, opts.rarefy_s, opts.restarts, rng);
    for (auto& c : pool)
      if (!maps.admissible(c.point)) c.point = maps.project(c.point);
  }

  score_pool(pool, f_scaled, g_scaled, maps);
  if (cloud_m.rows() > 0 && strong_count(pool) < n_objects) {
    // Fewer well-supported modes than requested components.  The candidate
    // cloud itself is the authoritative pool here — every point in it came
    // from an observation — so extend with a density-ranked rarefied subset of
    // the cloud before the pruning step decides the final lineup.  Points this
    // adds near a structure's fringe earn real observation mass on the rescore
    // and make honest extra centers when the slot allocation grants a heavy
    // structure a second one; points on background clumps score low and get
    // pruned like any other artifact.
    supplement_from_cloud(pool, cloud_m, h, n_objects - strong_count(pool) + 2);
    score_pool(pool, f_scaled, g_scaled, maps);
  }
  pool = prune_pool(std::move(pool), n_objects);
  score_pool(pool, f_scaled, g_scaled, maps);  // survivors inherit the pruned share
  return params_from_centers(select_centers(pool, n_objects,
                                            image_metric(maps, f_scaled, g_scaled)),
                             obs, maps, n_objects, rng);
}

InitResult run_init(const ObservationSet& obs, const SensorMapPair& maps, int n_objects,
                    const InitOptions& opts, Rng& rng) {
  return opts.strategy == InitStrategy::OSC ? osc_init(obs, maps, n_objects, opts, rng)
                                            : psc_init(obs, maps, n_objects, opts, rng);
}

}  // namespace cmm
