#include "ricprobe/sim.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

namespace ricprobe {

void PathSample::resize(int knots, int ambient, int tangent) {
  n_knots = knots;
  amb = ambient;
  d = tangent;
  x.resize(static_cast<std::size_t>(knots) * ambient);
  frame.resize(static_cast<std::size_t>(knots) * ambient * tangent);
  push.assign(knots, 0.0);
  hit.assign(knots, 0);
  local_time = 0.0;
  ok = true;
}

Vec PathSample::point(int k) const {
  Vec p(amb);
  const double* src = x.data() + static_cast<std::size_t>(k) * amb;
  for (int i = 0; i < amb; ++i) p[i] = src[i];
  return p;
}

Mat PathSample::frame_at(int k) const {
  Mat f(amb, d);
  const double* src = frame.data() + static_cast<std::size_t>(k) * amb * d;
  for (int a = 0; a < d; ++a)
    for (int i = 0; i < amb; ++i) f(i, a) = src[a * amb + i];
  return f;
}

void PathSample::set_point(int k, const Vec& p) {
  double* dst = x.data() + static_cast<std::size_t>(k) * amb;
  for (int i = 0; i < amb; ++i) dst[i] = p[i];
}

void PathSample::set_frame(int k, const Mat& f) {
  double* dst = frame.data() + static_cast<std::size_t>(k) * amb * d;
  for (int a = 0; a < d; ++a)
    for (int i = 0; i < amb; ++i) dst[a * amb + i] = f(i, a);
}

namespace {

// Advance knots from_knot+1 .. n_steps of a sample whose knot from_knot is
// already in place.
void advance_path(const Manifold& m, const SimConfig& cfg, int from_knot, NormalStream& rng,
                  PathSample& out, bool negate) {
  const int n = cfg.n_steps;
  const int d = m.dim();
  const int amb = m.ambient_dim();
  const double dt = cfg.dt();
  const double noise_scale = std::sqrt(2.0 * dt) * (negate ? -1.0 : 1.0);
  const auto chart_radius = m.chart_bound();

  Vec xcur = out.point(from_knot);
  Mat ucur = out.frame_at(from_knot);

  Vec xi(d), v(amb), y(amb);
  for (int k = from_knot; k < n; ++k) {
    for (int a = 0; a < d; ++a) xi[a] = rng.next();

    v.noalias() = ucur * (noise_scale * xi);
    if (m.has_drift()) v += dt * m.drift_value(xcur);

    y = m.project(m.exp(xcur, v));
    Mat unext = m.transport_frame(xcur, y, ucur);

    double step_push = 0.0;
    bool step_hit = false;
    if (m.has_boundary()) {
      int folds = 0;
      while (m.boundary(y).dist < 0.0) {
        if (++folds > cfg.max_reflections) {
          out.ok = false;
          return;
        }
        const Reflected r = m.reflect(y);
        unext = m.transport_frame(y, r.point, unext);
        step_push += r.push;
        y = m.project(r.point);
        step_hit = true;
      }
    }
    if (chart_radius && y.norm() > *chart_radius) {
      out.ok = false;
      return;
    }
    if (m.residual(y) > kTolOnManifold) throw std::runtime_error(m.name() + ": constraint drift");

    xcur = y;
    ucur = unext;
    out.set_point(k + 1, xcur);
    out.set_frame(k + 1, ucur);
    out.push[k + 1] = step_push;
    out.hit[k + 1] = step_hit ? 1 : 0;
    out.local_time += step_push;
  }
}

}  // namespace

void simulate(const Manifold& m, const SimConfig& cfg, NormalStream& rng, PathSample& out,
              bool negate) {
  out.resize(cfg.n_steps + 1, m.ambient_dim(), m.dim());
  const Vec x0 = m.project(cfg.x0);
  out.set_point(0, x0);
  out.set_frame(0, m.orthonormal_frame(x0));
  advance_path(m, cfg, 0, rng, out, negate);
}

void simulate_continuation(const Manifold& m, const SimConfig& cfg, int from_knot,
                           NormalStream& rng, PathSample& inout) {
  inout.ok = true;
  inout.local_time = 0.0;
  for (int k = 0; k <= from_knot; ++k) inout.local_time += inout.push[k];
  advance_path(m, cfg, from_knot, rng, inout, false);
}

void simulate_indexed(const Manifold& m, const SimConfig& cfg, uint64_t master_seed,
                      std::size_t idx, bool antithetic, PathSample& out) {
  const std::size_t stream_idx = antithetic ? idx / 2 : idx;
  NormalStream rng(path_stream_key(master_seed, stream_idx));
  simulate(m, cfg, rng, out, antithetic && (idx % 2 == 1));
}

namespace {

// Per-index job: simulate, reduce into the batch row, report usability.
using IndexJob = std::function<bool(std::size_t idx, double* row)>;
// Called once per worker thread so each job owns its scratch.
using JobFactory = std::function<IndexJob()>;

EnsembleResult dispatch_batches(const EnsembleOpts& opts, std::size_t width, BatchTable& table,
                                const JobFactory& make_job) {
  const std::size_t n = opts.n_paths;
  const std::size_t nb = opts.n_batches;
  if (n == 0 || nb == 0) throw std::invalid_argument("run_ensemble: empty ensemble");
  if (n % nb != 0) throw std::invalid_argument("run_ensemble: n_paths must be a multiple of n_batches");
  if (opts.antithetic && (n / nb) % 2 != 0)
    throw std::invalid_argument("run_ensemble: antithetic batches need an even path count");

  table.resize(nb, width);
  const std::size_t per_batch = n / nb;

  int workers = opts.workers;
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = static_cast<int>(std::min<std::size_t>(workers, nb));

  std::atomic<std::size_t> next_batch{0};
  std::atomic<std::size_t> discarded{0};
  std::atomic<bool> failed{false};
  std::string error_msg;
  std::mutex error_mu;

  auto work = [&]() {
    try {
      IndexJob job = make_job();
      for (;;) {
        const std::size_t b = next_batch.fetch_add(1);
        if (b >= nb || failed.load(std::memory_order_relaxed)) break;
        double* row = table.row(b);
        std::size_t done = 0;
        for (std::size_t i = 0; i < per_batch; ++i) {
          const std::size_t idx = b * per_batch + i;
          if (job(idx, row))
            ++done;
          else
            discarded.fetch_add(1);
        }
        table.counts[b] = done;
      }
    } catch (const std::exception& e) {
      failed.store(true);
      std::lock_guard<std::mutex> lk(error_mu);
      if (error_msg.empty()) error_msg = e.what();
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  if (failed.load()) throw std::runtime_error("run_ensemble: " + error_msg);

  EnsembleResult res;
  res.n_discarded = discarded.load();
  res.n_done = table.total_count();
  if (static_cast<double>(res.n_discarded) > opts.max_discard_frac * static_cast<double>(n))
    throw std::runtime_error("run_ensemble: discard fraction exceeded budget");
  return res;
}

}  // namespace

EnsembleResult run_ensemble(const Manifold& m, const SimConfig& cfg, const EnsembleOpts& opts,
                            std::size_t width, BatchTable& table, const PathVisitor& visit) {
  auto factory = [&]() -> IndexJob {
    return [&m, &cfg, &opts, &visit, path = PathSample{}](std::size_t idx,
                                                          double* row) mutable {
      simulate_indexed(m, cfg, opts.master_seed, idx, opts.antithetic, path);
      if (!path.ok) return false;
      visit(idx, path, row);
      return true;
    };
  };
  return dispatch_batches(opts, width, table, factory);
}

EnsembleResult run_coupled_ensemble(const Manifold& m, std::span<const SimConfig> cfgs,
                                    const EnsembleOpts& opts, std::size_t width,
                                    BatchTable& table, const CoupledVisitor& visit) {
  if (cfgs.empty()) throw std::invalid_argument("run_coupled_ensemble: no configurations");
  for (const auto& c : cfgs)
    if (c.n_steps != cfgs[0].n_steps)
      throw std::invalid_argument("run_coupled_ensemble: step counts must match");

  auto factory = [&]() -> IndexJob {
    return [&m, cfgs, &opts, &visit,
            paths = std::vector<PathSample>(cfgs.size())](std::size_t idx,
                                                          double* row) mutable {
      for (std::size_t j = 0; j < cfgs.size(); ++j) {
        simulate_indexed(m, cfgs[j], opts.master_seed, idx, opts.antithetic, paths[j]);
        if (!paths[j].ok) return false;
      }
      visit(idx, paths, row);
      return true;
    };
  };
  return dispatch_batches(opts, width, table, factory);
}

}  // namespace ricprobe
