#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ricprobe/manifold.hpp"
#include "ricprobe/rng.hpp"
#include "ricprobe/stats.hpp"

namespace ricprobe {

// Euler step scheme for dX = sqrt(2) U dW + Z dt with boundary reflection:
// the proposal leaves along a geodesic, exterior endpoints are folded back
// across the boundary, and the fold distance (twice the overshoot, the
// discrete Skorokhod pick validated against the one-dimensional law)
// accumulates as boundary local time. Frames ride along by parallel
// transport, leg by leg through every fold.
struct SimConfig {
  double t_final = 1.0;
  int n_steps = 1000;
  Vec x0;
  int max_reflections = 8;

  double dt() const { return t_final / n_steps; }
};

// One trajectory with its transported frames, laid out as flat arrays so a
// worker can reuse the allocation across paths.
struct PathSample {
  int n_knots = 0;
  int amb = 0;
  int d = 0;
  std::vector<double> x;       // n_knots * amb
  std::vector<double> frame;   // n_knots * amb * d, column-major per knot
  std::vector<double> push;    // fold distance accumulated arriving at knot k
  std::vector<uint8_t> hit;    // the step into knot k touched the boundary
  double local_time = 0.0;
  bool ok = true;

  void resize(int knots, int ambient, int tangent);

  Vec point(int k) const;
  Mat frame_at(int k) const;
  void set_point(int k, const Vec& p);
  void set_frame(int k, const Mat& f);
};

// Simulate one path from cfg.x0 with the given Gaussian stream. negate flips
// every noise increment (antithetic partner); the drift is untouched.
// On chart exit or reflection overflow the sample is marked not ok and the
// remaining knots are left unwritten.
void simulate(const Manifold& m, const SimConfig& cfg, NormalStream& rng, PathSample& out,
              bool negate = false);

// Path addressed by ensemble index: derives the stream key (antithetic pairs
// share one) and simulates. This is the only way estimators re-materialize a
// path, so replays are bit-identical to the ensemble pass.
void simulate_indexed(const Manifold& m, const SimConfig& cfg, uint64_t master_seed,
                      std::size_t idx, bool antithetic, PathSample& out);

// Redraw knots from_knot+1 .. n_steps in place, keeping the prefix. Used for
// nested conditional expectations; the caller hands a child stream.
void simulate_continuation(const Manifold& m, const SimConfig& cfg, int from_knot,
                           NormalStream& rng, PathSample& inout);

struct EnsembleOpts {
  uint64_t master_seed = 0;
  std::size_t n_paths = 0;
  int workers = 1;  // 0 = hardware concurrency
  std::size_t n_batches = 64;
  bool antithetic = false;
  // Abort when more than this fraction of paths is unusable.
  double max_discard_frac = 1e-3;
};

struct EnsembleResult {
  std::size_t n_done = 0;
  std::size_t n_discarded = 0;
};

// Per-path reduction hook. Receives the ensemble index, the finished sample
// and the accumulator row of the batch owning that index; it must only add
// into the row. Called in index order within each batch.
using PathVisitor =
    std::function<void(std::size_t idx, const PathSample& path, double* row)>;

// Run n_paths trajectories, accumulating width primitives per batch. Batches
// are contiguous index ranges processed whole by one worker, so every batch
// sum (and hence every downstream statistic) is independent of the worker
// count. Throws if the discard budget is exceeded.
EnsembleResult run_ensemble(const Manifold& m, const SimConfig& cfg, const EnsembleOpts& opts,
                            std::size_t width, BatchTable& table, const PathVisitor& visit);

// Common-random-number variant: every configuration is simulated from the
// same per-index stream (so coupled differences cancel shared noise), and the
// visitor sees all samples of an index together. Step counts must agree; an
// index is discarded when any of its samples is unusable.
using CoupledVisitor =
    std::function<void(std::size_t idx, std::span<const PathSample>, double* row)>;

EnsembleResult run_coupled_ensemble(const Manifold& m, std::span<const SimConfig> cfgs,
                                    const EnsembleOpts& opts, std::size_t width,
                                    BatchTable& table, const CoupledVisitor& visit);

}  // namespace ricprobe
