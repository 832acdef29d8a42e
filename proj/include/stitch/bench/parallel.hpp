#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stitch/env/scenario.hpp"

namespace stitch::bench {

/// One evaluation episode. `reset_seed` is derived from (seed, episode) so a
/// job's outcome does not depend on which worker runs it.
struct EpisodeJob {
  std::uint64_t id = 0;
  std::uint64_t seed = 0;
  int episode = 0;
  std::uint64_t reset_seed = 0;
  /// Last stage of the scene being evaluated; reported on failure.
  Subtask stage = Subtask::Grasp;
};

struct EpisodeOutcome {
  std::uint64_t job_id = 0;
  std::uint64_t seed = 0;
  int episode = 0;
  bool success = false;
  int steps = 0;
  /// Sum of applied world-frame translation norms.
  double length_mm = 0.0;
  Subtask final_stage = Subtask::Grasp;

  bool operator==(const EpisodeOutcome&) const = default;
};

/// Runs one job on an environment instance of its own.
using EpisodeRunner = std::function<EpisodeOutcome(const EpisodeJob&)>;

/// Raised when a job throws; carries the job's seed and stage.
struct JobFailure : std::runtime_error {
  JobFailure(const EpisodeJob& job, const std::string& what);
  EpisodeJob job;
};

std::uint64_t derive_reset_seed(std::uint64_t seed, int episode);

/// seeds x episodes jobs, ids in seed-major order.
std::vector<EpisodeJob> make_jobs(const std::vector<std::uint64_t>& seeds, int episodes, Subtask stage);

/// Serial reference: runs jobs in order.
std::vector<EpisodeOutcome> serial_eval_driver(const std::vector<EpisodeJob>& jobs, const EpisodeRunner& run);

/// OpenMP fan-out over `workers` threads. Outcomes come back sorted by job
/// id, so the merged result matches the serial driver for any worker count.
/// The failure of the lowest job id is rethrown as JobFailure.
std::vector<EpisodeOutcome> parallel_eval_driver(const std::vector<EpisodeJob>& jobs, int workers,
                                                 const EpisodeRunner& run);

}  // namespace stitch::bench
