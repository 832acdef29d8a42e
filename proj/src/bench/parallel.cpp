#include "stitch/bench/parallel.hpp"

#include <algorithm>
#include <exception>
#include <optional>
#include <random>

#include "stitch/error.hpp"

namespace stitch::bench {

JobFailure::JobFailure(const EpisodeJob& j, const std::string& what)
    : std::runtime_error("job " + std::to_string(j.id) + " (seed " + std::to_string(j.seed) + ", episode " +
                         std::to_string(j.episode) + ", stage " + std::string(to_string(j.stage)) +
                         ") failed: " + what),
      job(j) {}

std::uint64_t derive_reset_seed(std::uint64_t seed, int episode) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(episode), 0x5eedu};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<EpisodeJob> make_jobs(const std::vector<std::uint64_t>& seeds, int episodes, Subtask stage) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode per seed");
  if (seeds.empty()) throw ConfigError("evaluation needs at least one seed");
  std::vector<EpisodeJob> jobs;
  for (std::uint64_t seed : seeds)
    for (int e = 0; e < episodes; ++e)
      jobs.push_back({jobs.size(), seed, e, derive_reset_seed(seed, e), stage});
  return jobs;
}

namespace {

EpisodeOutcome run_one(const EpisodeJob& job, const EpisodeRunner& run) {
  EpisodeOutcome o = run(job);
  o.job_id = job.id;
  o.seed = job.seed;
  o.episode = job.episode;
  return o;
}

}  // namespace

std::vector<EpisodeOutcome> serial_eval_driver(const std::vector<EpisodeJob>& jobs, const EpisodeRunner& run) {
  std::vector<EpisodeOutcome> out;
  out.reserve(jobs.size());
  for (const EpisodeJob& job : jobs) {
    try {
      out.push_back(run_one(job, run));
    } catch (const JobFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw JobFailure(job, e.what());
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.job_id < b.job_id; });
  return out;
}

std::vector<EpisodeOutcome> parallel_eval_driver(const std::vector<EpisodeJob>& jobs, int workers,
                                                 const EpisodeRunner& run) {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  const auto n = static_cast<std::ptrdiff_t>(jobs.size());
  std::vector<EpisodeOutcome> out(jobs.size());
  std::vector<std::optional<std::string>> errors(jobs.size());
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = run_one(jobs[i], run);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < jobs.size(); ++i)
    if (errors[i]) throw JobFailure(jobs[i], *errors[i]);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.job_id < b.job_id; });
  return out;
}

}  // namespace stitch::bench
