#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "stitch/env/suture_env.hpp"

namespace stitch::agents {

struct Transition {
  ObsVector obs{};
  Action action{};
  double reward = 0.0;
  ObsVector next_obs{};
  /// Success termination; bootstrapping stops here.
  bool done = false;
  /// Time-limit cut; bootstrapping continues.
  bool truncated = false;
  /// Achieved goal of the next state.
  Goal achieved_goal{};
  Goal desired_goal{};
  /// For hindsight copies: index of the state whose achieved goal became
  /// `desired_goal` (always later than this transition's own state). -1 for
  /// real transitions.
  int goal_source = -1;

  bool operator==(const Transition&) const = default;
};

using Episode = std::vector<Transition>;
using RewardFn = std::function<double(const Goal& achieved, const Goal& desired)>;
using SuccessFn = std::function<bool(const Goal& achieved, const Goal& desired)>;

/// Future-strategy hindsight relabeling: k copies per transition, each with
/// the desired goal swapped for the achieved goal of a uniformly chosen later
/// transition. The final transition reuses its own achieved goal.
std::vector<Transition> her_relabel(std::span<const Transition> episode, int k, const RewardFn& reward_fn,
                                    const SuccessFn& success_fn, std::mt19937_64& rng);

/// Ring buffer of transitions that remembers which slots belong to which
/// episode until those slots are overwritten.
class ReplayBuffer {
 public:
  struct EpisodeSpan {
    std::uint64_t id;
    std::size_t start;  // logical index of the first transition (monotone counter)
    std::size_t length;
  };

  explicit ReplayBuffer(std::size_t capacity);

  void add(const Transition& t);
  /// Stores an episode contiguously and records its bounds.
  void add_episode(std::span<const Transition> episode);

  std::size_t size() const { return data_.size() < capacity_ ? data_.size() : capacity_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size() == 0; }

  /// i-th stored transition, oldest first.
  const Transition& at(std::size_t i) const;
  /// Uniform sample with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const;

  /// Episodes whose transitions are all still stored, oldest first.
  std::vector<EpisodeSpan> episodes() const;
  std::vector<Transition> episode(const EpisodeSpan& span) const;

 private:
  std::size_t physical(std::size_t logical) const { return logical % capacity_; }
  void drop_overwritten();

  std::size_t capacity_;
  std::vector<Transition> data_;
  std::size_t written_ = 0;  // logical count of all transitions ever added
  std::uint64_t next_episode_ = 0;
  std::deque<EpisodeSpan> episodes_;
};

enum class DemoSource { Human, Heuristic };
std::string_view to_string(DemoSource s);
DemoSource demo_source_from_string(std::string_view s);

/// Expert transitions with episode boundaries.
struct DemoDataset {
  std::vector<Transition> transitions;
  /// Start offsets of each episode in `transitions`, ascending.
  std::vector<std::size_t> episode_starts;
  DemoSource source = DemoSource::Heuristic;

  std::size_t episode_count() const { return episode_starts.size(); }
  std::span<const Transition> episode(std::size_t i) const;
  void add_episode(std::span<const Transition> ep);
  /// Throws VerificationError if an episode is empty or does not end with done.
  void validate() const;
  /// The first `n` episodes.
  DemoDataset take(std::size_t n) const;
};

}  // namespace stitch::agents
