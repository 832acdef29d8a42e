#include "stitch/agents/replay.hpp"

#include <stdexcept>
#include <string>

#include "stitch/error.hpp"

namespace stitch::agents {

std::vector<Transition> her_relabel(std::span<const Transition> episode, int k, const RewardFn& reward_fn,
                                    const SuccessFn& success_fn, std::mt19937_64& rng) {
  std::vector<Transition> out;
  if (k <= 0 || episode.empty()) return out;
  const int n = static_cast<int>(episode.size());
  out.reserve(static_cast<std::size_t>(k) * episode.size());
  for (int t = 0; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      // Transition i's achieved goal belongs to state i + 1.
      const int src = t + 1 < n ? std::uniform_int_distribution<int>(t + 1, n - 1)(rng) : t;
      Transition v = episode[t];
      v.desired_goal = episode[src].achieved_goal;
      v.reward = reward_fn(v.achieved_goal, v.desired_goal);
      v.done = success_fn(v.achieved_goal, v.desired_goal);
      v.goal_source = src + 1;
      out.push_back(v);
    }
  }
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::add(const Transition& t) {
  if (data_.size() < capacity_) {
    data_.push_back(t);
  } else {
    data_[physical(written_)] = t;
  }
  ++written_;
  drop_overwritten();
}

void ReplayBuffer::add_episode(std::span<const Transition> episode) {
  const std::size_t start = written_;
  for (const auto& t : episode) add(t);
  if (!episode.empty() && episode.size() <= capacity_) episodes_.push_back({next_episode_, start, episode.size()});
  ++next_episode_;
  drop_overwritten();
}

void ReplayBuffer::drop_overwritten() {
  const std::size_t oldest = written_ > capacity_ ? written_ - capacity_ : 0;
  while (!episodes_.empty() && episodes_.front().start < oldest) episodes_.pop_front();
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("replay index " + std::to_string(i));
  const std::size_t oldest = written_ > capacity_ ? written_ - capacity_ : 0;
  return data_[physical(oldest + i)];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, std::mt19937_64& rng) const {
  if (empty()) throw TrainingError("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> u(0, size() - 1);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = u(rng);
  return out;
}

std::vector<ReplayBuffer::EpisodeSpan> ReplayBuffer::episodes() const {
  return {episodes_.begin(), episodes_.end()};
}

std::vector<Transition> ReplayBuffer::episode(const EpisodeSpan& span) const {
  const std::size_t oldest = written_ > capacity_ ? written_ - capacity_ : 0;
  if (span.start < oldest || span.start + span.length > written_)
    throw std::out_of_range("episode " + std::to_string(span.id) + " is no longer stored");
  std::vector<Transition> out;
  out.reserve(span.length);
  for (std::size_t i = 0; i < span.length; ++i) out.push_back(data_[physical(span.start + i)]);
  return out;
}

std::string_view to_string(DemoSource s) { return s == DemoSource::Human ? "human" : "heuristic"; }

DemoSource demo_source_from_string(std::string_view s) {
  if (s == "human") return DemoSource::Human;
  if (s == "heuristic") return DemoSource::Heuristic;
  throw FormatError("unknown demo source '" + std::string(s) + "'");
}

std::span<const Transition> DemoDataset::episode(std::size_t i) const {
  const std::size_t begin = episode_starts.at(i);
  const std::size_t end = i + 1 < episode_starts.size() ? episode_starts[i + 1] : transitions.size();
  return std::span<const Transition>(transitions).subspan(begin, end - begin);
}

void DemoDataset::add_episode(std::span<const Transition> ep) {
  episode_starts.push_back(transitions.size());
  transitions.insert(transitions.end(), ep.begin(), ep.end());
}

void DemoDataset::validate() const {
  for (std::size_t i = 0; i < episode_count(); ++i) {
    const auto ep = episode(i);
    if (ep.empty()) throw VerificationError("demo episode " + std::to_string(i) + " is empty");
    if (!ep.back().done) throw VerificationError("demo episode " + std::to_string(i) + " does not end in success");
  }
}

DemoDataset DemoDataset::take(std::size_t n) const {
  DemoDataset out;
  out.source = source;
  for (std::size_t i = 0; i < std::min(n, episode_count()); ++i) out.add_episode(episode(i));
  return out;
}

}  // namespace stitch::agents
