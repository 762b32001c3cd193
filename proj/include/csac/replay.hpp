#pragma once

#include "csac/archive.hpp"
#include "csac/rng.hpp"
#include "csac/tensor.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace csac {

struct TransitionRecord {
  std::vector<double> state;
  std::vector<double> action;
  std::vector<double> rewards;  // one per reward channel
  std::vector<double> nextState;
  bool done = false;             // terminal: the goal was reached
  std::size_t subtask = 0;       // subtask active when the action was taken
  std::size_t nextSubtask = 0;   // subtask after the step

  bool operator==(const TransitionRecord&) const = default;
};

// Row-stacked view of sampled records.
struct Minibatch {
  Matrix states;      // M x obsDim
  Matrix actions;     // M x actDim
  Matrix rewards;     // M x rewardCount
  Matrix nextStates;  // M x obsDim
  Matrix dones;       // M x 1, 0 or 1
  std::vector<std::size_t> subtasks;
  std::vector<std::size_t> nextSubtasks;

  Index size() const { return states.rows(); }
  Matrix rewardChannel(std::size_t j) const { return rewards.col(static_cast<Index>(j)); }
};

Minibatch stackRecords(const std::vector<TransitionRecord>& records);

// Records needed in a buffer before its agent trains: max(batch, 1000).
std::size_t warmupThreshold(std::size_t batchSize);

// Fixed-capacity FIFO over flat storage; the oldest record is overwritten
// once full.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t stateDim, std::size_t actionDim, std::size_t rewardCount);

  // Throws std::invalid_argument when any field has the wrong length.
  void push(const TransitionRecord& record);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t stateDim() const { return stateDim_; }
  std::size_t actionDim() const { return actionDim_; }
  std::size_t rewardCount() const { return rewardCount_; }
  std::size_t totalPushed() const { return totalPushed_; }

  // i = 0 is the oldest stored record.
  TransitionRecord at(std::size_t i) const;

  // Uniform draws with replacement; nullopt while size() < batchSize.
  std::optional<std::vector<std::size_t>> sampleIndices(std::size_t batchSize, Rng& rng) const;
  std::optional<std::vector<TransitionRecord>> sampleMinibatch(std::size_t batchSize, Rng& rng) const;
  std::optional<Minibatch> sampleBatch(std::size_t batchSize, Rng& rng) const;
  Minibatch gather(const std::vector<std::size_t>& indices) const;

  // Snapshot under "<prefix>/..." keys of an archive.
  void save(Archive& archive, const std::string& prefix) const;
  static ReplayBuffer load(const Archive& archive, const std::string& prefix);

 private:
  std::size_t stride() const { return 2 * stateDim_ + actionDim_ + rewardCount_ + 3; }
  std::size_t slot(std::size_t i) const;

  std::size_t capacity_;
  std::size_t stateDim_;
  std::size_t actionDim_;
  std::size_t rewardCount_;
  std::vector<double> data_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
  std::size_t totalPushed_ = 0;
};

}  // namespace csac
