#include "csac/replay.hpp"

#include <algorithm>
#include <stdexcept>

namespace csac {

std::size_t warmupThreshold(std::size_t batchSize) { return std::max<std::size_t>(batchSize, 1000); }

Minibatch stackRecords(const std::vector<TransitionRecord>& records) {
  if (records.empty()) throw std::invalid_argument("stackRecords: no records");
  const auto m = static_cast<Index>(records.size());
  const auto& first = records.front();
  Minibatch b;
  b.states.resize(m, static_cast<Index>(first.state.size()));
  b.actions.resize(m, static_cast<Index>(first.action.size()));
  b.rewards.resize(m, static_cast<Index>(first.rewards.size()));
  b.nextStates.resize(m, static_cast<Index>(first.nextState.size()));
  b.dones.resize(m, 1);
  for (Index i = 0; i < m; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    for (Index k = 0; k < b.states.cols(); ++k) b.states(i, k) = r.state[k];
    for (Index k = 0; k < b.actions.cols(); ++k) b.actions(i, k) = r.action[k];
    for (Index k = 0; k < b.rewards.cols(); ++k) b.rewards(i, k) = r.rewards[k];
    for (Index k = 0; k < b.nextStates.cols(); ++k) b.nextStates(i, k) = r.nextState[k];
    b.dones(i, 0) = r.done ? 1.0 : 0.0;
    b.subtasks.push_back(r.subtask);
    b.nextSubtasks.push_back(r.nextSubtask);
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t stateDim, std::size_t actionDim,
                           std::size_t rewardCount)
    : capacity_(capacity), stateDim_(stateDim), actionDim_(actionDim), rewardCount_(rewardCount) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  if (rewardCount == 0) throw std::invalid_argument("ReplayBuffer: need at least one reward channel");
}

std::size_t ReplayBuffer::slot(std::size_t i) const {
  return size_ < capacity_ ? i : (head_ + i) % capacity_;
}

void ReplayBuffer::push(const TransitionRecord& r) {
  if (r.rewards.size() != rewardCount_) {
    throw std::invalid_argument("ReplayBuffer::push: reward vector has " + std::to_string(r.rewards.size()) +
                                " entries, buffer expects " + std::to_string(rewardCount_));
  }
  if (r.state.size() != stateDim_ || r.nextState.size() != stateDim_ || r.action.size() != actionDim_) {
    throw std::invalid_argument("ReplayBuffer::push: state or action width mismatch");
  }
  const std::size_t s = stride();
  if (size_ < capacity_ && data_.size() < (head_ + 1) * s) data_.resize((head_ + 1) * s);
  double* out = data_.data() + head_ * s;
  out = std::copy(r.state.begin(), r.state.end(), out);
  out = std::copy(r.action.begin(), r.action.end(), out);
  out = std::copy(r.rewards.begin(), r.rewards.end(), out);
  out = std::copy(r.nextState.begin(), r.nextState.end(), out);
  out[0] = r.done ? 1.0 : 0.0;
  out[1] = static_cast<double>(r.subtask);
  out[2] = static_cast<double>(r.nextSubtask);
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++totalPushed_;
}

TransitionRecord ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("ReplayBuffer::at: index past size");
  const double* p = data_.data() + slot(i) * stride();
  TransitionRecord r;
  r.state.assign(p, p + stateDim_);
  p += stateDim_;
  r.action.assign(p, p + actionDim_);
  p += actionDim_;
  r.rewards.assign(p, p + rewardCount_);
  p += rewardCount_;
  r.nextState.assign(p, p + stateDim_);
  p += stateDim_;
  r.done = p[0] != 0.0;
  r.subtask = static_cast<std::size_t>(p[1]);
  r.nextSubtask = static_cast<std::size_t>(p[2]);
  return r;
}

std::optional<std::vector<std::size_t>> ReplayBuffer::sampleIndices(std::size_t batchSize, Rng& rng) const {
  if (batchSize == 0 || size_ < batchSize) return std::nullopt;
  std::vector<std::size_t> idx(batchSize);
  for (auto& i : idx) i = rng.index(size_);
  return idx;
}

std::optional<std::vector<TransitionRecord>> ReplayBuffer::sampleMinibatch(std::size_t batchSize,
                                                                           Rng& rng) const {
  auto idx = sampleIndices(batchSize, rng);
  if (!idx) return std::nullopt;
  std::vector<TransitionRecord> out;
  out.reserve(batchSize);
  for (std::size_t i : *idx) out.push_back(at(i));
  return out;
}

std::optional<Minibatch> ReplayBuffer::sampleBatch(std::size_t batchSize, Rng& rng) const {
  auto idx = sampleIndices(batchSize, rng);
  if (!idx) return std::nullopt;
  return gather(*idx);
}

Minibatch ReplayBuffer::gather(const std::vector<std::size_t>& indices) const {
  const auto m = static_cast<Index>(indices.size());
  const auto sd = static_cast<Index>(stateDim_);
  const auto ad = static_cast<Index>(actionDim_);
  const auto rc = static_cast<Index>(rewardCount_);
  Minibatch b;
  b.states.resize(m, sd);
  b.actions.resize(m, ad);
  b.rewards.resize(m, rc);
  b.nextStates.resize(m, sd);
  b.dones.resize(m, 1);
  b.subtasks.resize(indices.size());
  b.nextSubtasks.resize(indices.size());
  for (Index i = 0; i < m; ++i) {
    const std::size_t k = indices[static_cast<std::size_t>(i)];
    if (k >= size_) throw std::out_of_range("ReplayBuffer::gather: index past size");
    const double* p = data_.data() + slot(k) * stride();
    b.states.row(i) = Eigen::Map<const Eigen::RowVectorXd>(p, sd);
    b.actions.row(i) = Eigen::Map<const Eigen::RowVectorXd>(p + sd, ad);
    b.rewards.row(i) = Eigen::Map<const Eigen::RowVectorXd>(p + sd + ad, rc);
    b.nextStates.row(i) = Eigen::Map<const Eigen::RowVectorXd>(p + sd + ad + rc, sd);
    const double* tail = p + 2 * sd + ad + rc;
    b.dones(i, 0) = tail[0];
    b.subtasks[static_cast<std::size_t>(i)] = static_cast<std::size_t>(tail[1]);
    b.nextSubtasks[static_cast<std::size_t>(i)] = static_cast<std::size_t>(tail[2]);
  }
  return b;
}

void ReplayBuffer::save(Archive& archive, const std::string& prefix) const {
  const auto s = static_cast<Index>(stride());
  Matrix rows(static_cast<Index>(size_), s);
  for (std::size_t i = 0; i < size_; ++i) {
    rows.row(static_cast<Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(data_.data() + slot(i) * stride(), s);
  }
  archive.put(prefix + "/records", std::move(rows));
  archive.put(prefix + "/capacity", static_cast<std::uint64_t>(capacity_));
  archive.put(prefix + "/stateDim", static_cast<std::uint64_t>(stateDim_));
  archive.put(prefix + "/actionDim", static_cast<std::uint64_t>(actionDim_));
  archive.put(prefix + "/rewardCount", static_cast<std::uint64_t>(rewardCount_));
  archive.put(prefix + "/totalPushed", static_cast<std::uint64_t>(totalPushed_));
}

ReplayBuffer ReplayBuffer::load(const Archive& archive, const std::string& prefix) {
  ReplayBuffer b(archive.integer(prefix + "/capacity"), archive.integer(prefix + "/stateDim"),
                 archive.integer(prefix + "/actionDim"), archive.integer(prefix + "/rewardCount"));
  const Matrix& rows = archive.matrix(prefix + "/records");
  if (rows.rows() > 0 && rows.cols() != static_cast<Index>(b.stride())) {
    throw std::runtime_error("ReplayBuffer::load: record width does not match dimensions");
  }
  b.data_.resize(static_cast<std::size_t>(rows.size()));
  std::copy(rows.data(), rows.data() + rows.size(), b.data_.begin());
  b.size_ = static_cast<std::size_t>(rows.rows());
  b.head_ = b.size_ % b.capacity_;
  b.totalPushed_ = archive.integer(prefix + "/totalPushed");
  return b;
}

}  // namespace csac
