#include "sofs/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "sofs/errors.hpp"

namespace sofs {

double iou(const MaskU8& pred, const MaskU8& gt) {
  if (pred.h != gt.h || pred.w != gt.w)
    throw DimensionError("iou: mask sizes differ");
  long long inter = 0, uni = 0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

void MiouAccumulator::add(int class_id, const MaskU8& pred, const MaskU8& gt) {
  if (pred.h != gt.h || pred.w != gt.w)
    throw DimensionError("miou: mask sizes differ");
  long long inter = 0, uni = 0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  auto& a = acc_[class_id];
  a.intersection += inter;
  a.union_count += uni;
  a.episodes += 1;
  episode_ious_[class_id].push_back(uni == 0 ? 1.0
                                             : static_cast<double>(inter) /
                                                   static_cast<double>(uni));
}

void MiouAccumulator::merge(const MiouAccumulator& other) {
  for (const auto& [cid, a] : other.acc_) {
    auto& mine = acc_[cid];
    mine.intersection += a.intersection;
    mine.union_count += a.union_count;
    mine.episodes += a.episodes;
  }
  for (const auto& [cid, v] : other.episode_ious_) {
    auto& mine = episode_ious_[cid];
    mine.insert(mine.end(), v.begin(), v.end());
  }
  skipped_ += other.skipped_;
}

std::map<int, double> MiouAccumulator::per_class() const {
  std::map<int, double> out;
  for (const auto& [cid, a] : acc_) {
    if (a.episodes == 0) continue;
    out[cid] = a.union_count == 0 ? 1.0
                                  : static_cast<double>(a.intersection) /
                                        static_cast<double>(a.union_count);
  }
  return out;
}

double MiouAccumulator::miou() const {
  const auto pc = per_class();
  if (pc.empty()) throw ContractError("miou: no accumulated episodes");
  double s = 0.0;
  for (const auto& [cid, v] : pc) s += v;
  return s / static_cast<double>(pc.size());
}

double MiouAccumulator::miou_episode_mean() const {
  if (episode_ious_.empty()) throw ContractError("miou: no accumulated episodes");
  double s = 0.0;
  for (const auto& [cid, v] : episode_ious_) {
    double cs = std::accumulate(v.begin(), v.end(), 0.0);
    s += cs / static_cast<double>(v.size());
  }
  return s / static_cast<double>(episode_ious_.size());
}

double auroc(const std::vector<float>& scores, const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw ParameterError("auroc: scores and labels must align and be non-empty");
  long long pos = 0;
  for (uint8_t l : labels) pos += l ? 1 : 0;
  const long long neg = static_cast<long long>(labels.size()) - pos;
  if (pos == 0 || neg == 0)
    throw ContractError("auroc: undefined, labels contain a single class");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // midranks over tie groups
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double p = static_cast<double>(pos);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double f1_max(const std::vector<float>& scores, const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw ParameterError("f1_max: scores and labels must align and be non-empty");
  long long total_pos = 0;
  for (uint8_t l : labels) total_pos += l ? 1 : 0;
  if (total_pos == 0) throw ContractError("f1_max: undefined without positive labels");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  // descending sweep: after processing a tie group, everything with score
  // >= that value is predicted positive
  double best = 0.0;
  long long tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]])
        ++tp;
      else
        ++fp;
    }
    const double f1 =
        2.0 * tp / (2.0 * static_cast<double>(tp) + static_cast<double>(fp) +
                    static_cast<double>(total_pos - tp));
    best = std::max(best, f1);
    i = j + 1;
  }
  return best;
}

}  // namespace sofs
