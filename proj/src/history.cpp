#include <algorithm>

#include "ezbft/replica.hpp"

namespace ezbft {

namespace {

struct EntryKey {
  OwnerNumber owner;
  Digest digest;
  bool operator==(const EntryKey&) const = default;
};

class Selector {
 public:
  Selector(const Verifier& v, ReplicaIndex space, std::vector<OwnerChangeMsg> proof)
      : v_(v), space_(space), proof_(std::move(proof)) {
    std::sort(proof_.begin(), proof_.end(),
              [](const auto& a, const auto& b) { return a.sender < b.sender; });
    base_ = proof_.empty() ? 0 : proof_.front().checkpoint;
    for (const auto& p : proof_) base_ = std::min(base_, p.checkpoint);
  }

  std::uint64_t base() const { return base_; }

  HistorySelection run() {
    HistorySelection out;
    out.base = base_;

    // Sequences starting at the common base are the candidates.
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < proof_.size(); ++i)
      if (proof_[i].checkpoint == base_) cand.push_back(i);

    std::optional<std::size_t> best;
    bool best_c1 = false, best_c2 = false;
    for (auto i : cand) {
      const std::size_t len = length(i);
      bool c1 = true, c2 = true;
      for (std::size_t k = 0; k < len && (c1 || c2); ++k) {
        c1 = c1 && cond1(i, k);
        c2 = c2 && cond2(i, k);
      }
      if (!c1 && !c2) continue;
      if (!best || len > length(*best)) {
        best = i;
        best_c1 = c1;
        best_c2 = c2;
      }
    }

    std::optional<std::size_t> chosen;
    std::size_t chosen_len = 0;
    if (best) {
      chosen = best;
      chosen_len = length(*best);
      // Valid extensions: a sequence agreeing with the base on its prefix
      // whose further entries carry the complementary kind of proof.
      for (auto j : cand) {
        if (j == *best || length(j) <= length(*best)) continue;
        bool prefix = true;
        for (std::size_t k = 0; k < length(*best) && prefix; ++k)
          prefix = key(j, k) == key(*best, k);
        if (!prefix) continue;
        std::size_t ext1 = length(*best), ext2 = length(*best);
        if (best_c1)
          while (ext1 < length(j) && cond2(j, ext1)) ++ext1;
        if (best_c2)
          while (ext2 < length(j) && cond1(j, ext2)) ++ext2;
        const std::size_t ext = std::max(best_c1 ? ext1 : 0, best_c2 ? ext2 : 0);
        if (ext > chosen_len) {
          chosen = j;
          chosen_len = ext;
        }
      }
    } else {
      // Nothing qualifies: keep the longest prefix proven by certificates.
      for (auto i : cand) {
        std::size_t len = 0;
        while (len < length(i) && cond1(i, len)) ++len;
        if (!chosen || len > chosen_len) {
          chosen = i;
          chosen_len = len;
        }
      }
    }

    if (!chosen) return out;
    for (std::size_t k = 0; k < chosen_len; ++k) {
      const auto& e = entry(*chosen, k);
      SafeInstance si{e.order, e.request, e.order.deps, e.order.seq};
      if (auto ev = evidence_for(k, key(*chosen, k))) {
        auto [deps, seq] = evidence_metadata(*ev);
        si.deps = std::move(deps);
        si.seq = seq;
      }
      out.safe.push_back(std::move(si));
    }
    return out;
  }

 private:
  std::size_t length(std::size_t i) const { return proof_[i].entries.size(); }

  // Entry of message i at slot base + k, if it covers that slot.
  const HistoryEntry* at(std::size_t i, std::size_t k) const {
    const auto& p = proof_[i];
    const std::uint64_t slot = base_ + k;
    if (slot < p.checkpoint || slot - p.checkpoint >= p.entries.size()) return nullptr;
    return &p.entries[slot - p.checkpoint];
  }
  const HistoryEntry& entry(std::size_t i, std::size_t k) const { return *at(i, k); }

  EntryKey key(std::size_t i, std::size_t k) const {
    const auto& e = entry(i, k);
    return {e.order.owner, e.order.request_digest};
  }

  InstanceId inst(std::size_t k) const { return {space_, base_ + k}; }

  bool valid(std::size_t i, std::size_t k) {
    auto cache_key = std::make_pair(i, k);
    if (auto it = valid_.find(cache_key); it != valid_.end()) return it->second;
    const HistoryEntry* e = at(i, k);
    bool ok = e && e->order.instance == inst(k) && v_.spec_order(e->order) &&
              request_digest(e->request) == e->order.request_digest && v_.request(e->request);
    valid_.emplace(cache_key, ok);
    return ok;
  }

  OwnerNumber highest(std::size_t k) {
    if (auto it = highest_.find(k); it != highest_.end()) return it->second;
    OwnerNumber h{0};
    for (std::size_t j = 0; j < proof_.size(); ++j)
      if (valid(j, k)) h = std::max(h, at(j, k)->order.owner);
    highest_.emplace(k, h);
    return h;
  }

  // Verified commit evidence for slot k and this (owner, digest), searching
  // every entry and every highest-commit field, lowest sender first.
  std::optional<CommitEvidence> evidence_for(std::size_t k, const EntryKey& ek) {
    for (std::size_t j = 0; j < proof_.size(); ++j) {
      const HistoryEntry* e = at(j, k);
      if (e && e->commit && valid(j, k) && key(j, k) == ek &&
          v_.evidence(*e->commit, inst(k), ek.digest))
        return e->commit;
    }
    for (const auto& p : proof_)
      if (p.highest_commit && v_.evidence(*p.highest_commit, inst(k), ek.digest))
        return p.highest_commit;
    return std::nullopt;
  }

  // Entry proven by commit evidence at the highest owner number.
  bool cond1(std::size_t i, std::size_t k) {
    if (!valid(i, k)) return false;
    const auto ek = key(i, k);
    if (ek.owner != highest(k)) return false;
    return evidence_for(k, ek).has_value();
  }

  // Entry carried by at least f+1 messages at the highest owner number.
  bool cond2(std::size_t i, std::size_t k) {
    if (!valid(i, k)) return false;
    const auto ek = key(i, k);
    if (ek.owner != highest(k)) return false;
    std::uint32_t count = 0;
    for (std::size_t j = 0; j < proof_.size(); ++j)
      if (valid(j, k) && key(j, k) == ek) ++count;
    return count >= v_.cluster().weak_quorum();
  }

  const Verifier& v_;
  ReplicaIndex space_;
  std::vector<OwnerChangeMsg> proof_;
  std::uint64_t base_ = 0;
  std::map<std::pair<std::size_t, std::size_t>, bool> valid_;
  std::map<std::size_t, OwnerNumber> highest_;
};

}  // namespace

HistorySelection select_history(const Verifier& verifier, ReplicaIndex space,
                                const std::vector<OwnerChangeMsg>& proof) {
  return Selector(verifier, space, proof).run();
}

}  // namespace ezbft
