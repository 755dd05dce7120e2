#pragma once

// One-pass weighted sampling with replacement: s virtual reservoir samplers
// simulated by a forward binomial pass and a backward hypergeometric replay.

#include <algorithm>
#include <concepts>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sketchstream/core_types.hpp"
#include "sketchstream/distribution.hpp"
#include "sketchstream/rng.hpp"
#include "sketchstream/variates.hpp"

namespace sketchstream {

/// An item together with the number of virtual samplers that picked it.
struct SpillRecord {
  EntryTriplet item;
  std::uint64_t k = 0;
};

inline constexpr std::size_t kSpillRecordBytes = 32;

namespace detail {

inline void put_u64_le(unsigned char* p, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) p[b] = static_cast<unsigned char>(v >> (8 * b));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return v;
}

inline void pack_record(const SpillRecord& r, unsigned char* out) {
  std::uint64_t bits;
  std::memcpy(&bits, &r.item.value, sizeof bits);
  put_u64_le(out, r.item.row);
  put_u64_le(out + 8, r.item.col);
  put_u64_le(out + 16, bits);
  put_u64_le(out + 24, r.k);
}

inline SpillRecord unpack_record(const unsigned char* in) {
  SpillRecord r;
  r.item.row = get_u64_le(in);
  r.item.col = get_u64_le(in + 8);
  const std::uint64_t bits = get_u64_le(in + 16);
  std::memcpy(&r.item.value, &bits, sizeof bits);
  r.k = get_u64_le(in + 24);
  return r;
}

}  // namespace detail

/// In-memory LIFO record store.
class MemorySpillStore {
 public:
  void push(const SpillRecord& r) { records_.push_back(r); }
  void finish_writes() {}
  bool pop(SpillRecord& out) {
    if (records_.empty()) return false;
    out = records_.back();
    records_.pop_back();
    return true;
  }
  std::uint64_t size() const noexcept { return records_.size(); }
  void reset() { records_.clear(); }

 private:
  std::vector<SpillRecord> records_;
};

/// Directory for spill files: $SKETCHSTREAM_TMP if set, else the system temp dir.
inline std::filesystem::path spill_directory() {
  if (const char* env = std::getenv("SKETCHSTREAM_TMP"); env && *env) return env;
  return std::filesystem::temp_directory_path();
}

/// Append-only temporary file of 32-byte little-endian records
/// (row u64, col u64, value f64, k u64), read back from the end in 1 MiB
/// chunks. The file is removed when the store is destroyed.
class FileSpillStore {
 public:
  static constexpr std::size_t kChunkBytes = std::size_t{1} << 20;
  static constexpr std::size_t kChunkRecords = kChunkBytes / kSpillRecordBytes;

  explicit FileSpillStore(std::filesystem::path dir = spill_directory()) {
    static std::uint64_t counter = 0;
    const std::uint64_t tag = splitmix64(reinterpret_cast<std::uintptr_t>(this) ^ (++counter << 20) ^
                                         static_cast<std::uint64_t>(std::time(nullptr)));
    char name[64];
    std::snprintf(name, sizeof name, "sketchstream-spill-%016llx.bin", static_cast<unsigned long long>(tag));
    path_ = dir / name;
    file_ = std::fopen(path_.string().c_str(), "w+b");
    if (!file_) throw Error("cannot create spill file " + path_.string());
    buffer_.resize(kChunkBytes);
  }

  FileSpillStore(const FileSpillStore&) = delete;
  FileSpillStore& operator=(const FileSpillStore&) = delete;

  ~FileSpillStore() {
    if (file_) std::fclose(file_);
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

  void push(const SpillRecord& r) {
    if (reading_) throw Error("spill store is in replay mode");
    detail::pack_record(r, buffer_.data() + buffered_ * kSpillRecordBytes);
    ++written_;
    if (++buffered_ == kChunkRecords) flush();
  }

  /// Flushes pending writes and switches to backward replay.
  void finish_writes() {
    flush();
    if (std::fflush(file_) != 0) throw Error("spill file flush failed");
    reading_ = true;
    unread_ = written_;
    buffered_ = 0;
  }

  bool pop(SpillRecord& out) {
    if (!reading_) finish_writes();
    if (buffered_ == 0) {
      if (unread_ == 0) return false;
      const std::uint64_t n = std::min<std::uint64_t>(unread_, kChunkRecords);
      const std::uint64_t first = unread_ - n;
      if (std::fseek(file_, static_cast<long>(first * kSpillRecordBytes), SEEK_SET) != 0 ||
          std::fread(buffer_.data(), kSpillRecordBytes, n, file_) != n) {
        throw Error("spill file read failed");
      }
      unread_ = first;
      buffered_ = n;
    }
    --buffered_;
    out = detail::unpack_record(buffer_.data() + buffered_ * kSpillRecordBytes);
    return true;
  }

  std::uint64_t size() const noexcept { return written_; }
  const std::filesystem::path& path() const noexcept { return path_; }

  /// Truncates the file and returns to write mode.
  void reset() {
    file_ = std::freopen(path_.string().c_str(), "w+b", file_);
    if (!file_) throw Error("cannot reopen spill file " + path_.string());
    buffered_ = written_ = unread_ = 0;
    reading_ = false;
  }

 private:
  void flush() {
    if (buffered_ == 0) return;
    if (std::fwrite(buffer_.data(), kSpillRecordBytes, buffered_, file_) != buffered_) {
      throw Error("spill file write failed");
    }
    buffered_ = 0;
  }

  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  std::vector<unsigned char> buffer_;
  std::uint64_t buffered_ = 0;
  std::uint64_t written_ = 0;
  std::uint64_t unread_ = 0;
  bool reading_ = false;
};

template <class S>
concept SpillStore = requires(S st, const SpillRecord& r, SpillRecord& out) {
  st.push(r);
  st.finish_writes();
  st.reset();
  { st.pop(out) } -> std::same_as<bool>;
};

/// One sampled cell: the streamed entry and how many of the s draws chose it.
struct TallyEntry {
  EntryTriplet entry;
  std::uint64_t count = 0;
};

/// The multiset of s draws, one record per yielded stream item. A cell that
/// arrives several times in the stream can contribute several records.
struct SampleTally {
  std::vector<TallyEntry> entries;
  std::uint64_t total = 0;
  double total_weight = 0.0;     // W after the forward pass
  std::uint64_t spill_records = 0;

  /// Counts keyed by (row, col), summed over repeated stream items.
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> by_cell() const {
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> out;
    for (const auto& t : entries) out[{t.entry.row, t.entry.col}] += t.count;
    return out;
  }
};

/// Forward/backward sampler. The forward state is exactly {W, s, rng, cursor}.
template <SpillStore Store>
class ReservoirSampler {
 public:
  struct ForwardState {
    double W;
    std::uint64_t s;
    Rng rng;
    std::uint64_t cursor;  // records pushed so far
  };

  ReservoirSampler(std::uint64_t s, std::uint64_t seed, Store& store)
      : state_{0.0, s, Rng::derive(seed, substream::kForwardPass), 0}, seed_(seed), store_(&store) {
    if (s < 1) throw Error("sample budget must be at least 1");
    store_->reset();
  }

  void offer(const EntryTriplet& item, double w) {
    if (!(w > 0.0) || !std::isfinite(w)) throw Error("stream weights must be positive and finite");
    state_.W += w;
    const double p = std::min(1.0, w / state_.W);  // exactly 1 for the first item
    const std::uint64_t k = binomial_draw(state_.s, p, state_.rng);
    if (k > 0) {
      store_->push(SpillRecord{item, k});
      ++state_.cursor;
    }
  }

  const ForwardState& state() const noexcept { return state_; }

  /// Backward replay: calls `yield(item, t)` for every item with t > 0.
  template <class Yield>
  void replay(Yield&& yield) {
    if (state_.cursor == 0) throw Error("cannot sample from an empty stream");
    store_->finish_writes();
    Rng rng = Rng::derive(seed_, substream::kReplayPass);
    std::uint64_t remaining = state_.s;
    SpillRecord rec;
    while (remaining > 0 && store_->pop(rec)) {
      const std::uint64_t t = hypergeometric_draw(state_.s, remaining, rec.k, rng);
      if (t > 0) {
        remaining -= t;
        yield(rec.item, t);
      }
    }
    if (remaining != 0) throw Error("replay exhausted the spill store before all samplers were assigned");
  }

 private:
  ForwardState state_;
  std::uint64_t seed_;
  Store* store_;
};

/// stream_sample over (entry, weight) pairs.
template <class Range, SpillStore Store>
SampleTally stream_sample(const Range& weighted, std::uint64_t s, std::uint64_t seed, Store& store) {
  ReservoirSampler<Store> sampler(s, seed, store);
  for (const auto& [item, w] : weighted) sampler.offer(item, w);
  SampleTally tally;
  tally.total_weight = sampler.state().W;
  tally.spill_records = sampler.state().cursor;
  sampler.replay([&](const EntryTriplet& e, std::uint64_t t) {
    tally.entries.push_back({e, t});
    tally.total += t;
  });
  return tally;
}

/// Samples s entries of a stream with weights from the plan. Entries with
/// zero plan weight (trimmed) are skipped.
template <EntryStream S, SpillStore Store>
SampleTally sample_entries(const S& stream, const SamplingPlan& plan, std::uint64_t s, std::uint64_t seed,
                           Store& store) {
  if (plan.rows() != stream.dims().m) throw Error("plan does not cover the stream's rows");
  ReservoirSampler<Store> sampler(s, seed, store);
  stream.for_each([&](const EntryTriplet& e) {
    const double w = plan.entry_probability(e);
    if (w > 0.0) sampler.offer(e, w);
  });
  SampleTally tally;
  tally.total_weight = sampler.state().W;
  tally.spill_records = sampler.state().cursor;
  sampler.replay([&](const EntryTriplet& e, std::uint64_t t) {
    tally.entries.push_back({e, t});
    tally.total += t;
  });
  return tally;
}

/// Direct i.i.d. with-replacement oracle: materializes the weights and draws
/// s indices by inverse CDF. Memory O(N); for tests only.
inline std::vector<std::uint64_t> direct_sample_counts(const std::vector<double>& weights, std::uint64_t s, Rng& rng) {
  std::vector<double> cdf(weights.size());
  CompensatedSum acc;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    cdf[i] = acc.value();
  }
  std::vector<std::uint64_t> counts(weights.size(), 0);
  for (std::uint64_t d = 0; d < s; ++d) {
    const double u = rng.uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    ++counts[static_cast<std::size_t>(it - cdf.begin())];
  }
  return counts;
}

}  // namespace sketchstream
