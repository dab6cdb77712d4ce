#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "senseprobe/common.hpp"
#include "senseprobe/embedding.hpp"

namespace senseprobe {

struct TrainConfig {
  int dim = 100;
  int window = 5;
  int negatives = 10;
  int iterations = 5;
  float initial_lr = 0.025f;
  std::uint64_t min_count = 5;
  double subsample_t = 0.0;  // 0 disables frequency subsampling
  std::uint64_t seed = 1;
  int workers = 1;
  std::size_t neg_table_size = 10'000'000;
  std::size_t max_memory_bytes = 2ULL << 30;

  void validate() const {
    if (dim <= 0) throw std::invalid_argument("dim must be >= 1");
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    if (negatives < 1) throw std::invalid_argument("negatives must be >= 1");
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (!(initial_lr > 0)) throw std::invalid_argument("initial_lr must be > 0");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  }
};

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// One SGNS gradient step on a (center, context) pair with the given
// label. Both vectors move simultaneously (each update uses the other's
// pre-update value). Returns the pair's loss contribution
// -[y log s(u.v) + (1-y) log s(-u.v)].
template <typename T>
inline T sgns_pair_update(std::span<T> center, std::span<T> context_out,
                          int label, T lr) {
  T s = 0;
  for (std::size_t i = 0; i < center.size(); ++i) s += center[i] * context_out[i];
  T p = sigmoid(s);
  T g = (p - static_cast<T>(label)) * lr;
  for (std::size_t i = 0; i < center.size(); ++i) {
    T c_old = center[i];
    center[i] -= g * context_out[i];
    context_out[i] -= g * c_old;
  }
  // Stable softplus form of the logistic loss.
  T z = label == 1 ? -s : s;
  return z > T(30) ? z : std::log1p(std::exp(z));
}

// Loss of a pair without touching the vectors; finite-difference tests
// probe the update against this.
template <typename T>
inline T sgns_pair_loss(std::span<const T> center, std::span<const T> context_out,
                        int label) {
  T s = 0;
  for (std::size_t i = 0; i < center.size(); ++i) s += center[i] * context_out[i];
  T z = label == 1 ? -s : s;
  return z > T(30) ? z : std::log1p(std::exp(z));
}

// Draws negatives proportional to unigram^0.75.
class NegativeSampler {
 public:
  NegativeSampler(const std::vector<std::uint64_t>& counts, std::size_t table_size,
                  double power = 0.75) {
    if (counts.empty()) throw std::invalid_argument("empty vocabulary");
    table_.resize(table_size);
    double total = 0.0;
    for (std::uint64_t c : counts) total += std::pow(static_cast<double>(c), power);
    std::size_t i = 0;
    double cum = std::pow(static_cast<double>(counts[0]), power) / total;
    for (std::size_t pos = 0; pos < table_size; ++pos) {
      table_[pos] = static_cast<std::int32_t>(i);
      if (static_cast<double>(pos) / static_cast<double>(table_size) > cum &&
          i + 1 < counts.size()) {
        ++i;
        cum += std::pow(static_cast<double>(counts[i]), power) / total;
      }
    }
  }

  std::int32_t sample(Rng& rng) const {
    return table_[rng.bounded(table_.size())];
  }

  std::size_t table_size() const { return table_.size(); }

 private:
  std::vector<std::int32_t> table_;
};

struct TrainStats {
  // Mean pair loss per epoch; meaningful with workers = 1 where epochs
  // are globally aligned.
  std::vector<double> epoch_mean_loss;
  std::uint64_t pair_updates = 0;
};

// SkipGram / Structured SkipGram with negative sampling. Updates are
// applied hogwild-style when workers > 1 (benign races on the shared
// matrices); workers = 1 is fully deterministic for a given seed.
class SgnsTrainer {
 public:
  SgnsTrainer(const TokenStream& stream, const TrainConfig& cfg, EmbeddingMode mode)
      : cfg_(cfg), mode_(mode) {
    cfg_.validate();
    if (mode != EmbeddingMode::Skip && mode != EmbeddingMode::Sskip) {
      throw std::invalid_argument("train mode must be skip or sskip");
    }
    vocab_ = build_vocab(stream, cfg_.min_count);

    int blocks = mode == EmbeddingMode::Skip ? 1 : 2 * cfg_.window;
    std::size_t bytes = static_cast<std::size_t>(vocab_.size()) *
                        static_cast<std::size_t>(cfg_.dim) * sizeof(float) *
                        static_cast<std::size_t>(1 + blocks);
    if (bytes > cfg_.max_memory_bytes) {
      throw std::runtime_error("parameter memory " + std::to_string(bytes) +
                               " bytes exceeds budget of " +
                               std::to_string(cfg_.max_memory_bytes));
    }

    encode(stream);
  }

  EmbeddingTable train(TrainStats* stats = nullptr) {
    EmbeddingTable table(vocab_, cfg_.dim, mode_, cfg_.window);

    // Input rows start uniform in (-0.5/dim, 0.5/dim); output blocks stay
    // zero. Init is a single pass so it does not depend on worker count.
    Rng init_rng(cfg_.seed);
    for (std::int32_t w = 0; w < vocab_.size(); ++w) {
      for (float& x : table.row(w)) {
        x = static_cast<float>(init_rng.uniform(-0.5, 0.5) / cfg_.dim);
      }
    }

    NegativeSampler sampler(vocab_.counts, cfg_.neg_table_size);

    total_positions_ = 0;
    for (const auto& s : corpus_) total_positions_ += s.size();
    total_positions_ *= static_cast<std::uint64_t>(cfg_.iterations);
    processed_.store(0);

    std::vector<double> loss_sum(static_cast<std::size_t>(cfg_.iterations) *
                                     static_cast<std::size_t>(cfg_.workers),
                                 0.0);
    std::vector<std::uint64_t> loss_n(loss_sum.size(), 0);

    auto worker_fn = [&](int w) {
      Rng rng = Rng(cfg_.seed).fork(static_cast<std::uint64_t>(w) + 1);
      std::size_t lo = corpus_.size() * static_cast<std::size_t>(w) /
                       static_cast<std::size_t>(cfg_.workers);
      std::size_t hi = corpus_.size() * (static_cast<std::size_t>(w) + 1) /
                       static_cast<std::size_t>(cfg_.workers);
      std::vector<std::int32_t> effective;
      for (int epoch = 0; epoch < cfg_.iterations; ++epoch) {
        std::size_t slot = static_cast<std::size_t>(epoch) *
                               static_cast<std::size_t>(cfg_.workers) +
                           static_cast<std::size_t>(w);
        for (std::size_t si = lo; si < hi; ++si) {
          const auto& sent = corpus_[si];
          float lr = current_lr();
          processed_.fetch_add(sent.size(), std::memory_order_relaxed);

          effective.clear();
          for (std::int32_t word : sent) {
            if (cfg_.subsample_t > 0 && discard(word, rng)) continue;
            effective.push_back(word);
          }

          int n = static_cast<int>(effective.size());
          for (int i = 0; i < n; ++i) {
            std::int32_t center = effective[static_cast<std::size_t>(i)];
            auto u = table.row(center);
            for (int d = -cfg_.window; d <= cfg_.window; ++d) {
              if (d == 0) continue;
              int j = i + d;
              if (j < 0 || j >= n) continue;
              std::int32_t ctx = effective[static_cast<std::size_t>(j)];
              int block = mode_ == EmbeddingMode::Skip ? 0 : block_of(d);

              double loss = sgns_pair_update<float>(
                  u, table.output_row(block, ctx), 1, lr);
              for (int k = 0; k < cfg_.negatives; ++k) {
                std::int32_t neg = sampler.sample(rng);
                for (int tries = 0; neg == ctx && tries < 100; ++tries) {
                  neg = sampler.sample(rng);
                }
                if (neg == ctx) continue;  // degenerate vocabulary
                loss += sgns_pair_update<float>(
                    u, table.output_row(block, neg), 0, lr);
              }
              loss_sum[slot] += loss;
              loss_n[slot] += static_cast<std::uint64_t>(1 + cfg_.negatives);
            }
          }
        }
      }
    };

    if (cfg_.workers == 1) {
      worker_fn(0);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(static_cast<std::size_t>(cfg_.workers));
      for (int w = 0; w < cfg_.workers; ++w) threads.emplace_back(worker_fn, w);
      for (auto& t : threads) t.join();
    }

    if (stats != nullptr) {
      stats->epoch_mean_loss.clear();
      stats->pair_updates = 0;
      for (int epoch = 0; epoch < cfg_.iterations; ++epoch) {
        double s = 0.0;
        std::uint64_t n = 0;
        for (int w = 0; w < cfg_.workers; ++w) {
          std::size_t slot = static_cast<std::size_t>(epoch) *
                                 static_cast<std::size_t>(cfg_.workers) +
                             static_cast<std::size_t>(w);
          s += loss_sum[slot];
          n += loss_n[slot];
        }
        stats->epoch_mean_loss.push_back(n > 0 ? s / static_cast<double>(n) : 0.0);
        stats->pair_updates += n;
      }
    }
    return table;
  }

  const Vocabulary& vocab() const { return vocab_; }

  // Signed offset d in {-w..-1, 1..w} to output block index.
  int block_of(int d) const {
    return d < 0 ? d + cfg_.window : cfg_.window + d - 1;
  }

 private:
  void encode(const TokenStream& stream) {
    corpus_.reserve(stream.sentences.size());
    for (const auto& sent : stream.sentences) {
      std::vector<std::int32_t> ids;
      ids.reserve(sent.size());
      for (const auto& tok : sent) {
        if (auto id = vocab_.id_of(tok)) ids.push_back(*id);
      }
      if (!ids.empty()) corpus_.push_back(std::move(ids));
    }
  }

  float current_lr() const {
    double progress = static_cast<double>(processed_.load(std::memory_order_relaxed)) /
                      static_cast<double>(total_positions_);
    double lr = cfg_.initial_lr * (1.0 - progress);
    double floor = cfg_.initial_lr * 1e-4;
    return static_cast<float>(lr > floor ? lr : floor);
  }

  // word2vec subsampling rule: keep with prob (sqrt(f/t') + 1) * t'/f
  // where f is the word's corpus frequency and t' = t * total_tokens.
  bool discard(std::int32_t word, Rng& rng) const {
    double f = static_cast<double>(vocab_.counts[static_cast<std::size_t>(word)]);
    double tt = cfg_.subsample_t * static_cast<double>(vocab_.total_tokens);
    double keep = (std::sqrt(f / tt) + 1.0) * tt / f;
    if (keep >= 1.0) return false;
    return rng.uniform01() >= keep;
  }

  TrainConfig cfg_;
  EmbeddingMode mode_;
  Vocabulary vocab_;
  std::vector<std::vector<std::int32_t>> corpus_;
  std::uint64_t total_positions_ = 0;
  std::atomic<std::uint64_t> processed_{0};
};

inline EmbeddingTable train_embeddings(const TokenStream& stream,
                                       const TrainConfig& cfg, EmbeddingMode mode,
                                       TrainStats* stats = nullptr) {
  SgnsTrainer trainer(stream, cfg, mode);
  return trainer.train(stats);
}

}  // namespace senseprobe
