#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "dsca/linalg.hpp"

namespace dsca {

// One online-discovered cluster: prototypes, distance statistics, and the
// sample buffer that later feeds PCA. Distance stats are tested against the
// dynamic threshold BEFORE they absorb the triggering sample.
struct Concept {
  int id = 0;
  Vec proto_fused;
  Vec proto_visual;
  double dist_mean = 0.0;
  double dist_std = 0.0;
  double dist_var = 0.0;  // EMA of squared deviation; dist_std = sqrt(dist_var)
  long assign_count = 1;
  std::deque<Vec> buffer;
  bool dsam_active = false;
};

struct PartitionerConfig {
  double alpha = 2.0;        // novelty sensitivity in d_j = mu_j + alpha * sigma_j
  double ema_rate = 0.05;
  int buffer_capacity = 512;
  // 0 selects the automatic rule: 0.5 * median inter-prototype distance at
  // spawn time, or 1.0 for the first cluster.
  double init_std = 0.0;

  void validate() const;
};

// (nearest id, distance); ties broken by lowest id. Throws on empty set.
std::pair<int, double> nearest(const std::vector<Concept>& concepts, const Vec& h);

// Novelty test against the nearest cluster, then either spawn or EMA-update.
// Returns (id, spawned).
std::pair<int, bool> assign_or_spawn(std::vector<Concept>& concepts, const Vec& h_f,
                                     const Vec& h_v, const PartitionerConfig& cfg);

Vec ema_update(const Vec& old_v, const Vec& new_v, double rate);

// Immutable routing index. Assignment on a frozen view throws.
class FrozenConcepts {
 public:
  explicit FrozenConcepts(std::vector<Concept> snapshot)
      : concepts_(std::move(snapshot)) {}
  const std::vector<Concept>& concepts() const { return concepts_; }
  std::pair<int, double> nearest(const Vec& h) const;
  [[noreturn]] void assign_or_spawn(const Vec&, const Vec&, const PartitionerConfig&) const;

 private:
  std::vector<Concept> concepts_;
};

FrozenConcepts freeze(const std::vector<Concept>& concepts);

// Checkpoint form: prototypes, stats, flags; buffers are not persisted.
std::string concepts_to_json(const std::vector<Concept>& concepts);
std::vector<Concept> concepts_from_json(const std::string& text);

} // namespace dsca
