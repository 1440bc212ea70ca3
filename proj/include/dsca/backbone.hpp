#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dsca/linalg.hpp"

namespace dsca {

// Concept-mixture world standing in for the frozen VLM encoder. Everything
// here is immutable after construction; no other module may write to it.
struct WorldModel {
  int num_concepts = 0;
  int d_v = 0, d_t = 0, d_f = 0;  // equal by construction
  std::vector<Vec> means_v;       // per-concept visual means
  std::vector<Vec> means_t;       // per-concept text means
  double noise_scale = 0.0;
  uint64_t seed = 0;

  Vec fused_mean(int concept_id) const;
  void validate() const;
};

struct WorldParams {
  int num_concepts = 16;
  int dim = 64;
  double noise_scale = 0.1;
  uint64_t seed = 7;
  double mean_radius = 3.0;
  // Rejection bound on pairwise |cosine| between concept mean directions.
  // Keeps the coarse visual filter meaningful at desk dimensions.
  double max_mean_cos = 0.2;
};

WorldModel make_world(const WorldParams& p);

struct Sample {
  Vec visual;
  Vec text;
  Vec fused;          // always fuse(visual, text)
  int ground_concept = 0;
  int target_class = 0;
  std::string split;  // "edit" | "replay"
};

// Frozen linear readout used to make the task loss well defined.
struct TaskHead {
  Mat weights;  // num_classes x d_f
  int num_classes() const { return weights.rows; }
};

// Rows are the normalized fused concept means, so the un-edited argmax
// recovers the ground concept in a separable world.
TaskHead make_head(const WorldModel& world);

Vec fuse(const Vec& visual, const Vec& text);
Vec teacher_fused(const Sample& s);
Vec head_logits(const TaskHead& head, const Vec& fused);
int head_argmax(const TaskHead& head, const Vec& fused);

// Edit samples come from the upper half of concept ids ("new" concepts) and
// carry a flipped target class; replay samples come from the lower half and
// keep their ground class. Deterministic for a fixed seed.
std::vector<Sample> generate_stream(const WorldModel& world, int n_edit,
                                    int n_replay, uint64_t seed);

int edit_target_class(const WorldModel& world, int concept_id);
int first_edit_concept(const WorldModel& world);

// Draws one sample of the given concept; used by stream generation and the
// metric neighbor sets.
Sample draw_sample(const WorldModel& world, int concept_id, std::mt19937_64& rng);

std::string stream_to_jsonl(const std::vector<Sample>& stream);
std::vector<Sample> stream_from_jsonl(const std::string& text);

std::string world_to_json(const WorldModel& world);
WorldModel world_from_json(const std::string& text);

} // namespace dsca
