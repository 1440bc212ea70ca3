#include "dsca/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace dsca {

using json = nlohmann::json;

void PartitionerConfig::validate() const {
  if (alpha <= 0.0) throw std::invalid_argument("partitioner: alpha must be > 0");
  if (ema_rate <= 0.0 || ema_rate >= 1.0)
    throw std::invalid_argument("partitioner: ema_rate must be in (0,1)");
  if (buffer_capacity < 1)
    throw std::invalid_argument("partitioner: buffer_capacity must be >= 1");
  if (init_std < 0.0) throw std::invalid_argument("partitioner: init_std < 0");
}

std::pair<int, double> nearest(const std::vector<Concept>& concepts, const Vec& h) {
  if (concepts.empty()) throw std::invalid_argument("nearest: empty concept set");
  int best = -1;
  double best_d = 0.0;
  for (const Concept& c : concepts) {
    double d = norm2(sub(h, c.proto_fused));
    if (best < 0 || d < best_d || (d == best_d && c.id < best)) {
      best = c.id;
      best_d = d;
    }
  }
  return {best, best_d};
}

namespace {

// Fresh-cluster sigma, chosen so the spawn threshold alpha * sigma lands at
// 0.8x the smallest inter-prototype distance: new samples of the cluster are
// absorbed while genuinely new concepts still spawn, independent of alpha.
double auto_init_std(const std::vector<Concept>& concepts_after_spawn, double alpha) {
  if (concepts_after_spawn.size() < 2) return 2.0 / alpha;
  double min_dist = 1e300;
  for (size_t i = 0; i < concepts_after_spawn.size(); ++i)
    for (size_t j = i + 1; j < concepts_after_spawn.size(); ++j)
      min_dist = std::min(min_dist, norm2(sub(concepts_after_spawn[i].proto_fused,
                                              concepts_after_spawn[j].proto_fused)));
  return 0.8 * min_dist / alpha;
}

Concept* find_by_id(std::vector<Concept>& concepts, int id) {
  for (Concept& c : concepts)
    if (c.id == id) return &c;
  return nullptr;
}

} // namespace

std::pair<int, bool> assign_or_spawn(std::vector<Concept>& concepts, const Vec& h_f,
                                     const Vec& h_v, const PartitionerConfig& cfg) {
  cfg.validate();
  if (!all_finite(h_f) || !all_finite(h_v))
    throw std::invalid_argument("assign_or_spawn: non-finite input");

  bool spawn = concepts.empty();
  int nearest_id = -1;
  double dist = 0.0;
  if (!spawn) {
    auto [id, d] = nearest(concepts, h_f);
    nearest_id = id;
    dist = d;
    const Concept* c = find_by_id(concepts, id);
    double threshold = c->dist_mean + cfg.alpha * c->dist_std;
    spawn = dist > threshold;
  }

  if (spawn) {
    Concept c;
    c.id = concepts.empty() ? 0 : concepts.back().id + 1;
    c.proto_fused = h_f;
    c.proto_visual = h_v;
    c.dist_mean = 0.0;
    c.assign_count = 1;
    concepts.push_back(std::move(c));
    double s = cfg.init_std > 0.0 ? cfg.init_std : auto_init_std(concepts, cfg.alpha);
    concepts.back().dist_std = s;
    concepts.back().dist_var = s * s;
    concepts.back().buffer.push_back(h_f);
    return {concepts.back().id, true};
  }

  Concept* c = find_by_id(concepts, nearest_id);
  double r = cfg.ema_rate;
  // Statistics absorb the sample against the pre-update mean, then the mean
  // itself moves; matches the scalar replay oracle in the tests.
  double dev = dist - c->dist_mean;
  c->dist_var = (1.0 - r) * c->dist_var + r * dev * dev;
  c->dist_std = std::sqrt(c->dist_var);
  c->dist_mean = (1.0 - r) * c->dist_mean + r * dist;
  c->proto_fused = ema_update(c->proto_fused, h_f, r);
  c->proto_visual = ema_update(c->proto_visual, h_v, r);
  c->assign_count += 1;
  c->buffer.push_back(h_f);
  while (static_cast<int>(c->buffer.size()) > cfg.buffer_capacity)
    c->buffer.pop_front();
  return {nearest_id, false};
}

Vec ema_update(const Vec& old_v, const Vec& new_v, double rate) {
  require(old_v.size() == new_v.size(), "ema_update: dimension mismatch");
  require(rate > 0.0 && rate < 1.0, "ema_update: rate must be in (0,1)");
  // old + rate * (new - old): algebraically (1-rate)*old + rate*new, but an
  // exact fixed point when old == new.
  Vec r(old_v.size());
  for (size_t i = 0; i < r.size(); ++i)
    r[i] = old_v[i] + rate * (new_v[i] - old_v[i]);
  return r;
}

std::pair<int, double> FrozenConcepts::nearest(const Vec& h) const {
  return dsca::nearest(concepts_, h);
}

void FrozenConcepts::assign_or_spawn(const Vec&, const Vec&,
                                     const PartitionerConfig&) const {
  throw std::logic_error("assign_or_spawn: concept set is frozen");
}

FrozenConcepts freeze(const std::vector<Concept>& concepts) {
  std::vector<Concept> snapshot = concepts;
  for (Concept& c : snapshot) c.buffer.clear();
  return FrozenConcepts(std::move(snapshot));
}

std::string concepts_to_json(const std::vector<Concept>& concepts) {
  json arr = json::array();
  for (const Concept& c : concepts) {
    json j;
    j["id"] = c.id;
    j["proto_fused"] = c.proto_fused;
    j["proto_visual"] = c.proto_visual;
    j["dist_mean"] = c.dist_mean;
    j["dist_std"] = c.dist_std;
    j["dist_var"] = c.dist_var;
    j["assign_count"] = c.assign_count;
    j["dsam_active"] = c.dsam_active;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

std::vector<Concept> concepts_from_json(const std::string& text) {
  json arr = json::parse(text);
  std::vector<Concept> out;
  for (const json& j : arr) {
    Concept c;
    c.id = j.at("id").get<int>();
    c.proto_fused = j.at("proto_fused").get<Vec>();
    c.proto_visual = j.at("proto_visual").get<Vec>();
    c.dist_mean = j.at("dist_mean").get<double>();
    c.dist_std = j.at("dist_std").get<double>();
    c.dist_var = j.at("dist_var").get<double>();
    c.assign_count = j.at("assign_count").get<long>();
    c.dsam_active = j.at("dsam_active").get<bool>();
    out.push_back(std::move(c));
  }
  return out;
}

} // namespace dsca
