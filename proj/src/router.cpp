#include "dsca/router.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dsca {

void RouterConfig::validate() const {
  if (tau <= 0.0) throw std::invalid_argument("router: tau must be > 0");
  if (tau_visual <= -1.0 || tau_visual >= 1.0)
    throw std::invalid_argument("router: tau_visual must be in (-1,1)");
}

double RoutingDecision::weight(int id) const {
  auto it = weights.find(id);
  return it == weights.end() ? 0.0 : it->second;
}

double RoutingDecision::logit(int id) const {
  auto it = logits.find(id);
  return it == logits.end() ? 0.0 : it->second;
}

double RoutingDecision::weight_sum() const {
  double s = 0.0;
  for (const auto& [id, w] : weights) s += w;
  return s;
}

std::vector<int> coarse_filter(const Vec& h_v, const std::vector<Concept>& concepts,
                               const RouterConfig& cfg) {
  cfg.validate();
  double nv = norm2(h_v);
  require(nv > 0.0, "coarse_filter: zero-norm visual input");

  std::vector<int> out;
  for (const Concept& c : concepts) {
    double np = norm2(c.proto_visual);
    require(np > 0.0, "coarse_filter: zero-norm visual prototype");
    double cos = dot(h_v, c.proto_visual) / (nv * np);
    if (cos > cfg.tau_visual) out.push_back(c.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

RoutingDecision route(const Vec& h_f, const std::vector<int>& candidates,
                      const std::vector<Concept>& concepts, const RouterConfig& cfg) {
  cfg.validate();
  RoutingDecision d;
  d.candidates = candidates;
  std::sort(d.candidates.begin(), d.candidates.end());
  d.k_total = static_cast<int>(concepts.size());
  if (d.candidates.empty()) return d;

  auto find_concept = [&](int id) -> const Concept& {
    for (const Concept& c : concepts)
      if (c.id == id) return c;
    throw std::invalid_argument("route: candidate id not in concept set");
  };

  std::vector<int> routed;  // candidates that can actually contribute
  for (int id : d.candidates) {
    const Concept& c = find_concept(id);
    d.scores[id] = cosine(h_f, c.proto_fused);
    if (c.dsam_active) routed.push_back(id);
  }
  if (routed.empty()) return d;

  double max_logit = -1e300;
  for (int id : routed) {
    d.logits[id] = d.scores[id] / cfg.tau;
    max_logit = std::max(max_logit, d.logits[id]);
  }
  double z = 0.0;
  for (int id : routed) z += std::exp(d.logits[id] - max_logit);
  for (int id : routed) d.weights[id] = std::exp(d.logits[id] - max_logit) / z;
  return d;
}

Vec apply_edit(const Vec& h_f, const RoutingDecision& decision,
               const std::map<int, DsamParams>& dsams,
               const std::map<int, SubspaceBasis>& bases) {
  bool touched = false;
  Vec out;
  for (const auto& [id, w] : decision.weights) {
    if (w == 0.0) continue;
    auto pit = dsams.find(id);
    auto bit = bases.find(id);
    if (pit == dsams.end() || bit == bases.end() || !bit->second.active) continue;
    Vec psi = intervene(pit->second, bit->second, h_f);
    if (!touched) {
      out = h_f;
      touched = true;
    }
    axpy(w, psi, out);
  }
  // Identity edits return the input unchanged, bit for bit.
  return touched ? out : h_f;
}

std::string decisions_to_jsonl(const std::vector<RoutingDecision>& decisions) {
  std::ostringstream os;
  for (const RoutingDecision& d : decisions) {
    nlohmann::ordered_json j;
    j["k_total"] = d.k_total;
    j["candidates"] = d.candidates;
    nlohmann::ordered_json scores, logits, weights;
    for (const auto& [id, s] : d.scores) scores[std::to_string(id)] = s;
    for (const auto& [id, z] : d.logits) logits[std::to_string(id)] = z;
    for (const auto& [id, w] : d.weights) weights[std::to_string(id)] = w;
    j["scores"] = std::move(scores);
    j["logits"] = std::move(logits);
    j["weights"] = std::move(weights);
    os << j.dump() << "\n";
  }
  return os.str();
}

} // namespace dsca
