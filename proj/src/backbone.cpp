#include "dsca/backbone.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dsca {

using json = nlohmann::json;

Vec WorldModel::fused_mean(int concept_id) const {
  return fuse(means_v[concept_id], means_t[concept_id]);
}

void WorldModel::validate() const {
  if (d_v != d_t || d_t != d_f)
    throw std::invalid_argument("world: d_v, d_t, d_f must be equal");
  if (num_concepts <= 0) throw std::invalid_argument("world: no concepts");
  if (noise_scale < 0.0) throw std::invalid_argument("world: negative noise");
  if (static_cast<int>(means_v.size()) != num_concepts ||
      static_cast<int>(means_t.size()) != num_concepts)
    throw std::invalid_argument("world: mean count mismatch");
  for (int c = 0; c < num_concepts; ++c) {
    if (static_cast<int>(means_v[c].size()) != d_v ||
        static_cast<int>(means_t[c].size()) != d_t)
      throw std::invalid_argument("world: mean dimension mismatch");
  }
  // Separable world: fused means at least 4 * noise_scale apart.
  for (int i = 0; i < num_concepts; ++i) {
    Vec mi = fused_mean(i);
    for (int j = i + 1; j < num_concepts; ++j) {
      double d = norm2(sub(mi, fused_mean(j)));
      if (d < 4.0 * noise_scale)
        throw std::invalid_argument("world: concept means closer than 4*noise_scale");
    }
  }
}

namespace {

Vec gaussian_vec(int dim, std::mt19937_64& rng, double std_dev) {
  std::normal_distribution<double> g(0.0, std_dev);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = g(rng);
  return v;
}

// Rejection-sample a unit direction whose |cos| against all accepted
// directions stays below the bound.
Vec sample_direction(int dim, double max_cos, const std::vector<Vec>& accepted,
                     std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 20000; ++attempt) {
    Vec d = gaussian_vec(dim, rng, 1.0);
    double n = norm2(d);
    if (n < 1e-12) continue;
    for (double& x : d) x /= n;
    bool ok = true;
    for (const Vec& prev : accepted) {
      if (std::abs(dot(d, prev)) > max_cos) {
        ok = false;
        break;
      }
    }
    if (ok) return d;
  }
  throw std::invalid_argument(
      "make_world: cannot place concept means under max_mean_cos; raise dim "
      "or max_mean_cos");
}

} // namespace

WorldModel make_world(const WorldParams& p) {
  if (p.num_concepts <= 0 || p.dim <= 0)
    throw std::invalid_argument("make_world: bad sizes");

  WorldModel w;
  w.num_concepts = p.num_concepts;
  w.d_v = w.d_t = w.d_f = p.dim;
  w.noise_scale = p.noise_scale;
  w.seed = p.seed;

  std::mt19937_64 rng(p.seed);
  std::vector<Vec> dirs;
  dirs.reserve(p.num_concepts);
  for (int c = 0; c < p.num_concepts; ++c)
    dirs.push_back(sample_direction(p.dim, p.max_mean_cos, dirs, rng));

  // Radius rescale keeps the separation invariant with margin even for
  // near-collinear accepted pairs.
  double radius = p.mean_radius;
  if (p.noise_scale > 0.0) {
    double min_dist_factor = std::sqrt(2.0 * (1.0 - p.max_mean_cos));
    double needed = 4.0 * p.noise_scale / std::max(min_dist_factor, 1e-6);
    radius = std::max(radius, 1.25 * needed);
  }

  w.means_v.reserve(p.num_concepts);
  w.means_t.reserve(p.num_concepts);
  for (int c = 0; c < p.num_concepts; ++c) {
    Vec mv = scale(dirs[c], radius);
    // Text mean shares the concept direction with a small seeded offset so
    // visual and fused prototypes are distinct but correlated.
    Vec offset = gaussian_vec(p.dim, rng, 0.05 * radius);
    Vec mt = add(mv, offset);
    w.means_v.push_back(std::move(mv));
    w.means_t.push_back(std::move(mt));
  }
  w.validate();
  return w;
}

TaskHead make_head(const WorldModel& world) {
  TaskHead head;
  head.weights = Mat(world.num_concepts, world.d_f);
  for (int c = 0; c < world.num_concepts; ++c) {
    Vec m = world.fused_mean(c);
    double n = norm2(m);
    if (n < 1e-12) throw std::invalid_argument("make_head: zero fused mean");
    for (int j = 0; j < world.d_f; ++j) head.weights.at(c, j) = m[j] / n;
  }
  return head;
}

Vec fuse(const Vec& visual, const Vec& text) {
  require(visual.size() == text.size(), "fuse: dimension mismatch");
  Vec f(visual.size());
  for (size_t i = 0; i < f.size(); ++i) f[i] = 0.5 * (visual[i] + text[i]);
  return f;
}

Vec teacher_fused(const Sample& s) { return s.fused; }

Vec head_logits(const TaskHead& head, const Vec& fused) {
  return matvec(head.weights, fused);
}

int head_argmax(const TaskHead& head, const Vec& fused) {
  Vec l = head_logits(head, fused);
  int arg = 0;
  for (size_t i = 1; i < l.size(); ++i)
    if (l[i] > l[arg]) arg = static_cast<int>(i);
  return arg;
}

int first_edit_concept(const WorldModel& world) { return world.num_concepts / 2; }

int edit_target_class(const WorldModel& world, int concept_id) {
  // Map every edited concept onto a class from the replay half, so the edit
  // is always a genuine behavior flip.
  int half = world.num_concepts / 2;
  if (half == 0) return concept_id;
  return concept_id % half;
}

Sample draw_sample(const WorldModel& world, int concept_id, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Sample s;
  s.ground_concept = concept_id;
  s.visual = world.means_v[concept_id];
  s.text = world.means_t[concept_id];
  for (int i = 0; i < world.d_v; ++i) s.visual[i] += world.noise_scale * g(rng);
  for (int i = 0; i < world.d_t; ++i) s.text[i] += world.noise_scale * g(rng);
  s.fused = fuse(s.visual, s.text);
  return s;
}

std::vector<Sample> generate_stream(const WorldModel& world, int n_edit,
                                    int n_replay, uint64_t seed) {
  if (n_edit < 0 || n_replay < 0)
    throw std::invalid_argument("generate_stream: negative counts");
  world.validate();

  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(n_edit) + n_replay);

  int edit_begin = first_edit_concept(world);
  int n_edit_concepts = world.num_concepts - edit_begin;
  int n_old_concepts = std::max(edit_begin, 1);

  for (int i = 0; i < n_edit; ++i) {
    int c = (n_edit_concepts > 0) ? edit_begin + i % n_edit_concepts : 0;
    Sample s = draw_sample(world, c, rng);
    s.split = "edit";
    s.target_class = edit_target_class(world, c);
    out.push_back(std::move(s));
  }
  for (int i = 0; i < n_replay; ++i) {
    int c = i % n_old_concepts;
    Sample s = draw_sample(world, c, rng);
    s.split = "replay";
    s.target_class = c;
    out.push_back(std::move(s));
  }
  return out;
}

std::string stream_to_jsonl(const std::vector<Sample>& stream) {
  std::ostringstream os;
  for (const Sample& s : stream) {
    json j;
    j["visual"] = s.visual;
    j["text"] = s.text;
    j["fused"] = s.fused;
    j["ground_concept"] = s.ground_concept;
    j["target_class"] = s.target_class;
    j["split"] = s.split;
    os << j.dump() << "\n";
  }
  return os.str();
}

std::string world_to_json(const WorldModel& world) {
  json j;
  j["num_concepts"] = world.num_concepts;
  j["d_v"] = world.d_v;
  j["d_t"] = world.d_t;
  j["d_f"] = world.d_f;
  j["means_v"] = world.means_v;
  j["means_t"] = world.means_t;
  j["noise_scale"] = world.noise_scale;
  j["seed"] = world.seed;
  return j.dump(2);
}

WorldModel world_from_json(const std::string& text) {
  json j = json::parse(text);
  WorldModel w;
  w.num_concepts = j.at("num_concepts").get<int>();
  w.d_v = j.at("d_v").get<int>();
  w.d_t = j.at("d_t").get<int>();
  w.d_f = j.at("d_f").get<int>();
  w.means_v = j.at("means_v").get<std::vector<Vec>>();
  w.means_t = j.at("means_t").get<std::vector<Vec>>();
  w.noise_scale = j.at("noise_scale").get<double>();
  w.seed = j.at("seed").get<uint64_t>();
  w.validate();
  return w;
}

std::vector<Sample> stream_from_jsonl(const std::string& text) {
  std::vector<Sample> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    Sample s;
    s.visual = j.at("visual").get<Vec>();
    s.text = j.at("text").get<Vec>();
    s.fused = j.at("fused").get<Vec>();
    s.ground_concept = j.at("ground_concept").get<int>();
    s.target_class = j.at("target_class").get<int>();
    s.split = j.at("split").get<std::string>();
    out.push_back(std::move(s));
  }
  return out;
}

} // namespace dsca
