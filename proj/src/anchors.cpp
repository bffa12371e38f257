#include "mgd/anchors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "mgd/error.hpp"

namespace mgd {

void Anchor::validate() const {
  if (!(w > 0.0) || !(h > 0.0) || !std::isfinite(w) || !std::isfinite(h)) {
    std::ostringstream os;
    os << "invalid anchor " << w << "x" << h;
    throw ValidationError(os.str());
  }
}

void ClusterConfig::validate() const {
  if (k < 1) throw ValidationError("cluster count k must be >= 1");
  if (!(tol > 0.0)) throw ValidationError("convergence tolerance must be > 0");
  if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
  if (restarts < 1) throw ValidationError("restarts must be >= 1");
  if (kicks < 0) throw ValidationError("kicks must be >= 0");
}

std::vector<Anchor> default_anchors() {
  return {{10, 13}, {16, 30}, {33, 23}, {30, 61}, {62, 45}, {59, 119}, {116, 90}, {156, 198}, {373, 326}};
}

std::size_t assign_best_anchor(double w, double h, std::span<const Anchor> anchors) {
  if (anchors.empty()) throw ValidationError("no anchors to choose from");
  std::size_t best = 0;
  double best_iou = -1.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double v = iou_wh(w, h, anchors[i].w, anchors[i].h);
    if (v > best_iou) {
      best_iou = v;
      best = i;
    }
  }
  return best;
}

std::size_t assign_best_anchor(const Box& box, std::span<const Anchor> anchors) {
  return assign_best_anchor(box.w(), box.h(), anchors);
}

double mean_best_iou(std::span<const BoxSize> boxes, std::span<const Anchor> anchors) {
  if (boxes.empty() || anchors.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& b : boxes) {
    double best = 0.0;
    for (const auto& a : anchors) best = std::max(best, iou_wh(b.w, b.h, a.w, a.h));
    sum += best;
  }
  return sum / static_cast<double>(boxes.size());
}

namespace {

double median_of(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct RunState {
  std::vector<Anchor> centroids;
  std::vector<int> assignment;
  double mean_iou = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;
};

std::vector<Anchor> seed_plus_plus(const std::vector<BoxSize>& boxes, int k, std::mt19937_64& rng) {
  std::vector<Anchor> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  std::uniform_int_distribution<std::size_t> first(0, boxes.size() - 1);
  const auto& b0 = boxes[first(rng)];
  centroids.push_back({b0.w, b0.h});

  std::vector<double> weight(boxes.size());
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) {
        nearest = std::min(nearest, 1.0 - iou_wh(boxes[i].w, boxes[i].h, c.w, c.h));
      }
      weight[i] = nearest * nearest;
      total += weight[i];
    }
    // total > 0 whenever the distinct count is at least k.
    std::uniform_real_distribution<double> pick(0.0, total);
    const double r = pick(rng);
    double acc = 0.0;
    std::size_t chosen = boxes.size();
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (weight[i] <= 0.0) continue;
      last_positive = i;
      acc += weight[i];
      if (r < acc) {
        chosen = i;
        break;
      }
    }
    if (chosen == boxes.size()) chosen = last_positive;
    centroids.push_back({boxes[chosen].w, boxes[chosen].h});
  }
  return centroids;
}

std::vector<int> assign_all(const std::vector<BoxSize>& boxes, const std::vector<Anchor>& centroids,
                            std::vector<double>& best_iou) {
  std::vector<int> out(boxes.size());
  best_iou.assign(boxes.size(), 0.0);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto j = assign_best_anchor(boxes[i].w, boxes[i].h, centroids);
    out[i] = static_cast<int>(j);
    best_iou[i] = iou_wh(boxes[i].w, boxes[i].h, centroids[j].w, centroids[j].h);
  }
  return out;
}

// Moves the worst-fitting box of a multi-member cluster into each empty one.
void fill_empty_clusters(std::vector<int>& assignment, const std::vector<double>& best_iou, int k) {
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int a : assignment) ++counts[static_cast<std::size_t>(a)];
  std::vector<bool> moved(assignment.size(), false);
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    std::size_t worst = assignment.size();
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (moved[i] || counts[static_cast<std::size_t>(assignment[i])] < 2) continue;
      if (worst == assignment.size() || best_iou[i] < best_iou[worst]) worst = i;
    }
    if (worst == assignment.size()) continue;
    --counts[static_cast<std::size_t>(assignment[worst])];
    assignment[worst] = c;
    moved[worst] = true;
    ++counts[static_cast<std::size_t>(c)];
  }
}

std::vector<Anchor> update_centroids(const std::vector<BoxSize>& boxes,
                                     const std::vector<int>& assignment, int k, CentroidRule rule,
                                     const std::vector<Anchor>& previous) {
  std::vector<Anchor> out = previous;
  std::vector<std::vector<double>> ws(static_cast<std::size_t>(k)), hs(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    ws[static_cast<std::size_t>(assignment[i])].push_back(boxes[i].w);
    hs[static_cast<std::size_t>(assignment[i])].push_back(boxes[i].h);
  }
  for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
    if (ws[c].empty()) continue;
    if (rule == CentroidRule::kMedian) {
      out[c] = {median_of(ws[c]), median_of(hs[c])};
    } else {
      const double n = static_cast<double>(ws[c].size());
      out[c] = {std::accumulate(ws[c].begin(), ws[c].end(), 0.0) / n,
                std::accumulate(hs[c].begin(), hs[c].end(), 0.0) / n};
    }
  }
  return out;
}

RunState run_once(const std::vector<BoxSize>& boxes, const ClusterConfig& cfg, std::mt19937_64& rng) {
  RunState state;
  std::vector<Anchor> centroids = seed_plus_plus(boxes, cfg.k, rng);
  std::vector<double> best_iou;
  std::vector<int> previous_assignment;
  bool have_state = false;

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    std::vector<int> assignment = assign_all(boxes, centroids, best_iou);
    fill_empty_clusters(assignment, best_iou, cfg.k);
    const bool unchanged = have_state && assignment == previous_assignment;

    auto next = update_centroids(boxes, assignment, cfg.k, cfg.centroid, centroids);
    const double score = mean_best_iou(boxes, next);

    if (have_state && score < state.mean_iou) {
      state.converged = true;
      return state;
    }
    const double gain = have_state ? score - state.mean_iou : std::numeric_limits<double>::infinity();
    state.centroids = next;
    state.assignment = assignment;
    state.mean_iou = score;
    state.iterations = iter;
    state.history.push_back(score);
    have_state = true;
    if (unchanged || gain < cfg.tol) {
      state.converged = true;
      return state;
    }
    previous_assignment = std::move(assignment);
    centroids = std::move(next);
  }
  return state;
}


// Local search over partitions after the iterations: a Lloyd step from the
// current partition, then single-box moves, then (for small inputs) moves of
// two boxes at once. Any strict gain in mean best IoU is taken and the search
// restarts; it ends when no candidate improves.
void polish(const std::vector<BoxSize>& boxes, const ClusterConfig& cfg, RunState& state) {
  if (state.assignment.empty()) return;
  const int k = cfg.k;
  const std::size_t n = boxes.size();
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int a : state.assignment) ++counts[static_cast<std::size_t>(a)];

  auto try_partition = [&](const std::vector<int>& trial) {
    std::vector<int> c(static_cast<std::size_t>(k), 0);
    for (int a : trial) ++c[static_cast<std::size_t>(a)];
    if (std::find(c.begin(), c.end(), 0) != c.end()) return false;
    auto centroids = update_centroids(boxes, trial, k, cfg.centroid, state.centroids);
    const double score = mean_best_iou(boxes, centroids);
    if (!(score > state.mean_iou + 1e-12)) return false;
    state.assignment = trial;
    state.centroids = std::move(centroids);
    state.mean_iou = score;
    state.history.push_back(score);
    counts = std::move(c);
    return true;
  };

  auto lloyd_step = [&] {
    std::vector<double> best_iou;
    std::vector<int> trial = assign_all(boxes, state.centroids, best_iou);
    fill_empty_clusters(trial, best_iou, k);
    return trial != state.assignment && try_partition(trial);
  };

  auto single_move = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      const int from = state.assignment[i];
      if (counts[static_cast<std::size_t>(from)] < 2) continue;
      for (int c = 0; c < k; ++c) {
        if (c == from) continue;
        std::vector<int> trial = state.assignment;
        trial[i] = c;
        if (try_partition(trial)) return true;
      }
    }
    return false;
  };

  auto pair_move = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        for (int ci = 0; ci < k; ++ci) {
          for (int cj = 0; cj < k; ++cj) {
            if (ci == state.assignment[i] || cj == state.assignment[j]) continue;
            std::vector<int> trial = state.assignment;
            trial[i] = ci;
            trial[j] = cj;
            if (try_partition(trial)) return true;
          }
        }
      }
    }
    return false;
  };

  const bool pairs = n <= cfg.polish_max_boxes / 4;
  for (int round = 0; round < cfg.max_iters; ++round) {
    if (lloyd_step() || single_move() || (pairs && pair_move())) continue;
    return;
  }
}

// Iterated local search: reassign a few random boxes, polish, keep the result
// only if it beats the current state.
void kick_and_polish(const std::vector<BoxSize>& boxes, const ClusterConfig& cfg, std::mt19937_64& rng,
                     RunState& state) {
  if (cfg.k < 2) return;
  std::uniform_int_distribution<std::size_t> pick_box(0, boxes.size() - 1);
  std::uniform_int_distribution<int> pick_cluster(0, cfg.k - 1);
  for (int kick = 0; kick < cfg.kicks; ++kick) {
    RunState trial = state;
    for (int m = 0; m < 3; ++m) trial.assignment[pick_box(rng)] = pick_cluster(rng);
    std::vector<int> counts(static_cast<std::size_t>(cfg.k), 0);
    for (int a : trial.assignment) ++counts[static_cast<std::size_t>(a)];
    if (std::find(counts.begin(), counts.end(), 0) != counts.end()) continue;
    trial.centroids = update_centroids(boxes, trial.assignment, cfg.k, cfg.centroid, trial.centroids);
    trial.mean_iou = mean_best_iou(boxes, trial.centroids);
    trial.history.clear();
    polish(boxes, cfg, trial);
    if (trial.mean_iou > state.mean_iou + 1e-12) {
      state.centroids = std::move(trial.centroids);
      state.assignment = std::move(trial.assignment);
      state.mean_iou = trial.mean_iou;
      state.history.push_back(state.mean_iou);
    }
  }
}

}  // namespace

ClusterResult kmeans_iou(std::span<const BoxSize> boxes, const ClusterConfig& cfg) {
  cfg.validate();
  if (boxes.empty()) throw ValidationError("cannot cluster an empty box set");
  for (const auto& b : boxes) {
    if (!(b.w > 0.0) || !(b.h > 0.0) || !std::isfinite(b.w) || !std::isfinite(b.h)) {
      throw ValidationError("box sizes must be positive and finite");
    }
  }
  std::vector<BoxSize> sorted(boxes.begin(), boxes.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<BoxSize> uniq = sorted;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() < static_cast<std::size_t>(cfg.k)) {
    std::ostringstream os;
    os << "need at least " << cfg.k << " distinct box sizes, got " << uniq.size();
    throw ValidationError(os.str());
  }

  RunState best;
  bool have_best = false;
  for (int r = 0; r < cfg.restarts; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    RunState run = run_once(sorted, cfg, rng);
    if (sorted.size() <= cfg.polish_max_boxes) {
      polish(sorted, cfg, run);
      kick_and_polish(sorted, cfg, rng, run);
    }
    if (!have_best || run.mean_iou > best.mean_iou) {
      best = std::move(run);
      have_best = true;
    }
  }

  ClusterResult out;
  out.anchors = best.centroids;
  std::sort(out.anchors.begin(), out.anchors.end(), [](const Anchor& a, const Anchor& b) {
    if (a.area() != b.area()) return a.area() < b.area();
    return a.w < b.w;
  });
  out.mean_iou = best.mean_iou;
  out.iterations = best.iterations;
  out.converged = best.converged;
  out.history = std::move(best.history);
  return out;
}

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string format_anchors(std::span<const Anchor> anchors) {
  std::string out;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (i > 0) out += ", ";
    out += format_number(anchors[i].w);
    out += ',';
    out += format_number(anchors[i].h);
  }
  return out;
}

std::vector<Anchor> parse_anchors(const std::string& text) {
  std::vector<double> values;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    double v = 0.0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
      throw ValidationError("bad number in anchors: '" + token + "'");
    }
    values.push_back(v);
    token.clear();
  };
  for (char ch : text) {
    if (ch == ',' || ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      flush();
    } else {
      token += ch;
    }
  }
  flush();
  if (values.empty() || values.size() % 2 != 0) {
    throw ValidationError("anchors must be a non-empty list of w,h pairs");
  }
  std::vector<Anchor> out;
  for (std::size_t i = 0; i < values.size(); i += 2) {
    Anchor a{values[i], values[i + 1]};
    a.validate();
    out.push_back(a);
  }
  return out;
}

void write_anchors(const std::filesystem::path& path, std::span<const Anchor> anchors) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write anchors file " + path.string());
  os << format_anchors(anchors) << '\n';
  if (!os) throw IoError("failed writing anchors file " + path.string());
}

std::vector<Anchor> read_anchors(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read anchors file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_anchors(ss.str());
}

}  // namespace mgd
