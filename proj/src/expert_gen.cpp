#include "dockirl/expert_gen.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <thread>

#include "dockirl/rng.hpp"

namespace dockirl {

namespace {

struct TreeNode {
  Vec2 p;
  int parent = -1;
  double cost = 0.0;
  std::vector<int> children;
};

/// Uniform bucket grid over the world box; bucket side equals the rewiring radius.
class NodeIndex {
 public:
  NodeIndex(const Rect& box, double cell) : box_(box), cell_(cell) {
    nx_ = std::max(1, static_cast<int>(std::ceil(box.width() / cell)));
    ny_ = std::max(1, static_cast<int>(std::ceil(box.height() / cell)));
    buckets_.resize(static_cast<std::size_t>(nx_ * ny_));
  }

  void insert(int id, Vec2 p) { buckets_[index(bx(p.x), by(p.y))].push_back(id); }

  int nearest(const std::vector<TreeNode>& nodes, Vec2 p) const {
    const int cx = bx(p.x);
    const int cy = by(p.y);
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    const int max_ring = std::max(nx_, ny_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      for (int j = cy - ring; j <= cy + ring; ++j) {
        for (int i = cx - ring; i <= cx + ring; ++i) {
          if (std::max(std::abs(i - cx), std::abs(j - cy)) != ring) continue;
          if (i < 0 || j < 0 || i >= nx_ || j >= ny_) continue;
          for (int id : buckets_[index(i, j)]) {
            const double d = distance(nodes[id].p, p);
            if (d < best_d || (d == best_d && id < best)) {
              best_d = d;
              best = id;
            }
          }
        }
      }
      if (best >= 0 && best_d <= ring * cell_) break;
    }
    return best;
  }

  /// Ids within `radius` (<= bucket side) of p, in ascending id order.
  std::vector<int> near(const std::vector<TreeNode>& nodes, Vec2 p, double radius) const {
    std::vector<int> out;
    const int cx = bx(p.x);
    const int cy = by(p.y);
    for (int j = std::max(0, cy - 1); j <= std::min(ny_ - 1, cy + 1); ++j)
      for (int i = std::max(0, cx - 1); i <= std::min(nx_ - 1, cx + 1); ++i)
        for (int id : buckets_[index(i, j)])
          if (distance(nodes[id].p, p) <= radius) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  int bx(double x) const { return std::clamp(static_cast<int>((x - box_.x0) / cell_), 0, nx_ - 1); }
  int by(double y) const { return std::clamp(static_cast<int>((y - box_.y0) / cell_), 0, ny_ - 1); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j * nx_ + i); }

  Rect box_;
  double cell_;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

bool segment_free(const World& world, Vec2 a, Vec2 b, double radius, double step) {
  const double len = distance(a, b);
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  for (int i = 0; i <= n; ++i) {
    const double f = static_cast<double>(i) / n;
    if (!world.disc_free(a + (b - a) * f, radius)) return false;
  }
  return true;
}

void propagate_cost(std::vector<TreeNode>& nodes, int root, double delta) {
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    for (int c : nodes[id].children) {
      nodes[c].cost -= delta;
      stack.push_back(c);
    }
  }
}

double polyline_length(const std::vector<Vec2>& pts) {
  double total = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) total += distance(pts[i - 1], pts[i]);
  return total;
}

}  // namespace

Path plan_rrt_star(const World& world, Vec2 start, Vec2 goal, const RrtParams& params,
                   std::uint64_t rng_seed) {
  const double radius =
      0.5 * std::hypot(world.config.vessel_length_m, world.config.vessel_beam_m) + params.clearance;
  if (!world.disc_free(start, radius)) throw NoPathFound("start position is not collision-free");

  Rng rng(rng_seed);
  const Rect box = world.bounds();
  std::vector<TreeNode> nodes;
  nodes.reserve(static_cast<std::size_t>(params.max_iters) + 1);
  nodes.push_back({start, -1, 0.0, {}});
  NodeIndex index(box, params.neighbor_radius);
  index.insert(0, start);

  for (int iter = 0; iter < params.max_iters; ++iter) {
    const double coin = rng.uniform();
    const double sx = rng.uniform(box.x0, box.x1);
    const double sy = rng.uniform(box.y0, box.y1);
    const Vec2 sample = coin < params.goal_bias ? goal : Vec2{sx, sy};

    const int nearest = index.nearest(nodes, sample);
    const Vec2 from = nodes[nearest].p;
    const double d = distance(from, sample);
    if (d <= 0.0) continue;
    const Vec2 p = d <= params.step_size ? sample : from + (sample - from) * (params.step_size / d);
    if (!world.disc_free(p, radius)) continue;

    // Choose the cheapest collision-free parent among the neighbours.
    auto candidates = index.near(nodes, p, params.neighbor_radius);
    if (std::find(candidates.begin(), candidates.end(), nearest) == candidates.end())
      candidates.push_back(nearest);
    std::vector<std::pair<double, int>> by_cost;
    by_cost.reserve(candidates.size());
    for (int c : candidates) by_cost.emplace_back(nodes[c].cost + distance(nodes[c].p, p), c);
    std::sort(by_cost.begin(), by_cost.end());
    int parent = -1;
    double cost = 0.0;
    for (const auto& [c_cost, c] : by_cost) {
      if (segment_free(world, nodes[c].p, p, radius, params.check_step)) {
        parent = c;
        cost = c_cost;
        break;
      }
    }
    if (parent < 0) continue;

    const int id = static_cast<int>(nodes.size());
    nodes.push_back({p, parent, cost, {}});
    nodes[parent].children.push_back(id);
    index.insert(id, p);

    for (int n : candidates) {
      if (n == parent) continue;
      const double via = cost + distance(p, nodes[n].p);
      if (via + 1e-12 >= nodes[n].cost) continue;
      if (!segment_free(world, p, nodes[n].p, radius, params.check_step)) continue;
      auto& siblings = nodes[nodes[n].parent].children;
      siblings.erase(std::find(siblings.begin(), siblings.end(), n));
      const double delta = nodes[n].cost - via;
      nodes[n].parent = id;
      nodes[n].cost = via;
      nodes[id].children.push_back(n);
      propagate_cost(nodes, n, delta);
    }
  }

  int best = -1;
  bool append_goal = false;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double dg = distance(nodes[i].p, goal);
    if (dg > params.goal_tolerance) continue;
    const bool link = dg > 0.0 && segment_free(world, nodes[i].p, goal, radius, params.check_step);
    const double total = nodes[i].cost + (link ? dg : 0.0);
    if (total < best_cost) {
      best_cost = total;
      best = static_cast<int>(i);
      append_goal = link;
    }
  }
  if (best < 0) throw NoPathFound("no tree node within goal tolerance after " +
                                  std::to_string(params.max_iters) + " iterations");

  Path path;
  for (int id = best; id >= 0; id = nodes[id].parent) path.waypoints.push_back(nodes[id].p);
  std::reverse(path.waypoints.begin(), path.waypoints.end());
  if (append_goal) path.waypoints.push_back(goal);
  path.cost = polyline_length(path.waypoints);
  return path;
}

bool path_footprint_free(const World& world, const Path& path, double step) {
  if (path.waypoints.empty()) return false;
  if (path.waypoints.size() == 1) {
    const Vec2 p = path.waypoints.front();
    return !is_collision(world, {p.x, p.y, 0.0});
  }
  for (std::size_t i = 1; i < path.waypoints.size(); ++i) {
    const Vec2 a = path.waypoints[i - 1];
    const Vec2 b = path.waypoints[i];
    const double heading = std::atan2(b.y - a.y, b.x - a.x);
    const int n = std::max(1, static_cast<int>(std::ceil(distance(a, b) / step)));
    for (int k = 0; k <= n; ++k) {
      const Vec2 p = a + (b - a) * (static_cast<double>(k) / n);
      if (is_collision(world, {p.x, p.y, heading})) return false;
    }
  }
  return true;
}

namespace {

/// Arc-length parametrised polyline used by the carrot follower.
class Polyline {
 public:
  explicit Polyline(const std::vector<Vec2>& pts) : pts_(pts) {
    arc_.push_back(0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) arc_.push_back(arc_.back() + distance(pts_[i - 1], pts_[i]));
  }

  double length() const { return arc_.back(); }

  Vec2 at(double s) const {
    if (pts_.size() == 1 || s <= 0.0) return pts_.front();
    if (s >= length()) return pts_.back();
    const std::size_t i = segment(s);
    const double seg = arc_[i + 1] - arc_[i];
    const double f = seg > 0.0 ? (s - arc_[i]) / seg : 0.0;
    return pts_[i] + (pts_[i + 1] - pts_[i]) * f;
  }

  /// Direction of travel at arc length s; NaN for a single-point path.
  double heading_at(double s) const {
    if (pts_.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    std::size_t i = segment(std::clamp(s, 0.0, length()));
    while (i + 1 < pts_.size() && distance(pts_[i], pts_[i + 1]) == 0.0) ++i;
    if (i + 1 >= pts_.size()) i = pts_.size() - 2;
    return std::atan2(pts_[i + 1].y - pts_[i].y, pts_[i + 1].x - pts_[i].x);
  }

  /// Closest point with arc length in [s_min, s_min + window].
  double project(Vec2 p, double s_min, double window, double& dist_out) const {
    double best_s = s_min;
    double best_d = distance(at(s_min), p);
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      if (arc_[i + 1] < s_min || arc_[i] > s_min + window) continue;
      const Vec2 a = pts_[i];
      const Vec2 ab = pts_[i + 1] - a;
      const double len2 = ab.dot(ab);
      double f = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
      f = std::clamp(f, 0.0, 1.0);
      double s = arc_[i] + f * (arc_[i + 1] - arc_[i]);
      s = std::clamp(s, s_min, s_min + window);
      const double d = distance(at(s), p);
      if (d < best_d) {
        best_d = d;
        best_s = s;
      }
    }
    dist_out = best_d;
    return best_s;
  }

 private:
  std::size_t segment(double s) const {
    const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
    const std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - arc_.begin() - 1));
    return std::min(i, pts_.size() - 2);
  }

  std::vector<Vec2> pts_;
  std::vector<double> arc_;
};

}  // namespace

Trajectory track_path(const World& world, const Path& path, const TrackingParams& params) {
  return track_path(world, path, world.spawn_pose, params);
}

Trajectory track_path(const World& world, const Path& path, const VesselState& start,
                      const TrackingParams& params) {
  if (path.waypoints.empty()) throw std::invalid_argument("track_path: empty path");
  const Polyline line(path.waypoints);
  const Vec2 goal = path.waypoints.back();
  const auto& g = params.gains;

  Trajectory traj;
  traj.dt = params.dt;
  VesselState s = start;
  double progress = 0.0;
  const int max_steps = static_cast<int>(std::ceil(params.time_budget / params.dt));

  for (int step = 0;; ++step) {
    if (is_collision(world, s)) throw TrackingDiverged("vessel footprint collided at t=" + std::to_string(s.t));
    traj.states.push_back(s);

    const Vec2 vel = s.velocity();
    if (distance(s.position(), goal) <= params.stop_radius && vel.norm() <= params.stop_speed) break;
    if (step >= max_steps) throw TrackingDiverged("time budget exceeded");

    double cross_track = 0.0;
    progress = line.project(s.position(), progress, 2.0, cross_track);
    if (cross_track > params.max_cross_track) throw TrackingDiverged("cross-track error exceeded");

    const double carrot_s = std::min(progress + params.lookahead, line.length());
    const Vec2 carrot = line.at(carrot_s);

    double heading = line.heading_at(carrot_s);
    if (std::isnan(heading)) heading = std::isnan(params.final_heading) ? s.psi : params.final_heading;
    if (!std::isnan(params.final_heading) && params.heading_blend > 0.0) {
      const double remaining = line.length() - progress;
      const double w = std::clamp(1.0 - remaining / params.heading_blend, 0.0, 1.0);
      heading = wrap_angle(heading + w * wrap_angle(params.final_heading - heading));
    }

    const Vec2 err = carrot - s.position();
    const double fx = g.kp[0] * err.x - g.kd[0] * vel.x;
    const double fy = g.kp[1] * err.y - g.kd[1] * vel.y;
    const double c = std::cos(s.psi);
    const double sn = std::sin(s.psi);
    std::array<double, 3> tau{c * fx + sn * fy, -sn * fx + c * fy,
                              g.kp[2] * wrap_angle(heading - s.psi) - g.kd[2] * s.r};
    for (int i = 0; i < 3; ++i) tau[i] = std::clamp(tau[i], -g.force_limit[i], g.force_limit[i]);
    s = step_vessel(s, tau, params.dt, params.dynamics);
  }
  return traj;
}

std::vector<const DatasetRecord*> Dataset::split(bool train) const {
  std::vector<const DatasetRecord*> out;
  for (const auto& r : records)
    if (r.is_train == train) out.push_back(&r);
  return out;
}

DatasetRecord generate_record(const GenerationParams& params, std::uint64_t seed) {
  WorldConfig cfg = params.world;
  cfg.seed = seed;
  DatasetRecord rec;
  rec.world = build_world(cfg);
  const Vec2 goal = rec.world.bays[rec.world.goal_bay].center();
  const Path path = plan_rrt_star(rec.world, rec.world.spawn_pose.position(), goal, params.rrt, seed);
  TrackingParams tracking = params.tracking;
  tracking.final_heading = rec.world.bay_entry_heading(rec.world.goal_bay);
  rec.trajectory = track_path(rec.world, path, tracking);
  const Vec2 end = rec.trajectory.states.back().position();
  if (distance(end, goal) > params.rrt.goal_tolerance)
    throw TrackingDiverged("trajectory ended outside the goal tolerance");
  return rec;
}

Dataset generate_dataset(int n_train, int n_test, std::uint64_t base_seed,
                         const GenerationParams& params, GenerationStats* stats) {
  if (n_train < 0 || n_test < 0 || n_train + n_test <= 0)
    throw std::invalid_argument("generate_dataset: counts must be positive");
  const int needed = n_train + n_test;
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());

  Dataset ds;
  GenerationStats local;
  std::uint64_t next_seed = base_seed;
  while (static_cast<int>(ds.records.size()) < needed) {
    std::vector<std::future<std::optional<DatasetRecord>>> batch;
    for (unsigned w = 0; w < workers; ++w) {
      const std::uint64_t seed = next_seed++;
      batch.push_back(std::async(std::launch::async, [&params, seed]() -> std::optional<DatasetRecord> {
        try {
          return generate_record(params, seed);
        } catch (const NoPathFound&) {
        } catch (const TrackingDiverged&) {
        } catch (const DegenerateWorld&) {
        }
        return std::nullopt;
      }));
    }
    // Results are consumed in seed order so the output does not depend on scheduling.
    for (auto& f : batch) {
      auto rec = f.get();
      if (static_cast<int>(ds.records.size()) >= needed) continue;
      ++local.attempts;
      if (!rec) {
        ++local.failures;
        continue;
      }
      rec->is_train = static_cast<int>(ds.records.size()) < n_train;
      ds.records.push_back(std::move(*rec));
    }
    if (local.attempts >= 10 && local.failures > params.max_failure_rate * local.attempts)
      throw GenerationStalled("generation stalled: " + std::to_string(local.failures) + " of " +
                              std::to_string(local.attempts) + " seeds failed");
  }
  if (local.attempts >= 10 && local.failures > params.max_failure_rate * local.attempts)
    throw GenerationStalled("generation stalled: " + std::to_string(local.failures) + " of " +
                            std::to_string(local.attempts) + " seeds failed");
  if (stats) *stats = local;
  return ds;
}

}  // namespace dockirl
