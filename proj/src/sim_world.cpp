#include "semdrive/sim_world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>

#include "json.hpp"

namespace semdrive {

const char* to_string(TerminationCause c) {
    switch (c) {
        case TerminationCause::none: return "none";
        case TerminationCause::collision: return "collision";
        case TerminationCause::lane_departure: return "lane_departure";
        case TerminationCause::stuck: return "stuck";
        case TerminationCause::route_complete: return "route_complete";
    }
    return "none";
}

void WaypointGraph::add_edge(int a, int b) {
    const double cost = distance(nodes[a], nodes[b]);
    adjacency[a].push_back({b, cost});
    adjacency[b].push_back({a, cost});
}

bool WaypointGraph::connected() const {
    if (nodes.empty()) return false;
    std::vector<char> seen(nodes.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (const auto& [v, cost] : adjacency[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                stack.push_back(v);
            }
        }
    }
    return count == nodes.size();
}

// ---------------------------------------------------------------------------
// Routing
// ---------------------------------------------------------------------------

std::optional<Route> shortest_path(const WaypointGraph& graph, int start, int goal) {
    const int n = static_cast<int>(graph.nodes.size());
    if (start < 0 || start >= n || goal < 0 || goal >= n) return std::nullopt;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> g(n, inf);
    std::vector<int> parent(n, -1);
    std::vector<char> closed(n, 0);
    // (f, node); node index breaks ties so visitation order is reproducible
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    g[start] = 0.0;
    open.push({distance(graph.nodes[start], graph.nodes[goal]), start});
    while (!open.empty()) {
        auto [f, u] = open.top();
        open.pop();
        if (closed[u]) continue;
        closed[u] = 1;
        if (u == goal) break;
        for (const auto& [v, cost] : graph.adjacency[u]) {
            if (closed[v]) continue;
            const double cand = g[u] + cost;
            if (cand < g[v]) {
                g[v] = cand;
                parent[v] = u;
                open.push({cand + distance(graph.nodes[v], graph.nodes[goal]), v});
            }
        }
    }
    if (g[goal] == inf) return std::nullopt;
    Route route;
    for (int u = goal; u != -1; u = parent[u]) route.points.push_back(graph.nodes[u]);
    std::reverse(route.points.begin(), route.points.end());
    route.length_m = polyline_length(route.points);
    return route;
}

Route sample_route(const WaypointGraph& graph, std::uint64_t rng_seed, double l_max,
                   int retry_budget) {
    if (graph.nodes.size() < 2) throw std::invalid_argument("sample_route: need >= 2 nodes");
    const std::vector<int>* deck = &graph.spawn_indices;
    std::vector<int> all;
    if (deck->size() < 2) {
        all.resize(graph.nodes.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        deck = &all;
    }
    Rng rng(rng_seed);
    for (int attempt = 0; attempt < retry_budget; ++attempt) {
        const int a = (*deck)[rng.uniform_index(deck->size())];
        const int b = (*deck)[rng.uniform_index(deck->size())];
        if (a == b) continue;  // distinct endpoints required; redraw
        auto route = shortest_path(graph, a, b);
        if (!route) continue;
        if (route->length_m <= l_max) return *route;
    }
    throw SamplingExhaustedError("sample_route: no admissible route within retry budget");
}

double route_length(const std::vector<Vec2>& points) {
    if (points.empty()) throw std::invalid_argument("route_length: empty route");
    return polyline_length(points);
}

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

ControlCommand decode_action(double a1, double a2, double delta_max) {
    a1 = std::clamp(a1, -1.0, 1.0);
    a2 = std::clamp(a2, -1.0, 1.0);
    ControlCommand cmd;
    cmd.steer = a1 * delta_max;
    cmd.throttle = std::max(a2, 0.0);
    cmd.brake = -std::min(a2, 0.0);
    return cmd;
}

VehicleState step_dynamics(const VehicleState& state, const ControlCommand& cmd, double dt,
                           const VehicleParams& p) {
    const double steer = std::clamp(cmd.steer, -p.delta_max, p.delta_max);
    const double accel = p.k_accel * cmd.throttle - p.k_brake * cmd.brake - p.k_drag * state.speed;
    VehicleState next = state;
    next.speed = std::clamp(state.speed + accel * dt, 0.0, p.v_max);
    // heading integrates with the pre-update speed; position with the updated one
    const double new_heading = state.heading + (state.speed / p.wheelbase) * std::tan(steer) * dt;
    next.heading = new_heading;
    next.position = state.position + Vec2{std::cos(new_heading), std::sin(new_heading)} * (next.speed * dt);
    next.steer_angle = steer;
    next.yaw_rate = (new_heading - state.heading) / dt;
    return next;
}

TerminationStatus check_termination(const EpisodeSnapshot& snap, const TerminationRules& rules) {
    if (snap.collision) return {true, TerminationCause::collision};
    if (snap.lateral_deviation_m > rules.d_max) return {true, TerminationCause::lane_departure};
    if (snap.low_speed_time_s > rules.t_stuck) return {true, TerminationCause::stuck};
    if (snap.progress_m >= snap.route_length_m - rules.goal_tolerance)
        return {true, TerminationCause::route_complete};
    return {false, TerminationCause::none};
}

// ---------------------------------------------------------------------------
// Rasterization and waypoints
// ---------------------------------------------------------------------------

namespace {

OrientedRect footprint(const VehicleState& s, double length, double width) {
    return {s.position, s.heading, length, width};
}

// position + tangent heading at arc length s (clamped to the polyline ends)
void pose_at_arc_length(const std::vector<Vec2>& pts, double s, Vec2& pos, double& heading) {
    pos = pts.front();
    heading = 0.0;
    if (pts.size() < 2) return;
    if (s < 0.0) s = 0.0;
    double prefix = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double seg = distance(pts[i], pts[i + 1]);
        if (seg == 0.0) continue;
        heading = std::atan2(pts[i + 1].y - pts[i].y, pts[i + 1].x - pts[i].x);
        if (prefix + seg >= s) {
            const double t = (s - prefix) / seg;
            pos = {pts[i].x + t * (pts[i + 1].x - pts[i].x), pts[i].y + t * (pts[i + 1].y - pts[i].y)};
            return;
        }
        prefix += seg;
    }
    pos = pts.back();  // past the end: goal pose with the last segment's heading
}

}  // namespace

BevGrid render_bev(const Scene& scene, int grid_size, double resolution) {
    if (grid_size <= 0 || resolution <= 0.0)
        throw std::invalid_argument("render_bev: grid_size and resolution must be positive");
    BevGrid grid;
    grid.size = grid_size;
    grid.resolution = resolution;
    grid.cells.assign(static_cast<std::size_t>(grid_size) * grid_size,
                      static_cast<std::uint8_t>(BevClass::background));

    const Vec2 ego_pos = scene.ego.position;
    const double ego_heading = scene.ego.heading;
    // anything a cell can see lies within the grid's circumradius of the ego
    const double reach = 0.5 * grid_size * resolution * std::sqrt(2.0) + resolution;

    // candidate road segments near the grid
    std::vector<std::pair<Vec2, Vec2>> segments;
    for (std::size_t i = 0; i + 1 < scene.route_points.size(); ++i) {
        const Vec2& a = scene.route_points[i];
        const Vec2& b = scene.route_points[i + 1];
        if (point_segment_distance(ego_pos, a, b) <= reach + scene.lane_halfwidth)
            segments.push_back({a, b});
    }
    const OrientedRect ego_rect = footprint(scene.ego, scene.ego_length, scene.ego_width);
    std::vector<OrientedRect> vehicle_rects;
    for (const auto& v : scene.vehicles) {
        if (distance(v.state.position, ego_pos) <= reach + 0.5 * std::hypot(v.length, v.width))
            vehicle_rects.push_back(footprint(v.state, v.length, v.width));
    }

    const double half = 0.5 * grid_size;
    for (int r = 0; r < grid_size; ++r) {
        for (int c = 0; c < grid_size; ++c) {
            const double forward = (half - r - 0.5) * resolution;
            const double left = (half - c - 0.5) * resolution;
            const Vec2 world = ego_pos + rotate({forward, left}, ego_heading);
            // stamp in ascending priority: road, ego, vehicle
            BevClass cls = BevClass::background;
            for (const auto& [a, b] : segments) {
                if (point_segment_distance(world, a, b) <= scene.lane_halfwidth) {
                    cls = BevClass::road;
                    break;
                }
            }
            if (point_in_rect(world, ego_rect)) cls = BevClass::ego;
            for (const auto& rect : vehicle_rects) {
                if (point_in_rect(world, rect)) {
                    cls = BevClass::vehicle;
                    break;
                }
            }
            grid.cells[static_cast<std::size_t>(r) * grid_size + c] = static_cast<std::uint8_t>(cls);
        }
    }
    return grid;
}

std::vector<double> local_waypoints(const VehicleState& state, const Route& route, int k,
                                    double spacing, double radius) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(k) * 2);
    const auto proj = project_to_polyline(state.position, route.points);
    for (int i = 1; i <= k; ++i) {
        const Vec2 p = point_at_arc_length(route.points, proj.arc_length + i * spacing);
        const Vec2 local = rotate(p - state.position, -state.heading);
        out.push_back(std::clamp(local.x / radius, -1.0, 1.0));
        out.push_back(std::clamp(local.y / radius, -1.0, 1.0));
    }
    return out;
}

// ---------------------------------------------------------------------------
// SimEnv
// ---------------------------------------------------------------------------

SimEnv::SimEnv(WaypointGraph world, SimConfig config)
    : world_(std::move(world)), config_(std::move(config)) {
    if (!world_.connected()) throw std::invalid_argument("SimEnv: world graph must be connected");
}

void SimEnv::reset(std::uint64_t seed) {
    route_ = sample_route(world_, derive_seed(seed, "route"), config_.l_max,
                          config_.route_retry_budget);
    ego_ = VehicleState{};
    pose_at_arc_length(route_.points, 0.0, ego_.position, ego_.heading);

    traffic_.clear();
    Rng rng(derive_seed(seed, "traffic"));
    const OrientedRect ego_rect = footprint(ego_, config_.vehicle.length, config_.vehicle.width);
    for (int i = 0; i < config_.traffic_count; ++i) {
        TrafficVehicle tv;
        tv.route = sample_route(world_, derive_seed(seed, "traffic-route", i), config_.l_max,
                                config_.route_retry_budget);
        tv.speed = rng.uniform(config_.traffic_speed_min, config_.traffic_speed_max);
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            tv.arc = rng.uniform(0.0, tv.route.length_m);
            pose_at_arc_length(tv.route.points, tv.arc, tv.state.position, tv.state.heading);
            tv.state.speed = tv.speed;
            OrientedRect rect = footprint(tv.state, tv.length + 2.0, tv.width + 2.0);
            placed = !rects_overlap(rect, ego_rect);
        }
        if (placed) traffic_.push_back(tv);  // a vehicle that can't clear the ego is dropped
    }

    snapshot_ = EpisodeSnapshot{};
    snapshot_.route_length_m = route_.length_m;
    episode_steps_ = 0;
    refresh_tracking();
}

void SimEnv::refresh_tracking() {
    const auto proj = project_to_polyline(ego_.position, route_.points);
    snapshot_.progress_m = proj.arc_length;
    snapshot_.lateral_deviation_m = proj.lateral_distance;
    heading_error_ = wrap_angle(ego_.heading - proj.tangent_heading);
}

StepResult SimEnv::step(const ControlCommand& cmd) {
    const double prev_progress = snapshot_.progress_m;
    ego_ = step_dynamics(ego_, cmd, config_.dt, config_.vehicle);
    for (auto& tv : traffic_) {
        tv.arc += tv.speed * config_.dt;
        if (tv.route.length_m > 0.0) tv.arc = std::fmod(tv.arc, tv.route.length_m);
        pose_at_arc_length(tv.route.points, tv.arc, tv.state.position, tv.state.heading);
        tv.state.speed = tv.speed;
    }
    refresh_tracking();

    const OrientedRect ego_rect = footprint(ego_, config_.vehicle.length, config_.vehicle.width);
    snapshot_.collision = false;
    for (const auto& tv : traffic_) {
        if (rects_overlap(ego_rect, footprint(tv.state, tv.length, tv.width))) {
            snapshot_.collision = true;
            break;
        }
    }
    if (ego_.speed < config_.rules.v_min)
        snapshot_.low_speed_time_s += config_.dt;
    else
        snapshot_.low_speed_time_s = 0.0;

    ++episode_steps_;
    StepResult result;
    result.status = check_termination(snapshot_, config_.rules);
    result.truncated = !result.status.terminated && episode_steps_ >= config_.max_episode_steps;
    result.progress_delta_m = snapshot_.progress_m - prev_progress;
    result.collision = snapshot_.collision;
    return result;
}

Scene SimEnv::scene() const {
    Scene s;
    s.ego = ego_;
    for (const auto& tv : traffic_) s.vehicles.push_back({tv.state, tv.length, tv.width});
    s.route_points = route_.points;
    s.lane_halfwidth = world_.lane_halfwidth;
    s.ego_length = config_.vehicle.length;
    s.ego_width = config_.vehicle.width;
    return s;
}

BevGrid SimEnv::bev() const { return render_bev(scene(), config_.bev_size, config_.bev_resolution); }

std::vector<double> SimEnv::waypoints() const {
    return local_waypoints(ego_, route_, config_.waypoint_count, config_.waypoint_spacing,
                           config_.waypoint_radius);
}

std::vector<double> SimEnv::ego_state_vec() const {
    return {ego_.speed / config_.vehicle.v_max, ego_.steer_angle / config_.vehicle.delta_max,
            std::clamp(ego_.yaw_rate, -1.0, 1.0)};
}

SceneSummary SimEnv::summary() const {
    SceneSummary s;
    s.speed_mps = ego_.speed;
    s.lateral_deviation_m = snapshot_.lateral_deviation_m;
    s.heading_error_rad = heading_error_;
    s.progress_m = snapshot_.progress_m;
    s.route_length_m = snapshot_.route_length_m;
    s.collision = snapshot_.collision;
    s.lead_vehicle_gap_m = std::numeric_limits<double>::infinity();
    for (const auto& tv : traffic_) {
        const Vec2 local = rotate(tv.state.position - ego_.position, -ego_.heading);
        if (local.x > 0.0 && std::abs(local.y) <= world_.lane_halfwidth)
            s.lead_vehicle_gap_m = std::min(s.lead_vehicle_gap_m, local.x);
    }
    return s;
}

// ---------------------------------------------------------------------------
// World construction and JSON I/O
// ---------------------------------------------------------------------------

WaypointGraph make_straight_world(int n_nodes, double spacing, double lane_halfwidth) {
    WaypointGraph g;
    g.lane_halfwidth = lane_halfwidth;
    g.nodes.resize(n_nodes);
    g.adjacency.resize(n_nodes);
    for (int i = 0; i < n_nodes; ++i) g.nodes[i] = {i * spacing, 0.0};
    for (int i = 0; i + 1 < n_nodes; ++i) g.add_edge(i, i + 1);
    // a road is entered at one end and left at the other
    g.spawn_indices = {0, n_nodes - 1};
    return g;
}

WaypointGraph make_grid_town(int rows, int cols, double spacing, double lane_halfwidth) {
    WaypointGraph g;
    g.lane_halfwidth = lane_halfwidth;
    g.nodes.resize(static_cast<std::size_t>(rows) * cols);
    g.adjacency.resize(g.nodes.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            g.nodes[static_cast<std::size_t>(r) * cols + c] = {c * spacing, r * spacing};
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int idx = r * cols + c;
            if (c + 1 < cols) g.add_edge(idx, idx + 1);
            if (r + 1 < rows) g.add_edge(idx, idx + cols);
        }
    }
    g.spawn_indices.resize(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) g.spawn_indices[i] = static_cast<int>(i);
    return g;
}

WaypointGraph load_world_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("load_world_json: cannot open " + path);
    nlohmann::json j;
    in >> j;
    WaypointGraph g;
    g.lane_halfwidth = j.at("lane_halfwidth").get<double>();
    if (g.lane_halfwidth <= 0.0) throw std::invalid_argument("load_world_json: lane_halfwidth must be > 0");
    for (const auto& node : j.at("nodes")) g.nodes.push_back({node.at(0).get<double>(), node.at(1).get<double>()});
    g.adjacency.resize(g.nodes.size());
    for (const auto& edge : j.at("edges")) {
        const int a = edge.at(0).get<int>();
        const int b = edge.at(1).get<int>();
        if (a < 0 || b < 0 || a >= static_cast<int>(g.nodes.size()) || b >= static_cast<int>(g.nodes.size()))
            throw std::invalid_argument("load_world_json: edge endpoint out of range");
        g.add_edge(a, b);  // costs recomputed from node positions, never trusted from the file
    }
    if (j.contains("spawn_indices"))
        for (const auto& s : j.at("spawn_indices")) g.spawn_indices.push_back(s.get<int>());
    if (!g.connected()) throw std::invalid_argument("load_world_json: graph must be connected");
    return g;
}

void save_world_json(const WaypointGraph& graph, const std::string& path) {
    nlohmann::json j;
    j["lane_halfwidth"] = graph.lane_halfwidth;
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : graph.nodes) j["nodes"].push_back({n.x, n.y});
    j["edges"] = nlohmann::json::array();
    for (std::size_t a = 0; a < graph.adjacency.size(); ++a)
        for (const auto& [b, cost] : graph.adjacency[a])
            if (static_cast<std::size_t>(b) > a) j["edges"].push_back({a, b});
    j["spawn_indices"] = graph.spawn_indices;
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

}  // namespace semdrive
