#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "semdrive/geom.hpp"
#include "semdrive/rng.hpp"

namespace semdrive {

struct SamplingExhaustedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct WaypointGraph {
    std::vector<Vec2> nodes;
    // adjacency[i] = list of (neighbor index, Euclidean edge cost)
    std::vector<std::vector<std::pair<int, double>>> adjacency;
    double lane_halfwidth = 3.5;
    std::vector<int> spawn_indices;  // nodes usable as route endpoints

    void add_edge(int a, int b);  // undirected, cost = node distance
    bool connected() const;
};

struct Route {
    std::vector<Vec2> points;
    double length_m = 0.0;
};

struct VehicleState {
    Vec2 position;
    double heading = 0.0;      // rad
    double speed = 0.0;        // m/s, >= 0
    double steer_angle = 0.0;  // rad
    double yaw_rate = 0.0;     // rad/s
};

struct ControlCommand {
    double steer = 0.0;     // rad
    double throttle = 0.0;  // [0,1]
    double brake = 0.0;     // [0,1]
};

enum class BevClass : std::uint8_t { background = 0, road = 1, ego = 2, vehicle = 3 };

struct BevGrid {
    int size = 0;             // H = W
    double resolution = 0.5;  // meters per cell
    std::vector<std::uint8_t> cells;  // row-major, size*size

    std::uint8_t at(int row, int col) const { return cells[static_cast<std::size_t>(row) * size + col]; }
    double extent() const { return size * resolution; }
};

enum class TerminationCause { none, collision, lane_departure, stuck, route_complete };

struct TerminationStatus {
    bool terminated = false;
    TerminationCause cause = TerminationCause::none;
};

const char* to_string(TerminationCause c);

// ---------------------------------------------------------------------------
// Physics / rules parameters
// ---------------------------------------------------------------------------

struct VehicleParams {
    double wheelbase = 2.5;    // m
    double delta_max = 0.6;    // rad
    double k_accel = 3.0;      // m/s^2 at full throttle
    double k_brake = 8.0;      // m/s^2 at full brake
    double k_drag = 0.05;      // 1/s
    double v_max = 20.0;       // m/s
    double length = 4.5;       // footprint, m
    double width = 2.0;        // footprint, m
};

struct TerminationRules {
    double d_max = 3.0;            // lane departure threshold, m
    double v_min = 1.0 / 3.6;      // stuck speed threshold, m/s
    double t_stuck = 90.0;         // s of continuous low speed
    double goal_tolerance = 2.0;   // m of route length left that counts as complete
};

// Snapshot the stepping loop maintains; check_termination is pure over it.
struct EpisodeSnapshot {
    bool collision = false;
    double lateral_deviation_m = 0.0;
    double low_speed_time_s = 0.0;  // continuous sim time below v_min
    double progress_m = 0.0;        // arc length of projection onto the route
    double route_length_m = 0.0;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Shortest path between two nodes (A* with Euclidean heuristic).
// Empty result if unreachable.
std::optional<Route> shortest_path(const WaypointGraph& graph, int start, int goal);

// Uniformly draws two distinct spawn nodes, runs A*, rejects routes longer
// than l_max and resamples. Throws SamplingExhaustedError once the retry
// budget is spent.
Route sample_route(const WaypointGraph& graph, std::uint64_t rng_seed, double l_max,
                   int retry_budget = 1000);

double route_length(const std::vector<Vec2>& points);
inline double route_length(const Route& r) { return route_length(r.points); }

// a1 -> steering scaled by delta_max, a2 -> throttle (positive) / brake
// (negative). Components are clamped to [-1,1]; the policy's squashed
// output can overshoot by a floating-point epsilon.
ControlCommand decode_action(double a1, double a2, double delta_max);

VehicleState step_dynamics(const VehicleState& state, const ControlCommand& cmd, double dt,
                           const VehicleParams& p);

// First matching cause in priority order:
// collision > lane_departure > stuck > route_complete > none.
TerminationStatus check_termination(const EpisodeSnapshot& snap, const TerminationRules& rules);

struct ScheduledVehicle {
    VehicleState state;
    double length = 4.5;
    double width = 2.0;
};

struct Scene {
    VehicleState ego;
    std::vector<ScheduledVehicle> vehicles;
    std::vector<Vec2> route_points;
    double lane_halfwidth = 3.5;
    double ego_length = 4.5;
    double ego_width = 2.0;
};

// Ego-centric, ego-heading-aligned raster. Forward is up (decreasing row),
// left is left (decreasing column). Class priority per cell:
// vehicle > ego > road > background.
BevGrid render_bev(const Scene& scene, int grid_size, double resolution);

// Next K route points at fixed arc-length spacing ahead of the ego's
// projection, in the ego frame, scaled by 1/radius and clamped to [-1,1].
// Slots past the goal are padded with the goal point.
std::vector<double> local_waypoints(const VehicleState& state, const Route& route, int k,
                                    double spacing, double radius);

// ---------------------------------------------------------------------------
// Episode environment
// ---------------------------------------------------------------------------

struct SimConfig {
    VehicleParams vehicle;
    TerminationRules rules;
    double dt = 0.1;
    int max_episode_steps = 3000;  // horizon cap; hitting it truncates, not terminates
    double l_max = 3000.0;
    int route_retry_budget = 1000;
    int traffic_count = 0;
    double traffic_speed_min = 2.0;  // m/s, constant per vehicle
    double traffic_speed_max = 8.0;
    int waypoint_count = 10;
    double waypoint_spacing = 5.0;
    double waypoint_radius = 50.0;
    int bev_size = 64;
    double bev_resolution = 0.5;
};

// Scripted constant-speed vehicle that follows its own route, looping.
struct TrafficVehicle {
    Route route;
    double speed = 0.0;
    double arc = 0.0;  // current arc-length position
    double length = 4.5;
    double width = 2.0;
    VehicleState state;
};

// Per-step quantities the reward and prompt layers consume.
struct SceneSummary {
    double speed_mps = 0.0;
    double lateral_deviation_m = 0.0;
    double heading_error_rad = 0.0;
    double lead_vehicle_gap_m = 0.0;  // +inf when no vehicle ahead in the lane band
    double progress_m = 0.0;
    double route_length_m = 0.0;
    bool collision = false;
};

struct StepResult {
    TerminationStatus status;
    bool truncated = false;       // horizon cap hit without a terminal cause
    double progress_delta_m = 0.0;
    bool collision = false;
};

class SimEnv {
public:
    SimEnv(WaypointGraph world, SimConfig config);

    // Samples a route and traffic, places the ego at the route start
    // (tangent heading, zero speed). Deterministic per seed.
    void reset(std::uint64_t seed);

    StepResult step(const ControlCommand& cmd);

    const VehicleState& ego() const { return ego_; }
    const Route& route() const { return route_; }
    const std::vector<TrafficVehicle>& traffic() const { return traffic_; }
    const WaypointGraph& world() const { return world_; }
    const SimConfig& config() const { return config_; }
    int episode_steps() const { return episode_steps_; }

    double progress_m() const { return snapshot_.progress_m; }
    double lateral_deviation_m() const { return snapshot_.lateral_deviation_m; }
    double heading_error_rad() const { return heading_error_; }

    Scene scene() const;
    BevGrid bev() const;
    std::vector<double> waypoints() const;
    // normalized (speed/v_max, steer/delta_max, clamped yaw_rate) triple
    std::vector<double> ego_state_vec() const;
    SceneSummary summary() const;

private:
    void refresh_tracking();

    WaypointGraph world_;
    SimConfig config_;
    Route route_;
    VehicleState ego_;
    std::vector<TrafficVehicle> traffic_;
    EpisodeSnapshot snapshot_;
    double heading_error_ = 0.0;
    int episode_steps_ = 0;
};

// ---------------------------------------------------------------------------
// World construction and JSON I/O
// ---------------------------------------------------------------------------

// Straight road along +x: n_nodes nodes spaced `spacing` meters apart.
WaypointGraph make_straight_world(int n_nodes, double spacing, double lane_halfwidth);

// Rectangular grid town: rows x cols intersections, spacing meters apart,
// with all axis-aligned block edges.
WaypointGraph make_grid_town(int rows, int cols, double spacing, double lane_halfwidth);

WaypointGraph load_world_json(const std::string& path);
void save_world_json(const WaypointGraph& graph, const std::string& path);

}  // namespace semdrive
