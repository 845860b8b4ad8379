#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "doctest.h"
#include "semdrive/rng.hpp"
#include "semdrive/sim_world.hpp"

using namespace semdrive;

namespace {

WaypointGraph line_graph(int n, double spacing) {
    WaypointGraph g;
    for (int i = 0; i < n; ++i) g.nodes.push_back({i * spacing, 0.0});
    g.adjacency.resize(n);
    for (int i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
    return g;
}

// independent O(V^2) Dijkstra over the same adjacency, node count + distance
std::pair<double, std::vector<int>> dijkstra_oracle(const WaypointGraph& g, int src, int dst) {
    const int n = static_cast<int>(g.nodes.size());
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<int> parent(n, -1);
    std::vector<bool> done(n, false);
    dist[src] = 0.0;
    for (int it = 0; it < n; ++it) {
        int u = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
            if (!done[i] && dist[i] < best) best = dist[u = i];
        if (u < 0) break;
        done[u] = true;
        for (const auto& [v, w] : g.adjacency[u])
            if (dist[u] + w < dist[v]) {
                dist[v] = dist[u] + w;
                parent[v] = u;
            }
    }
    std::vector<int> path;
    for (int v = dst; v != -1; v = parent[v]) path.push_back(v);
    std::reverse(path.begin(), path.end());
    return {dist[dst], path};
}

}  // namespace

TEST_CASE("shortest path on the 3-node unit line matches the breadth-first oracle") {
    WaypointGraph g = line_graph(3, 1.0);
    const auto r = shortest_path(g, 0, 2);
    REQUIRE(r.has_value());
    REQUIRE(r->points.size() == 3);
    CHECK(r->points[0].x == doctest::Approx(0.0));
    CHECK(r->points[1].x == doctest::Approx(1.0));
    CHECK(r->points[2].x == doctest::Approx(2.0));
    CHECK(r->length_m == doctest::Approx(2.0).epsilon(1e-12));

    // disconnected pair comes back empty instead of throwing
    WaypointGraph iso = line_graph(2, 1.0);
    iso.nodes.push_back({50.0, 50.0});
    iso.adjacency.resize(3);
    CHECK(!shortest_path(iso, 0, 2).has_value());
}

TEST_CASE("shortest path equals Dijkstra oracle on a grid town") {
    WaypointGraph g = make_grid_town(4, 5, 17.0, 3.5);
    Rng rng(21);
    for (int trial = 0; trial < 25; ++trial) {
        const int a = static_cast<int>(rng.uniform_index(g.nodes.size()));
        const int b = static_cast<int>(rng.uniform_index(g.nodes.size()));
        if (a == b) continue;
        const auto r = shortest_path(g, a, b);
        REQUIRE(r.has_value());
        const auto [d, path] = dijkstra_oracle(g, a, b);
        CHECK(r->length_m == doctest::Approx(d).epsilon(1e-9));
        REQUIRE(!r->points.empty());
        CHECK(r->points.front().x == doctest::Approx(g.nodes[a].x));
        CHECK(r->points.back().x == doctest::Approx(g.nodes[b].x));
    }
}

TEST_CASE("sample_route rejects long pairs, never repeats endpoints, reproducible") {
    WaypointGraph g = line_graph(3, 1.0);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Route r = sample_route(g, seed, 2.0, 1000);
        CHECK(r.length_m <= 2.0 + 1e-12);
        CHECK(r.points.size() >= 2);
        CHECK(distance(r.points.front(), r.points.back()) > 1e-9);
        const Route again = sample_route(g, seed, 2.0, 1000);
        REQUIRE(again.points.size() == r.points.size());
        for (std::size_t i = 0; i < r.points.size(); ++i)
            CHECK(distance(again.points[i], r.points[i]) == 0.0);
    }
    // L_max below the shortest available pair distance: nothing admissible
    CHECK_THROWS_AS(sample_route(g, 7, 0.5, 50), SamplingExhaustedError);
    // L_max = 1 only admits adjacent pairs on the unit line
    for (std::uint64_t seed = 0; seed < 40; ++seed)
        CHECK(sample_route(g, seed, 1.0, 1000).length_m <= 1.0 + 1e-12);
}

TEST_CASE("route_length examples and invariances") {
    CHECK(route_length(std::vector<Vec2>{{0, 0}, {1, 0}, {2, 0}}) ==
          doctest::Approx(2.0).epsilon(1e-12));
    CHECK(route_length(std::vector<Vec2>{{0, 0}}) == 0.0);
    CHECK(route_length(std::vector<Vec2>{{0, 0}, {3, 0}, {3, 4}}) ==
          doctest::Approx(7.0).epsilon(1e-12));
    CHECK_THROWS_AS(route_length(std::vector<Vec2>{}), std::invalid_argument);

    Rng rng(22);
    for (int i = 0; i < 50; ++i) {
        std::vector<Vec2> pts;
        for (int j = 0; j < 6; ++j) pts.push_back({rng.uniform(-9, 9), rng.uniform(-9, 9)});
        const double base = route_length(pts);
        const Vec2 shift{rng.uniform(-5, 5), rng.uniform(-5, 5)};
        const double ang = rng.uniform(-3, 3);
        std::vector<Vec2> moved, reversed(pts.rbegin(), pts.rend());
        for (const auto& p : pts) moved.push_back(rotate(p, ang) + shift);
        CHECK(route_length(moved) == doctest::Approx(base).epsilon(1e-9));
        CHECK(route_length(reversed) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("decode_action formulas, clamping, and the exclusive-pedal property") {
    auto c = decode_action(0.5, 0.7, 0.6);
    CHECK(c.steer == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(c.throttle == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(c.brake == 0.0);

    c = decode_action(-1.0, -0.3, 0.6);
    CHECK(c.steer == doctest::Approx(-0.6).epsilon(1e-9));
    CHECK(c.throttle == 0.0);
    CHECK(c.brake == doctest::Approx(0.3).epsilon(1e-9));

    c = decode_action(0.0, 0.0, 0.6);
    CHECK(c.steer == 0.0);
    CHECK(c.throttle == 0.0);
    CHECK(c.brake == 0.0);

    c = decode_action(1.5, 2.0, 0.6);  // out-of-range inputs clamp, never reject
    CHECK(c.steer == doctest::Approx(0.6));
    CHECK(c.throttle == doctest::Approx(1.0));

    Rng rng(23);
    for (int i = 0; i < 500; ++i) {
        c = decode_action(rng.uniform(-2, 2), rng.uniform(-2, 2), 0.6);
        CHECK(c.throttle * c.brake == 0.0);
        CHECK(c.throttle >= 0.0);
        CHECK(c.brake >= 0.0);
    }
}

TEST_CASE("step_dynamics closed-form checks") {
    VehicleParams p;  // wheelbase 2.5, k_drag 0.05

    SUBCASE("rest stays at rest") {
        VehicleState s;
        const VehicleState n = step_dynamics(s, {0, 0, 0}, 0.1, p);
        CHECK(n.speed == 0.0);
        CHECK(n.position.x == 0.0);
        CHECK(n.position.y == 0.0);
    }

    SUBCASE("straight-line integration without drag") {
        VehicleParams nodrag = p;
        nodrag.k_drag = 0.0;
        VehicleState s;
        s.speed = 10.0;
        s.heading = 0.7;
        const VehicleState n = step_dynamics(s, {0, 0, 0}, 0.1, nodrag);
        CHECK(n.speed == doctest::Approx(10.0).epsilon(1e-12));
        const double moved = std::hypot(n.position.x, n.position.y);
        CHECK(moved == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::atan2(n.position.y, n.position.x) == doctest::Approx(0.7).epsilon(1e-12));
    }

    SUBCASE("bicycle heading update uses the pre-update speed") {
        VehicleState s;
        s.speed = 5.0;
        const VehicleState n = step_dynamics(s, {0.1, 0, 0}, 0.1, p);
        CHECK(n.heading ==
              doctest::Approx(5.0 / 2.5 * std::tan(0.1) * 0.1).epsilon(1e-12));
        CHECK(n.yaw_rate == doctest::Approx(n.heading / 0.1).epsilon(1e-12));
    }

    SUBCASE("speed stays non-negative and v_max-capped") {
        Rng rng(24);
        for (int i = 0; i < 300; ++i) {
            VehicleState s;
            s.speed = rng.uniform(0, 20);
            s.heading = rng.uniform(-3, 3);
            const auto cmd = decode_action(rng.uniform(-1, 1), rng.uniform(-1, 1), p.delta_max);
            const VehicleState n = step_dynamics(s, cmd, 0.1, p);
            CHECK(n.speed >= 0.0);
            CHECK(n.speed <= p.v_max + 1e-12);
        }
    }

    SUBCASE("continuity under small input perturbations") {
        VehicleState s;
        s.speed = 7.0;
        s.heading = 0.3;
        const VehicleState base = step_dynamics(s, {0.2, 0.5, 0}, 0.1, p);
        VehicleState s2 = s;
        s2.speed += 1e-6;
        s2.heading += 1e-6;
        const VehicleState n = step_dynamics(s2, {0.2 + 1e-6, 0.5, 0}, 0.1, p);
        CHECK(std::abs(n.speed - base.speed) < 1e-3);
        CHECK(std::abs(n.heading - base.heading) < 1e-3);
        CHECK(std::abs(n.position.x - base.position.x) < 1e-3);
    }
}

TEST_CASE("check_termination priority chain") {
    TerminationRules rules;  // d_max 3, t_stuck 90
    EpisodeSnapshot ep;
    ep.route_length_m = 100.0;

    SUBCASE("collision wins") {
        ep.collision = true;
        ep.lateral_deviation_m = 5.0;
        ep.low_speed_time_s = 1000.0;
        ep.progress_m = 100.0;
        const auto st = check_termination(ep, rules);
        CHECK(st.terminated);
        CHECK(st.cause == TerminationCause::collision);
    }
    SUBCASE("lane departure beyond d_max") {
        ep.lateral_deviation_m = 3.1;
        const auto st = check_termination(ep, rules);
        CHECK(st.terminated);
        CHECK(st.cause == TerminationCause::lane_departure);
    }
    SUBCASE("stuck after more than t_stuck below v_min") {
        ep.low_speed_time_s = 91.0;
        const auto st = check_termination(ep, rules);
        CHECK(st.terminated);
        CHECK(st.cause == TerminationCause::stuck);
    }
    SUBCASE("route complete within goal tolerance") {
        ep.progress_m = 98.5;
        const auto st = check_termination(ep, rules);
        CHECK(st.terminated);
        CHECK(st.cause == TerminationCause::route_complete);
    }
    SUBCASE("nothing fires") {
        const auto st = check_termination(ep, rules);
        CHECK(!st.terminated);
        CHECK(st.cause == TerminationCause::none);
    }
    SUBCASE("priority is total when several conditions hold") {
        ep.lateral_deviation_m = 4.0;
        ep.low_speed_time_s = 500.0;
        ep.progress_m = 100.0;
        const auto st = check_termination(ep, rules);
        CHECK(st.cause == TerminationCause::lane_departure);
    }
}

namespace {

// reimplementation of the documented cell-center transform, used as the
// rasterization oracle
Vec2 cell_center_world(const Scene& scene, int grid, double res, int r, int c) {
    const double forward = (grid / 2.0 - r - 0.5) * res;
    const double left = (grid / 2.0 - c - 0.5) * res;
    return scene.ego.position + rotate({forward, left}, scene.ego.heading);
}

}  // namespace

TEST_CASE("render_bev: empty scene is all background") {
    Scene scene;
    scene.ego_length = 0.0;
    scene.ego_width = 0.0;
    const BevGrid g = render_bev(scene, 16, 0.5);
    for (int i = 0; i < 16 * 16; ++i)
        CHECK(g.cells[i] == static_cast<std::uint8_t>(BevClass::background));
}

TEST_CASE("render_bev: per-cell classes match the point-in-rect oracle") {
    Scene scene;
    scene.ego.position = {3.0, -2.0};
    scene.ego.heading = 0.6;
    scene.ego_length = 4.5;
    scene.ego_width = 2.0;
    scene.lane_halfwidth = 3.5;
    scene.route_points = {{-20, -2}, {40, -2}};
    ScheduledVehicle other;
    other.state.position = scene.ego.position + rotate({10.0, 0.0}, scene.ego.heading);
    other.state.heading = 0.6;
    other.length = 4.5;
    other.width = 2.0;
    scene.vehicles.push_back(other);

    const int grid = 32;
    const double res = 0.5;
    const BevGrid g = render_bev(scene, grid, res);
    const OrientedRect ego_rect{scene.ego.position, scene.ego.heading, 4.5, 2.0};
    const OrientedRect veh_rect{other.state.position, other.state.heading, 4.5, 2.0};

    int vehicle_cells = 0;
    for (int r = 0; r < grid; ++r)
        for (int c = 0; c < grid; ++c) {
            const Vec2 w = cell_center_world(scene, grid, res, r, c);
            BevClass expect = BevClass::background;
            if (point_segment_distance(w, scene.route_points[0], scene.route_points[1]) <=
                scene.lane_halfwidth)
                expect = BevClass::road;
            if (point_in_rect(w, ego_rect)) expect = BevClass::ego;
            if (point_in_rect(w, veh_rect)) expect = BevClass::vehicle;
            CHECK(g.cells[r * grid + c] == static_cast<std::uint8_t>(expect));
            if (g.cells[r * grid + c] == static_cast<std::uint8_t>(BevClass::vehicle))
                ++vehicle_cells;
        }
    CHECK(vehicle_cells > 0);
}

TEST_CASE("render_bev: vehicle 10 m ahead lands in the forward band at the right rows") {
    Scene scene;
    scene.ego_length = 4.5;
    scene.ego_width = 2.0;
    ScheduledVehicle other;
    other.state.position = {10.0, 0.0};  // ego at origin heading +x
    other.length = 4.5;
    other.width = 2.0;
    scene.vehicles.push_back(other);

    const int grid = 64;
    const double res = 0.5;
    const BevGrid g = render_bev(scene, grid, res);
    bool any_vehicle = false;
    for (int r = 0; r < grid; ++r)
        for (int c = 0; c < grid; ++c)
            if (g.cells[r * grid + c] == static_cast<std::uint8_t>(BevClass::vehicle)) {
                any_vehicle = true;
                const double forward = (grid / 2.0 - r - 0.5) * res;
                CHECK(forward >= 10.0 - 4.5 / 2 - res);
                CHECK(forward <= 10.0 + 4.5 / 2 + res);
            }
    CHECK(any_vehicle);
}

TEST_CASE("render_bev commutes with rigid translation of the whole scene") {
    // all absolute coordinates and the shift are dyadic rationals, so the
    // shift cancels exactly in every relative-position computation and the
    // grids must agree bitwise
    Scene scene;
    scene.ego.position = {1.0, 2.5};
    scene.ego_length = 4.5;
    scene.ego_width = 2.0;
    scene.lane_halfwidth = 3.5;
    scene.route_points = {{-5, 0}, {20, 7.5}, {35, -3}};
    ScheduledVehicle other;
    other.state.position = {12.0, 4.0};
    other.state.heading = -0.4;
    scene.vehicles.push_back(other);

    const BevGrid a = render_bev(scene, 48, 0.5);
    for (const Vec2 shift : {Vec2{128.0, -64.5}, Vec2{-1000.25, 512.0}}) {
        Scene moved = scene;
        moved.ego.position = moved.ego.position + shift;
        moved.vehicles[0].state.position = moved.vehicles[0].state.position + shift;
        for (auto& p : moved.route_points) p = p + shift;
        const BevGrid b = render_bev(moved, 48, 0.5);
        CHECK(a.cells == b.cells);
    }
}

TEST_CASE("local_waypoints examples") {
    Route route;
    route.points = {{0, 0}, {100, 0}};
    route.length_m = 100.0;

    SUBCASE("identity frame, linear scaling") {
        VehicleState s;  // origin, heading +x
        const auto w = local_waypoints(s, route, 3, 5.0, 50.0);
        REQUIRE(w.size() == 6);
        const double expect[] = {0.1, 0.0, 0.2, 0.0, 0.3, 0.0};
        for (int i = 0; i < 6; ++i) CHECK(w[i] == doctest::Approx(expect[i]).epsilon(1e-9));
    }
    SUBCASE("rotated frame matches the rotation-matrix oracle") {
        VehicleState s;
        s.heading = M_PI / 2;  // facing +y while the route runs +x
        const auto w = local_waypoints(s, route, 3, 5.0, 50.0);
        REQUIRE(w.size() == 6);
        const double expect[] = {0.0, -0.1, 0.0, -0.2, 0.0, -0.3};
        for (int i = 0; i < 6; ++i) CHECK(w[i] == doctest::Approx(expect[i]).epsilon(1e-9));
    }
    SUBCASE("waypoints clamp to the goal once the route is exhausted") {
        VehicleState s;
        s.position = {100, 0};
        const auto w = local_waypoints(s, route, 4, 5.0, 50.0);
        for (double x : w) CHECK(x == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("outputs always lie in the unit box") {
        Rng rng(25);
        for (int i = 0; i < 100; ++i) {
            VehicleState s;
            s.position = {rng.uniform(-200, 200), rng.uniform(-200, 200)};
            s.heading = rng.uniform(-3, 3);
            for (double x : local_waypoints(s, route, 10, 5.0, 50.0)) {
                CHECK(x <= 1.0);
                CHECK(x >= -1.0);
            }
        }
    }
}

TEST_CASE("SimEnv: reset is reproducible and stepping reaches the goal") {
    WaypointGraph g = make_straight_world(21, 5.0, 3.5);
    SimConfig cfg;
    cfg.max_episode_steps = 600;
    SimEnv env(g, cfg);

    env.reset(99);
    const Vec2 p0 = env.ego().position;
    const double h0 = env.ego().heading;
    const double len0 = env.route().length_m;
    env.reset(99);
    CHECK(env.ego().position.x == p0.x);
    CHECK(env.ego().position.y == p0.y);
    CHECK(env.ego().heading == h0);
    CHECK(env.route().length_m == len0);

    // full throttle straight ahead completes the route without incident
    StepResult sr;
    int steps = 0;
    do {
        sr = env.step(decode_action(0.0, 1.0, cfg.vehicle.delta_max));
        ++steps;
    } while (!sr.status.terminated && !sr.truncated && steps < 600);
    CHECK(sr.status.terminated);
    CHECK(sr.status.cause == TerminationCause::route_complete);
    CHECK(env.progress_m() > 0.0);
}

TEST_CASE("SimEnv: horizon cap truncates without a terminal cause") {
    WaypointGraph g = make_straight_world(21, 5.0, 3.5);
    SimConfig cfg;
    cfg.max_episode_steps = 25;
    SimEnv env(g, cfg);
    env.reset(3);
    StepResult sr;
    for (int i = 0; i < 25; ++i) sr = env.step({0, 0, 0});
    CHECK(sr.truncated);
    CHECK(!sr.status.terminated);
    CHECK(sr.status.cause == TerminationCause::none);
}

TEST_CASE("SimEnv: lead-vehicle gap measured along the ego axis") {
    WaypointGraph g = make_straight_world(21, 5.0, 3.5);
    SimConfig cfg;
    cfg.traffic_count = 3;
    SimEnv env(g, cfg);
    env.reset(42);
    const SceneSummary s = env.summary();
    if (std::isfinite(s.lead_vehicle_gap_m)) CHECK(s.lead_vehicle_gap_m > 0.0);
    CHECK(s.route_length_m == doctest::Approx(env.route().length_m));
}

TEST_CASE("world JSON round trip preserves structure") {
    WaypointGraph g = make_grid_town(3, 3, 20.0, 3.5);
    const std::string path = "/tmp/semdrive_world_roundtrip.json";
    save_world_json(g, path);
    const WaypointGraph h = load_world_json(path);
    REQUIRE(h.nodes.size() == g.nodes.size());
    CHECK(h.lane_halfwidth == doctest::Approx(g.lane_halfwidth));
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        CHECK(h.nodes[i].x == doctest::Approx(g.nodes[i].x));
        CHECK(h.nodes[i].y == doctest::Approx(g.nodes[i].y));
    }
    REQUIRE(h.adjacency.size() == g.adjacency.size());
    for (std::size_t i = 0; i < g.adjacency.size(); ++i)
        CHECK(h.adjacency[i].size() == g.adjacency[i].size());
}
