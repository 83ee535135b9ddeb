#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "facing/aoa.hpp"
#include "facing/geometry.hpp"

namespace facing::locate {

/// entries[{i, j}] = AoA at device i of device j's chirp, device-i frame, [0, 2pi).
struct PairwiseAoas {
    std::size_t device_count = 0;
    std::map<std::pair<std::size_t, std::size_t>, double> entries;

    void set(std::size_t i, std::size_t j, double angle);
    [[nodiscard]] std::optional<double> get(std::size_t i, std::size_t j) const;
};

/// Known pose components of one device.
struct Anchor {
    std::size_t device = 0;
    std::optional<Vec2> position;
    std::optional<double> orientation;
};

struct DistanceConstraint {
    std::size_t a = 0;
    std::size_t b = 0;
    double meters = 1.0;
};

/// Gauge-fixing information. Bearings alone leave translation, rotation and scale free.
struct Anchors {
    std::vector<Anchor> poses;
    std::vector<DistanceConstraint> distances;
};

struct DeviceLayout {
    std::vector<Vec2> positions;
    std::vector<double> orientations;  // rad, global heading of each device frame
    std::string gauge;
    double residual_rms = 0.0;  // rad, over the bearing constraints used
};

/// Keeps (i, j) only when (j, i) is present and the two bearings, mapped to the global frame with
/// `orientations` (zeros when empty), are within `tol` of being opposite. Always symmetric.
[[nodiscard]] PairwiseAoas filter_reliable(const PairwiseAoas& p, double tol, std::span<const double> orientations = {});

/// Device orientations implied by reciprocal bearing pairs, rooted at an anchor orientation
/// (or device 0 at zero). Uses circular medians so a single bad pair does not propagate.
[[nodiscard]] std::vector<double> estimate_orientations(const PairwiseAoas& p, const Anchors& anchors);

enum class ResidualMode { squared, absolute };

struct P2POptions {
    int restarts = 10;
    std::uint64_t seed = 0x5eed;
    ResidualMode mode = ResidualMode::squared;
    /// Seeds one start from a linear least-squares solve on estimated orientations.
    bool linear_init = true;
    int max_iterations = 200;
    double reliability_tol = deg2rad(10.0);
    bool filter = true;
};

/// Jointly solves device positions and unknown orientations from pairwise bearings.
/// Throws Underdetermined for fewer than 3 devices, a disconnected constraint graph, or
/// anchors that do not pin translation, rotation and scale.
[[nodiscard]] DeviceLayout p2p_localize(const PairwiseAoas& p, const Anchors& anchors, const P2POptions& options = {});

struct UserLocation {
    Vec2 position;
    std::size_t cluster_size = 0;  // points in the winning cluster; 0 when no cluster formed
    std::vector<Vec2> intersection_points;
};

struct TriangulateOptions {
    double eps = 0.5;  // m, DBSCAN neighbourhood radius
    std::size_t min_points = 2;
};

/// DBSCAN labels: -1 for noise, otherwise cluster ids 0..k-1.
[[nodiscard]] std::vector<int> dbscan(std::span<const Vec2> points, double eps, std::size_t min_points);

/// Casts a global ray per device (orientation + AoA), intersects all pairs ahead of both devices,
/// clusters the intersections and returns the centroid of the largest cluster.
[[nodiscard]] UserLocation triangulate(const DeviceLayout& layout, std::span<const double> aoas,
                                       const TriangulateOptions& options = {});
[[nodiscard]] UserLocation triangulate(const DeviceLayout& layout, std::span<const aoa::AoAEstimate> aoas,
                                       const TriangulateOptions& options = {});

/// Least-squares similarity (scale, rotation, translation) mapping `estimate` onto `truth`.
/// Returns the transformed estimate.
[[nodiscard]] std::vector<Vec2> align_similarity(std::span<const Vec2> estimate, std::span<const Vec2> truth);

}  // namespace facing::locate
