#include "facing/locate.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>

#include "facing/error.hpp"

namespace facing::locate {
namespace {

double circular_median(const std::vector<double>& angles) {
    // Candidate minimising the summed absolute wrapped deviation.
    double best = angles.front();
    double best_cost = std::numeric_limits<double>::infinity();
    for (double c : angles) {
        double cost = 0.0;
        for (double a : angles) cost += std::abs(wrap_pi(a - c));
        if (cost < best_cost) {
            best_cost = cost;
            best = c;
        }
    }
    return wrap_2pi(best);
}

bool connected(const PairwiseAoas& p) {
    const std::size_t n = p.device_count;
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [key, angle] : p.entries) parent[find(key.first)] = find(key.second);
    for (std::size_t i = 1; i < n; ++i)
        if (find(i) != find(0)) return false;
    return true;
}

// Free-variable bookkeeping for the joint position/orientation solve.
struct Parameterization {
    std::vector<int> pos;  // index of x (y follows) or -1 when fixed
    std::vector<int> ori;  // index or -1 when fixed
    std::vector<Vec2> fixed_pos;
    std::vector<double> fixed_ori;
    int size = 0;

    Vec2 position(const Eigen::VectorXd& x, std::size_t i) const {
        return pos[i] < 0 ? fixed_pos[i] : Vec2{x[pos[i]], x[pos[i] + 1]};
    }
    double orientation(const Eigen::VectorXd& x, std::size_t i) const { return ori[i] < 0 ? fixed_ori[i] : x[ori[i]]; }
};

struct Problem {
    const PairwiseAoas* aoas;
    const Anchors* anchors;
    Parameterization param;
    double distance_weight = 100.0;

    std::size_t residual_count() const { return aoas->entries.size() + anchors->distances.size(); }

    void evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& weights, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
        const std::size_t m = residual_count();
        r.resize(static_cast<Eigen::Index>(m));
        if (jac) jac->setZero(static_cast<Eigen::Index>(m), param.size);
        Eigen::Index row = 0;
        for (const auto& [key, theta] : aoas->entries) {
            const auto [i, j] = key;
            const Vec2 d = param.position(x, j) - param.position(x, i);
            const double d2 = std::max(dot(d, d), 1e-18);
            const double w = std::sqrt(weights[row]);
            r[row] = w * wrap_pi(std::atan2(d.y, d.x) - param.orientation(x, i) - theta);
            if (jac) {
                // d atan2 / d(Lj) = (-dy, dx) / |d|^2
                const double gx = -d.y / d2, gy = d.x / d2;
                if (param.pos[j] >= 0) {
                    (*jac)(row, param.pos[j]) += w * gx;
                    (*jac)(row, param.pos[j] + 1) += w * gy;
                }
                if (param.pos[i] >= 0) {
                    (*jac)(row, param.pos[i]) -= w * gx;
                    (*jac)(row, param.pos[i] + 1) -= w * gy;
                }
                if (param.ori[i] >= 0) (*jac)(row, param.ori[i]) -= w;
            }
            ++row;
        }
        for (const auto& c : anchors->distances) {
            const Vec2 d = param.position(x, c.b) - param.position(x, c.a);
            const double len = std::max(norm(d), 1e-12);
            const double w = distance_weight / c.meters;
            r[row] = w * (len - c.meters);
            if (jac) {
                if (param.pos[c.b] >= 0) {
                    (*jac)(row, param.pos[c.b]) += w * d.x / len;
                    (*jac)(row, param.pos[c.b] + 1) += w * d.y / len;
                }
                if (param.pos[c.a] >= 0) {
                    (*jac)(row, param.pos[c.a]) -= w * d.x / len;
                    (*jac)(row, param.pos[c.a] + 1) -= w * d.y / len;
                }
            }
            ++row;
        }
    }

    // Damped Gauss-Newton (Levenberg-Marquardt). Returns the final cost.
    double solve(Eigen::VectorXd& x, const Eigen::VectorXd& weights, int max_iterations) const {
        Eigen::VectorXd r, r_new;
        Eigen::MatrixXd jac;
        evaluate(x, weights, r, &jac);
        double cost = r.squaredNorm();
        double lambda = 1e-3;
        for (int it = 0; it < max_iterations && cost > 1e-30; ++it) {
            const Eigen::MatrixXd a = jac.transpose() * jac;
            const Eigen::VectorXd g = jac.transpose() * r;
            Eigen::MatrixXd damped = a;
            for (Eigen::Index k = 0; k < a.rows(); ++k) damped(k, k) += lambda * a(k, k) + 1e-12;
            const Eigen::VectorXd step = damped.ldlt().solve(-g);
            if (!step.allFinite()) break;
            Eigen::VectorXd candidate = x + step;
            evaluate(candidate, weights, r_new, nullptr);
            const double cost_new = r_new.squaredNorm();
            if (cost_new < cost) {
                const double gain = cost - cost_new;
                x = std::move(candidate);
                evaluate(x, weights, r, &jac);
                cost = cost_new;
                lambda = std::max(lambda / 3.0, 1e-12);
                if (gain < 1e-16 * (1.0 + cost) && step.norm() < 1e-12 * (1.0 + x.norm())) break;
            } else {
                lambda *= 4.0;
                if (lambda > 1e12) break;
            }
        }
        return cost;
    }
};

std::optional<Eigen::VectorXd> linear_positions(const PairwiseAoas& p, const Anchors& anchors,
                                                const Parameterization& param, const std::vector<double>& orientation) {
    const std::size_t rows = p.entries.size() + anchors.distances.size();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), param.size);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows));
    Eigen::Index row = 0;
    // cross(u_ij, Lj - Li) = 0 and dot(u_ab, Lb - La) = d, with fixed positions moved to the right side.
    auto add = [&](std::size_t dev, double cx, double cy, double sign) {
        if (param.pos[dev] >= 0) {
            a(row, param.pos[dev]) += sign * cx;
            a(row, param.pos[dev] + 1) += sign * cy;
        } else {
            b[row] -= sign * (cx * param.fixed_pos[dev].x + cy * param.fixed_pos[dev].y);
        }
    };
    for (const auto& [key, theta] : p.entries) {
        const Vec2 u = unit(orientation[key.first] + theta);
        add(key.second, -u.y, u.x, 1.0);
        add(key.first, -u.y, u.x, -1.0);
        ++row;
    }
    for (const auto& c : anchors.distances) {
        const auto fwd = p.get(c.a, c.b);
        const auto back = p.get(c.b, c.a);
        double beta = 0.0;
        if (fwd) beta = orientation[c.a] + *fwd;
        else if (back) beta = orientation[c.b] + *back + std::numbers::pi;
        else { ++row; continue; }
        const Vec2 u = unit(beta);
        const double w = 10.0;
        add(c.b, w * u.x, w * u.y, 1.0);
        add(c.a, w * u.x, w * u.y, -1.0);
        b[row] += w * c.meters;
        ++row;
    }
    Eigen::VectorXd sol = a.colPivHouseholderQr().solve(b);
    if (!sol.allFinite()) return std::nullopt;
    return sol;
}

}  // namespace

void PairwiseAoas::set(std::size_t i, std::size_t j, double angle) {
    if (i == j) throw InvalidInput("PairwiseAoas: a device cannot observe itself");
    device_count = std::max({device_count, i + 1, j + 1});
    entries[{i, j}] = wrap_2pi(angle);
}

std::optional<double> PairwiseAoas::get(std::size_t i, std::size_t j) const {
    if (auto it = entries.find({i, j}); it != entries.end()) return it->second;
    return std::nullopt;
}

PairwiseAoas filter_reliable(const PairwiseAoas& p, double tol, std::span<const double> orientations) {
    if (!(tol > 0.0)) throw InvalidInput("filter_reliable: tolerance must be positive");
    auto psi = [&](std::size_t i) { return i < orientations.size() ? orientations[i] : 0.0; };
    PairwiseAoas out;
    out.device_count = p.device_count;
    for (const auto& [key, theta] : p.entries) {
        const auto [i, j] = key;
        const auto back = p.get(j, i);
        if (!back) continue;
        const double residual = wrap_pi((psi(i) + theta) - (psi(j) + *back) - std::numbers::pi);
        if (std::abs(residual) < tol) out.entries[key] = theta;
    }
    return out;
}

std::vector<double> estimate_orientations(const PairwiseAoas& p, const Anchors& anchors) {
    const std::size_t n = p.device_count;
    std::vector<double> psi(n, 0.0);
    std::vector<bool> known(n, false), fixed(n, false);
    for (const auto& a : anchors.poses)
        if (a.orientation && a.device < n) {
            psi[a.device] = wrap_2pi(*a.orientation);
            known[a.device] = fixed[a.device] = true;
        }
    if (std::none_of(known.begin(), known.end(), [](bool k) { return k; }) && n > 0) known[0] = fixed[0] = true;

    // Candidate for psi_j from neighbour i: psi_i + theta_i^j - theta_j^i + pi.
    auto candidates = [&](std::size_t j) {
        std::vector<double> c;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j || !known[i]) continue;
            const auto fwd = p.get(i, j);
            const auto back = p.get(j, i);
            if (fwd && back) c.push_back(psi[i] + *fwd - *back + std::numbers::pi);
        }
        return c;
    };
    for (bool progress = true; progress;) {
        progress = false;
        for (std::size_t j = 0; j < n; ++j) {
            if (known[j]) continue;
            const auto c = candidates(j);
            if (c.empty()) continue;
            psi[j] = circular_median(c);
            known[j] = progress = true;
        }
    }
    for (int sweep = 0; sweep < 5; ++sweep)
        for (std::size_t j = 0; j < n; ++j) {
            if (fixed[j]) continue;
            const auto c = candidates(j);
            if (!c.empty()) psi[j] = circular_median(c);
        }
    return psi;
}

DeviceLayout p2p_localize(const PairwiseAoas& input, const Anchors& anchors, const P2POptions& options) {
    const std::size_t n = input.device_count;
    if (n < 3)
        throw Underdetermined("p2p_localize: " + std::to_string(n) +
                              " devices only fix the direction between them; at least 3 are required");

    std::vector<Vec2> anchor_pos(n);
    std::vector<bool> has_pos(n, false), has_ori(n, false);
    std::vector<double> anchor_ori(n, 0.0);
    for (const auto& a : anchors.poses) {
        if (a.device >= n) throw InvalidInput("p2p_localize: anchor device out of range");
        if (a.position) { anchor_pos[a.device] = *a.position; has_pos[a.device] = true; }
        if (a.orientation) { anchor_ori[a.device] = wrap_2pi(*a.orientation); has_ori[a.device] = true; }
    }
    for (const auto& c : anchors.distances)
        if (c.a >= n || c.b >= n || c.a == c.b || !(c.meters > 0.0))
            throw InvalidInput("p2p_localize: invalid distance constraint");
    const auto n_pos = std::count(has_pos.begin(), has_pos.end(), true);
    const bool any_ori = std::count(has_ori.begin(), has_ori.end(), true) > 0;
    if (n_pos == 0) throw Underdetermined("p2p_localize: no anchor position fixes translation");
    if (!any_ori && n_pos < 2) throw Underdetermined("p2p_localize: rotation is free; add an anchor orientation or a second anchor position");
    if (n_pos < 2 && anchors.distances.empty()) throw Underdetermined("p2p_localize: scale is free; add a known distance or a second anchor position");

    const auto seed_orientations = estimate_orientations(input, anchors);
    const PairwiseAoas p = options.filter ? filter_reliable(input, options.reliability_tol, seed_orientations) : input;
    if (p.entries.empty() || !connected(PairwiseAoas{n, p.entries}))
        throw Underdetermined("p2p_localize: bearing graph is disconnected after reliability filtering (" +
                              std::to_string(p.entries.size()) + " of " + std::to_string(input.entries.size()) +
                              " bearings kept)");

    Problem problem{&p, &anchors, {}, 100.0};
    auto& param = problem.param;
    param.pos.assign(n, -1);
    param.ori.assign(n, -1);
    param.fixed_pos = anchor_pos;
    param.fixed_ori = anchor_ori;
    for (std::size_t i = 0; i < n; ++i)
        if (!has_pos[i]) { param.pos[i] = param.size; param.size += 2; }
    for (std::size_t i = 0; i < n; ++i)
        if (!has_ori[i]) param.ori[i] = param.size++;

    double scale = 0.0;
    for (const auto& c : anchors.distances) scale = std::max(scale, c.meters);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (has_pos[i] && has_pos[j]) scale = std::max(scale, distance(anchor_pos[i], anchor_pos[j]));
    Vec2 centre{};
    for (std::size_t i = 0; i < n; ++i)
        if (has_pos[i]) centre = centre + (1.0 / static_cast<double>(n_pos)) * anchor_pos[i];

    Eigen::VectorXd weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(problem.residual_count()));
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    Eigen::VectorXd best;
    double best_cost = std::numeric_limits<double>::infinity();
    const int starts = std::max(1, options.restarts);
    for (int s = 0; s < starts; ++s) {
        Eigen::VectorXd x(param.size);
        for (std::size_t i = 0; i < n; ++i) {
            if (param.pos[i] >= 0) {
                x[param.pos[i]] = centre.x + 2.0 * scale * uni(rng);
                x[param.pos[i] + 1] = centre.y + 2.0 * scale * uni(rng);
            }
            if (param.ori[i] >= 0) x[param.ori[i]] = seed_orientations[i];
        }
        if (s == 0 && options.linear_init) {
            if (auto lin = linear_positions(p, anchors, param, seed_orientations))
                for (std::size_t i = 0; i < n; ++i)
                    if (param.pos[i] >= 0) x.segment(param.pos[i], 2) = lin->segment(param.pos[i], 2);
        }

        weights.setOnes();
        double cost = problem.solve(x, weights, options.max_iterations);
        if (options.mode == ResidualMode::absolute) {
            // Iteratively reweighted least squares towards the sum of absolute bearing errors.
            Eigen::VectorXd r;
            for (int outer = 0; outer < 20; ++outer) {
                weights.setOnes();
                problem.evaluate(x, weights, r, nullptr);
                for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(p.entries.size()); ++k)
                    weights[k] = 1.0 / std::max(std::abs(r[k]), 1e-6);
                problem.solve(x, weights, options.max_iterations);
            }
            weights.setOnes();
            problem.evaluate(x, weights, r, nullptr);
            cost = r.head(static_cast<Eigen::Index>(p.entries.size())).cwiseAbs().sum();
        }
        if (cost < best_cost) {
            best_cost = cost;
            best = x;
        }
    }

    DeviceLayout layout;
    for (std::size_t i = 0; i < n; ++i) {
        layout.positions.push_back(param.position(best, i));
        layout.orientations.push_back(wrap_2pi(param.orientation(best, i)));
    }
    double sq = 0.0;
    for (const auto& [key, theta] : p.entries) {
        const double r = wrap_pi(bearing(layout.positions[key.first], layout.positions[key.second]) -
                                 layout.orientations[key.first] - theta);
        sq += r * r;
    }
    layout.residual_rms = std::sqrt(sq / static_cast<double>(p.entries.size()));

    std::vector<std::string> parts;
    for (const auto& a : anchors.poses) {
        std::string part = "device " + std::to_string(a.device);
        if (a.position) part += " position";
        if (a.orientation) part += a.position ? " and orientation" : " orientation";
        parts.push_back(part);
    }
    for (const auto& c : anchors.distances) parts.push_back("distance " + std::to_string(c.a) + "-" + std::to_string(c.b));
    std::ostringstream gauge;
    gauge << "anchored on ";
    for (std::size_t i = 0; i < parts.size(); ++i) gauge << (i ? ", " : "") << parts[i];
    layout.gauge = gauge.str();
    return layout;
}

std::vector<int> dbscan(std::span<const Vec2> points, double eps, std::size_t min_points) {
    const std::size_t n = points.size();
    std::vector<int> label(n, -2);  // -2 unvisited, -1 noise
    auto neighbours = [&](std::size_t i) {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < n; ++j)
            if (distance(points[i], points[j]) <= eps) out.push_back(j);
        return out;
    };
    int cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != -2) continue;
        auto seeds = neighbours(i);
        if (seeds.size() < min_points) {
            label[i] = -1;
            continue;
        }
        label[i] = cluster;
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            const auto q = seeds[k];
            if (label[q] == -1) label[q] = cluster;
            if (label[q] != -2) continue;
            label[q] = cluster;
            auto more = neighbours(q);
            if (more.size() >= min_points) seeds.insert(seeds.end(), more.begin(), more.end());
        }
        ++cluster;
    }
    return label;
}

UserLocation triangulate(const DeviceLayout& layout, std::span<const double> aoas, const TriangulateOptions& options) {
    const std::size_t n = aoas.size();
    if (n < 2) throw InvalidInput("triangulate: needs AoAs from at least two devices");
    if (layout.positions.size() != n || layout.orientations.size() != n)
        throw InvalidInput("triangulate: layout and AoA counts differ");

    std::vector<Vec2> dirs;
    for (std::size_t i = 0; i < n; ++i) dirs.push_back(unit(layout.orientations[i] + aoas[i]));

    UserLocation out;
    std::vector<Vec2> behind;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double denom = cross(dirs[i], dirs[j]);
            if (std::abs(denom) < 1e-12) continue;
            const Vec2 d = layout.positions[j] - layout.positions[i];
            const double t = cross(d, dirs[j]) / denom;
            const double s = cross(d, dirs[i]) / denom;
            const Vec2 point = layout.positions[i] + t * dirs[i];
            (t > 0.0 && s > 0.0 ? out.intersection_points : behind).push_back(point);
        }

    auto centroid = [](std::span<const Vec2> pts) {
        Vec2 c{};
        for (const auto& q : pts) c = c + (1.0 / static_cast<double>(pts.size())) * q;
        return c;
    };

    if (out.intersection_points.empty()) {
        if (behind.empty()) throw NoIntersection("triangulate: all bearing rays are parallel");
        // Rays diverge; fall back to the line intersections and flag with cluster_size 0.
        out.position = centroid(behind);
        out.cluster_size = 0;
        return out;
    }

    const auto labels = dbscan(out.intersection_points, options.eps, options.min_points);
    const int clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    if (clusters <= 0) {
        out.position = centroid(out.intersection_points);
        out.cluster_size = 0;
        return out;
    }

    struct Candidate {
        std::size_t size;
        double spread;
        Vec2 centre;
    };
    std::optional<Candidate> best;
    for (int c = 0; c < clusters; ++c) {
        std::vector<Vec2> members;
        for (std::size_t k = 0; k < labels.size(); ++k)
            if (labels[k] == c) members.push_back(out.intersection_points[k]);
        const Vec2 centre = centroid(members);
        double spread = 0.0;
        for (const auto& q : members) spread += dot(q - centre, q - centre) / static_cast<double>(members.size());
        const Candidate cand{members.size(), spread, centre};
        const bool better = !best || cand.size > best->size ||
                            (cand.size == best->size &&
                             (cand.spread < best->spread ||
                              (cand.spread == best->spread &&
                               std::tie(cand.centre.x, cand.centre.y) < std::tie(best->centre.x, best->centre.y))));
        if (better) best = cand;
    }
    out.position = best->centre;
    out.cluster_size = best->size;
    return out;
}

UserLocation triangulate(const DeviceLayout& layout, std::span<const aoa::AoAEstimate> aoas,
                         const TriangulateOptions& options) {
    std::vector<double> angles;
    for (const auto& a : aoas) angles.push_back(a.angle);
    return triangulate(layout, angles, options);
}

std::vector<Vec2> align_similarity(std::span<const Vec2> estimate, std::span<const Vec2> truth) {
    if (estimate.size() != truth.size() || estimate.empty()) throw InvalidInput("align_similarity: point counts differ");
    const double n = static_cast<double>(estimate.size());
    Vec2 me{}, mt{};
    for (std::size_t i = 0; i < estimate.size(); ++i) {
        me = me + (1.0 / n) * estimate[i];
        mt = mt + (1.0 / n) * truth[i];
    }
    // Complex-number form of 2D Umeyama: truth ~= s * R * estimate + t.
    double sxx = 0.0, sxy = 0.0, var = 0.0;
    for (std::size_t i = 0; i < estimate.size(); ++i) {
        const Vec2 a = estimate[i] - me, b = truth[i] - mt;
        sxx += dot(a, b);
        sxy += cross(a, b);
        var += dot(a, a);
    }
    std::vector<Vec2> out;
    if (var == 0.0) {
        out.assign(estimate.size(), mt);
        return out;
    }
    const double c = sxx / var, s = sxy / var;  // s*cos, s*sin
    for (const auto& e : estimate) {
        const Vec2 a = e - me;
        out.push_back(mt + Vec2{c * a.x - s * a.y, s * a.x + c * a.y});
    }
    return out;
}

}  // namespace facing::locate
