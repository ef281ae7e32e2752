#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dguard/maps.hpp"

namespace dguard {

struct ClusterConfig {
    double eps = 2.0;      // Euclidean radius in feature cells
    int min_points = 10;   // neighbor count threshold, query cell included

    void validate() const {
        if (!(eps > 0)) throw std::invalid_argument("cluster: eps must be > 0");
        if (min_points < 1) throw std::invalid_argument("cluster: min_points must be >= 1");
    }
};

using Cluster = std::vector<Cell>;

namespace detail {

// Disk of integer offsets with di^2 + dj^2 <= eps^2. Comparing integer
// squared distance against eps*eps keeps the radius test exact.
inline std::vector<Cell> disk_offsets(double eps) {
    const int reach = static_cast<int>(std::floor(eps));
    const double eps2 = eps * eps;
    std::vector<Cell> offsets;
    for (int di = -reach; di <= reach; ++di)
        for (int dj = -reach; dj <= reach; ++dj)
            if (static_cast<double>(di) * di + static_cast<double>(dj) * dj <= eps2)
                offsets.push_back({di, dj});
    return offsets;
}

inline int neighbor_count(const ObjectnessMap& om, int i, int j, const std::vector<Cell>& disk) {
    int n = 0;
    for (const auto& d : disk) {
        const int ni = i + d.i, nj = j + d.j;
        if (ni < 0 || nj < 0 || ni >= om.X || nj >= om.Y) continue;
        n += om.at(ni, nj);
    }
    return n;
}

} // namespace detail

// True iff DBSCAN would find at least one cluster: a cluster exists exactly
// when some 1-cell is a core point. The disk-taking overload lets sweeps
// reuse the offset table.
inline bool has_cluster(const ObjectnessMap& om, int min_points, const std::vector<Cell>& disk) {
    for (int i = 0; i < om.X; ++i)
        for (int j = 0; j < om.Y; ++j)
            if (om.at(i, j) && detail::neighbor_count(om, i, j, disk) >= min_points)
                return true;
    return false;
}

inline bool has_cluster(const ObjectnessMap& om, const ClusterConfig& cfg) {
    cfg.validate();
    if (om.X == 0 || om.Y == 0) return false;
    return has_cluster(om, cfg.min_points, detail::disk_offsets(cfg.eps));
}

// DBSCAN over the 1-cells of the map. Clusters are connected core cells plus
// their eps-neighbors; a border cell reachable from several clusters belongs
// to the first cluster discovered in row-major scan order. Returns nullopt
// when no cluster exists.
inline std::optional<std::vector<Cluster>> det_cluster(const ObjectnessMap& om,
                                                       const ClusterConfig& cfg) {
    cfg.validate();
    if (om.X == 0 || om.Y == 0) return std::nullopt;
    const auto disk = detail::disk_offsets(cfg.eps);

    constexpr int kUnassigned = -1;
    std::vector<int> assignment(om.cells.size(), kUnassigned);
    std::vector<Cluster> clusters;

    auto neighbors_of = [&](int i, int j) {
        std::vector<Cell> out;
        for (const auto& d : disk) {
            const int ni = i + d.i, nj = j + d.j;
            if (ni < 0 || nj < 0 || ni >= om.X || nj >= om.Y) continue;
            if (om.at(ni, nj)) out.push_back({ni, nj});
        }
        return out;
    };

    for (int i = 0; i < om.X; ++i) {
        for (int j = 0; j < om.Y; ++j) {
            if (!om.at(i, j) || assignment[om.index(i, j)] != kUnassigned) continue;
            auto seeds = neighbors_of(i, j);
            if (static_cast<int>(seeds.size()) < cfg.min_points) continue;

            const int id = static_cast<int>(clusters.size());
            clusters.emplace_back();
            assignment[om.index(i, j)] = id;
            clusters[id].push_back({i, j});

            // FIFO expansion; border points are claimed but not expanded.
            std::vector<Cell> queue = std::move(seeds);
            for (std::size_t q = 0; q < queue.size(); ++q) {
                const Cell p = queue[q];
                const std::size_t idx = om.index(p.i, p.j);
                if (assignment[idx] != kUnassigned) continue;
                assignment[idx] = id;
                clusters[id].push_back(p);
                auto nb = neighbors_of(p.i, p.j);
                if (static_cast<int>(nb.size()) >= cfg.min_points)
                    for (const auto& n : nb)
                        if (assignment[om.index(n.i, n.j)] == kUnassigned) queue.push_back(n);
            }
        }
    }

    if (clusters.empty()) return std::nullopt;
    for (auto& c : clusters) std::sort(c.begin(), c.end());
    return clusters;
}

} // namespace dguard
