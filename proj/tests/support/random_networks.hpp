#pragma once

#include "sles/network.hpp"

#include <fmt/core.h>

#include <cstdint>
#include <random>

namespace gen {

// Random tree of n buses rooted at "G" plus `extra` chords; each chord is
// closed with probability p_closed. Every non-source bus carries a load.
inline sles::NetworkTopology random_network(uint64_t seed, size_t n, size_t extra, double p_closed = 0.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<sles::Bus> buses;
    buses.push_back({"G", "G", sles::BusKind::grid_source, 11.0});
    for (size_t i = 1; i < n; ++i) {
        buses.push_back({fmt::format("B{:02}", i), "", i % 3 == 0 ? sles::BusKind::substation : sles::BusKind::load_bus, 11.0});
    }
    std::vector<sles::Line> lines;
    std::vector<sles::Asset> assets;
    for (size_t i = 1; i < n; ++i) {
        const size_t parent = std::uniform_int_distribution<size_t>(0, i - 1)(rng);
        lines.push_back({fmt::format("L{:02}", i), buses[parent].id, buses[i].id, 0.01 + 0.09 * u(rng),
                         500.0 + 4500.0 * u(rng), sles::SwitchState::closed});
        assets.push_back({fmt::format("load_{:02}", i), buses[i].id, sles::AssetKind::fixed_load, 20.0 + 300.0 * u(rng), 0.0, {}});
    }
    for (size_t k = 0; k < extra && n > 2; ++k) {
        size_t a = std::uniform_int_distribution<size_t>(0, n - 1)(rng);
        size_t b = std::uniform_int_distribution<size_t>(0, n - 1)(rng);
        if (a == b) b = (a + 1) % n;
        lines.push_back({fmt::format("T{:02}", k + 1), buses[a].id, buses[b].id, 0.01 + 0.09 * u(rng), 500.0 + 4500.0 * u(rng),
                         u(rng) < p_closed ? sles::SwitchState::closed : sles::SwitchState::open});
    }
    return sles::NetworkTopology(std::move(buses), std::move(lines), std::move(assets));
}

} // namespace gen
