#pragma once

// Exhaustive search over discretized battery and flexible-load setpoints.
// Written independently of the library's CO2 bookkeeping so that it can act
// as a reference for the optimizers.

#include "sles/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace oracle {

struct BruteResult {
    double co2 = std::numeric_limits<double>::infinity();
    std::vector<double> battery;
    std::vector<double> adjust;
};

inline BruteResult brute_force(const sles::DispatchProblem& p, int battery_steps, int flex_steps)
{
    if (p.flexible_loads.size() > 1) throw std::invalid_argument("oracle handles at most one flexible load");
    for (const auto& [id, ef] : p.emission_factors) {
        if (ef != 0.0) throw std::invalid_argument("oracle assumes zero asset emission factors");
    }
    const size_t T = p.horizon;
    const double dt = p.interval_minutes / 60.0;
    std::vector<double> dem(T, 0.0), ren(T, 0.0);
    for (const auto& [id, v] : p.demand_kw) {
        for (size_t t = 0; t < T; ++t) dem[t] += v[t];
    }
    for (const auto& [id, v] : p.renewable_kw) {
        for (size_t t = 0; t < T; ++t) ren[t] += v[t];
    }

    std::vector<double> bat_levels{0.0};
    double cap = 0.0, soc0 = 0.0, target = 0.0, etac = 1.0, etad = 1.0;
    if (p.battery) {
        const auto& b = *p.battery;
        bat_levels.clear();
        for (int i = 0; i <= battery_steps; ++i) {
            bat_levels.push_back(-b.power_limit_kw + 2.0 * b.power_limit_kw * i / battery_steps);
        }
        cap = b.capacity_kwh;
        soc0 = b.soc_kwh;
        target = b.terminal_target();
        etac = b.eta_charge;
        etad = b.eta_discharge;
    }
    std::vector<double> flex_levels{0.0};
    std::vector<double> own(T, 0.0);
    std::vector<int> window_id(T, -1);
    size_t windows = 0;
    if (!p.flexible_loads.empty()) {
        const auto& f = p.flexible_loads.front();
        flex_levels.clear();
        for (int j = 0; j <= flex_steps; ++j) flex_levels.push_back(-f.magnitude_kw + 2.0 * f.magnitude_kw * j / flex_steps);
        own = p.demand_kw.at(f.id);
        const auto ws = p.windows_of(f);
        windows = ws.size();
        for (size_t w = 0; w < ws.size(); ++w) {
            for (size_t t = ws[w].begin; t < ws[w].end; ++t) window_id[t] = static_cast<int>(w);
        }
    }

    BruteResult best;
    std::vector<double> b(T), s(T), window_sum(windows, 0.0);
    auto rec = [&](auto&& self, size_t t, double soc, double co2) -> void {
        if (co2 >= best.co2 - 1e-12) return;
        if (t == T) {
            if (p.battery && soc < target - 1e-9) return;
            for (double w : window_sum) {
                if (std::abs(w) > 1e-9) return;
            }
            best.co2 = co2;
            best.battery = b;
            best.adjust = s;
            return;
        }
        for (double bt : bat_levels) {
            double next = soc;
            if (p.battery) {
                next = bt >= 0.0 ? soc + etac * bt * dt : soc + bt * dt / etad;
                if (next < -1e-9 || next > cap + 1e-9) continue;
            }
            for (double st : flex_levels) {
                if (window_id[t] < 0 && st != 0.0) continue;
                if (own[t] + st < -1e-9) continue;
                const double import = std::max(dem[t] + st + bt - ren[t], 0.0);
                b[t] = bt;
                s[t] = st;
                if (window_id[t] >= 0) window_sum[static_cast<size_t>(window_id[t])] += st;
                self(self, t + 1, next, co2 + p.grid_intensity[t] * import * dt);
                if (window_id[t] >= 0) window_sum[static_cast<size_t>(window_id[t])] -= st;
            }
        }
    };
    rec(rec, 0, soc0, 0.0);
    return best;
}

} // namespace oracle
