#include "sles/dispatch.hpp"

#include "sles/error.hpp"
#include "sles/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

namespace sles {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per flexible load: forced adjustment per interval, NaN where free.
std::map<std::string, std::vector<double>> forced_table(const DispatchProblem& p)
{
    std::map<std::string, std::vector<double>> out;
    for (const auto& f : p.flexible_loads) out[f.id].assign(p.horizon, std::numeric_limits<double>::quiet_NaN());
    for (const auto& e : p.forced_events) {
        const auto v = forced_adjustment(p, e);
        auto& row = out[e.building];
        for (size_t t = 0; t < p.horizon; ++t) {
            if (!std::isnan(v[t])) row[t] = v[t];
        }
    }
    return out;
}

struct FlexBounds {
    std::vector<double> lo, hi;
};

FlexBounds flex_bounds(const DispatchProblem& p, const FlexibleLoad& f)
{
    const auto& dem = p.demand_kw.at(f.id);
    FlexBounds b{std::vector<double>(p.horizon), std::vector<double>(p.horizon)};
    for (size_t t = 0; t < p.horizon; ++t) {
        b.lo[t] = std::min(0.0, std::max(-f.magnitude_kw, -dem[t]));
        double hi = f.magnitude_kw;
        if (f.max_kw > 0.0) hi = std::min(hi, f.max_kw - dem[t]);
        b.hi[t] = std::max(hi, 0.0);
    }
    return b;
}

// ---------------------------------------------------------------------------
// Greedy: surplus-matching load shift, then pairwise battery arbitrage.

class GreedyStrategy final : public DispatchStrategy {
public:
    std::string_view name() const override { return "greedy"; }

    DispatchSchedule solve(const DispatchProblem& p) const override
    {
        const size_t T = p.horizon;
        const auto forced = forced_table(p);
        const auto dem = p.total_demand();
        const auto ren = p.total_renewable();
        std::vector<double> net(T);
        for (size_t t = 0; t < T; ++t) net[t] = dem[t] - ren[t];

        DispatchSchedule s;
        for (const auto& f : p.flexible_loads) {
            auto& adj = s.flex_adjust_kw[f.id];
            adj.assign(T, 0.0);
            const auto& fx = forced.at(f.id);
            for (size_t t = 0; t < T; ++t) {
                if (!std::isnan(fx[t])) {
                    adj[t] = fx[t];
                    net[t] += fx[t];
                }
            }
        }
        for (int pass = 0; pass < 4; ++pass) {
            bool moved = false;
            for (const auto& f : p.flexible_loads) {
                const auto bounds = flex_bounds(p, f);
                for (const auto& w : p.windows_of(f)) {
                    moved |= shift_window(p, w, forced.at(f.id), bounds, s.flex_adjust_kw[f.id], net);
                }
            }
            if (!moved) break;
        }
        s.battery_kw.assign(T, 0.0);
        if (p.battery && p.battery->power_limit_kw > 0.0) arbitrage(p, net, s.battery_kw);
        return s;
    }

private:
    static bool shift_window(const DispatchProblem& p, const IntervalRange& w, const std::vector<double>& forced,
                             const FlexBounds& bounds, std::vector<double>& adj, std::vector<double>& net)
    {
        constexpr double kTol = 1e-9;
        const auto& I = p.grid_intensity;
        bool moved = false;
        const size_t cap = 4 * w.size() * w.size() + 64;
        for (size_t iter = 0; iter < cap; ++iter) {
            double best = 1e-12;
            size_t src = 0, dst = 0;
            double amount = 0.0;
            for (size_t a = w.begin; a < w.end; ++a) {
                if (!std::isnan(forced[a]) || adj[a] <= bounds.lo[a] + kTol || net[a] <= kTol) continue;
                const double save = I[a];
                for (size_t k = w.begin; k < w.end; ++k) {
                    if (k == a || !std::isnan(forced[k]) || adj[k] >= bounds.hi[k] - kTol) continue;
                    const bool surplus = net[k] < -kTol;
                    const double gain = save - (surplus ? 0.0 : I[k]);
                    if (gain > best) {
                        best = gain;
                        src = a;
                        dst = k;
                        amount = std::min({adj[a] - bounds.lo[a], bounds.hi[k] - adj[k], net[a],
                                           surplus ? -net[k] : kInf});
                    }
                }
            }
            if (amount <= kTol) break;
            adj[src] -= amount;
            net[src] -= amount;
            adj[dst] += amount;
            net[dst] += amount;
            moved = true;
        }
        return moved;
    }

    static void arbitrage(const DispatchProblem& p, std::vector<double>& net, std::vector<double>& battery_kw)
    {
        constexpr double kTol = 1e-9;
        const auto& b = *p.battery;
        const auto& I = p.grid_intensity;
        const size_t T = p.horizon;
        const double dt = p.dt_hours();
        const double ef = p.emission_factor(b.id);
        std::vector<double> charge(T, 0.0), discharge(T, 0.0), soc(T, b.soc_kwh);
        double scale = 1e-12;
        for (double x : I) scale = std::max(scale, x);

        const size_t cap = 50 * T + 64;
        for (size_t iter = 0; iter < cap; ++iter) {
            // Marginal cost of storing one kWh at i, and value of releasing one at j.
            std::vector<double> cost(T, kInf), value(T, -kInf);
            std::vector<double> room_in(T, 0.0), room_out(T, 0.0);
            for (size_t t = 0; t < T; ++t) {
                if (discharge[t] <= kTol && charge[t] < b.power_limit_kw - kTol) {
                    const bool surplus = net[t] < -kTol;
                    cost[t] = (surplus ? 0.0 : I[t]) / b.eta_charge;
                    const double kw = std::min(b.power_limit_kw - charge[t], surplus ? -net[t] : kInf);
                    room_in[t] = kw * dt * b.eta_charge;
                }
                if (charge[t] <= kTol && discharge[t] < b.power_limit_kw - kTol && net[t] > kTol) {
                    value[t] = (I[t] - ef) * b.eta_discharge;
                    const double kw = std::min(b.power_limit_kw - discharge[t], net[t]);
                    room_out[t] = kw * dt / b.eta_discharge;
                }
            }
            double best = 1e-12 * scale;
            size_t bi = 0, bj = 0;
            double amount = 0.0;
            for (size_t i = 0; i < T; ++i) {
                if (!std::isfinite(cost[i])) continue;
                // Discharge later: SoC rises over [i, j).
                double peak = -kInf;
                for (size_t j = i + 1; j < T; ++j) {
                    peak = std::max(peak, soc[j - 1]);
                    const double gain = value[j] - cost[i];
                    if (gain <= best) continue;
                    const double q = std::min({room_in[i], room_out[j], b.capacity_kwh - peak});
                    if (q <= kTol) continue;
                    best = gain;
                    bi = i;
                    bj = j;
                    amount = q;
                }
                // Discharge earlier: SoC falls over [j, i).
                double floor = kInf;
                for (size_t j = i; j-- > 0;) {
                    floor = std::min(floor, soc[j]);
                    const double gain = value[j] - cost[i];
                    if (gain <= best) continue;
                    const double q = std::min({room_in[i], room_out[j], floor});
                    if (q <= kTol) continue;
                    best = gain;
                    bi = i;
                    bj = j;
                    amount = q;
                }
            }
            if (amount <= kTol) break;
            const double in_kw = amount / (b.eta_charge * dt);
            const double out_kw = amount * b.eta_discharge / dt;
            charge[bi] += in_kw;
            net[bi] += in_kw;
            discharge[bj] += out_kw;
            net[bj] -= out_kw;
            if (bi < bj) {
                for (size_t t = bi; t < bj; ++t) soc[t] += amount;
            } else {
                for (size_t t = bj; t < bi; ++t) soc[t] -= amount;
            }
        }
        for (size_t t = 0; t < T; ++t) battery_kw[t] = charge[t] - discharge[t];
    }
};

// ---------------------------------------------------------------------------
// Exact linear program over the stated constraints.

class LpStrategy final : public DispatchStrategy {
public:
    std::string_view name() const override { return "lp"; }

    DispatchSchedule solve(const DispatchProblem& p) const override
    {
        const size_t T = p.horizon;
        const double dt = p.dt_hours();
        const auto forced = forced_table(p);
        const auto dem = p.total_demand();
        const auto ren = p.total_renewable();

        // A tiny throughput penalty, proportional to the objective's own
        // scale, breaks ties toward idle equipment and rules out
        // simultaneous charge and discharge.
        double scale = 0.0;
        for (double x : p.grid_intensity) scale = std::max(scale, x);
        for (const auto& [id, ef] : p.emission_factors) scale = std::max(scale, std::abs(ef));
        const double eps = 1e-7 * (scale > 0.0 ? scale : 1.0) * dt;

        lp::Problem lp;
        std::vector<size_t> g(T), e(T), c, d, soc;
        for (size_t t = 0; t < T; ++t) {
            g[t] = lp.add_variable(p.grid_intensity[t] * dt, 0.0, lp::kInfinity);
            e[t] = lp.add_variable(eps, 0.0, lp::kInfinity);
        }
        const bool has_battery = p.battery && p.battery->power_limit_kw > 0.0;
        if (has_battery) {
            const auto& b = *p.battery;
            const double ef = p.emission_factor(b.id);
            for (size_t t = 0; t < T; ++t) {
                c.push_back(lp.add_variable(eps, 0.0, b.power_limit_kw));
                d.push_back(lp.add_variable(ef * dt + eps, 0.0, b.power_limit_kw));
                const double lo = t + 1 == T ? b.terminal_target() : 0.0;
                soc.push_back(lp.add_variable(0.0, lo, b.capacity_kwh));
            }
        }
        // Shift split into raise/lower parts so the throughput penalty can
        // also prefer leaving loads alone. -1 where forced or outside windows.
        std::map<std::string, std::vector<long>> shift;
        for (const auto& f : p.flexible_loads) {
            const auto bounds = flex_bounds(p, f);
            const auto& fx = forced.at(f.id);
            auto& vars = shift[f.id];
            vars.assign(T, -1);
            const double ef = p.emission_factor(f.id);
            std::vector<bool> in_window(T, false);
            for (const auto& w : p.windows_of(f)) {
                for (size_t t = w.begin; t < w.end; ++t) in_window[t] = true;
            }
            for (size_t t = 0; t < T; ++t) {
                if (!std::isnan(fx[t]) || !in_window[t] || f.magnitude_kw <= 0.0) continue;
                vars[t] = static_cast<long>(lp.add_variable(ef * dt + eps, 0.0, bounds.hi[t]));
                lp.add_variable(-ef * dt + eps, 0.0, -bounds.lo[t]);
            }
            for (const auto& w : p.windows_of(f)) {
                std::vector<lp::Term> terms;
                for (size_t t = w.begin; t < w.end; ++t) {
                    if (vars[t] >= 0) {
                        terms.push_back({static_cast<size_t>(vars[t]), 1.0});
                        terms.push_back({static_cast<size_t>(vars[t]) + 1, -1.0});
                    }
                }
                if (!terms.empty()) lp.add_row(std::move(terms), lp::Sense::equal, 0.0);
            }
        }
        for (size_t t = 0; t < T; ++t) {
            // g - e - c + d - sum(shift) = demand + forced - renewables
            double rhs = dem[t] - ren[t];
            std::vector<lp::Term> terms{{g[t], 1.0}, {e[t], -1.0}};
            if (has_battery) {
                terms.push_back({c[t], -1.0});
                terms.push_back({d[t], 1.0});
            }
            for (const auto& f : p.flexible_loads) {
                const double fx = forced.at(f.id)[t];
                if (!std::isnan(fx)) rhs += fx;
                const long v = shift[f.id][t];
                if (v >= 0) {
                    terms.push_back({static_cast<size_t>(v), -1.0});
                    terms.push_back({static_cast<size_t>(v) + 1, 1.0});
                }
            }
            lp.add_row(std::move(terms), lp::Sense::equal, rhs);
        }
        if (has_battery) {
            const auto& b = *p.battery;
            for (size_t t = 0; t < T; ++t) {
                std::vector<lp::Term> terms{{soc[t], 1.0}, {c[t], -b.eta_charge * dt}, {d[t], dt / b.eta_discharge}};
                double rhs = 0.0;
                if (t == 0) {
                    rhs = b.soc_kwh;
                } else {
                    terms.push_back({soc[t - 1], -1.0});
                }
                lp.add_row(std::move(terms), lp::Sense::equal, rhs);
            }
        }

        const auto result = lp::solve(lp);
        if (result.status == lp::Status::infeasible) throw InfeasibleError("dispatch problem has no feasible schedule");
        if (result.status != lp::Status::optimal) {
            throw Error(fmt::format("dispatch LP did not converge: {}", lp::to_string(result.status)));
        }

        DispatchSchedule s;
        s.battery_kw.assign(T, 0.0);
        if (has_battery) {
            for (size_t t = 0; t < T; ++t) s.battery_kw[t] = result.x[c[t]] - result.x[d[t]];
        }
        for (const auto& f : p.flexible_loads) {
            auto& adj = s.flex_adjust_kw[f.id];
            adj.assign(T, 0.0);
            const auto& fx = forced.at(f.id);
            for (size_t t = 0; t < T; ++t) {
                if (!std::isnan(fx[t])) {
                    adj[t] = fx[t];
                } else if (shift[f.id][t] >= 0) {
                    const auto v = static_cast<size_t>(shift[f.id][t]);
                    adj[t] = result.x[v] - result.x[v + 1];
                }
            }
        }
        return s;
    }
};

} // namespace

std::unique_ptr<DispatchStrategy> make_greedy_strategy()
{
    return std::make_unique<GreedyStrategy>();
}

std::unique_ptr<DispatchStrategy> make_lp_strategy()
{
    return std::make_unique<LpStrategy>();
}

} // namespace sles
