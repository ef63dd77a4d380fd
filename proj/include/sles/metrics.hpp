#pragma once

#include "sles/telemetry.hpp"
#include "sles/time.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sles {

struct ExecutedTimeline;

struct TimeWindow {
    Instant start{};
    Instant end{};
    bool operator==(const TimeWindow&) const = default;
};

// Energy totals over a window, in kWh.
struct EnergyBalanceBreakdown {
    TimeWindow window;
    double demand_kwh = 0.0;
    double generation_kwh = 0.0;
    double direct_consumption_kwh = 0.0;
    double feed_in_kwh = 0.0;
    double grid_draw_kwh = 0.0;

    // Sum of two breakdowns; the window becomes their hull.
    EnergyBalanceBreakdown& operator+=(const EnergyBalanceBreakdown& other);
};

// Per-interval min/max split of generation against demand (both kW).
EnergyBalanceBreakdown decompose_flows(const TimeSeries& generation_kw, const TimeSeries& demand_kw);
EnergyBalanceBreakdown decompose_flows(std::span<const double> generation_kw, std::span<const double> demand_kw,
                                       double interval_hours);

// Breakdown from aggregate totals when no interval data exists.
EnergyBalanceBreakdown breakdown_from_totals(TimeWindow window, double demand_kwh, double generation_kwh,
                                             double direct_consumption_kwh);

double self_sufficiency(const EnergyBalanceBreakdown& b);
double self_consumption(const EnergyBalanceBreakdown& b);

// Displaced grid intensity matching the campus dashboard figures, kgCO2/kWh.
constexpr double kDefaultDisplacedIntensity = 0.276138;
double carbon_saved(double renewables_used_kwh, double displaced_intensity = kDefaultDisplacedIntensity);

struct SavingsInputs {
    double baseline_demand_kwh = 0.0;
    double realized_demand_kwh = 0.0;
    double displaced_intensity = kDefaultDisplacedIntensity;
};

struct KpiReport {
    std::string entity;
    TimeWindow window;
    double self_sufficiency_pct = 0.0;
    double self_consumption_pct = 0.0;
    double renewables_used_kwh = 0.0;
    double energy_saved_kwh = 0.0;
    double carbon_saved_kg = 0.0;
    EnergyBalanceBreakdown breakdown;
};

// Percentages are reported as 0 when their denominator is zero.
KpiReport kpi_report(const std::string& entity, TimeWindow window, const EnergyBalanceBreakdown& breakdown,
                     const SavingsInputs& savings);

// Field-wise sum of reports over the same window, percentages recomputed.
KpiReport aggregate_reports(const std::string& entity, std::span<const KpiReport> reports);

// Per-entity interval series (kW) that KPI reports are computed from.
struct EntitySeries {
    std::vector<double> generation_kw;
    std::vector<double> demand_kw;
    std::vector<double> baseline_demand_kw;
    bool operator==(const EntitySeries&) const = default;
};

struct KpiTimeline {
    Instant start{};
    int interval_minutes = 30;
    double displaced_intensity = kDefaultDisplacedIntensity;
    std::map<std::string, EntitySeries> entities;

    size_t intervals() const;
    TimeWindow window() const;
    bool operator==(const KpiTimeline&) const = default;
};

// Series for every load asset plus "campus" over intervals [begin, end) of an
// executed timeline. Generation is shared among loads in proportion to their
// demand in each interval, so the shares add up to the campus entry.
KpiTimeline kpi_timeline(const ExecutedTimeline& tl, size_t begin, size_t end,
                         double displaced_intensity = kDefaultDisplacedIntensity);

// One report per entity, in entity order with "campus" last.
std::vector<KpiReport> timeline_reports(const KpiTimeline& tl);

std::vector<KpiReport> timeline_kpis(const ExecutedTimeline& tl, size_t begin, size_t end,
                                     double displaced_intensity = kDefaultDisplacedIntensity);

KpiTimeline kpi_timeline_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const KpiTimeline& tl);

nlohmann::json to_json(const EnergyBalanceBreakdown& b);
nlohmann::json to_json(const KpiReport& r);
KpiReport kpi_report_from_json(const nlohmann::json& doc);
std::string kpi_csv(std::span<const KpiReport> reports);

} // namespace sles
