#include "exitbench/returns.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace exitbench::eval {

ReturnSeries returns_from_timeline(const pit::Timeline& timeline,
                                   const std::string& firm_id) {
    std::map<MonthIndex, double> by_month;
    for (const auto& ev : timeline.events_for(firm_id)) {
        if (ev.kind != pit::EventKind::price) continue;
        const double close = ev.payload.at("close").get<double>();
        if (!by_month.emplace(ev.month, close).second) {
            throw Error("firm " + firm_id + " has two price events for month " +
                        std::to_string(ev.month));
        }
    }
    if (by_month.empty() || by_month.begin()->first != 0) {
        throw Error("firm " + firm_id + " has no month-0 price");
    }
    ReturnSeries series;
    series.firm_id = firm_id;
    MonthIndex expected = 0;
    for (const auto& [month, close] : by_month) {
        if (month != expected) {
            throw Error("firm " + firm_id + " price series missing month " +
                        std::to_string(expected));
        }
        series.prices.push_back(close);
        ++expected;
    }
    return series;
}

double cumulative_return(const ReturnSeries& series, MonthIndex from, MonthIndex to) {
    if (from < 0 || to > series.last_month()) {
        throw pit::MonthOutOfRangeError("cumulative_return: months " +
                                        std::to_string(from) + ".." +
                                        std::to_string(to) + " outside series for " +
                                        series.firm_id);
    }
    if (from > to) {
        throw InvertedRangeError("cumulative_return: from " + std::to_string(from) +
                                 " > to " + std::to_string(to));
    }
    return series.prices[static_cast<size_t>(to)] /
               series.prices[static_cast<size_t>(from)] -
           1.0;
}

double monthly_volatility(const ReturnSeries& series, MonthIndex horizon) {
    const MonthIndex last = std::min(series.last_month(), horizon);
    std::vector<double> rets;
    for (MonthIndex t = 1; t <= last; ++t) {
        rets.push_back(series.prices[static_cast<size_t>(t)] /
                           series.prices[static_cast<size_t>(t - 1)] -
                       1.0);
    }
    if (rets.size() < 2) return 0.0;
    double mean = 0.0;
    for (double r : rets) mean += r;
    mean /= static_cast<double>(rets.size());
    double ss = 0.0;
    for (double r : rets) ss += (r - mean) * (r - mean);
    return std::sqrt(ss / static_cast<double>(rets.size() - 1));
}

}  // namespace exitbench::eval
