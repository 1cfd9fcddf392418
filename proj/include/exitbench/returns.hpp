#pragma once

#include <string>
#include <vector>

#include "exitbench/errors.hpp"
#include "exitbench/timeline.hpp"

namespace exitbench::eval {

using pit::MonthIndex;

struct InvertedRangeError : Error {
    using Error::Error;
};

// Adjusted month-end closes, index = month, contiguous from month 0 (lockup
// expiration). All prices positive.
struct ReturnSeries {
    std::string firm_id;
    std::vector<double> prices;

    MonthIndex last_month() const { return static_cast<MonthIndex>(prices.size()) - 1; }
};

// Collects a firm's price events into a contiguous series. Missing month 0, a
// gap, or two price events in one month raise Error.
ReturnSeries returns_from_timeline(const pit::Timeline& timeline,
                                   const std::string& firm_id);

// Simple cumulative return P_to / P_from - 1. Throws
// pit::MonthOutOfRangeError / InvertedRangeError on bad bounds.
double cumulative_return(const ReturnSeries& series, MonthIndex from, MonthIndex to);

// Sample standard deviation of monthly returns over months 1..horizon
// (clamped to the series). Fewer than two monthly returns yield 0.
double monthly_volatility(const ReturnSeries& series, MonthIndex horizon);

}  // namespace exitbench::eval
