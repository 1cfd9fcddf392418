#pragma once

#include <string>
#include <string_view>

namespace exitbench {

// A calendar month in "YYYY-MM" form, kept as a linear month count so that
// differences between two months are plain integers.
struct YearMonth {
    int year = 0;
    int month = 1;  // 1..12

    // Months since year 0. Subtraction of two linear values gives the number
    // of calendar months between them.
    int linear() const { return year * 12 + (month - 1); }

    std::string str() const;

    friend bool operator==(const YearMonth&, const YearMonth&) = default;
};

// Parses strict "YYYY-MM". Throws InputError on anything else.
YearMonth parse_year_month(std::string_view text);

// Adds n months to ym (n may be negative).
YearMonth add_months(YearMonth ym, int n);

}  // namespace exitbench
