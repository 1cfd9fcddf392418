#include "exitbench/calendar.hpp"

#include <cctype>
#include <cstdio>

#include "exitbench/errors.hpp"

namespace exitbench {

std::string YearMonth::str() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
    return buf;
}

YearMonth parse_year_month(std::string_view text) {
    auto is_digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
    bool ok = text.size() == 7 && text[4] == '-';
    for (size_t i = 0; ok && i < text.size(); ++i) {
        if (i == 4) continue;
        ok = is_digit(text[i]);
    }
    if (ok) {
        YearMonth ym;
        ym.year = (text[0] - '0') * 1000 + (text[1] - '0') * 100 + (text[2] - '0') * 10 +
                  (text[3] - '0');
        ym.month = (text[5] - '0') * 10 + (text[6] - '0');
        if (ym.month >= 1 && ym.month <= 12) {
            return ym;
        }
    }
    throw InputError("expected month in YYYY-MM form, got '" + std::string(text) + "'");
}

YearMonth add_months(YearMonth ym, int n) {
    int lin = ym.linear() + n;
    YearMonth out;
    out.year = lin / 12;
    out.month = lin % 12 + 1;
    if (out.month <= 0) {  // negative linear values
        out.year -= 1;
        out.month += 12;
    }
    return out;
}

}  // namespace exitbench
