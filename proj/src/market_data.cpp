#include "wismc/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "wismc/error.hpp"

namespace wismc {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::parse: return "parse";
        case ErrorKind::ordering: return "ordering";
        case ErrorKind::insufficient_data: return "insufficient_data";
        case ErrorKind::parameter: return "parameter";
        case ErrorKind::alignment: return "alignment";
        case ErrorKind::undefined: return "undefined";
        case ErrorKind::estimation: return "estimation";
        case ErrorKind::resource: return "resource";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

const char* to_string(ReturnKind kind) noexcept {
    return kind == ReturnKind::price ? "price-return" : "volume-return";
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    text = trim(text);
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

int parse_hhmm(std::string_view text) {
    text = trim(text);
    const auto colon = text.find(':');
    int h = 0, m = 0;
    if (colon == std::string_view::npos || !parse_number(text.substr(0, colon), h) ||
        !parse_number(text.substr(colon + 1), m) || h < 0 || h > 23 || m < 0 || m > 59) {
        throw Error(ErrorKind::parameter, "invalid clock time '" + std::string(text) + "'");
    }
    return h * 60 + m;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

}  // namespace

SessionHours SessionHours::parse(std::string_view text) {
    const auto dash = text.find('-');
    if (dash == std::string_view::npos) {
        throw Error(ErrorKind::parameter, "session must look like HH:MM-HH:MM");
    }
    SessionHours h;
    h.open_minute = parse_hhmm(text.substr(0, dash));
    h.close_minute = parse_hhmm(text.substr(dash + 1));
    if (h.close_minute <= h.open_minute) {
        throw Error(ErrorKind::parameter, "session close must be after open");
    }
    return h;
}

std::string SessionHours::to_string() const {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%02d:%02d-%02d:%02d", open_minute / 60, open_minute % 60,
                  close_minute / 60, close_minute % 60);
    return buf;
}

MinuteStamp parse_timestamp(std::string_view text) {
    text = trim(text);
    std::int64_t epoch = 0;
    if (parse_number(text, epoch)) return epoch;

    // YYYY-MM-DDTHH:MM (a space separator is accepted too)
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    if (text.size() < 16 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
        text[13] != ':' || !parse_number(text.substr(0, 4), y) || !parse_number(text.substr(5, 2), mo) ||
        !parse_number(text.substr(8, 2), d) || !parse_number(text.substr(11, 2), h) ||
        !parse_number(text.substr(14, 2), mi)) {
        throw Error(ErrorKind::parse, "unrecognised timestamp '" + std::string(text) + "'");
    }
    // Optional ":SS" suffix must be zero; bars are minute-resolution.
    if (text.size() > 16) {
        int sec = 0;
        if (text[16] != ':' || !parse_number(text.substr(17), sec) || sec != 0) {
            throw Error(ErrorKind::parse, "unrecognised timestamp '" + std::string(text) + "'");
        }
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59) {
        throw Error(ErrorKind::parse, "invalid calendar timestamp '" + std::string(text) + "'");
    }
    const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
    return static_cast<MinuteStamp>(days) * 1440 + h * 60 + mi;
}

std::int64_t day_number(MinuteStamp stamp) noexcept {
    return stamp >= 0 ? stamp / 1440 : -((-stamp + 1439) / 1440);
}

int minute_of_day(MinuteStamp stamp) noexcept {
    return static_cast<int>(stamp - day_number(stamp) * 1440);
}

std::string format_timestamp(MinuteStamp stamp) {
    const std::chrono::sys_days days{std::chrono::days{day_number(stamp)}};
    const std::chrono::year_month_day ymd{days};
    const int mod = minute_of_day(stamp);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), mod / 60, mod % 60);
    return buf;
}

BarSeries read_bars(std::istream& in, const CsvFormat& format, SessionHours hours) {
    BarSeries series;
    series.hours = hours;

    std::string line;
    std::size_t line_no = 0;
    int col_ts = -1, col_price = -1, col_volume = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) break;
    }
    if (line_no == 0 || trim(line).empty()) {
        throw Error(ErrorKind::parse, "empty input: header row expected", line_no);
    }
    {
        const auto header = split(line, format.delimiter);
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == format.timestamp_column) col_ts = static_cast<int>(c);
            if (header[c] == format.price_column) col_price = static_cast<int>(c);
            if (header[c] == format.volume_column) col_volume = static_cast<int>(c);
        }
        if (col_ts < 0 || col_price < 0 || col_volume < 0) {
            throw Error(ErrorKind::parse,
                        "header must name columns " + format.timestamp_column + ", " + format.price_column +
                            ", " + format.volume_column,
                        line_no);
        }
    }
    const auto needed = static_cast<std::size_t>(std::max({col_ts, col_price, col_volume})) + 1;

    std::int64_t last_day = 0;
    bool have_last = false;
    MinuteStamp last_stamp = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line, format.delimiter);
        if (fields.size() < needed) {
            throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected at least " +
                                              std::to_string(needed) + " columns",
                        line_no);
        }
        Bar bar;
        try {
            bar.timestamp = parse_timestamp(fields[static_cast<std::size_t>(col_ts)]);
        } catch (const Error& e) {
            throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
        if (!parse_number(fields[static_cast<std::size_t>(col_price)], bar.price) || !(bar.price > 0.0) ||
            !std::isfinite(bar.price)) {
            throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": price must be a positive number",
                        line_no);
        }
        double volume = 0.0;
        if (!parse_number(fields[static_cast<std::size_t>(col_volume)], volume) || volume < 0.0 ||
            volume != std::floor(volume)) {
            throw Error(ErrorKind::parse,
                        "line " + std::to_string(line_no) + ": volume must be a non-negative integer", line_no);
        }
        bar.volume = static_cast<std::int64_t>(volume);

        if (have_last && bar.timestamp <= last_stamp) {
            throw Error(ErrorKind::ordering,
                        "line " + std::to_string(line_no) + ": timestamps must be strictly increasing", line_no);
        }
        have_last = true;
        last_stamp = bar.timestamp;

        if (!hours.contains(minute_of_day(bar.timestamp))) {
            ++series.rejected_rows;
            continue;
        }
        const auto day = day_number(bar.timestamp);
        if (series.bars.empty() || day != last_day) {
            series.session_starts.push_back(series.bars.size());
            last_day = day;
        }
        series.bars.push_back(bar);
    }
    return series;
}

BarSeries load_bars(const std::filesystem::path& path, const CsvFormat& format, SessionHours hours) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    return read_bars(in, format, hours);
}

void write_bars(std::ostream& out, const BarSeries& series) {
    out << "timestamp,price,volume\n";
    char buf[64];
    for (const auto& bar : series.bars) {
        auto res = std::to_chars(buf, buf + sizeof buf, bar.price);
        out << format_timestamp(bar.timestamp) << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf))
            << ',' << bar.volume << '\n';
    }
}

ReturnSeries compute_returns(const BarSeries& series, ReturnKind kind) {
    ReturnSeries out;
    out.kind = kind;
    for (std::size_t s = 0; s < series.session_count(); ++s) {
        const auto begin = series.session_starts[s];
        const auto end = series.session_end(s);
        for (std::size_t k = begin + 1; k < end; ++k) {
            const auto& prev = series.bars[k - 1];
            const auto& cur = series.bars[k];
            if (kind == ReturnKind::price) {
                out.values.push_back(std::log(cur.price / prev.price));
            } else {
                if (prev.volume == 0 || cur.volume == 0) {
                    ++out.skipped_pairs;
                    continue;
                }
                out.values.push_back(std::log(static_cast<double>(cur.volume) / static_cast<double>(prev.volume)));
            }
            out.bar_index.push_back(k);
        }
        out.session_ends.push_back(out.values.size());
    }
    return out;
}

std::pair<ReturnSeries, ReturnSeries> align_returns(const ReturnSeries& a, const ReturnSeries& b) {
    if (a.bar_index.size() != a.size() || b.bar_index.size() != b.size()) {
        throw Error(ErrorKind::alignment, "return series lack bar indices");
    }
    ReturnSeries ra, rb;
    ra.kind = a.kind;
    rb.kind = b.kind;
    ra.skipped_pairs = a.skipped_pairs;
    rb.skipped_pairs = b.skipped_pairs;

    std::size_t ia = 0, ib = 0;
    for (std::size_t session = 0; session < a.session_ends.size(); ++session) {
        const std::size_t end = a.session_ends[session];
        for (; ia < end; ++ia) {
            while (ib < b.size() && b.bar_index[ib] < a.bar_index[ia]) ++ib;
            if (ib < b.size() && b.bar_index[ib] == a.bar_index[ia]) {
                ra.values.push_back(a.values[ia]);
                ra.bar_index.push_back(a.bar_index[ia]);
                rb.values.push_back(b.values[ib]);
                rb.bar_index.push_back(b.bar_index[ib]);
            }
        }
        ra.session_ends.push_back(ra.values.size());
    }
    rb.session_ends = ra.session_ends;
    return {std::move(ra), std::move(rb)};
}

}  // namespace wismc
