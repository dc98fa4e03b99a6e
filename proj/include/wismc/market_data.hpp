#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace wismc {

// Minute-resolution wall-clock timestamp: minutes since 1970-01-01T00:00,
// exchange-local, no timezone conversion.
using MinuteStamp = std::int64_t;

struct Bar {
    MinuteStamp timestamp = 0;
    double price = 0.0;
    std::int64_t volume = 0;
};

struct SessionHours {
    int open_minute = 9 * 60;
    int close_minute = 17 * 60 + 30;

    // "HH:MM-HH:MM"
    static SessionHours parse(std::string_view text);
    [[nodiscard]] bool contains(int minute_of_day) const noexcept {
        return minute_of_day >= open_minute && minute_of_day <= close_minute;
    }
    [[nodiscard]] std::string to_string() const;
};

struct BarSeries {
    std::vector<Bar> bars;
    SessionHours hours;
    // Offset of the first bar of each session; sessions are calendar days.
    std::vector<std::size_t> session_starts;
    // Rows dropped because they fell outside session hours.
    std::size_t rejected_rows = 0;

    [[nodiscard]] std::size_t session_count() const noexcept { return session_starts.size(); }
    [[nodiscard]] std::size_t session_end(std::size_t session) const noexcept {
        return session + 1 < session_starts.size() ? session_starts[session + 1] : bars.size();
    }
};

struct CsvFormat {
    std::string timestamp_column = "timestamp";
    std::string price_column = "price";
    std::string volume_column = "volume";
    char delimiter = ',';
};

[[nodiscard]] MinuteStamp parse_timestamp(std::string_view text);
[[nodiscard]] std::string format_timestamp(MinuteStamp stamp);
[[nodiscard]] int minute_of_day(MinuteStamp stamp) noexcept;
[[nodiscard]] std::int64_t day_number(MinuteStamp stamp) noexcept;

[[nodiscard]] BarSeries read_bars(std::istream& in, const CsvFormat& format = {},
                                  SessionHours hours = {});
[[nodiscard]] BarSeries load_bars(const std::filesystem::path& path, const CsvFormat& format = {},
                                  SessionHours hours = {});
void write_bars(std::ostream& out, const BarSeries& series);

enum class ReturnKind { price, volume };

[[nodiscard]] const char* to_string(ReturnKind kind) noexcept;

struct ReturnSeries {
    std::vector<double> values;
    ReturnKind kind = ReturnKind::price;
    // Exclusive end offset into `values` for each session.
    std::vector<std::size_t> session_ends;
    // Index of the later bar of each pair in the source BarSeries.
    std::vector<std::size_t> bar_index;
    // Pairs dropped because a volume was zero.
    std::size_t skipped_pairs = 0;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
};

[[nodiscard]] ReturnSeries compute_returns(const BarSeries& series, ReturnKind kind);

// Restricts two return series built from the same bars to their common pairs.
[[nodiscard]] std::pair<ReturnSeries, ReturnSeries> align_returns(const ReturnSeries& a,
                                                                  const ReturnSeries& b);

}  // namespace wismc
