#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "wismc/finfunc.hpp"
#include "wismc/model.hpp"
#include "wismc/optimize.hpp"
#include "wismc/simulate.hpp"
#include "wismc/stats.hpp"

namespace wismc {

using Json = nlohmann::ordered_json;

inline constexpr int format_version = 1;

// Shortest decimal text that parses back to the same double; inf, -inf, nan spelled out.
[[nodiscard]] std::string format_double(double x);
// Finite values as JSON numbers, the rest as strings.
[[nodiscard]] Json json_number(double x);
[[nodiscard]] double number_from_json(const Json& j);

[[nodiscard]] Json grid_to_json(const StateGrid& grid);
[[nodiscard]] StateGrid grid_from_json(const Json& j);
[[nodiscard]] Json kernel_to_json(const IndexedKernel& kernel);
[[nodiscard]] IndexedKernel kernel_from_json(const Json& j);
[[nodiscard]] Json cond_wait_to_json(const CondWaitDist& cw);
[[nodiscard]] CondWaitDist cond_wait_from_json(const Json& j);
[[nodiscard]] Json copula_to_json(const CopulaSpec& c);
[[nodiscard]] CopulaSpec copula_from_json(const Json& j);
[[nodiscard]] Json triplet_to_json(const TripletKernel& tk);
[[nodiscard]] TripletKernel triplet_from_json(const Json& j);
[[nodiscard]] Json fit_config_to_json(const FitConfig& c);
[[nodiscard]] FitConfig fit_config_from_json(const Json& j);
[[nodiscard]] Json model_to_json(const FittedModel& m);
[[nodiscard]] FittedModel model_from_json(const Json& j);

[[nodiscard]] Json battery_to_json(const Battery& b);
[[nodiscard]] Json contingency_to_json(const ContingencyTable& t);
[[nodiscard]] Json fpt_to_json(const FptResult& r, const FptQuery& q);
[[nodiscard]] Json opt_result_to_json(const OptResult& r);
[[nodiscard]] OptResult opt_result_from_json(const Json& j);
[[nodiscard]] Json opt_timing_to_json(const OptResult& r);
[[nodiscard]] Json stylized_to_json(const StylizedReport& report);

[[nodiscard]] std::string fpt_csv(const FptResult& r);
[[nodiscard]] std::string path_csv(const SynthPath& p);
[[nodiscard]] std::string events_csv(const SynthPath& p);

// Pretty JSON with a trailing newline.
[[nodiscard]] std::string dump(const Json& j);
[[nodiscard]] Json parse_json(std::string_view text);

[[nodiscard]] std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

void save_model(const std::filesystem::path& path, const FittedModel& model);
[[nodiscard]] FittedModel load_model(const std::filesystem::path& path);

[[nodiscard]] std::string sha256_hex(std::string_view data);
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

}  // namespace wismc
