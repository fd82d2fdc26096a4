#pragma once
// Command-line front end. `run` is the whole tool minus process plumbing, so
// tests can drive it in-process.
//
// Exit codes: 0 success, 2 input or validation error (including unknown
// flags and missing input files), 3 computation error, 4 I/O error.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace capgate::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitComputation = 3, kExitIo = 4 };

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

using Json = nlohmann::ordered_json;

// Readers for the tool's own output files. Non-finite numbers are written as
// the strings "inf", "-inf" and "nan"; json_number maps them back.
Json read_json(const std::filesystem::path& path);
double json_number(const Json& value);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text);

}  // namespace capgate::cli
