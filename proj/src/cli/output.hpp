#pragma once
// Result documents, serialisation and staged file output for the CLI.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "capgate/cli.hpp"

namespace capgate::cli {

using Cell = std::variant<std::monostate, bool, std::int64_t, std::uint64_t, double, std::string>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    Table(std::string table_name, std::vector<std::string> cols)
        : name(std::move(table_name)), columns(std::move(cols)) {}

    void add(std::vector<Cell> row);
};

// Deterministic content of one command run: nothing here may depend on the
// worker count or on wall-clock time.
struct Result {
    std::string command;
    Json parameters = Json::object();
    Json summary = Json::object();
    std::deque<Table> tables;  // deque: table() references stay valid

    Table& table(std::string name, std::vector<std::string> columns);
};

// %.17g; non-finite values become "inf", "-inf", "nan".
std::string format_double(double v);

// Two-space indented JSON with %.17g floats. Key order is insertion order.
std::string dump_json(const Json& j);

Json cell_to_json(const Cell& c);
std::string table_to_csv(const Table& t);
Json result_to_json(const Result& r);

std::string sha256_hex(const std::string& bytes);

struct FileDigest {
    std::string file;
    std::uint64_t bytes = 0;
    std::string sha256;
};

// Files are written as <name>.tmp and renamed into place by commit(). If the
// object is destroyed before commit, every staged file is removed; a failed
// commit also removes the files it already moved.
class StagedOutputs {
public:
    explicit StagedOutputs(std::filesystem::path dir);
    StagedOutputs(const StagedOutputs&) = delete;
    StagedOutputs& operator=(const StagedOutputs&) = delete;
    ~StagedOutputs();

    void add(const std::string& name, const std::string& contents);
    [[nodiscard]] std::vector<FileDigest> digests() const;
    std::vector<FileDigest> commit();

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, FileDigest>> staged_;  // tmp path, digest
    bool committed_ = false;
};

std::string utc_timestamp();

}  // namespace capgate::cli
