#include "output.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "capgate/errors.hpp"

namespace capgate::cli {

namespace fs = std::filesystem;

void Table::add(std::vector<Cell> row) {
    if (row.size() != columns.size()) {
        throw ComputationError("table '" + name + "': row has " + std::to_string(row.size()) +
                               " cells, expected " + std::to_string(columns.size()));
    }
    rows.push_back(std::move(row));
}

Table& Result::table(std::string name, std::vector<std::string> columns) {
    tables.emplace_back(std::move(name), std::move(columns));
    return tables.back();
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

void dump(const Json& j, std::string& out, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += inner + Json(it.key()).dump() + ": ";
                dump(it.value(), out, indent + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i > 0) out += ",\n";
                out += inner;
                dump(j[i], out, indent + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        case Json::value_t::number_float: {
            const double v = j.get<double>();
            out += std::isfinite(v) ? format_double(v) : "\"" + format_double(v) + "\"";
            return;
        }
        default: out += j.dump();
    }
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string cell_text(const Cell& c) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                return "";
            } else if constexpr (std::is_same_v<T, bool>) {
                return v ? "true" : "false";
            } else if constexpr (std::is_same_v<T, double>) {
                return format_double(v);
            } else if constexpr (std::is_same_v<T, std::string>) {
                return v;
            } else {
                return std::to_string(v);
            }
        },
        c);
}

}  // namespace

std::string dump_json(const Json& j) {
    std::string out;
    dump(j, out, 0);
    out += '\n';
    return out;
}

Json cell_to_json(const Cell& c) {
    return std::visit(
        [](const auto& v) -> Json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                return nullptr;
            } else {
                return v;
            }
        },
        c);
}

std::string table_to_csv(const Table& t) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        if (i > 0) out += ',';
        out += csv_field(t.columns[i]);
    }
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) out += ',';
            out += csv_field(cell_text(row[i]));
        }
        out += '\n';
    }
    return out;
}

Json result_to_json(const Result& r) {
    Json doc = Json::object();
    doc["command"] = r.command;
    doc["tool_version"] = std::string(kToolVersion);
    doc["parameters"] = r.parameters;
    doc["summary"] = r.summary;
    Json tables = Json::object();
    for (const Table& t : r.tables) {
        Json rows = Json::array();
        for (const auto& row : t.rows) {
            Json obj = Json::object();
            for (std::size_t i = 0; i < row.size(); ++i) obj[t.columns[i]] = cell_to_json(row[i]);
            rows.push_back(std::move(obj));
        }
        tables[t.name] = std::move(rows);
    }
    doc["tables"] = std::move(tables);
    return doc;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw ComputationError("sha256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0xF];
    }
    return out;
}

StagedOutputs::StagedOutputs(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
        throw IoError("cannot create output directory '" + dir_.string() + "'");
    }
}

StagedOutputs::~StagedOutputs() {
    if (committed_) return;
    for (const auto& [tmp, digest] : staged_) {
        std::error_code ec;
        fs::remove(tmp, ec);
    }
}

void StagedOutputs::add(const std::string& name, const std::string& contents) {
    const fs::path tmp = dir_ / (name + ".tmp");
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    staged_.push_back({tmp.string(), {name, contents.size(), sha256_hex(contents)}});
    out << contents;
    out.close();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
}

std::vector<FileDigest> StagedOutputs::digests() const {
    std::vector<FileDigest> out;
    for (const auto& entry : staged_) out.push_back(entry.second);
    return out;
}

std::vector<FileDigest> StagedOutputs::commit() {
    std::vector<FileDigest> out;
    for (const auto& [tmp, digest] : staged_) {
        std::error_code ec;
        fs::rename(tmp, dir_ / digest.file, ec);
        if (ec) {
            const std::string reason = ec.message();
            // Roll back so a failed run leaves no partial output set behind.
            for (const FileDigest& done : out) fs::remove(dir_ / done.file, ec);
            throw IoError("cannot move '" + tmp + "' into place: " + reason);
        }
        out.push_back(digest);
    }
    committed_ = true;
    return out;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

double json_number(const Json& value) {
    if (value.is_number()) return value.get<double>();
    if (value.is_string()) {
        const auto& s = value.get_ref<const std::string&>();
        if (s == "inf") return HUGE_VAL;
        if (s == "-inf") return -HUGE_VAL;
        if (s == "nan") return std::nan("");
    }
    throw ValidationError("expected a number, found " + value.dump());
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ValidationError("csv: no column '" + std::string(name) + "'");
}

CsvTable parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool row_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            row_started = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            row_started = true;
        } else if (c == '\n') {
            if (row_started || !field.empty()) {
                row.push_back(std::move(field));
                records.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            row_started = false;
        } else if (c != '\r') {
            field += c;
            row_started = true;
        }
    }
    if (quoted) throw ValidationError("csv: unterminated quoted field");
    if (row_started || !field.empty()) {
        row.push_back(std::move(field));
        records.push_back(std::move(row));
    }
    if (records.empty()) throw ValidationError("csv: missing header");
    CsvTable t;
    t.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.header.size()) {
            throw ValidationError("csv: row " + std::to_string(r + 1) + " has " +
                                  std::to_string(records[r].size()) + " fields, expected " +
                                  std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

}  // namespace capgate::cli
