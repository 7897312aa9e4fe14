#include "vadeers/data/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "vadeers/error.hpp"

namespace vadeers::data {
namespace fs = std::filesystem;
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
}

std::string where(const fs::path& path, std::size_t row, std::size_t col) {
    return path.filename().string() + " row " + std::to_string(row) + " col " + std::to_string(col);
}

double parse_value(std::string_view text, const fs::path& path, std::size_t row, std::size_t col) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty()) {
        throw DataError(where(path, row, col) + ": '" + std::string(text) + "' is not a number");
    }
    if (!std::isfinite(v)) throw DataError(where(path, row, col) + ": non-finite value");
    return v;
}

/// Lines of a file with the header first; blank lines dropped.
std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        lines.push_back(std::move(line));
    }
    if (lines.empty()) throw DataError(path.filename().string() + ": missing header row");
    if (lines.front().starts_with("\xEF\xBB\xBF")) lines.front().erase(0, 3);
    return lines;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

void expect_header(const IdTable& t, const fs::path& path, const std::string& id_column, const std::string& prefix,
                   std::size_t width) {
    if (t.header.empty() || t.header.front() != id_column) {
        throw DataError(path.filename().string() + ": first column must be '" + id_column + "'");
    }
    if (t.values.cols() != width) {
        throw DataError(path.filename().string() + ": " + std::to_string(t.values.cols()) +
                        " value columns, manifest says " + std::to_string(width));
    }
    for (std::size_t c = 0; c < width; ++c) {
        if (t.header[c + 1] != prefix + std::to_string(c)) {
            throw DataError(path.filename().string() + ": header column " + std::to_string(c + 2) + " is '" +
                            t.header[c + 1] + "', expected '" + prefix + std::to_string(c) + "'");
        }
    }
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw ContractError("format_double failed");
    return std::string(buf, ptr);
}

IdTable read_id_table(const fs::path& path) {
    const auto lines = read_lines(path);
    IdTable t;
    for (auto f : split(lines.front())) t.header.emplace_back(f);
    if (t.header.size() < 2) throw DataError(path.filename().string() + ": need an id column and values");
    const std::size_t width = t.header.size() - 1;
    std::vector<double> values;
    values.reserve((lines.size() - 1) * width);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split(lines[r]);
        if (fields.size() != t.header.size()) {
            throw DataError(path.filename().string() + " row " + std::to_string(r + 1) + ": " +
                            std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(t.header.size()));
        }
        if (fields[0].empty()) throw DataError(where(path, r + 1, 1) + ": empty id");
        t.ids.emplace_back(fields[0]);
        for (std::size_t c = 1; c < fields.size(); ++c) values.push_back(parse_value(fields[c], path, r + 1, c + 1));
    }
    t.values = nn::Matrix(t.ids.size(), width, std::move(values));
    return t;
}

void write_id_table(const fs::path& path, const std::string& id_column, const std::string& prefix,
                    const std::vector<std::string>& ids, const nn::Matrix& values) {
    if (ids.size() != values.rows()) throw ContractError("write_id_table: id count does not match rows");
    std::string out = id_column;
    for (std::size_t c = 0; c < values.cols(); ++c) out += "," + prefix + std::to_string(c);
    out += '\n';
    for (std::size_t r = 0; r < values.rows(); ++r) {
        out += ids[r];
        for (double v : values.row(r)) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    write_file(path, out);
}

Manifest read_manifest(const fs::path& dir) {
    const fs::path path = dir / kManifestFile;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest.json: ") + e.what());
    }
    return j.get<Manifest>();
}

Dataset load_csv(const fs::path& dir) {
    const Manifest m = read_manifest(dir);
    Dataset ds;
    ds.provenance = m.provenance;
    ds.smiles_dim = m.smiles_dim;
    ds.ip_dim = m.ip_dim;
    ds.bio_dim = m.bio_dim;
    ds.bio_continuous = m.bio_continuous;

    const fs::path drugs_path = dir / kDrugsFile;
    const IdTable drugs = read_id_table(drugs_path);
    expect_header(drugs, drugs_path, "drug_id", "e", m.smiles_dim);
    std::unordered_map<std::string, std::size_t> drug_index;
    for (std::size_t r = 0; r < drugs.ids.size(); ++r) {
        if (!drug_index.emplace(drugs.ids[r], r).second) {
            throw DataError(where(drugs_path, r + 2, 1) + ": duplicate drug id '" + drugs.ids[r] + "'");
        }
        auto row = drugs.values.row(r);
        ds.drugs.push_back({drugs.ids[r], {row.begin(), row.end()}, std::nullopt, std::nullopt});
    }

    const fs::path profiles_path = dir / kProfilesFile;
    const IdTable profiles = read_id_table(profiles_path);
    expect_header(profiles, profiles_path, "drug_id", "k", m.ip_dim);
    for (std::size_t r = 0; r < profiles.ids.size(); ++r) {
        auto it = drug_index.find(profiles.ids[r]);
        if (it == drug_index.end()) {
            throw DataError(where(profiles_path, r + 2, 1) + ": unknown drug id '" + profiles.ids[r] + "'");
        }
        auto& slot = ds.drugs[it->second].inhibition_profile;
        if (slot) throw DataError(where(profiles_path, r + 2, 1) + ": duplicate profile for '" + profiles.ids[r] + "'");
        auto row = profiles.values.row(r);
        slot = std::vector<double>(row.begin(), row.end());
    }

    const fs::path cells_path = dir / kCellsFile;
    const IdTable cells = read_id_table(cells_path);
    expect_header(cells, cells_path, "cell_id", "f", m.bio_dim);
    std::unordered_map<std::string, std::size_t> cell_index;
    for (std::size_t r = 0; r < cells.ids.size(); ++r) {
        if (!cell_index.emplace(cells.ids[r], r).second) {
            throw DataError(where(cells_path, r + 2, 1) + ": duplicate cell id '" + cells.ids[r] + "'");
        }
        auto row = cells.values.row(r);
        ds.cells.push_back({cells.ids[r], {row.begin(), row.end()}});
    }

    const fs::path ic50_path = dir / kIc50File;
    const auto lines = read_lines(ic50_path);
    const auto header = split(lines.front());
    if (header.size() != 3 || header[0] != "drug_id" || header[1] != "cell_id" || header[2] != "ic50") {
        throw DataError("ic50.csv: header must be 'drug_id,cell_id,ic50'");
    }
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto f = split(lines[r]);
        if (f.size() != 3) {
            throw DataError("ic50.csv row " + std::to_string(r + 1) + ": " + std::to_string(f.size()) +
                            " fields, expected 3");
        }
        auto d = drug_index.find(std::string(f[0]));
        if (d == drug_index.end()) {
            throw DataError(where(ic50_path, r + 1, 1) + ": unknown drug id '" + std::string(f[0]) + "'");
        }
        auto c = cell_index.find(std::string(f[1]));
        if (c == cell_index.end()) {
            throw DataError(where(ic50_path, r + 1, 2) + ": unknown cell id '" + std::string(f[1]) + "'");
        }
        const double v = parse_value(f[2], ic50_path, r + 1, 3);
        try {
            ds.sensitivities.add(d->second, c->second, v);
        } catch (const DataError& e) {
            throw DataError(where(ic50_path, r + 1, 1) + ": " + e.what());
        }
    }

    const Manifest found = Manifest::describe(ds);
    auto check = [](const char* what, std::size_t manifest, std::size_t actual) {
        if (manifest != actual) {
            throw DataError(std::string("manifest ") + what + " is " + std::to_string(manifest) + ", files have " +
                            std::to_string(actual));
        }
    };
    check("n_drugs", m.n_drugs, found.n_drugs);
    check("n_profiled", m.n_profiled, found.n_profiled);
    check("n_cells", m.n_cells, found.n_cells);
    check("n_pairs", m.n_pairs, found.n_pairs);
    ds.validate();
    return ds;
}

void save_csv(const Dataset& dataset, const fs::path& dir, const Manifest* manifest) {
    dataset.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

    std::vector<std::string> ids;
    for (const auto& d : dataset.drugs) ids.push_back(d.id);
    write_id_table(dir / kDrugsFile, "drug_id", "e", ids, dataset.smiles_matrix());

    auto [profiles, rows] = dataset.profile_matrix();
    std::vector<std::string> profile_ids;
    for (std::size_t i : rows) profile_ids.push_back(dataset.drugs[i].id);
    write_id_table(dir / kProfilesFile, "drug_id", "k", profile_ids, profiles);

    std::vector<std::string> cell_ids;
    for (const auto& c : dataset.cells) cell_ids.push_back(c.id);
    write_id_table(dir / kCellsFile, "cell_id", "f", cell_ids, dataset.cell_matrix());

    std::string out = "drug_id,cell_id,ic50\n";
    for (const auto& [key, value] : dataset.sensitivities.entries()) {
        out += dataset.drugs[key.first].id + ',' + dataset.cells[key.second].id + ',' + format_double(value) + '\n';
    }
    write_file(dir / kIc50File, out);

    Manifest m = manifest ? *manifest : Manifest::describe(dataset);
    write_file(dir / kManifestFile, nlohmann::json(m).dump(2) + "\n");
}

}  // namespace vadeers::data
