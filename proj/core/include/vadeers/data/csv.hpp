#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vadeers/data/dataset.hpp"
#include "vadeers/nn/matrix.hpp"

// On-disk layout of a dataset directory:
//
//   drugs.csv     drug_id,e0,...,e{smiles_dim-1}
//   profiles.csv  drug_id,k0,...,k{ip_dim-1}        (profiled drugs only)
//   cells.csv     cell_id,f0,...,f{bio_dim-1}
//   ic50.csv      drug_id,cell_id,ic50
//   manifest.json dims, counts, provenance, generator settings
//
// Comma separated, header row required, '.' decimal point, no quoting.
namespace vadeers::data {

inline constexpr const char* kDrugsFile = "drugs.csv";
inline constexpr const char* kProfilesFile = "profiles.csv";
inline constexpr const char* kCellsFile = "cells.csv";
inline constexpr const char* kIc50File = "ic50.csv";
inline constexpr const char* kManifestFile = "manifest.json";

/// Shortest text that parses back to the same double.
std::string format_double(double value);

/// A parsed id-keyed numeric table.
struct IdTable {
    std::vector<std::string> header;
    std::vector<std::string> ids;
    nn::Matrix values;
};

/// Reads `id,c0,...` rows. Every value must parse as a finite double; the
/// error names file, row (1-based, header is row 1) and column.
IdTable read_id_table(const std::filesystem::path& path);
void write_id_table(const std::filesystem::path& path, const std::string& id_column, const std::string& prefix,
                    const std::vector<std::string>& ids, const nn::Matrix& values);

/// Loads a dataset directory and checks it against its manifest. DataError on
/// any violation.
Dataset load_csv(const std::filesystem::path& dir);
/// Writes the four CSV files and the manifest. `manifest` overrides the
/// derived one when supplied (generator metadata).
void save_csv(const Dataset& dataset, const std::filesystem::path& dir, const Manifest* manifest = nullptr);

Manifest read_manifest(const std::filesystem::path& dir);

}  // namespace vadeers::data
