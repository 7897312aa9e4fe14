#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vadeers/gmm/prior.hpp"
#include "vadeers/nn/matrix.hpp"

namespace vadeers::data {

struct DrugRecord {
    std::string id;
    std::vector<double> smiles_embedding;
    /// Percent-of-control inhibition values across the kinase panel.
    std::optional<std::vector<double>> inhibition_profile;
    gmm::GuidingLabel guiding_label;

    bool operator==(const DrugRecord&) const = default;
};

/// Feature layout: the first `continuous` columns are expression values,
/// the rest are binary (mutation calls, one-hot tissue).
struct CellLineRecord {
    std::string id;
    std::vector<double> features;

    bool operator==(const CellLineRecord&) const = default;
};

/// Sparse drug x cell-line log-IC50 table keyed by record indices. Key
/// presence is the observation mask.
class SensitivityTable {
public:
    using Key = std::pair<std::size_t, std::size_t>;

    /// DataError on duplicate key or non-finite value.
    void add(std::size_t drug, std::size_t cell, double ic50);
    std::optional<double> find(std::size_t drug, std::size_t cell) const;
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    /// Ordered by (drug, cell).
    const std::map<Key, double>& entries() const noexcept { return entries_; }

    bool operator==(const SensitivityTable&) const = default;

private:
    std::map<Key, double> entries_;
};

enum class Provenance { synthetic, csv };

std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& text);

struct Dataset {
    std::vector<DrugRecord> drugs;
    std::vector<CellLineRecord> cells;
    SensitivityTable sensitivities;
    Provenance provenance = Provenance::synthetic;

    std::size_t smiles_dim = 0;
    std::size_t ip_dim = 0;
    std::size_t bio_dim = 0;
    /// Leading continuous columns of every cell feature vector.
    std::size_t bio_continuous = 0;

    std::size_t profiled_count() const;
    std::size_t labeled_count() const;
    std::optional<std::size_t> find_drug(const std::string& id) const;
    std::optional<std::size_t> find_cell(const std::string& id) const;

    /// Checks widths, finiteness, binary ranges, unique ids, table indices and
    /// that labels only sit on profiled drugs. Throws DataError.
    void validate() const;

    /// Rows of all drug embeddings (N x smiles_dim).
    nn::Matrix smiles_matrix() const;
    /// Profile rows of profiled drugs in drug order, with their drug indices.
    std::pair<nn::Matrix, std::vector<std::size_t>> profile_matrix() const;
    nn::Matrix cell_matrix() const;

    bool operator==(const Dataset&) const = default;
};

/// Stable 64-bit content hash (ids, values, layout). Guiding labels excluded.
std::uint64_t fingerprint(const Dataset& dataset);

/// Shape summary written next to the CSV files.
struct Manifest {
    std::size_t smiles_dim = 0;
    std::size_t ip_dim = 0;
    std::size_t bio_dim = 0;
    std::size_t bio_continuous = 0;
    std::size_t n_drugs = 0;
    std::size_t n_profiled = 0;
    std::size_t n_cells = 0;
    std::size_t n_pairs = 0;
    Provenance provenance = Provenance::csv;
    std::optional<std::uint64_t> seed;
    nlohmann::json generator;  // null unless synthetic

    static Manifest describe(const Dataset& dataset);
    bool operator==(const Manifest&) const = default;
};

void to_json(nlohmann::json& j, const Manifest& m);
void from_json(const nlohmann::json& j, Manifest& m);

}  // namespace vadeers::data
