#include "vadeers/data/dataset.hpp"

#include <bit>
#include <cmath>
#include <set>
#include <unordered_map>

#include "vadeers/error.hpp"

namespace vadeers::data {
namespace {

bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

class Fnv {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= b[i];
            h_ *= 0x100000001b3ULL;
        }
    }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    std::uint64_t value() const noexcept { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace

void SensitivityTable::add(std::size_t drug, std::size_t cell, double ic50) {
    if (!std::isfinite(ic50)) {
        throw DataError("IC50 for (" + std::to_string(drug) + ", " + std::to_string(cell) + ") is not finite");
    }
    if (!entries_.emplace(Key{drug, cell}, ic50).second) {
        throw DataError("duplicate IC50 entry for drug " + std::to_string(drug) + ", cell " + std::to_string(cell));
    }
}

std::optional<double> SensitivityTable::find(std::size_t drug, std::size_t cell) const {
    auto it = entries_.find({drug, cell});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string to_string(Provenance p) { return p == Provenance::synthetic ? "synthetic" : "csv"; }

Provenance parse_provenance(const std::string& text) {
    if (text == "synthetic") return Provenance::synthetic;
    if (text == "csv") return Provenance::csv;
    throw DataError("unknown provenance '" + text + "'");
}

std::size_t Dataset::profiled_count() const {
    std::size_t n = 0;
    for (const auto& d : drugs) n += d.inhibition_profile.has_value();
    return n;
}

std::size_t Dataset::labeled_count() const {
    std::size_t n = 0;
    for (const auto& d : drugs) n += d.guiding_label.has_value();
    return n;
}

std::optional<std::size_t> Dataset::find_drug(const std::string& id) const {
    for (std::size_t i = 0; i < drugs.size(); ++i) {
        if (drugs[i].id == id) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> Dataset::find_cell(const std::string& id) const {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].id == id) return i;
    }
    return std::nullopt;
}

void Dataset::validate() const {
    if (smiles_dim == 0 || ip_dim == 0 || bio_dim == 0) throw DataError("dataset dims must be positive");
    if (bio_continuous > bio_dim) {
        throw DataError("continuous cell columns " + std::to_string(bio_continuous) + " exceed bio_dim " +
                        std::to_string(bio_dim));
    }
    std::set<std::string> seen;
    for (std::size_t i = 0; i < drugs.size(); ++i) {
        const auto& d = drugs[i];
        if (!seen.insert(d.id).second) throw DataError("duplicate drug id '" + d.id + "'");
        if (d.smiles_embedding.size() != smiles_dim) {
            throw DataError("drug '" + d.id + "': embedding width " + std::to_string(d.smiles_embedding.size()) +
                            ", expected " + std::to_string(smiles_dim));
        }
        if (!all_finite(d.smiles_embedding)) throw DataError("drug '" + d.id + "': non-finite embedding");
        if (d.inhibition_profile) {
            if (d.inhibition_profile->size() != ip_dim) {
                throw DataError("drug '" + d.id + "': profile width " +
                                std::to_string(d.inhibition_profile->size()) + ", expected " +
                                std::to_string(ip_dim));
            }
            if (!all_finite(*d.inhibition_profile)) throw DataError("drug '" + d.id + "': non-finite profile");
        } else if (d.guiding_label) {
            throw DataError("drug '" + d.id + "' has a guiding label but no inhibition profile");
        }
    }
    seen.clear();
    for (const auto& c : cells) {
        if (!seen.insert(c.id).second) throw DataError("duplicate cell id '" + c.id + "'");
        if (c.features.size() != bio_dim) {
            throw DataError("cell '" + c.id + "': feature width " + std::to_string(c.features.size()) +
                            ", expected " + std::to_string(bio_dim));
        }
        if (!all_finite(c.features)) throw DataError("cell '" + c.id + "': non-finite features");
        for (std::size_t k = bio_continuous; k < bio_dim; ++k) {
            if (c.features[k] != 0.0 && c.features[k] != 1.0) {
                throw DataError("cell '" + c.id + "': binary column " + std::to_string(k) + " holds " +
                                std::to_string(c.features[k]));
            }
        }
    }
    for (const auto& [key, value] : sensitivities.entries()) {
        if (key.first >= drugs.size() || key.second >= cells.size()) {
            throw DataError("IC50 entry (" + std::to_string(key.first) + ", " + std::to_string(key.second) +
                            ") references a missing record");
        }
        if (!std::isfinite(value)) throw DataError("non-finite IC50 value");
    }
}

nn::Matrix Dataset::smiles_matrix() const {
    nn::Matrix m(drugs.size(), smiles_dim);
    for (std::size_t i = 0; i < drugs.size(); ++i) {
        std::copy(drugs[i].smiles_embedding.begin(), drugs[i].smiles_embedding.end(), m.row(i).begin());
    }
    return m;
}

std::pair<nn::Matrix, std::vector<std::size_t>> Dataset::profile_matrix() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < drugs.size(); ++i) {
        if (drugs[i].inhibition_profile) idx.push_back(i);
    }
    nn::Matrix m(idx.size(), ip_dim);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& p = *drugs[idx[r]].inhibition_profile;
        std::copy(p.begin(), p.end(), m.row(r).begin());
    }
    return {std::move(m), std::move(idx)};
}

nn::Matrix Dataset::cell_matrix() const {
    nn::Matrix m(cells.size(), bio_dim);
    for (std::size_t j = 0; j < cells.size(); ++j) {
        std::copy(cells[j].features.begin(), cells[j].features.end(), m.row(j).begin());
    }
    return m;
}

std::uint64_t fingerprint(const Dataset& dataset) {
    Fnv h;
    h.u64(dataset.smiles_dim);
    h.u64(dataset.ip_dim);
    h.u64(dataset.bio_dim);
    h.u64(dataset.bio_continuous);
    h.u64(dataset.drugs.size());
    for (const auto& d : dataset.drugs) {
        h.str(d.id);
        for (double v : d.smiles_embedding) h.f64(v);
        h.u64(d.inhibition_profile.has_value());
        if (d.inhibition_profile) {
            for (double v : *d.inhibition_profile) h.f64(v);
        }
    }
    h.u64(dataset.cells.size());
    for (const auto& c : dataset.cells) {
        h.str(c.id);
        for (double v : c.features) h.f64(v);
    }
    h.u64(dataset.sensitivities.size());
    for (const auto& [key, value] : dataset.sensitivities.entries()) {
        h.u64(key.first);
        h.u64(key.second);
        h.f64(value);
    }
    return h.value();
}

Manifest Manifest::describe(const Dataset& dataset) {
    Manifest m;
    m.smiles_dim = dataset.smiles_dim;
    m.ip_dim = dataset.ip_dim;
    m.bio_dim = dataset.bio_dim;
    m.bio_continuous = dataset.bio_continuous;
    m.n_drugs = dataset.drugs.size();
    m.n_profiled = dataset.profiled_count();
    m.n_cells = dataset.cells.size();
    m.n_pairs = dataset.sensitivities.size();
    m.provenance = dataset.provenance;
    return m;
}

void to_json(nlohmann::json& j, const Manifest& m) {
    j = nlohmann::json{{"format", "vadeers-dataset"},
                       {"version", 1},
                       {"smiles_dim", m.smiles_dim},
                       {"ip_dim", m.ip_dim},
                       {"bio_dim", m.bio_dim},
                       {"bio_continuous", m.bio_continuous},
                       {"n_drugs", m.n_drugs},
                       {"n_profiled", m.n_profiled},
                       {"n_cells", m.n_cells},
                       {"n_pairs", m.n_pairs},
                       {"provenance", to_string(m.provenance)},
                       {"generator", m.generator}};
    if (m.seed) j["seed"] = *m.seed;
}

void from_json(const nlohmann::json& j, Manifest& m) {
    try {
        if (j.value("version", 0) != 1) throw DataError("unsupported manifest version");
        j.at("smiles_dim").get_to(m.smiles_dim);
        j.at("ip_dim").get_to(m.ip_dim);
        j.at("bio_dim").get_to(m.bio_dim);
        m.bio_continuous = j.value("bio_continuous", m.bio_dim);
        j.at("n_drugs").get_to(m.n_drugs);
        j.at("n_profiled").get_to(m.n_profiled);
        j.at("n_cells").get_to(m.n_cells);
        j.at("n_pairs").get_to(m.n_pairs);
        m.provenance = parse_provenance(j.value("provenance", std::string("csv")));
        if (j.contains("seed")) {
            m.seed = j.at("seed").get<std::uint64_t>();
        } else {
            m.seed.reset();
        }
        m.generator = j.value("generator", nlohmann::json());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest: ") + e.what());
    }
}

}  // namespace vadeers::data
