#include "vadeers/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "vadeers/error.hpp"

namespace vadeers::data {
namespace {

std::string make_id(char prefix, std::size_t i, std::size_t count) {
    const int width = std::max(4, static_cast<int>(std::to_string(count).size()));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
    return buf;
}

nn::Matrix gaussian(std::size_t rows, std::size_t cols, double sd, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    nn::Matrix m(rows, cols);
    for (double& x : m.data()) x = sd * n(rng);
    return m;
}

/// y = M x for a column vector x given as a span.
std::vector<double> map_vector(const nn::Matrix& m, std::span<const double> x) {
    std::vector<double> y(m.rows(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) y[r] += m(r, c) * x[c];
    }
    return y;
}

}  // namespace

void SyntheticSpec::validate() const {
    auto fail = [](const std::string& msg) { throw ContractError("synthetic spec: " + msg); };
    if (n_drugs == 0 || n_cells == 0) fail("need at least one drug and one cell line");
    if (n_profiled > n_drugs) fail("n_profiled exceeds n_drugs");
    if (!(observance > 0.0 && observance <= 1.0)) fail("observance must be in (0, 1]");
    if (smiles_dim == 0 || ip_dim == 0 || bio_dim() == 0) fail("feature widths must be positive");
    if (clusters == 0) fail("clusters must be positive");
    if (drug_factor_dim == 0 || cell_factor_dim == 0) fail("factor dims must be positive");
    for (double v : {cluster_separation, within_cluster_spread, embedding_noise, ip_center_spread, ip_within,
                     ip_noise, expression_noise, mutation_noise, cluster_effect, drug_effect, interaction_scale,
                     ic50_noise}) {
        if (!(v >= 0.0) || !std::isfinite(v)) fail("scales must be finite and non-negative");
    }
    if (!std::isfinite(ip_base)) fail("ip_base must be finite");
}

SyntheticSpec SyntheticSpec::desk() { return SyntheticSpec{}; }

SyntheticSpec SyntheticSpec::paper() {
    SyntheticSpec s;
    s.n_drugs = 304;
    s.n_profiled = 117;
    s.n_cells = 922;
    s.smiles_dim = 300;
    s.ip_dim = 294;
    s.n_expression = 202;
    s.n_mutation = 21;
    s.n_tissue = 18;
    s.drug_factor_dim = 10;
    s.cell_factor_dim = 10;
    return s;
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    j = nlohmann::json{{"n_drugs", s.n_drugs},
                       {"n_profiled", s.n_profiled},
                       {"n_cells", s.n_cells},
                       {"observance", s.observance},
                       {"smiles_dim", s.smiles_dim},
                       {"ip_dim", s.ip_dim},
                       {"n_expression", s.n_expression},
                       {"n_mutation", s.n_mutation},
                       {"n_tissue", s.n_tissue},
                       {"clusters", s.clusters},
                       {"drug_factor_dim", s.drug_factor_dim},
                       {"cell_factor_dim", s.cell_factor_dim},
                       {"cluster_separation", s.cluster_separation},
                       {"within_cluster_spread", s.within_cluster_spread},
                       {"embedding_noise", s.embedding_noise},
                       {"ip_base", s.ip_base},
                       {"ip_center_spread", s.ip_center_spread},
                       {"ip_within", s.ip_within},
                       {"ip_noise", s.ip_noise},
                       {"expression_noise", s.expression_noise},
                       {"mutation_noise", s.mutation_noise},
                       {"cluster_effect", s.cluster_effect},
                       {"drug_effect", s.drug_effect},
                       {"interaction_scale", s.interaction_scale},
                       {"ic50_noise", s.ic50_noise},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    const SyntheticSpec d = s;
    s.n_drugs = j.value("n_drugs", d.n_drugs);
    s.n_profiled = j.value("n_profiled", d.n_profiled);
    s.n_cells = j.value("n_cells", d.n_cells);
    s.observance = j.value("observance", d.observance);
    s.smiles_dim = j.value("smiles_dim", d.smiles_dim);
    s.ip_dim = j.value("ip_dim", d.ip_dim);
    s.n_expression = j.value("n_expression", d.n_expression);
    s.n_mutation = j.value("n_mutation", d.n_mutation);
    s.n_tissue = j.value("n_tissue", d.n_tissue);
    s.clusters = j.value("clusters", d.clusters);
    s.drug_factor_dim = j.value("drug_factor_dim", d.drug_factor_dim);
    s.cell_factor_dim = j.value("cell_factor_dim", d.cell_factor_dim);
    s.cluster_separation = j.value("cluster_separation", d.cluster_separation);
    s.within_cluster_spread = j.value("within_cluster_spread", d.within_cluster_spread);
    s.embedding_noise = j.value("embedding_noise", d.embedding_noise);
    s.ip_base = j.value("ip_base", d.ip_base);
    s.ip_center_spread = j.value("ip_center_spread", d.ip_center_spread);
    s.ip_within = j.value("ip_within", d.ip_within);
    s.ip_noise = j.value("ip_noise", d.ip_noise);
    s.expression_noise = j.value("expression_noise", d.expression_noise);
    s.mutation_noise = j.value("mutation_noise", d.mutation_noise);
    s.cluster_effect = j.value("cluster_effect", d.cluster_effect);
    s.drug_effect = j.value("drug_effect", d.drug_effect);
    s.interaction_scale = j.value("interaction_scale", d.interaction_scale);
    s.ic50_noise = j.value("ic50_noise", d.ic50_noise);
    s.seed = j.value("seed", d.seed);
}

double SyntheticData::ic50_mean(std::size_t drug, std::span<const double> cell_factor) const {
    if (drug >= drug_factors.rows() || cell_factor.size() != interaction.cols()) {
        throw ContractError("ic50_mean: drug index or cell factor width out of range");
    }
    double bilinear = 0.0;
    auto u = drug_factors.row(drug);
    for (std::size_t a = 0; a < interaction.rows(); ++a) {
        for (std::size_t b = 0; b < interaction.cols(); ++b) bilinear += u[a] * interaction(a, b) * cell_factor[b];
    }
    return cluster_offsets[planted_labels[drug]] + drug_offsets[drug] + bilinear;
}

Manifest SyntheticData::manifest() const {
    Manifest m = Manifest::describe(dataset);
    m.seed = spec.seed;
    m.generator = spec;
    return m;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t F = spec.drug_factor_dim;
    const std::size_t Fc = spec.cell_factor_dim;
    const std::size_t G = spec.clusters;

    SyntheticData out;
    out.spec = spec;

    // Fixed maps shared by all drugs / cells.
    const nn::Matrix centers = gaussian(G, F, spec.cluster_separation, rng);
    const nn::Matrix embed_map = gaussian(spec.smiles_dim, F, 1.0 / std::sqrt(static_cast<double>(F)), rng);
    const nn::Matrix ip_map = gaussian(spec.ip_dim, F, 1.0 / std::sqrt(static_cast<double>(F)), rng);
    out.ip_centers = gaussian(G, spec.ip_dim, spec.ip_center_spread, rng);
    for (double& x : out.ip_centers.data()) x += spec.ip_base;
    const nn::Matrix expr_map = gaussian(spec.n_expression, Fc, 1.0 / std::sqrt(static_cast<double>(Fc)), rng);
    const nn::Matrix mut_map = gaussian(spec.n_mutation, Fc, 1.0 / std::sqrt(static_cast<double>(Fc)), rng);
    const nn::Matrix tissue_map = gaussian(spec.n_tissue, Fc, 1.0 / std::sqrt(static_cast<double>(Fc)), rng);
    const double u_scale = std::sqrt(spec.cluster_separation * spec.cluster_separation +
                                     spec.within_cluster_spread * spec.within_cluster_spread);
    out.interaction = gaussian(F, Fc,
                               spec.interaction_scale /
                                   (std::sqrt(static_cast<double>(F * Fc)) * (u_scale > 0.0 ? u_scale : 1.0)),
                               rng);
    out.cluster_offsets.resize(G);
    for (double& c : out.cluster_offsets) c = spec.cluster_effect * normal(rng);

    // Balanced cluster sizes in shuffled order, random profiled subset.
    out.planted_labels.resize(spec.n_drugs);
    for (std::size_t i = 0; i < spec.n_drugs; ++i) out.planted_labels[i] = i % G;
    std::shuffle(out.planted_labels.begin(), out.planted_labels.end(), rng);
    std::vector<std::size_t> order(spec.n_drugs);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> profiled(spec.n_drugs, false);
    for (std::size_t i = 0; i < spec.n_profiled; ++i) profiled[order[i]] = true;

    Dataset& ds = out.dataset;
    ds.provenance = Provenance::synthetic;
    ds.smiles_dim = spec.smiles_dim;
    ds.ip_dim = spec.ip_dim;
    ds.bio_dim = spec.bio_dim();
    ds.bio_continuous = spec.n_expression;

    out.drug_factors = nn::Matrix(spec.n_drugs, F);
    out.drug_offsets.resize(spec.n_drugs);
    for (std::size_t i = 0; i < spec.n_drugs; ++i) {
        const std::size_t g = out.planted_labels[i];
        std::vector<double> dev(F);
        for (double& x : dev) x = normal(rng);
        auto u = out.drug_factors.row(i);
        for (std::size_t a = 0; a < F; ++a) u[a] = centers(g, a) + spec.within_cluster_spread * dev[a];

        DrugRecord rec;
        rec.id = make_id('D', i, spec.n_drugs);
        rec.smiles_embedding = map_vector(embed_map, u);
        for (double& x : rec.smiles_embedding) x += spec.embedding_noise * normal(rng);

        const auto ip_dev = map_vector(ip_map, dev);
        std::vector<double> ip(spec.ip_dim);
        for (std::size_t k = 0; k < spec.ip_dim; ++k) {
            ip[k] = out.ip_centers(g, k) + spec.ip_within * ip_dev[k] + spec.ip_noise * normal(rng);
        }
        if (profiled[i]) rec.inhibition_profile = std::move(ip);
        out.drug_offsets[i] = spec.drug_effect * normal(rng);
        ds.drugs.push_back(std::move(rec));
    }

    out.cell_factors = nn::Matrix(spec.n_cells, Fc);
    for (std::size_t j = 0; j < spec.n_cells; ++j) {
        auto v = out.cell_factors.row(j);
        for (double& x : v) x = normal(rng);

        CellLineRecord rec;
        rec.id = make_id('C', j, spec.n_cells);
        rec.features.reserve(spec.bio_dim());
        for (double e : map_vector(expr_map, v)) rec.features.push_back(e + spec.expression_noise * normal(rng));
        for (double m : map_vector(mut_map, v)) rec.features.push_back(m + spec.mutation_noise * normal(rng) > 0.0 ? 1.0 : 0.0);
        if (spec.n_tissue > 0) {
            auto scores = map_vector(tissue_map, v);
            for (double& s : scores) s += normal(rng);
            const auto best = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
            for (std::size_t t = 0; t < spec.n_tissue; ++t) rec.features.push_back(t == best ? 1.0 : 0.0);
        }
        ds.cells.push_back(std::move(rec));
    }

    std::bernoulli_distribution keep(spec.observance);
    for (std::size_t i = 0; i < spec.n_drugs; ++i) {
        for (std::size_t j = 0; j < spec.n_cells; ++j) {
            const double noise = spec.ic50_noise * normal(rng);
            if (spec.observance < 1.0 && !keep(rng)) continue;
            ds.sensitivities.add(i, j, out.ic50_mean(i, out.cell_factors.row(j)) + noise);
        }
    }
    ds.validate();
    return out;
}

}  // namespace vadeers::data
