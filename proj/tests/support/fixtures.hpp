#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "vadeers/data/synthetic.hpp"
#include "vadeers/gmm/prior.hpp"
#include "vadeers/model/losses.hpp"
#include "vadeers/model/vadeers.hpp"
#include "vadeers/train/run_log.hpp"

namespace fixture {

namespace fs = std::filesystem;
using vadeers::Rng;
using vadeers::nn::Matrix;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = normal(rng);
    return m;
}

/// Small network (all widths <= 8) used for gradient checks and quick runs.
inline vadeers::model::ModelConfig toy_config(vadeers::model::PriorVariant variant) {
    vadeers::model::ModelConfig c;
    c.smiles_dim = 6;
    c.ip_dim = 5;
    c.bio_dim = 7;
    c.latent_dim = 3;
    c.encoder_dims = {8, 6};
    c.decoder_dims = {6, 8};
    c.dspn_dims = {8, 6, 4};
    c.components = 3;
    c.guiding_labels = 2;
    c.prior = variant;
    return c;
}

inline const vadeers::model::PriorVariant kVariants[] = {vadeers::model::PriorVariant::vanilla,
                                                         vadeers::model::PriorVariant::gmm_constrained,
                                                         vadeers::model::PriorVariant::gmm_unconstrained};

/// Four drugs: labeled with profile, unlabeled with profile, unlabeled without,
/// labeled with profile (label 1).
inline vadeers::model::DrugBatch toy_drugs(const vadeers::model::ModelConfig& c, Rng& rng) {
    vadeers::model::DrugBatch b;
    b.smiles = random_matrix(4, c.smiles_dim, rng);
    b.ip = random_matrix(4, c.ip_dim, rng);
    b.has_ip = {true, true, false, true};
    b.labels = {0, std::nullopt, std::nullopt, 1};
    return b;
}

/// 4 drugs x 3 cells, two pairs unobserved.
inline vadeers::model::PairBatch toy_pairs(const vadeers::model::ModelConfig& c, Rng& rng) {
    vadeers::model::PairBatch p;
    p.drugs = toy_drugs(c, rng);
    p.cells = random_matrix(3, c.bio_dim, rng);
    std::normal_distribution<double> normal;
    for (std::size_t d = 0; d < 4; ++d) {
        for (std::size_t k = 0; k < 3; ++k) {
            p.entries.push_back({d, k, normal(rng), (d + k) % 5 != 1});
        }
    }
    return p;
}

inline vadeers::gmm::GmmParams random_gmm(std::size_t k, std::size_t d, Rng& rng, bool constrained = false) {
    vadeers::gmm::GmmParams p;
    p.mixture_logits = random_matrix(1, k, rng);
    p.means = random_matrix(k, d, rng, 2.0);
    p.log_scales = constrained ? Matrix(k, d) : random_matrix(k, d, rng, 0.3);
    p.constrained = constrained;
    return p;
}

/// Zero biases put ReLU inputs exactly on the kink whenever dropout empties a
/// row, which breaks central differences; small random biases avoid that.
inline void jitter_biases(vadeers::model::Vadeers& m, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 0.1);
    for (vadeers::nn::ParamId id = 0; id < m.params().size(); ++id) {
        if (m.params().name(id).ends_with(".bias")) {
            for (auto& v : m.params().value(id).data()) v = normal(rng);
        }
    }
}

/// Desk-sized synthetic spec shrunk further for sub-second generation.
inline vadeers::data::SyntheticSpec small_spec(std::uint64_t seed = 0) {
    vadeers::data::SyntheticSpec s;
    s.n_drugs = 30;
    s.n_profiled = 18;
    s.n_cells = 40;
    s.smiles_dim = 8;
    s.ip_dim = 6;
    s.n_expression = 5;
    s.n_mutation = 2;
    s.n_tissue = 2;
    s.drug_factor_dim = 3;
    s.cell_factor_dim = 3;
    s.seed = seed;
    return s;
}

/// Model sized for `small_spec` data.
inline vadeers::model::ModelConfig small_model(vadeers::model::PriorVariant variant) {
    vadeers::model::ModelConfig c;
    c.smiles_dim = 8;
    c.ip_dim = 6;
    c.bio_dim = 9;
    c.latent_dim = 4;
    c.encoder_dims = {16, 8};
    c.decoder_dims = {8, 16};
    c.dspn_dims = {16, 8, 8};
    c.prior = variant;
    return c;
}

inline vadeers::train::TrainSchedule short_schedule(std::size_t joint, std::size_t dspn, std::uint64_t seed = 0) {
    vadeers::train::TrainSchedule s;
    s.joint_epochs = joint;
    s.dspn_epochs = dspn;
    s.batch_size = 32;
    s.dvae_break_every_steps = 20;
    s.dvae_break_epochs = 2;
    s.dspn_decay_every = 2;
    s.seed = seed;
    return s;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<unsigned> counter{0};
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("vadeers-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

}  // namespace fixture
