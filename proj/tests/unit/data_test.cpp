#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vadeers/data/csv.hpp"
#include "vadeers/data/kmeans.hpp"
#include "vadeers/data/scaler.hpp"
#include "vadeers/error.hpp"
#include "vadeers/eval/metrics.hpp"

using namespace vadeers;
using nn::Matrix;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// 3 drugs (2 profiled), 2 cells (2 expression + 1 mutation column), 4 pairs.
data::Dataset minimal_dataset() {
    data::Dataset ds;
    ds.provenance = data::Provenance::csv;
    ds.smiles_dim = 2;
    ds.ip_dim = 2;
    ds.bio_dim = 3;
    ds.bio_continuous = 2;
    ds.drugs = {{"d1", {0.5, -1.25}, std::vector<double>{80, 12.5}, std::nullopt},
                {"d2", {1.0, 2.0}, std::nullopt, std::nullopt},
                {"d3", {-3.0, 0.125}, std::vector<double>{55, 61}, std::nullopt}};
    ds.cells = {{"c1", {0.1, 0.2, 1.0}}, {"c2", {-0.4, 1.5, 0.0}}};
    ds.sensitivities.add(0, 0, 1.5);
    ds.sensitivities.add(0, 1, -0.25);
    ds.sensitivities.add(1, 1, 2.0);
    ds.sensitivities.add(2, 0, 0.75);
    return ds;
}

void write_minimal(const fs::path& dir, const std::string& ic50_body) {
    write_text(dir / "drugs.csv", "drug_id,e0,e1\nd1,0.5,-1.25\nd2,1,2\nd3,-3,0.125\n");
    write_text(dir / "profiles.csv", "drug_id,k0,k1\nd1,80,12.5\nd3,55,61\n");
    write_text(dir / "cells.csv", "cell_id,f0,f1,f2\nc1,0.1,0.2,1\nc2,-0.4,1.5,0\n");
    write_text(dir / "ic50.csv", "drug_id,cell_id,ic50\n" + ic50_body);
    write_text(dir / "manifest.json", nlohmann::json(data::Manifest::describe(minimal_dataset())).dump(2));
}

const char* kMinimalIc50 = "d1,c1,1.5\nd1,c2,-0.25\nd2,c2,2\nd3,c1,0.75\n";

std::string error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const DataError& e) {
        return e.what();
    }
    return "<no DataError>";
}

/// Share of labels that agree under the best relabelling of `a`.
double best_permutation_agreement(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                                  std::size_t clusters) {
    std::vector<std::size_t> perm(clusters);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < a.size(); ++i) hits += perm[a[i]] == b[i];
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(a.size());
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("kmeans on two separated pairs") {
    const Matrix pts = Matrix::from_rows({{0, 0}, {10, 0}, {0, 1}, {10, 1}});
    const auto r = data::kmeans(pts, 2, 1);
    CHECK(r.labels[0] == r.labels[2]);
    CHECK(r.labels[1] == r.labels[3]);
    CHECK(r.labels[0] != r.labels[1]);
    CHECK(r.inertia == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("kmeans with one point per cluster") {
    Rng rng(2);
    const Matrix pts = fixture::random_matrix(5, 3, rng);
    const auto r = data::kmeans(pts, 5, 3);
    CHECK(r.inertia == 0.0);
    CHECK(std::set<std::size_t>(r.labels.begin(), r.labels.end()).size() == 5);
}

TEST_CASE("kmeans reaches the exhaustive optimum on small instances") {
    Rng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 6 + trial % 3;
        const std::size_t g = 2 + trial % 2;
        const Matrix pts = fixture::random_matrix(n, 2, rng);
        const auto r = data::kmeans(pts, g, static_cast<std::uint64_t>(trial));
        const double best = oracle::exhaustive_kmeans_inertia(pts, g);
        INFO("trial " << trial);
        CHECK(r.inertia == doctest::Approx(best).epsilon(1e-9));
        CHECK(data::inertia(pts, r.labels, r.centroids) == doctest::Approx(r.inertia).epsilon(1e-12));
    }
}

TEST_CASE("kmeans inertia never rises and labels are seed-deterministic") {
    Rng rng(4);
    const Matrix pts = fixture::random_matrix(200, 4, rng);
    const auto r = data::kmeans(pts, 5, 9);
    REQUIRE_FALSE(r.inertia_history.empty());
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
        CHECK(r.inertia_history[i] <= r.inertia_history[i - 1]);
    CHECK(data::kmeans(pts, 5, 9).labels == r.labels);
    CHECK(r.iterations <= 300);
}

TEST_CASE("kmeans preconditions and duplicate points") {
    CHECK_THROWS_AS(data::kmeans(Matrix(2, 2), 3, 0), ContractError);
    CHECK_THROWS_AS(data::kmeans(Matrix(2, 2), 0, 0), ContractError);
    const Matrix dup = Matrix::from_rows({{1, 1}, {1, 1}, {1, 1}, {1, 1}, {5, 5}});
    const auto r = data::kmeans(dup, 3, 0);
    CHECK(r.inertia == 0.0);
    CHECK(r.labels.size() == 5);
}

TEST_CASE("guiding labels at the original screen's shapes") {
    auto syn = data::generate_synthetic(data::SyntheticSpec::paper());
    CHECK(syn.dataset.drugs.size() == 304);
    CHECK(syn.dataset.profiled_count() == 117);
    CHECK(syn.dataset.cells.size() == 922);
    CHECK(syn.dataset.bio_dim == 241);
    const auto report = data::derive_guiding_labels(syn.dataset, 3, 0);
    CHECK(syn.dataset.labeled_count() == 117);
    CHECK(report.labeled_drugs.size() == 117);
    for (const auto& d : syn.dataset.drugs) {
        if (!d.inhibition_profile) CHECK_FALSE(d.guiding_label.has_value());
        if (d.guiding_label) CHECK(*d.guiding_label < 3);
    }
}

TEST_CASE("derived labels recover planted clusters") {
    for (std::uint64_t seed : {0, 1, 2}) {
        auto spec = data::SyntheticSpec::desk();
        spec.seed = seed;
        auto syn = data::generate_synthetic(spec);
        data::derive_guiding_labels(syn.dataset, 3, seed);
        std::vector<std::size_t> derived;
        std::vector<std::size_t> planted;
        for (std::size_t i = 0; i < syn.dataset.drugs.size(); ++i) {
            if (auto l = syn.dataset.drugs[i].guiding_label) {
                derived.push_back(*l);
                planted.push_back(syn.planted_labels[i]);
            }
        }
        CHECK(derived.size() == 60);
        CHECK(best_permutation_agreement(derived, planted, 3) > 0.95);
    }
}

TEST_CASE("identical profiles fill a single cluster with a warning") {
    auto syn = data::generate_synthetic(fixture::small_spec());
    for (auto& d : syn.dataset.drugs)
        if (d.inhibition_profile) std::fill(d.inhibition_profile->begin(), d.inhibition_profile->end(), 42.0);
    const auto report = data::derive_guiding_labels(syn.dataset, 3, 0);
    CHECK(report.occupied_clusters == 1);
    CHECK(report.warnings.size() == 1);
    CHECK(syn.dataset.labeled_count() == syn.dataset.profiled_count());
}

TEST_CASE("too few profiled drugs for the label count") {
    auto ds = minimal_dataset();
    CHECK_THROWS_AS(data::derive_guiding_labels(ds, 3, 0), DataError);
}

TEST_CASE("minimal fixture loads and round-trips") {
    fixture::TempDir dir("csv");
    write_minimal(dir.path(), kMinimalIc50);
    const auto loaded = data::load_csv(dir.path());
    CHECK(loaded == minimal_dataset());

    fixture::TempDir again("csv");
    data::save_csv(loaded, again.path());
    CHECK(data::load_csv(again.path()) == loaded);
    fixture::TempDir third("csv");
    data::save_csv(data::load_csv(again.path()), third.path());
    for (const char* f : {"drugs.csv", "profiles.csv", "cells.csv", "ic50.csv", "manifest.json"})
        CHECK(read_text(again / f) == read_text(third / f));
}

TEST_CASE("loader errors name the file and row") {
    fixture::TempDir dir("csv");
    write_minimal(dir.path(), "d1,c1,1.5\nd1,c2,-0.25\nd9,c2,2\nd3,c1,0.75\n");
    const auto unknown = error_of([&] { data::load_csv(dir.path()); });
    CHECK(unknown.find("ic50.csv row 4") != std::string::npos);
    CHECK(unknown.find("d9") != std::string::npos);

    write_minimal(dir.path(), "d1,c1,1.5\nd1,c2,abc\nd2,c2,2\nd3,c1,0.75\n");
    CHECK(error_of([&] { data::load_csv(dir.path()); }).find("row 3 col 3") != std::string::npos);

    write_minimal(dir.path(), "d1,c1,1.5\nd1,c2,nan\nd2,c2,2\nd3,c1,0.75\n");
    CHECK(error_of([&] { data::load_csv(dir.path()); }).find("non-finite") != std::string::npos);

    write_minimal(dir.path(), "d1,c1,1.5\nd1,c1,-0.25\nd2,c2,2\nd3,c1,0.75\n");
    CHECK(error_of([&] { data::load_csv(dir.path()); }).find("duplicate") != std::string::npos);

    write_minimal(dir.path(), kMinimalIc50);
    write_text(dir / "drugs.csv", "drug_id,e0,e1\nd1,0.5,-1.25\nd2,1,2\nd2,-3,0.125\n");
    CHECK(error_of([&] { data::load_csv(dir.path()); }).find("drugs.csv row 4") != std::string::npos);

    write_minimal(dir.path(), kMinimalIc50);
    write_text(dir / "cells.csv", "cell_id,f0,f1\nc1,0.1,0.2\nc2,-0.4,1.5\n");
    CHECK(error_of([&] { data::load_csv(dir.path()); }).find("cells.csv") != std::string::npos);

    write_minimal(dir.path(), kMinimalIc50);
    write_text(dir / "cells.csv", "cell_id,f0,f1,f2\nc1,0.1,0.2,inf\nc2,-0.4,1.5,0\n");
    CHECK_THROWS_AS(data::load_csv(dir.path()), DataError);

    write_minimal(dir.path(), kMinimalIc50);
    write_text(dir / "cells.csv", "cell_id,f0,f1,f2\nc1,0.1,0.2,0.5\nc2,-0.4,1.5,0\n");
    CHECK(error_of([&] { data::load_csv(dir.path()); }).find("binary") != std::string::npos);

    write_minimal(dir.path(), kMinimalIc50);
    fs::remove(dir / "manifest.json");
    CHECK_THROWS_AS(data::load_csv(dir.path()), DataError);

    write_minimal(dir.path(), "d1,c1,1.5\nd1,c2,-0.25\nd2,c2,2\n");
    CHECK(error_of([&] { data::load_csv(dir.path()); }).find("n_pairs") != std::string::npos);
}

TEST_CASE("synthetic export reloads exactly") {
    const auto syn = data::generate_synthetic(fixture::small_spec(4));
    fixture::TempDir dir("syn");
    const auto manifest = syn.manifest();
    data::save_csv(syn.dataset, dir.path(), &manifest);
    CHECK(data::load_csv(dir.path()) == syn.dataset);
    CHECK(data::read_manifest(dir.path()) == manifest);
    CHECK(data::fingerprint(data::load_csv(dir.path())) == data::fingerprint(syn.dataset));
}

TEST_CASE("format_double round-trips") {
    Rng rng(6);
    for (int i = 0; i < 1000; ++i) {
        const double v = fixture::random_matrix(1, 1, rng, 1e3)(0, 0) * std::pow(10.0, i % 40 - 20);
        CHECK(std::stod(data::format_double(v)) == v);
    }
}

TEST_CASE("standardization fitted on training cells") {
    const auto syn = data::generate_synthetic(data::SyntheticSpec::desk());
    const auto& ds = syn.dataset;
    std::vector<std::size_t> train_cells;
    for (std::size_t c = 0; c < ds.cells.size(); ++c)
        if (c % 3 != 0) train_cells.push_back(c);
    const auto st = data::standardize(ds, train_cells);

    auto column_check = [](const Matrix& rows, std::size_t cols) {
        for (std::size_t c = 0; c < cols; ++c) {
            double m = 0.0;
            for (std::size_t i = 0; i < rows.rows(); ++i) m += rows(i, c);
            m /= static_cast<double>(rows.rows());
            double v = 0.0;
            for (std::size_t i = 0; i < rows.rows(); ++i) v += (rows(i, c) - m) * (rows(i, c) - m);
            const double s = std::sqrt(v / static_cast<double>(rows.rows()));
            CHECK(std::abs(m) < 1e-10);
            CHECK(std::abs(s - 1.0) < 1e-10);
        }
    };
    column_check(st.data.smiles_matrix(), ds.smiles_dim);
    column_check(st.data.profile_matrix().first, ds.ip_dim);
    const Matrix cells = st.data.cell_matrix();
    column_check(nn::gather_rows(cells, train_cells), ds.bio_continuous);

    // Binary columns pass through.
    const Matrix raw = ds.cell_matrix();
    for (std::size_t i = 0; i < raw.rows(); ++i)
        for (std::size_t c = ds.bio_continuous; c < ds.bio_dim; ++c) CHECK(cells(i, c) == raw(i, c));

    std::vector<double> train_ic50;
    std::vector<double> held_ic50;
    const std::set<std::size_t> train_set(train_cells.begin(), train_cells.end());
    for (const auto& [key, v] : st.data.sensitivities.entries())
        (train_set.count(key.second) ? train_ic50 : held_ic50).push_back(v);
    const double mean = std::accumulate(train_ic50.begin(), train_ic50.end(), 0.0) / train_ic50.size();
    CHECK(std::abs(mean) < 1e-10);

    // Held-out cells were not part of the fit.
    std::vector<std::size_t> held_cells;
    for (std::size_t c = 0; c < ds.cells.size(); ++c)
        if (!train_set.count(c)) held_cells.push_back(c);
    const Matrix held = nn::gather_rows(cells, held_cells);
    double held_mean = 0.0;
    for (std::size_t i = 0; i < held.rows(); ++i) held_mean += held(i, 0);
    held_mean /= static_cast<double>(held.rows());
    CHECK(std::abs(held_mean) > 1e-6);
    const double held_ic50_mean = std::accumulate(held_ic50.begin(), held_ic50.end(), 0.0) / held_ic50.size();
    CHECK(std::abs(held_ic50_mean) > 1e-6);

    const Matrix back = st.scaler.cells.inverse(st.scaler.cells.transform(raw));
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(std::abs(back.data()[i] - raw.data()[i]) < 1e-12);
    const Matrix sm = ds.smiles_matrix();
    const Matrix sm_back = st.scaler.smiles.inverse(st.data.smiles_matrix());
    for (std::size_t i = 0; i < sm.size(); ++i) CHECK(std::abs(sm_back.data()[i] - sm.data()[i]) < 1e-12);
    for (const auto& [key, v] : ds.sensitivities.entries())
        CHECK(std::abs(st.scaler.inverse_ic50(st.scaler.transform_ic50(v)) - v) < 1e-12);
}

TEST_CASE("zero-variance columns keep scale one and warn") {
    auto ds = data::generate_synthetic(fixture::small_spec()).dataset;
    for (auto& d : ds.drugs) d.smiles_embedding[2] = 7.0;
    std::vector<std::size_t> all(ds.cells.size());
    std::iota(all.begin(), all.end(), 0);
    const auto st = data::standardize(ds, all);
    CHECK(st.scaler.smiles.scale[2] == 1.0);
    CHECK(st.scaler.smiles.mean[2] == 7.0);
    CHECK(st.scaler.warnings.size() == 1);
    CHECK(st.data.drugs[0].smiles_embedding[2] == 0.0);
}

TEST_CASE("synthetic generator structure") {
    const auto spec = data::SyntheticSpec::desk();
    const auto syn = data::generate_synthetic(spec);
    CHECK(syn.dataset.drugs.size() == 120);
    CHECK(syn.dataset.profiled_count() == 60);
    CHECK(syn.dataset.cells.size() == 150);
    CHECK(syn.dataset.smiles_dim == 32);
    CHECK(syn.dataset.ip_dim == 24);
    CHECK(syn.dataset.bio_dim == 20);
    CHECK(syn.dataset == data::generate_synthetic(spec).dataset);

    auto [profiles, rows] = syn.dataset.profile_matrix();
    std::vector<std::size_t> planted;
    for (auto r : rows) planted.push_back(syn.planted_labels[r]);
    CHECK(eval::silhouette(profiles, planted) > 0.3);

    const double expected_pairs = 0.7 * 120 * 150;
    CHECK(std::abs(static_cast<double>(syn.dataset.sensitivities.size()) - expected_pairs) < 0.05 * expected_pairs);
}

TEST_CASE("noise-free profiles coincide within a cluster") {
    auto spec = fixture::small_spec();
    spec.ip_within = 0.0;
    spec.ip_noise = 0.0;
    const auto syn = data::generate_synthetic(spec);
    std::map<std::size_t, std::vector<double>> seen;
    for (std::size_t i = 0; i < syn.dataset.drugs.size(); ++i) {
        const auto& p = syn.dataset.drugs[i].inhibition_profile;
        if (!p) continue;
        auto [it, fresh] = seen.emplace(syn.planted_labels[i], *p);
        if (!fresh) CHECK(it->second == *p);
    }
    CHECK(seen.size() == 3);
}

TEST_CASE("full observance fills the table") {
    auto spec = fixture::small_spec();
    spec.observance = 1.0;
    const auto syn = data::generate_synthetic(spec);
    CHECK(syn.dataset.sensitivities.size() == spec.n_drugs * spec.n_cells);
}

TEST_CASE("synthetic IC50 depends on the cell factors") {
    const auto syn = data::generate_synthetic(data::SyntheticSpec::desk());
    std::vector<std::size_t> perm(syn.cell_factors.rows());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(7);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::size_t changed = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < syn.dataset.drugs.size(); ++i) {
        for (std::size_t c = 0; c < perm.size(); ++c) {
            if (perm[c] == c) continue;
            const double a = syn.ic50_mean(i, syn.cell_factors.row(c));
            const double b = syn.ic50_mean(i, syn.cell_factors.row(perm[c]));
            changed += std::abs(a - b) > syn.spec.ic50_noise;
            ++total;
        }
    }
    CHECK(static_cast<double>(changed) / static_cast<double>(total) > 0.9);
}

TEST_CASE("dataset invariants") {
    auto ds = minimal_dataset();
    ds.validate();
    auto bad = ds;
    bad.drugs[1].guiding_label = 0;
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = ds;
    bad.drugs[0].smiles_embedding[0] = std::nan("");
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = ds;
    bad.cells[1].id = "c1";
    CHECK_THROWS_AS(bad.validate(), DataError);

    data::SensitivityTable t;
    t.add(0, 0, 1.0);
    CHECK_THROWS_AS(t.add(0, 0, 2.0), DataError);
    CHECK_THROWS_AS(t.add(1, 0, INFINITY), DataError);

    auto labeled = ds;
    labeled.drugs[0].guiding_label = 1;
    CHECK(data::fingerprint(labeled) == data::fingerprint(ds));
    labeled.drugs[0].smiles_embedding[1] += 1e-9;
    CHECK(data::fingerprint(labeled) != data::fingerprint(ds));

    auto spec = data::SyntheticSpec::desk();
    spec.n_profiled = spec.n_drugs + 1;
    CHECK_THROWS_AS(spec.validate(), ContractError);
}

}  // TEST_SUITE
