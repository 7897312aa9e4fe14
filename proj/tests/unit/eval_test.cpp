#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vadeers/error.hpp"
#include "vadeers/eval/metrics.hpp"
#include "vadeers/eval/report.hpp"
#include "vadeers/train/pipeline.hpp"

using namespace vadeers;
using nn::Matrix;

namespace {

std::vector<double> random_vector(std::size_t n, Rng& rng) {
    const Matrix m = fixture::random_matrix(1, n, rng);
    return {m.data().begin(), m.data().end()};
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
Matrix random_rotation(std::size_t d, Rng& rng) {
    const Matrix g = fixture::random_matrix(d, d, rng);
    Eigen::MatrixXd e(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) e(i, j) = g(i, j);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(e).householderQ();
    Matrix out(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) out(i, j) = q(i, j);
    return out;
}

Matrix blobs(const std::vector<std::vector<double>>& centers, std::size_t per, double spread, Rng& rng,
             std::vector<std::size_t>& labels) {
    const std::size_t d = centers.front().size();
    Matrix out(centers.size() * per, d);
    const Matrix noise = fixture::random_matrix(out.rows(), d, rng, spread);
    labels.clear();
    for (std::size_t k = 0; k < centers.size(); ++k) {
        for (std::size_t i = 0; i < per; ++i) {
            const std::size_t r = k * per + i;
            for (std::size_t c = 0; c < d; ++c) out(r, c) = centers[k][c] + noise(r, c);
            labels.push_back(k);
        }
    }
    return out;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("rmse and pearson examples") {
    const std::vector<double> y{1.0, -2.0, 3.5, 0.25};
    CHECK(eval::rmse(y, y) == 0.0);
    CHECK(eval::pearson(y, y) == doctest::Approx(1.0).epsilon(1e-15));
    const std::vector<double> z{-1.0, 2.0, -3.0, 2.0};
    std::vector<double> neg(z.size());
    std::transform(z.begin(), z.end(), neg.begin(), [](double v) { return -v; });
    CHECK(eval::pearson(z, neg) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(eval::rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == doctest::Approx(std::sqrt(12.5)));

    CHECK_THROWS_AS(eval::pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), ContractError);
    CHECK_THROWS_AS(eval::pearson(std::vector<double>{1}, std::vector<double>{1}), ContractError);
    CHECK_THROWS_AS(eval::rmse(std::vector<double>{1, 2}, std::vector<double>{1}), ContractError);
    CHECK_THROWS_AS(eval::rmse(std::vector<double>{}, std::vector<double>{}), ContractError);
}

TEST_CASE("rmse and pearson match the extended-precision oracle") {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        const auto a = random_vector(100, rng);
        auto b = random_vector(100, rng);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += 0.5 * a[i];
        CHECK(std::abs(eval::rmse(a, b) - oracle::scalar_rmse(a, b)) < 1e-10);
        CHECK(std::abs(eval::pearson(a, b) - oracle::scalar_pearson(a, b)) < 1e-10);
    }
}

TEST_CASE("silhouette of well-separated clusters") {
    Rng rng(2);
    std::vector<std::size_t> labels;
    const Matrix pts = blobs({{0, 0, 0}, {50, 0, 0}}, 40, 0.5, rng, labels);
    CHECK(eval::silhouette(pts, labels) > 0.9);
}

TEST_CASE("silhouette of random labels is near zero") {
    Rng rng(3);
    const Matrix pts = fixture::random_matrix(500, 4, rng);
    std::vector<std::size_t> labels(500);
    std::uniform_int_distribution<std::size_t> pick(0, 2);
    for (auto& l : labels) l = pick(rng);
    CHECK(std::abs(eval::silhouette(pts, labels)) < 0.1);
}

TEST_CASE("silhouette of four points on a line") {
    const Matrix pts = Matrix::from_rows({{0}, {1}, {10}, {11}});
    const std::vector<std::size_t> labels{0, 0, 1, 1};
    const double outer = 1.0 - 1.0 / 10.5;
    const double inner = 1.0 - 1.0 / 9.5;
    CHECK(std::abs(eval::silhouette(pts, labels) - (outer + inner) / 2.0) < 1e-12);
}

TEST_CASE("silhouette conventions and oracle") {
    const Matrix pts = Matrix::from_rows({{0, 0}, {0, 1}, {5, 5}, {9, 9}});
    const std::vector<std::size_t> with_singleton{0, 0, 1, 2};
    CHECK(std::abs(eval::silhouette(pts, with_singleton) - oracle::naive_silhouette(pts, with_singleton)) < 1e-12);
    CHECK_THROWS_AS(eval::silhouette(pts, std::vector<std::size_t>{1, 1, 1, 1}), ContractError);

    Rng rng(4);
    for (int t = 0; t < 10; ++t) {
        std::vector<std::size_t> labels;
        const Matrix p = blobs({{0, 0}, {2, 1}, {-1, 3}}, 15, 1.0, rng, labels);
        CHECK(std::abs(eval::silhouette(p, labels) - oracle::naive_silhouette(p, labels)) < 1e-12);
    }
}

TEST_CASE("silhouette invariances") {
    Rng rng(5);
    std::vector<std::size_t> labels;
    const Matrix pts = blobs({{0, 0, 0, 0}, {3, 1, 0, 0}, {0, 2, 2, 1}}, 20, 1.0, rng, labels);
    const double base = eval::silhouette(pts, labels);
    for (int t = 0; t < 5; ++t) {
        const Matrix rotated = nn::matmul(pts, random_rotation(4, rng));
        CHECK(std::abs(eval::silhouette(rotated, labels) - base) < 1e-9);
    }
    std::vector<std::size_t> renamed(labels.size());
    const std::size_t names[] = {7, 2, 4};
    std::transform(labels.begin(), labels.end(), renamed.begin(), [&](std::size_t l) { return names[l]; });
    CHECK(std::abs(eval::silhouette(pts, renamed) - base) < 1e-12);
}

TEST_CASE("pca of axis-aligned 2-D data") {
    // A full grid has an exactly diagonal covariance.
    Matrix pts(50, 2);
    for (std::size_t i = 0; i < 50; ++i) {
        pts(i, 0) = 5.0 * static_cast<double>(i % 10) + 3.0;
        pts(i, 1) = 0.5 * static_cast<double>(i / 10) - 1.0;
    }
    const auto p = eval::pca2(pts);
    CHECK(p.ratio[0] + p.ratio[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(std::abs(p.components(0, 0)) - 1.0) < 1e-9);
    CHECK(std::abs(std::abs(p.components(1, 1)) - 1.0) < 1e-9);
    double m0 = 0.0;
    for (std::size_t i = 0; i < 50; ++i) m0 += pts(i, 0);
    m0 /= 50.0;
    for (std::size_t i = 0; i < 50; ++i) CHECK(std::abs(std::abs(p.projection(i, 0)) - std::abs(pts(i, 0) - m0)) < 1e-9);

    CHECK_THROWS_AS(eval::pca2(Matrix(10, 1)), ContractError);
    CHECK_THROWS_AS(eval::pca2(Matrix(2, 3)), ContractError);
}

TEST_CASE("pca ignores zero-variance columns") {
    Rng rng(7);
    const Matrix base = fixture::random_matrix(30, 4, rng);
    Matrix padded(30, 6);
    for (std::size_t i = 0; i < 30; ++i) {
        for (std::size_t c = 0; c < 4; ++c) padded(i, c) = base(i, c);
        padded(i, 4) = 2.5;
        padded(i, 5) = -1.0;
    }
    const auto a = eval::pca2(base);
    const auto b = eval::pca2(padded);
    for (std::size_t i = 0; i < a.projection.size(); ++i)
        CHECK(std::abs(a.projection.data()[i] - b.projection.data()[i]) < 1e-9);
}

TEST_CASE("pca variances match an independent eigen solver") {
    Rng rng(8);
    for (int t = 0; t < 5; ++t) {
        Matrix pts = fixture::random_matrix(60, 7, rng);
        for (std::size_t i = 0; i < 60; ++i) pts(i, 2) += 3.0 * pts(i, 0);
        const Matrix cov = oracle::covariance(pts);
        Eigen::MatrixXd e(7, 7);
        for (std::size_t i = 0; i < 7; ++i)
            for (std::size_t j = 0; j < 7; ++j) e(i, j) = cov(i, j);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(e);
        const auto values = solver.eigenvalues();  // ascending
        const auto p = eval::pca2(pts);
        CHECK(std::abs(p.explained[0] - values(6)) < 1e-8);
        CHECK(std::abs(p.explained[1] - values(5)) < 1e-8);
        CHECK(std::abs(p.ratio[0] - values(6) / values.sum()) < 1e-8);

        const auto ours = eval::symmetric_eigen(cov);
        for (std::size_t k = 0; k < 7; ++k) CHECK(std::abs(ours.values[k] - values(6 - k)) < 1e-8);
        for (std::size_t k = 0; k < 2; ++k) {
            double dot = 0.0;
            for (std::size_t c = 0; c < 7; ++c) dot += p.components(k, c) * solver.eigenvectors()(c, 6 - k);
            CHECK(std::abs(std::abs(dot) - 1.0) < 1e-8);
        }
    }
}

TEST_CASE("pca is invariant to column order") {
    Rng rng(9);
    const Matrix pts = fixture::random_matrix(40, 5, rng, 2.0);
    const std::vector<std::size_t> order{3, 0, 4, 1, 2};
    Matrix permuted(40, 5);
    for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t c = 0; c < 5; ++c) permuted(i, c) = pts(i, order[c]);
    const auto a = eval::pca2(pts);
    const auto b = eval::pca2(permuted);
    for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(a.projection(i, k) - b.projection(i, k)) < 1e-9);
}

TEST_CASE("cluster stats") {
    Rng rng(10);
    const Matrix rows = fixture::random_matrix(40, 5, rng, 3.0);
    std::vector<std::size_t> labels(40);
    for (std::size_t i = 0; i < 40; ++i) labels[i] = (i * 7) % 4;
    const auto stats = eval::cluster_stats(rows, labels, 4);
    const auto ref = oracle::two_pass_cluster_stats(rows, labels);
    REQUIRE(stats.size() == 4);
    for (const auto& [label, s] : stats) {
        const auto& r = ref.at(label);
        CHECK(s.count == r.count);
        REQUIRE(s.std.has_value());
        for (std::size_t c = 0; c < 5; ++c) {
            CHECK(std::abs(s.centroid[c] - r.mean[c]) < 1e-12);
            CHECK(std::abs((*s.std)[c] - r.std[c]) < 1e-12);
        }
    }

    const Matrix single = Matrix::from_rows({{1, 2}, {3, 4}, {3, 4}});
    const auto s2 = eval::cluster_stats(single, std::vector<std::size_t>{0, 2, 2}, 3);
    CHECK(s2.size() == 2);
    CHECK(s2.at(0).centroid == std::vector<double>{1, 2});
    CHECK_FALSE(s2.at(0).std.has_value());
    CHECK(*s2.at(2).std == std::vector<double>{0, 0});
    CHECK_FALSE(s2.count(1));
    CHECK_THROWS_AS(eval::cluster_stats(single, std::vector<std::size_t>{0, 3, 1}, 3), IndexError);
}

TEST_CASE("generation fidelity fixed point and shift") {
    Rng rng(11);
    std::vector<std::size_t> labels;
    const Matrix truth = blobs({{0, 0, 0, 0, 0}, {4, -1, 2, 0, 1}, {-3, 2, 0, 5, 1}}, 25, 1.0, rng, labels);
    const auto same = eval::generation_fidelity(truth, labels, truth, labels);
    CHECK(same.centroid_rmse == 0.0);
    CHECK(same.centroid_pearson == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(same.std_rmse == 0.0);
    CHECK(same.std_pearson == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(same.missing.empty());
    for (const auto& p : same.pairs) CHECK(p.label == p.component);

    Matrix shifted = truth;
    for (auto& v : shifted.data()) v += 0.75;
    const auto off = eval::generation_fidelity(truth, labels, shifted, labels);
    CHECK(off.centroid_rmse == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(off.centroid_pearson == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(off.std_rmse < 1e-12);
}

TEST_CASE("generation fidelity matching and missing components") {
    Rng rng(12);
    std::vector<std::size_t> labels;
    const Matrix truth = blobs({{0, 0, 0}, {10, 0, 1}}, 20, 0.5, rng, labels);
    std::vector<std::size_t> gen_labels;
    const Matrix gen = blobs({{10, 0, 1}, {0, 0, 0}, {0, 30, 0}}, 20, 0.5, rng, gen_labels);

    const auto nearest = eval::generation_fidelity(truth, labels, gen, gen_labels);
    REQUIRE(nearest.pairs.size() == 3);
    CHECK(nearest.pairs[0].label == std::optional<std::size_t>(1));
    CHECK(nearest.pairs[1].label == std::optional<std::size_t>(0));

    const std::vector<std::optional<std::size_t>> matching{1, 0, std::nullopt};
    const auto explicit_match = eval::generation_fidelity(truth, labels, gen, gen_labels, matching);
    CHECK(explicit_match.missing == std::vector<std::size_t>{2});
    CHECK(std::isfinite(explicit_match.centroid_rmse));
    CHECK(explicit_match.centroid_rmse < 0.5);

    CHECK(eval::nearest_centroid(Matrix::from_rows({{0.1, 0}, {9, 9}}), Matrix::from_rows({{0, 0}, {10, 10}})) ==
          std::vector<std::size_t>{0, 1});
}

TEST_CASE("evaluate an untrained model") {
    const auto syn = data::generate_synthetic(data::SyntheticSpec::desk());
    const auto prep = train::prepare(syn.dataset, train::SplitSpec{25, 25, 0}, 3, 0);
    for (auto variant : fixture::kVariants) {
        CAPTURE(model::to_string(variant));
        auto cfg = model::ModelConfig::desk();
        cfg.prior = variant;
        const auto m = model::Vadeers::create(cfg, 1);
        const auto ev = eval::evaluate(m, prep.training, prep.scaler, {50, 2});
        const auto& r = ev.report;
        CHECK(r.ic50_rmse > 0.0);
        CHECK(r.ip_rmse > 0.0);
        CHECK(r.n_test_pairs == prep.training.split.test_pairs.size());
        CHECK(r.variant == model::to_string(variant));
        REQUIRE(r.silhouette_latent.has_value());
        CHECK(std::abs(*r.silhouette_latent) <= 1.0);
        CHECK(ev.latent_means.rows() == 60);
        CHECK(ev.latent_labels.size() == 60);

        if (cfg.has_gmm()) {
            CHECK(r.silhouette_generated.has_value());
            CHECK(r.centroid_pearson.has_value());
            CHECK(r.nearest_centroid_accuracy.has_value());
            CHECK(ev.generated_ip.rows() == 150);
            CHECK(ev.generated_ip.cols() == 24);
            CHECK(r.per_cluster.size() == 3);
        } else {
            CHECK_FALSE(r.silhouette_generated.has_value());
            CHECK_FALSE(r.centroid_rmse.has_value());
            CHECK(r.per_cluster.empty());
            CHECK(ev.generated_ip.rows() == 0);
        }

        const nlohmann::json j = r;
        CHECK(j.get<eval::MetricReport>() == r);
        CHECK(nlohmann::json::parse(j.dump()).get<eval::MetricReport>() == r);

        const auto again = eval::evaluate(m, prep.training, prep.scaler, {50, 2});
        CHECK(again.report == r);
    }
}

TEST_CASE("untrained models are null predictors on average") {
    // One random network is a fixed function of the drug features and can line
    // up with drug-level IC50 offsets by chance; the average over initialisations
    // is what carries no signal.
    const auto syn = data::generate_synthetic(data::SyntheticSpec::desk());
    const auto prep = train::prepare(syn.dataset, train::SplitSpec{25, 25, 0}, 3, 0);
    auto cfg = model::ModelConfig::desk();
    cfg.prior = model::PriorVariant::vanilla;
    double sum = 0.0;
    const int inits = 100;
    for (int s = 0; s < inits; ++s) {
        const auto m = model::Vadeers::create(cfg, static_cast<std::uint64_t>(s));
        const double rho = eval::evaluate(m, prep.training, prep.scaler, {1, 0}).report.ic50_pearson;
        CHECK(std::abs(rho) <= 1.0);
        sum += rho;
    }
    CHECK(std::abs(sum / inits) < 0.15);
}

TEST_CASE("latent silhouette does not depend on the generation seed") {
    const auto syn = data::generate_synthetic(fixture::small_spec(1));
    const auto prep = train::prepare(syn.dataset, train::SplitSpec{5, 5, 1}, 3, 1);
    const auto m = model::Vadeers::create(fixture::small_model(model::PriorVariant::gmm_constrained), 0);
    const auto a = eval::evaluate(m, prep.training, prep.scaler, {20, 1});
    const auto b = eval::evaluate(m, prep.training, prep.scaler, {20, 2});
    CHECK(a.report.silhouette_latent == b.report.silhouette_latent);
    CHECK(a.report.ic50_rmse == b.report.ic50_rmse);
    CHECK(a.latent_means == b.latent_means);
}

TEST_CASE("evaluate needs test pairs") {
    const auto syn = data::generate_synthetic(fixture::small_spec());
    auto prep = train::prepare(syn.dataset, train::SplitSpec{5, 5, 0}, 3, 0);
    prep.training.split.test_pairs.clear();
    const auto m = model::Vadeers::create(fixture::small_model(model::PriorVariant::vanilla), 0);
    CHECK_THROWS_AS(eval::evaluate(m, prep.training, prep.scaler), DataError);
}

}  // TEST_SUITE
