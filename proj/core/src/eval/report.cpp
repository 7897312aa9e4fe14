#include "vadeers/eval/report.hpp"

#include <cmath>
#include <limits>
#include <algorithm>
#include <set>

#include "vadeers/error.hpp"

namespace vadeers::eval {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || same(*a, *b);
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }
nlohmann::json num(const std::optional<double>& v) { return v ? num(*v) : nlohmann::json(); }

double read_num(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? kNaN : v.get<double>();
}

std::optional<double> read_opt(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

std::optional<double> finite_or_none(double v) {
    if (std::isfinite(v)) return v;
    return std::nullopt;
}

}  // namespace

bool ClusterReport::operator==(const ClusterReport& o) const {
    return component == o.component && label == o.label && same(centroid_rmse, o.centroid_rmse) &&
           same(centroid_pearson, o.centroid_pearson) && same(std_rmse, o.std_rmse) &&
           same(std_pearson, o.std_pearson) && same(generated_std_mean, o.generated_std_mean);
}

bool MetricReport::operator==(const MetricReport& o) const {
    return variant == o.variant && seed == o.seed && n_test_pairs == o.n_test_pairs && same(ic50_rmse, o.ic50_rmse) &&
           same(ic50_pearson, o.ic50_pearson) && same(ip_rmse, o.ip_rmse) &&
           same(silhouette_latent, o.silhouette_latent) && same(silhouette_generated, o.silhouette_generated) &&
           same(centroid_rmse, o.centroid_rmse) && same(centroid_pearson, o.centroid_pearson) &&
           same(std_rmse, o.std_rmse) && same(std_pearson, o.std_pearson) &&
           same(generated_std_mean, o.generated_std_mean) &&
           same(nearest_centroid_accuracy, o.nearest_centroid_accuracy) && per_cluster == o.per_cluster;
}

void to_json(nlohmann::json& j, const MetricReport& r) {
    nlohmann::json clusters = nlohmann::json::array();
    for (const auto& c : r.per_cluster) {
        clusters.push_back({{"component", c.component},
                            {"label", c.label ? nlohmann::json(*c.label) : nlohmann::json()},
                            {"centroid_rmse", num(c.centroid_rmse)},
                            {"centroid_pearson", num(c.centroid_pearson)},
                            {"std_rmse", num(c.std_rmse)},
                            {"std_pearson", num(c.std_pearson)},
                            {"generated_std_mean", num(c.generated_std_mean)}});
    }
    j = nlohmann::json{{"variant", r.variant},
                       {"seed", r.seed},
                       {"n_test_pairs", r.n_test_pairs},
                       {"ic50_rmse", num(r.ic50_rmse)},
                       {"ic50_pearson", num(r.ic50_pearson)},
                       {"ip_rmse", num(r.ip_rmse)},
                       {"silhouette_latent", num(r.silhouette_latent)},
                       {"silhouette_generated", num(r.silhouette_generated)},
                       {"centroid_rmse", num(r.centroid_rmse)},
                       {"centroid_pearson", num(r.centroid_pearson)},
                       {"std_rmse", num(r.std_rmse)},
                       {"std_pearson", num(r.std_pearson)},
                       {"generated_std_mean", num(r.generated_std_mean)},
                       {"nearest_centroid_accuracy", num(r.nearest_centroid_accuracy)},
                       {"per_cluster", clusters}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
    try {
        r.variant = j.at("variant").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.n_test_pairs = j.at("n_test_pairs").get<std::size_t>();
        r.ic50_rmse = read_num(j, "ic50_rmse");
        r.ic50_pearson = read_num(j, "ic50_pearson");
        r.ip_rmse = read_num(j, "ip_rmse");
        r.silhouette_latent = read_opt(j, "silhouette_latent");
        r.silhouette_generated = read_opt(j, "silhouette_generated");
        r.centroid_rmse = read_opt(j, "centroid_rmse");
        r.centroid_pearson = read_opt(j, "centroid_pearson");
        r.std_rmse = read_opt(j, "std_rmse");
        r.std_pearson = read_opt(j, "std_pearson");
        r.generated_std_mean = read_opt(j, "generated_std_mean");
        r.nearest_centroid_accuracy = read_opt(j, "nearest_centroid_accuracy");
        r.per_cluster.clear();
        for (const auto& c : j.at("per_cluster")) {
            ClusterReport cr;
            cr.component = c.at("component").get<std::size_t>();
            if (!c.at("label").is_null()) cr.label = c.at("label").get<std::size_t>();
            cr.centroid_rmse = read_num(c, "centroid_rmse");
            cr.centroid_pearson = read_num(c, "centroid_pearson");
            cr.std_rmse = read_num(c, "std_rmse");
            cr.std_pearson = read_num(c, "std_pearson");
            cr.generated_std_mean = read_num(c, "generated_std_mean");
            r.per_cluster.push_back(cr);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("metric report: ") + e.what());
    }
}

nn::Matrix generate_ip(const model::Vadeers& model, std::size_t component, std::size_t n, Rng& rng) {
    const gmm::GmmParams prior = model.prior();
    const nn::Matrix z = gmm::sample_component(component, prior, n, rng);
    return model.decode_batch_ip(z);
}

Evaluation evaluate(const model::Vadeers& model, const train::TrainingData& data, const data::Scaler& scaler,
                    const EvaluateOptions& options) {
    const auto& test = data.split.test_pairs;
    if (test.empty()) throw DataError("evaluate: the split has no test pairs");
    const model::ModelConfig& cfg = model.config();

    Evaluation ev;
    MetricReport& r = ev.report;
    r.variant = std::string(model::to_string(cfg.prior));
    r.seed = options.seed;
    r.n_test_pairs = test.size();

    const nn::Matrix mu = model.encode_means(data.drugs.smiles);
    const nn::Matrix cl = model.cell_latents(data.cells);
    {
        std::vector<std::size_t> di;
        std::vector<std::size_t> ci;
        std::vector<double> truth;
        for (const auto& p : test) {
            di.push_back(p.drug);
            ci.push_back(p.cell);
            truth.push_back(scaler.inverse_ic50(p.ic50));
        }
        const nn::Matrix pred = model.predict(nn::gather_rows(mu, di), nn::gather_rows(cl, ci));
        std::vector<double> yhat(pred.rows());
        for (std::size_t i = 0; i < yhat.size(); ++i) yhat[i] = scaler.inverse_ic50(pred(i, 0));
        r.ic50_rmse = rmse(truth, yhat);
        try {
            r.ic50_pearson = pearson(truth, yhat);
        } catch (const ContractError&) {
            r.ic50_pearson = kNaN;
        }
    }

    // Profile reconstruction from the encoder means of profiled drugs.
    std::vector<std::size_t> labeled;
    std::vector<std::size_t> labels;
    if (!data.profiled_drugs.empty()) {
        const nn::Matrix decoded = model.decode_batch_ip(nn::gather_rows(mu, data.profiled_drugs));
        const nn::Matrix truth = scaler.ip.inverse(nn::gather_rows(data.drugs.ip, data.profiled_drugs));
        r.ip_rmse = rmse(truth.data(), scaler.ip.inverse(decoded).data());
    } else {
        r.ip_rmse = kNaN;
    }
    for (std::size_t i = 0; i < data.drugs.labels.size(); ++i) {
        if (data.drugs.labels[i]) {
            labeled.push_back(i);
            labels.push_back(*data.drugs.labels[i]);
        }
    }
    ev.latent_means = nn::gather_rows(mu, labeled);
    ev.latent_labels = labels;
    if (std::set<std::size_t>(labels.begin(), labels.end()).size() >= 2) {
        r.silhouette_latent = silhouette(ev.latent_means, labels);
    }

    if (!cfg.has_gmm() || labeled.empty()) return ev;

    Rng rng(options.seed);
    const std::size_t k_count = cfg.components;
    nn::Matrix generated(k_count * options.n_per_component, cfg.ip_dim);
    for (std::size_t k = 0; k < k_count; ++k) {
        const nn::Matrix g = generate_ip(model, k, options.n_per_component, rng);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            std::copy(g.row(i).begin(), g.row(i).end(), generated.row(k * options.n_per_component + i).begin());
            ev.generated_components.push_back(k);
        }
    }
    if (options.n_per_component == 0) return ev;
    if (k_count >= 2) r.silhouette_generated = silhouette(generated, ev.generated_components);
    ev.generated_ip = scaler.ip.inverse(generated);

    // Component k is tied to guiding label k; extra components are matched by
    // nearest centroid.
    std::vector<std::optional<std::size_t>> matching(std::min(cfg.guiding_labels, k_count));
    for (std::size_t k = 0; k < matching.size(); ++k) matching[k] = k;
    const nn::Matrix true_std = nn::gather_rows(data.drugs.ip, labeled);
    const Fidelity f = generation_fidelity(scaler.ip.inverse(true_std), labels, ev.generated_ip,
                                           ev.generated_components, matching);
    r.centroid_rmse = finite_or_none(f.centroid_rmse);
    r.centroid_pearson = finite_or_none(f.centroid_pearson);
    r.std_rmse = finite_or_none(f.std_rmse);
    r.std_pearson = finite_or_none(f.std_pearson);
    r.generated_std_mean = finite_or_none(f.generated_std_mean);
    for (const auto& p : f.pairs) {
        r.per_cluster.push_back({p.component, p.label, p.centroid_rmse, p.centroid_pearson, p.std_rmse, p.std_pearson,
                                 p.generated_std_mean});
    }

    // Nearest true centroid (standardized space) against the matched label.
    const auto stats = cluster_stats(true_std, labels, *std::max_element(labels.begin(), labels.end()) + 1);
    nn::Matrix centroids(stats.size(), cfg.ip_dim);
    std::vector<std::size_t> centroid_label;
    for (const auto& [label, s] : stats) {
        std::copy(s.centroid.begin(), s.centroid.end(), centroids.row(centroid_label.size()).begin());
        centroid_label.push_back(label);
    }
    std::vector<std::optional<std::size_t>> matched(k_count);
    for (const auto& p : f.pairs) matched[p.component] = p.label;
    const auto nearest = nearest_centroid(generated, centroids);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < nearest.size(); ++i) {
        const auto& want = matched[ev.generated_components[i]];
        correct += want && centroid_label[nearest[i]] == *want;
    }
    r.nearest_centroid_accuracy = static_cast<double>(correct) / static_cast<double>(nearest.size());
    return ev;
}

}  // namespace vadeers::eval
